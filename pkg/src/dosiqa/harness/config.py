"""Run configuration: one JSON file fully determines a run."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Tuple

from ..data.preprocess import CROP, TINY_CROP, default_resize
from ..errors import ConfigError
from ..losses import DEFAULT_A, LossWeights
from ..network import SlmConfig, TinyHybridBackbone, load_external_backbone
from ..network.model import QualityNet
from ..rating_stats import QualityScale

BACKBONES = ("reference_tiny", "external")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 1e-5

    def __post_init__(self):
        if self.kind != "adam":
            raise ConfigError(f"only the adam optimizer is supported, got {self.kind!r}")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")


@dataclass(frozen=True)
class SplitConfig:
    seed: int = 0
    num_repeats: int = 10
    train_fraction: float = 0.8
    # which split to train on; None trains on every entry (no held-out set)
    index: Optional[int] = 0


@dataclass(frozen=True)
class RunConfig:
    manifest_path: str
    epochs: int
    backbone: str = "reference_tiny"
    backbone_factory: Optional[str] = None
    backbone_channels: Tuple[int, int, int] = (16, 32, 64)
    resize: Optional[int] = None
    crop: Optional[int] = None
    slm: SlmConfig = field(default_factory=SlmConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    batch_size: int = 8
    split: SplitConfig = field(default_factory=SplitConfig)
    stages: Tuple[int, ...] = (1, 2, 3)
    a: float = DEFAULT_A
    seed: int = 0

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ConfigError(f"backbone must be one of {BACKBONES}, got {self.backbone!r}")
        if self.backbone == "external" and not self.backbone_factory:
            raise ConfigError("an external backbone needs backbone_factory='module:callable'")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if not self.a > 0:
            raise ConfigError("a must be positive")
        object.__setattr__(self, "stages", tuple(sorted(set(int(s) for s in self.stages))))
        object.__setattr__(self, "backbone_channels", tuple(self.backbone_channels))
        if not self.stages or any(s not in (1, 2, 3) for s in self.stages):
            raise ConfigError(f"stages must be a non-empty subset of 1, 2, 3: {self.stages}")

    @property
    def resize_size(self) -> int:
        return self.resize or default_resize(self.crop_size)

    @property
    def crop_size(self) -> int:
        if self.crop:
            return self.crop
        return TINY_CROP if self.backbone == "reference_tiny" else CROP

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = self.weights.to_dict()
        d["stages"] = list(self.stages)
        d["backbone_channels"] = list(self.backbone_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "manifest_path" not in d or "epochs" not in d:
            raise ConfigError("config needs 'manifest_path' and 'epochs'")
        try:
            if isinstance(d.get("slm"), dict):
                d["slm"] = SlmConfig(**d["slm"])
            if isinstance(d.get("weights"), dict):
                d["weights"] = LossWeights.from_dict(d["weights"])
            if isinstance(d.get("optimizer"), dict):
                d["optimizer"] = OptimizerConfig(**d["optimizer"])
            if isinstance(d.get("split"), dict):
                d["split"] = SplitConfig(**d["split"])
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**d)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)


def build_model(config: RunConfig, scale: QualityScale) -> QualityNet:
    if config.backbone == "reference_tiny":
        backbone = TinyHybridBackbone(config.backbone_channels, config.crop_size)
    else:
        backbone = load_external_backbone(config.backbone_factory)
    if backbone.input_size != config.crop_size:
        raise ConfigError(
            f"backbone expects {backbone.input_size}px inputs but crops are {config.crop_size}px")
    return QualityNet(backbone, config.slm, scale, stages=config.stages)
