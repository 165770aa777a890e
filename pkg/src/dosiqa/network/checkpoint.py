"""Checkpoint files.

A checkpoint is two files: ``<name>.pt``, a torch archive holding the
state dict keyed by dotted module paths, and ``<name>.json``, a sidecar with
the SLM config, quality scale, backbone identity and a format version.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch

from ..errors import CheckpointError, ConfigError
from ..rating_stats import QualityScale
from .backbone import TinyHybridBackbone, load_external_backbone
from .model import QualityNet, SlmConfig

FORMAT_VERSION = 1


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def describe(model: QualityNet, backbone_factory: str = None) -> dict:
    bb = model.backbone
    return {
        "format_version": FORMAT_VERSION,
        "slm": model.config.to_dict(),
        "scale": model.scale.to_dict(),
        "stages": list(model.stages),
        "backbone": {
            "identity": bb.identity,
            "factory": backbone_factory,
            "stage_channels": list(bb.stage_channels),
            "stage_spatial": [list(s) for s in bb.stage_spatial],
            "input_size": bb.input_size,
        },
    }


def save_checkpoint(model: QualityNet, path, backbone_factory: str = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = {k: v.detach().cpu().clone() for k, v in model.state_dict().items()}
    torch.save(state, path)
    meta = describe(model, backbone_factory)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_sidecar(path) -> dict:
    side = sidecar_path(path)
    if not side.exists():
        raise CheckpointError(f"missing checkpoint sidecar {side}")
    meta = json.loads(side.read_text())
    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format {meta.get('format_version')!r} (expected {FORMAT_VERSION})")
    return meta


def build_from_meta(meta: dict) -> QualityNet:
    bb_meta = meta["backbone"]
    if bb_meta["identity"] == "reference_tiny":
        backbone = TinyHybridBackbone(tuple(bb_meta["stage_channels"]), bb_meta["input_size"])
    else:
        backbone = load_external_backbone(bb_meta.get("factory"))
    if list(backbone.stage_channels) != list(bb_meta["stage_channels"]):
        raise CheckpointError("backbone stage channels differ from the checkpoint")
    return QualityNet(backbone, SlmConfig(**meta["slm"]), QualityScale.from_dict(meta["scale"]),
                      stages=meta["stages"])


def load_checkpoint(path, expect_config: SlmConfig = None, expect_scale: QualityScale = None,
                    map_location="cpu") -> QualityNet:
    """Rebuild a model from disk; any config or shape mismatch is a hard error."""
    meta = read_sidecar(path)
    if expect_config is not None and SlmConfig(**meta["slm"]) != expect_config:
        raise ConfigError(f"checkpoint SLM config {meta['slm']} != requested {expect_config.to_dict()}")
    if expect_scale is not None and QualityScale.from_dict(meta["scale"]) != expect_scale:
        raise ConfigError(f"checkpoint scale {meta['scale']} != requested {expect_scale.to_dict()}")
    model = build_from_meta(meta)
    state = torch.load(path, map_location=map_location, weights_only=True)
    own = model.state_dict()
    missing = sorted(set(own) - set(state))
    extra = sorted(set(state) - set(own))
    if missing or extra:
        raise CheckpointError(f"checkpoint keys differ: missing={missing[:5]} unexpected={extra[:5]}")
    for k, v in state.items():
        if tuple(v.shape) != tuple(own[k].shape):
            raise CheckpointError(f"{k}: stored shape {tuple(v.shape)} != model shape {tuple(own[k].shape)}")
    model.load_state_dict(state, strict=True)
    return model
