"""Quality prediction network: feature taps, SLM block and the dual-pathway head."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np
import torch
import torch.nn as nn

from ..errors import ConfigError, ShapeError
from ..losses import safe_sqrt
from ..rating_stats import OpinionDistribution, QualityScale
from .backbone import Backbone, global_pool
from .slm import LongTermMemory, ShortTermMemory


@dataclass(frozen=True)
class SlmConfig:
    num_levels: int = 5
    hidden_channels: int = 256
    lambda_mix: float = 0.999
    enable_direct_pathway: bool = True
    enable_indirect_pathway: bool = True
    # hidden width of the mask MLP; 0 means "same as hidden_channels"
    mask_hidden: int = 0

    def __post_init__(self):
        if self.num_levels < 2:
            raise ConfigError("num_levels must be at least 2")
        if self.hidden_channels < 1:
            raise ConfigError("hidden_channels must be positive")
        if not 0.0 <= self.lambda_mix <= 1.0:
            raise ConfigError(f"lambda_mix must lie in [0, 1], got {self.lambda_mix}")
        if self.lambda_mix == 1.0 and not self.memory_enabled:
            raise ConfigError(
                "lambda_mix=1 uses only the memory distribution, but both pathways are disabled")

    @property
    def memory_enabled(self) -> bool:
        return self.enable_direct_pathway or self.enable_indirect_pathway

    def to_dict(self):
        return asdict(self)


@dataclass
class FeatureBundle:
    f1: torch.Tensor
    f2: torch.Tensor
    f3: torch.Tensor
    fused: torch.Tensor


class QualityPrediction(NamedTuple):
    """Batched predictions; distributions are ``(B, C)``, scalars ``(B,)``."""

    d_mem: torch.Tensor
    d_alg: torch.Tensor
    d_p: torch.Tensor
    mos_p: torch.Tensor
    sos_p: torch.Tensor

    def distribution(self, i: int, scale: QualityScale, which: str = "d_p") -> OpinionDistribution:
        p = getattr(self, which)[i].detach().to(torch.float64).cpu().numpy()
        return OpinionDistribution(p / p.sum(), scale)


def readout(d: torch.Tensor, scores: torch.Tensor):
    """MOS and SOS of batched distributions ``d`` over level ``scores``."""
    mos = d @ scores
    sos = safe_sqrt((d * (scores - mos.unsqueeze(1)) ** 2).sum(dim=1))
    return mos, sos


def extract_features(image, backbone: Backbone, stage_mask=None) -> FeatureBundle:
    """Run the backbone and pool its three stage taps into the fused vector.

    ``image`` is either one ``H x W x 3`` image in [0, 1] or a ``(B, 3, H, W)``
    batch.  ``stage_mask`` (three 0/1 weights) zeroes excluded stages' slices.
    """
    x = torch.as_tensor(image)
    single = x.dim() == 3
    if single:
        if x.shape[-1] != 3:
            raise ShapeError(f"expected an H x W x 3 image, got {tuple(x.shape)}")
        x = x.permute(2, 0, 1).unsqueeze(0)
    p = next(backbone.parameters(), None)
    if p is not None:
        x = x.to(p.dtype)
    f1, f2, f3 = backbone(x)
    if stage_mask is not None:
        stage_mask = torch.as_tensor(stage_mask, dtype=f1.dtype)
        pooled = [global_pool([f]) * stage_mask[i] for i, f in enumerate((f1, f2, f3))]
        fused = torch.cat(pooled, dim=1)
    else:
        fused = global_pool((f1, f2, f3))
    if single:
        return FeatureBundle(f1[0], f2[0], f3[0], fused[0])
    return FeatureBundle(f1, f2, f3, fused)


class QualityHead(nn.Module):
    """Everything after feature fusion: SLM block, two-layer head, lambda mix, readout."""

    def __init__(self, in_dim: int, config: SlmConfig, scale: QualityScale):
        super().__init__()
        if scale.num_levels != config.num_levels:
            raise ConfigError(
                f"scale has {scale.num_levels} levels but the network predicts {config.num_levels}")
        self.config = config
        self.scale = scale
        self.in_dim = in_dim
        c, hidden = config.num_levels, config.hidden_channels
        self.short_term = ShortTermMemory(in_dim, hidden, c, config.mask_hidden or hidden)
        self.long_term = LongTermMemory(hidden, c)
        self.fc2 = nn.Linear(in_dim, in_dim)
        self.fc1 = nn.Linear(in_dim, c)
        self.register_buffer("scores", torch.tensor(scale.scores, dtype=torch.float32))

    def forward(self, fused: torch.Tensor) -> QualityPrediction:
        if fused.shape[-1] != self.in_dim:
            raise ShapeError(f"fused vector has length {fused.shape[-1]}, expected {self.in_dim}")
        cfg = self.config
        d_alg = torch.softmax(self.fc1(self.fc2(fused)), dim=1)
        scores = self.scores.to(d_alg.dtype)
        if not cfg.memory_enabled:
            mos, sos = readout(d_alg, scores)
            return QualityPrediction(d_alg, d_alg, d_alg, mos, sos)
        af, s = self.short_term(fused)
        if cfg.enable_indirect_pathway:
            l = self.long_term(af, s)
            m = af + l if cfg.enable_direct_pathway else l
        else:
            m = af
        d_mem = torch.softmax(m.mean(dim=1), dim=1)
        lam = cfg.lambda_mix
        d_p = lam * d_mem + (1.0 - lam) * d_alg
        mos, sos = readout(d_p, scores)
        return QualityPrediction(d_mem, d_alg, d_p, mos, sos)


class QualityNet(nn.Module):
    def __init__(self, backbone: Backbone, config: SlmConfig, scale: QualityScale,
                 stages: Sequence[int] = (1, 2, 3)):
        super().__init__()
        stages = tuple(sorted(set(int(s) for s in stages)))
        if not stages or any(s not in (1, 2, 3) for s in stages):
            raise ConfigError(f"stages must be a non-empty subset of (1, 2, 3), got {stages}")
        self.backbone = backbone
        self.stages = stages
        self.register_buffer(
            "stage_mask", torch.tensor([1.0 if i in stages else 0.0 for i in (1, 2, 3)]))
        self.head = QualityHead(sum(backbone.stage_channels), config, scale)

    @property
    def config(self) -> SlmConfig:
        return self.head.config

    @property
    def scale(self) -> QualityScale:
        return self.head.scale

    def features(self, images) -> FeatureBundle:
        return extract_features(images, self.backbone, self.stage_mask)

    def forward(self, images: torch.Tensor) -> QualityPrediction:
        return self.head(self.features(images).fused)


def predict(fused, head: QualityHead) -> QualityPrediction:
    """Head forward pass on fused vectors, accepting a single ``(D,)`` vector."""
    x = torch.as_tensor(fused)
    if x.dim() == 1:
        x = x.unsqueeze(0)
    return head(x.to(head.fc1.weight.dtype))


def to_numpy_distributions(d: torch.Tensor) -> np.ndarray:
    d = d.detach().to(torch.float64).cpu().numpy()
    return d / d.sum(axis=1, keepdims=True)
