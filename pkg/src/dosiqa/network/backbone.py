"""Three-stage feature extractors.

Any backbone plugged into :class:`~dosiqa.network.model.QualityNet` must
subclass :class:`Backbone` and return one feature map per stage.  The shipped
:class:`TinyHybridBackbone` follows the same contract at desk scale (64x64
input, channels 16/32/64); a pretrained convolutional transformer can be
adapted through :class:`StagedBackbone`.
"""

from __future__ import annotations

import importlib
from typing import Optional, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError, ShapeError

# Stage taps of the ImageNet convolutional transformer used for real training.
DEFAULT_STAGE_CHANNELS = (64, 192, 384)
DEFAULT_STAGE_SPATIAL = ((96, 96), (48, 48), (24, 24))
DEFAULT_INPUT_SIZE = 384


class Backbone(nn.Module):
    """Base class fixing the three-stage tap contract.

    Subclasses set ``stage_channels``, ``stage_spatial`` and ``input_size``
    and implement :meth:`stages`.  ``pixel_mean``/``pixel_std`` may be set when
    the weights expect normalized inputs; images arrive scaled to [0, 1].
    """

    identity = "abstract"
    stage_channels: tuple = ()
    stage_spatial: tuple = ()
    input_size: int = 0
    pixel_mean: Optional[Sequence[float]] = None
    pixel_std: Optional[Sequence[float]] = None

    def validate_contract(self):
        c, hw = tuple(self.stage_channels), tuple(self.stage_spatial)
        if len(c) != 3 or len(hw) != 3:
            raise ConfigError("a backbone must declare exactly three stages")
        if not (0 < c[0] < c[1] < c[2]):
            raise ConfigError(f"stage channels must strictly increase, got {c}")
        heights = [h for h, _ in hw]
        if not heights[0] > heights[1] > heights[2]:
            raise ConfigError(f"stage resolution must strictly decrease, got {hw}")

    def stages(self, x: torch.Tensor):
        raise NotImplementedError

    def forward(self, x: torch.Tensor):
        if x.dim() != 4 or x.shape[1] != 3 or tuple(x.shape[-2:]) != (self.input_size,) * 2:
            raise ShapeError(
                f"expected input of shape (B, 3, {self.input_size}, {self.input_size}), "
                f"got {tuple(x.shape)}")
        if self.pixel_mean is not None:
            mean = x.new_tensor(self.pixel_mean).view(1, 3, 1, 1)
            std = x.new_tensor(self.pixel_std).view(1, 3, 1, 1)
            x = (x - mean) / std
        feats = tuple(self.stages(x))
        for i, f in enumerate(feats):
            want = (self.stage_channels[i], *self.stage_spatial[i])
            if tuple(f.shape[1:]) != want:
                raise ShapeError(f"stage {i + 1} produced {tuple(f.shape[1:])}, declared {want}")
        return feats


class AttentionBlock(nn.Module):
    """Pre-norm single-head self-attention plus MLP over spatial tokens."""

    def __init__(self, dim: int, mlp_ratio: int = 2):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim), nn.GELU(), nn.Linear(mlp_ratio * dim, dim))
        self.scale = dim ** -0.5

    def forward(self, x):
        b, c, h, w = x.shape
        t = x.flatten(2).transpose(1, 2)  # B, HW, C
        q, k, v = self.qkv(self.norm1(t)).chunk(3, dim=-1)
        attn = torch.softmax(q @ k.transpose(1, 2) * self.scale, dim=-1)
        t = t + self.proj(attn @ v)
        t = t + self.mlp(self.norm2(t))
        return t.transpose(1, 2).reshape(b, c, h, w)


class HybridStage(nn.Module):
    """Strided convolutional token embedding (with token LayerNorm) then one attention block."""

    def __init__(self, in_ch: int, out_ch: int, stride: int):
        super().__init__()
        k = stride + 1 if stride > 1 else 3
        self.embed = nn.Conv2d(in_ch, out_ch, kernel_size=k, stride=stride, padding=k // 2)
        self.embed_norm = nn.LayerNorm(out_ch)
        self.block = AttentionBlock(out_ch)

    def forward(self, x):
        x = self.embed(x)
        b, c, h, w = x.shape
        t = self.embed_norm(x.flatten(2).transpose(1, 2))
        return self.block(t.transpose(1, 2).reshape(b, c, h, w))


class TinyHybridBackbone(Backbone):
    """Reference backbone for tests and desk-scale runs (64x64 input)."""

    identity = "reference_tiny"

    def __init__(self, channels=(16, 32, 64), input_size: int = 64):
        super().__init__()
        self.stage_channels = tuple(channels)
        self.input_size = input_size
        s1 = input_size // 4
        self.stage_spatial = ((s1, s1), (s1 // 2, s1 // 2), (s1 // 4, s1 // 4))
        self.stage1 = HybridStage(3, channels[0], stride=4)
        self.stage2 = HybridStage(channels[0], channels[1], stride=2)
        self.stage3 = HybridStage(channels[1], channels[2], stride=2)
        self.validate_contract()

    def stages(self, x):
        f1 = self.stage1(x)
        f2 = self.stage2(f1)
        f3 = self.stage3(f2)
        return f1, f2, f3


class StagedBackbone(Backbone):
    """Adapter around three externally built stage modules (e.g. pretrained weights)."""

    def __init__(self, stage_modules, stage_channels, stage_spatial, input_size,
                 identity="external", pixel_mean=None, pixel_std=None):
        super().__init__()
        self.stage_modules = nn.ModuleList(stage_modules)
        self.stage_channels = tuple(stage_channels)
        self.stage_spatial = tuple(tuple(s) for s in stage_spatial)
        self.input_size = input_size
        self.identity = identity
        self.pixel_mean = pixel_mean
        self.pixel_std = pixel_std
        self.validate_contract()

    def stages(self, x):
        out = []
        for m in self.stage_modules:
            x = m(x)
            # some transformer stages return (features, cls_token)
            if isinstance(x, (tuple, list)):
                x = x[0]
            out.append(x)
        return out


def load_external_backbone(factory: str, **kwargs) -> Backbone:
    """Instantiate a backbone from a ``"package.module:callable"`` reference."""
    if not factory or ":" not in factory:
        raise ConfigError(f"external backbone factory must look like 'module:callable', got {factory!r}")
    mod_name, attr = factory.split(":", 1)
    try:
        fn = getattr(importlib.import_module(mod_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot import backbone factory {factory!r}: {exc}") from exc
    bb = fn(**kwargs)
    if not isinstance(bb, Backbone):
        raise ConfigError(f"{factory} returned {type(bb).__name__}, not a Backbone")
    bb.validate_contract()
    return bb


def global_pool(feats) -> torch.Tensor:
    """Concatenate spatially averaged stage features in stage order."""
    return torch.cat([F.adaptive_avg_pool2d(f, 1).flatten(1) for f in feats], dim=1)
