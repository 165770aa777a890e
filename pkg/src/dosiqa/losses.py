"""Multi-label training objective.

Labels are routed by what a dataset provides: a ground-truth DOS is used as
is; MOS+SOS or MOS alone are turned into a Gaussian target DOS.  The total
loss is a weighted sum of the CDF-based EMD between predicted and target DOS,
the L1 error on MOS, and the squared error between predicted SOS and the SOS
expected from MOS.  Batch losses are per-sample losses averaged over the batch.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence, Union

import numpy as np
import torch

from .errors import ConfigError, ScaleMismatch
from .rating_stats import (
    LabelCategory,
    OpinionDistribution,
    QualityScale,
    SampleLabels,
    clamp_mos,
    expected_sos,
    gaussian_dos,
)

DEFAULT_A = 0.1477


class LossName(str, enum.Enum):
    EMD = "EMD"
    L1 = "L1"
    ESD = "ESD"


ALL_LOSSES = frozenset(LossName)


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 200.0
    beta: float = 10.0
    gamma: float = 1.0
    enabled: frozenset = field(default=ALL_LOSSES)

    def __post_init__(self):
        enabled = frozenset(LossName(e) for e in self.enabled)
        object.__setattr__(self, "enabled", enabled)
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ConfigError("loss weights must be non-negative")
        if not enabled:
            raise ConfigError("at least one loss must be enabled")
        if all(self.weight(n) == 0 for n in enabled):
            raise ConfigError("every enabled loss has zero weight")

    def weight(self, name) -> float:
        name = LossName(name)
        return {LossName.EMD: self.alpha, LossName.L1: self.beta, LossName.ESD: self.gamma}[name]

    def scaled(self, name, factor: float) -> "LossWeights":
        attr = {LossName.EMD: "alpha", LossName.L1: "beta", LossName.ESD: "gamma"}[LossName(name)]
        return replace(self, **{attr: getattr(self, attr) * factor})

    def to_dict(self):
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma,
                "enabled": sorted(e.value for e in self.enabled)}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("alpha", 200.0), d.get("beta", 10.0), d.get("gamma", 1.0),
                   frozenset(d.get("enabled", [e.value for e in LossName])))


class Provenance(str, enum.Enum):
    GROUND_TRUTH_DOS = "GROUND_TRUTH_DOS"
    GAUSSIAN_FROM_MOS_SOS = "GAUSSIAN_FROM_MOS_SOS"
    GAUSSIAN_FROM_MOS_ONLY = "GAUSSIAN_FROM_MOS_ONLY"


@dataclass(frozen=True)
class TrainingTarget:
    dos_target: OpinionDistribution
    mos_target: float
    sos_reference: float
    provenance: Provenance


class TargetBatch(NamedTuple):
    dos: torch.Tensor    # B, C
    mos: torch.Tensor    # B
    sos_ref: torch.Tensor  # B


def route_labels(labels: SampleLabels, scale: QualityScale, a: float = DEFAULT_A) -> TrainingTarget:
    """Pick the target DOS for one sample according to its label category."""
    mos_in = clamp_mos(labels.mos, scale)
    sos_ref = expected_sos(mos_in, scale, a)
    cat = labels.category
    if cat is LabelCategory.DOS_AVAILABLE:
        if labels.dos.scale != scale:
            raise ScaleMismatch("label distribution is bound to a different scale")
        dos, prov = labels.dos, Provenance.GROUND_TRUTH_DOS
    elif cat is LabelCategory.MOS_SOS_AVAILABLE:
        dos, prov = gaussian_dos(mos_in, labels.sos, scale), Provenance.GAUSSIAN_FROM_MOS_SOS
    else:
        dos, prov = gaussian_dos(mos_in, sos_ref, scale), Provenance.GAUSSIAN_FROM_MOS_ONLY
    return TrainingTarget(dos, float(labels.mos), sos_ref, prov)


def collate_targets(targets: Sequence[TrainingTarget], dtype=torch.float32) -> TargetBatch:
    return TargetBatch(
        torch.tensor(np.stack([t.dos_target.probs for t in targets]), dtype=dtype),
        torch.tensor([t.mos_target for t in targets], dtype=dtype),
        torch.tensor([t.sos_reference for t in targets], dtype=dtype),
    )


def safe_sqrt(x: torch.Tensor) -> torch.Tensor:
    """sqrt with a zero (not NaN) gradient at exactly 0."""
    pos = x > 0
    root = torch.sqrt(torch.where(pos, x, torch.ones_like(x)))
    return torch.where(pos, root, torch.zeros_like(x))


def _emd_numpy(p: np.ndarray, t: np.ndarray) -> float:
    diff = np.cumsum(t) - np.cumsum(p)
    return float(np.sqrt(np.mean(diff * diff)))


DistLike = Union[OpinionDistribution, torch.Tensor]


def emd_loss(d_pred: DistLike, d_target: DistLike):
    """Root-mean-square difference of the two CDFs.

    With :class:`OpinionDistribution` inputs returns a float; with tensors of
    shape ``(..., C)`` returns the per-sample losses as a tensor of shape ``(...)``.
    """
    if isinstance(d_pred, OpinionDistribution) or isinstance(d_target, OpinionDistribution):
        if not (isinstance(d_pred, OpinionDistribution) and isinstance(d_target, OpinionDistribution)):
            raise TypeError("mixing OpinionDistribution and tensor inputs")
        if len(d_pred) != len(d_target) or d_pred.scale != d_target.scale:
            raise ScaleMismatch("distributions are on different scales")
        return _emd_numpy(d_pred.probs, d_target.probs)
    if d_pred.shape[-1] != d_target.shape[-1]:
        raise ScaleMismatch(f"distribution lengths differ: {d_pred.shape[-1]} vs {d_target.shape[-1]}")
    d_target = d_target.to(d_pred.dtype)
    diff = torch.cumsum(d_target, dim=-1) - torch.cumsum(d_pred, dim=-1)
    return safe_sqrt((diff * diff).mean(dim=-1))


def l1_loss(mos_pred, mos_target):
    if isinstance(mos_pred, torch.Tensor):
        return (torch.as_tensor(mos_target, dtype=mos_pred.dtype) - mos_pred).abs()
    return abs(float(mos_target) - float(mos_pred))


def esd_loss(sos_pred, sos_reference):
    if isinstance(sos_pred, torch.Tensor):
        return (torch.as_tensor(sos_reference, dtype=sos_pred.dtype) - sos_pred) ** 2
    return (float(sos_reference) - float(sos_pred)) ** 2


def _as_batch(target, dtype) -> TargetBatch:
    if isinstance(target, TrainingTarget):
        target = collate_targets([target], dtype)
    return TargetBatch(*(t.to(dtype) for t in target))


def loss_terms(pred, target, weights: LossWeights) -> dict:
    """Batch-mean component losses (unweighted) plus the weighted ``total``.

    Disabled components are reported but excluded from ``total``.
    """
    tgt = _as_batch(target, pred.d_p.dtype)
    terms = {
        "emd": emd_loss(pred.d_p, tgt.dos).mean(),
        "l1": l1_loss(pred.mos_p, tgt.mos).mean(),
        "esd": esd_loss(pred.sos_p, tgt.sos_ref).mean(),
    }
    total = 0.0
    for name, key in ((LossName.EMD, "emd"), (LossName.L1, "l1"), (LossName.ESD, "esd")):
        if name in weights.enabled:
            total = total + weights.weight(name) * terms[key]
    terms["total"] = total
    return terms


def total_loss(pred, target, weights: LossWeights = LossWeights()) -> torch.Tensor:
    return loss_terms(pred, target, weights)["total"]
