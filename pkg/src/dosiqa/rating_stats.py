"""Subjective rating statistics.

Quality scales, opinion-score distributions (DOS), and the conversions
between DOS, MOS and SOS, including the quadratic SOS-MOS law used to
supplement missing labels.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateFit,
    EmptyRatings,
    InvalidDistribution,
    InvalidLevel,
    InvalidSigma,
    OutOfRange,
    ScaleMismatch,
    ValidationError,
)

PROB_TOL = 1e-9
MANIFEST_MOS_TOL = 1e-6


@dataclass(frozen=True)
class QualityScale:
    """Discrete rating axis: one score per quality level, plus the score range."""

    scores: tuple
    range_start: float
    range_end: float

    def __post_init__(self):
        scores = tuple(float(s) for s in self.scores)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "range_start", float(self.range_start))
        object.__setattr__(self, "range_end", float(self.range_end))
        if len(scores) < 2:
            raise ValidationError(f"a quality scale needs at least 2 levels, got {len(scores)}")
        if any(b <= a for a, b in zip(scores, scores[1:])):
            raise ValidationError(f"scale scores must be strictly increasing: {scores}")
        if not self.range_start < self.range_end:
            raise ValidationError("range_start must be below range_end")
        if scores[0] < self.range_start or scores[-1] > self.range_end:
            raise ValidationError(
                f"scores {scores} fall outside [{self.range_start}, {self.range_end}]")

    @property
    def num_levels(self) -> int:
        return len(self.scores)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.scores, dtype=np.float64)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.range_start + self.range_end)

    @classmethod
    def integer(cls, num_levels: int = 5, start: int = 1) -> "QualityScale":
        """Levels ``start, start+1, ...`` whose range is spanned by the scores, e.g. 1..5."""
        scores = tuple(float(start + i) for i in range(num_levels))
        return cls(scores, scores[0], scores[-1])

    @classmethod
    def bins(cls, num_levels: int, start: float, end: float) -> "QualityScale":
        """Bin-centre scores over ``[start, end]``, e.g. 10, 30, ..., 90 on [0, 100]."""
        width = (end - start) / num_levels
        scores = tuple(start + width * (i + 0.5) for i in range(num_levels))
        return cls(scores, start, end)

    def to_dict(self) -> dict:
        return {"scores": list(self.scores), "range": [self.range_start, self.range_end]}

    @classmethod
    def from_dict(cls, d: dict) -> "QualityScale":
        start, end = d["range"]
        return cls(tuple(d["scores"]), start, end)


@dataclass(frozen=True, eq=False)
class OpinionDistribution:
    """Probabilities over the levels of a :class:`QualityScale`."""

    probs: np.ndarray
    scale: QualityScale
    tol: float = field(default=PROB_TOL, repr=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64).reshape(-1)
        if p.shape[0] != self.scale.num_levels:
            raise ScaleMismatch(
                f"distribution has {p.shape[0]} entries, scale has {self.scale.num_levels} levels")
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise InvalidDistribution(f"probabilities must lie in [0, 1]: {p.tolist()}")
        if abs(p.sum() - 1.0) > self.tol:
            raise InvalidDistribution(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def normalized(cls, weights, scale: QualityScale) -> "OpinionDistribution":
        """Build from non-negative weights, dividing by their sum."""
        w = np.asarray(weights, dtype=np.float64)
        return cls(w / w.sum(), scale)

    def __eq__(self, other):
        if not isinstance(other, OpinionDistribution):
            return NotImplemented
        return self.scale == other.scale and np.array_equal(self.probs, other.probs)

    def __len__(self):
        return self.scale.num_levels

    def tolist(self) -> list:
        return self.probs.tolist()


class LabelCategory(str, enum.Enum):
    DOS_AVAILABLE = "DOS_AVAILABLE"
    MOS_SOS_AVAILABLE = "MOS_SOS_AVAILABLE"
    MOS_ONLY = "MOS_ONLY"


@dataclass(frozen=True)
class SampleLabels:
    mos: float
    category: LabelCategory
    sos: Optional[float] = None
    dos: Optional[OpinionDistribution] = None

    def __post_init__(self):
        cat = LabelCategory(self.category)
        object.__setattr__(self, "category", cat)
        if cat is LabelCategory.DOS_AVAILABLE and self.dos is None:
            raise ValidationError("DOS_AVAILABLE labels need a distribution")
        if cat is LabelCategory.MOS_SOS_AVAILABLE and (self.sos is None or self.dos is not None):
            raise ValidationError("MOS_SOS_AVAILABLE labels need sos and no distribution")
        if cat is LabelCategory.MOS_ONLY and (self.sos is not None or self.dos is not None):
            raise ValidationError("MOS_ONLY labels carry neither sos nor a distribution")
        if self.sos is not None and not self.sos >= 0:
            raise ValidationError(f"sos must be non-negative, got {self.sos}")
        if self.dos is not None:
            scale = self.dos.scale
            if not scale.range_start <= self.mos <= scale.range_end:
                raise ValidationError(f"mos {self.mos} outside the scale range")
            implied = mos_of(self.dos)
            if abs(implied - self.mos) > MANIFEST_MOS_TOL:
                raise ValidationError(
                    f"mos {self.mos} disagrees with the distribution mean {implied}")


def dos_from_ratings(ratings: Sequence[int], scale: QualityScale) -> OpinionDistribution:
    """Empirical histogram of 1-based level indices."""
    ratings = list(ratings)
    if not ratings:
        raise EmptyRatings("no ratings given")
    counts = np.zeros(scale.num_levels)
    for r in ratings:
        if int(r) != r or not 1 <= r <= scale.num_levels:
            raise InvalidLevel(f"rating {r!r} is not a level in 1..{scale.num_levels}")
        counts[int(r) - 1] += 1
    return OpinionDistribution(counts / len(ratings), scale)


def mos_of(dos: OpinionDistribution) -> float:
    scores = dos.scale.scores
    # offsets from the centre cancel exactly for symmetric distributions
    centre = 0.5 * (scores[0] + scores[-1])
    shift = math.fsum((s - centre) * p for s, p in zip(scores, dos.probs))
    return centre + shift / math.fsum(dos.probs)


def sos_of(dos: OpinionDistribution) -> float:
    mean = mos_of(dos)
    var = math.fsum(p * (s - mean) ** 2 for s, p in zip(dos.scale.scores, dos.probs))
    return math.sqrt(max(var, 0.0))


def _quadratic(mos, scale: QualityScale):
    # (mos - start)(end - mos) == -mos^2 + (start + end) mos - start*end,
    # factored so the roots are exact.
    return (mos - scale.range_start) * (scale.range_end - mos)


def expected_sos(mos: float, scale: QualityScale, a: float) -> float:
    """SOS predicted from MOS by the quadratic law ``sos^2 = a * q(mos)``."""
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    if not scale.range_start <= mos <= scale.range_end:
        raise OutOfRange(f"mos {mos} outside [{scale.range_start}, {scale.range_end}]")
    return math.sqrt(a * _quadratic(mos, scale))


def fit_a(samples: Iterable[tuple], scale: QualityScale) -> float:
    """Least-squares ``a`` regressing sos^2 on q(mos) through the origin."""
    pairs = np.asarray(list(samples), dtype=np.float64).reshape(-1, 2)
    if pairs.shape[0] < 2:
        raise DegenerateFit(f"need at least 2 samples, got {pairs.shape[0]}")
    mos, sos = pairs[:, 0], pairs[:, 1]
    if np.any(mos < scale.range_start) or np.any(mos > scale.range_end):
        raise OutOfRange("mos values must lie inside the scale range")
    q = _quadratic(mos, scale)
    denom = float(np.dot(q, q))
    if denom == 0.0:
        raise DegenerateFit("q(mos) is zero for every sample; a is unidentifiable")
    return float(np.dot(sos ** 2, q) / denom)


def gaussian_dos(mos: float, sos: float, scale: QualityScale) -> OpinionDistribution:
    """Gaussian density evaluated at each level score, renormalized to sum to 1."""
    if not sos > 0:
        raise InvalidSigma(f"sos must be positive, got {sos}")
    if not scale.range_start <= mos <= scale.range_end:
        raise OutOfRange(f"mos {mos} outside [{scale.range_start}, {scale.range_end}]")
    z = (scale.array - mos) / sos
    # the 1/(sqrt(2 pi) sigma) factor cancels in the renormalization
    w = np.exp(-0.5 * z * z)
    total = w.sum()
    if total == 0.0:
        raise InvalidSigma(f"sos {sos} is too small for this scale: every density underflows")
    return OpinionDistribution(w / total, scale)


def clamp_mos(mos: float, scale: QualityScale, rel_eps: float = 1e-3) -> float:
    """Pull ``mos`` strictly inside the range so the quadratic law stays positive."""
    eps = rel_eps * (scale.range_end - scale.range_start)
    return min(max(mos, scale.range_start + eps), scale.range_end - eps)


KONIQ_SCALE = QualityScale.integer(5, 1)
