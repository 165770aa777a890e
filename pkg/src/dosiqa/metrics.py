"""Evaluation criteria for MOS and DOS predictions.

MOS: SRCC, and PLCC / RMSE computed after a four-parameter logistic map of
the predictions onto the ground-truth scale.  DOS: Jensen-Shannon distance
(base 2), EMD, RMSE, histogram intersection and cosine similarity, each per
image and then averaged.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.special import expit
from scipy.stats import rankdata

from .errors import ScaleMismatch, UndefinedCorrelation, ValidationError
from .losses import emd_loss
from .rating_stats import OpinionDistribution

LOGISTIC_MAX_NFEV = 2000


@dataclass
class MosEvalReport:
    srcc: float
    plcc: float
    rmse: float
    logistic_params: tuple
    converged: bool = True

    def summary(self) -> dict:
        return {"srcc": self.srcc, "plcc": self.plcc, "rmse": self.rmse}


@dataclass
class DosEvalReport:
    jsd: float
    emd: float
    rmse: float
    intersection: float
    cosine: float

    def summary(self) -> dict:
        return asdict(self)


@dataclass
class LogisticFit:
    params: tuple
    converged: bool
    residual: float  # sum of squared errors after mapping

    def __iter__(self):
        return iter(self.params)


def _pair(pred, gt, min_len):
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    gt = np.asarray(gt, dtype=np.float64).reshape(-1)
    if pred.shape != gt.shape:
        raise ValidationError(f"length mismatch: {pred.size} predictions, {gt.size} labels")
    if pred.size < min_len:
        raise ValidationError(f"need at least {min_len} samples, got {pred.size}")
    return pred, gt


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc, yc = x - x.mean(), y - y.mean()
    denom = np.sqrt(np.dot(xc, xc) * np.dot(yc, yc))
    if denom == 0:
        raise UndefinedCorrelation("correlation of a constant vector is undefined")
    return float(np.clip(np.dot(xc, yc) / denom, -1.0, 1.0))


def srcc(pred: Sequence[float], gt: Sequence[float]) -> float:
    """Spearman correlation; ties get their average rank."""
    pred, gt = _pair(pred, gt, 3)
    if np.ptp(pred) == 0 or np.ptp(gt) == 0:
        raise UndefinedCorrelation("rank correlation with a constant input is undefined")
    return pearson(rankdata(pred), rankdata(gt))


def logistic4(x, b1, b2, b3, b4):
    # exp overflows to inf far from the centre, which correctly saturates at b2
    with np.errstate(over="ignore"):
        return (b1 - b2) / (1.0 + np.exp(-(x - b3) / b4)) + b2


def _sigmoid(pred, centre, width):
    return expit((pred - centre) / width)


def _levels(sig, gt):
    """Closed-form (lower level, upper - lower) regressing ``gt`` on ``sig``."""
    sig_c = sig - sig.mean()
    var = float(np.dot(sig_c, sig_c))
    gain = float(np.dot(sig_c, gt - gt.mean())) / var if var > 0 else 0.0
    return float(gt.mean()) - gain * float(sig.mean()), gain


def _grid_start(pred, gt, n_centre=25, n_width=25):
    """Best (centre, width) of a coarse grid, levels solved per cell."""
    span = float(np.ptp(pred))
    centres = np.quantile(pred, np.linspace(0.02, 0.98, n_centre))
    widths = span * np.logspace(-3, 1, n_width)
    c, w = np.meshgrid(centres, widths, indexing="ij")
    sig = _sigmoid(pred, c[..., None], w[..., None])
    sig_c = sig - sig.mean(-1, keepdims=True)
    var = np.einsum("ijk,ijk->ij", sig_c, sig_c)
    gain = np.einsum("ijk,k->ij", sig_c, gt - gt.mean()) / np.where(var > 0, var, 1.0)
    gain = np.where(var > 0, gain, 0.0)
    low = gt.mean() - gain * sig.mean(-1)
    sse = ((low[..., None] + gain[..., None] * sig - gt) ** 2).sum(-1)
    i = np.unravel_index(np.argmin(sse), sse.shape)
    return c[i], w[i]


def fit_logistic(pred: Sequence[float], gt: Sequence[float]) -> LogisticFit:
    """Least-squares fit of the four-parameter logistic from ``pred`` onto ``gt``.

    For a fixed centre and width the logistic is affine in its two levels, so
    those are solved in closed form and only (centre, log width) is searched
    (variable projection).  Three deterministic starts are tried: the best
    cell of a coarse grid, the conventional one (mean/std of the predictions)
    and a nearly linear one, so a linear relation is never fitted worse than
    by a straight line.  The lower-residual solution wins.  Non-convergence
    within the evaluation budget is flagged, not raised.
    """
    pred, gt = _pair(pred, gt, 5)
    span_p = float(np.ptp(pred))
    if span_p == 0:
        raise ValidationError("logistic fit needs non-constant predictions")
    # widths beyond the upper limit are indistinguishable from a straight
    # line, below the lower one from a step between adjacent samples
    log_width = (math.log(1e-6 * span_p), math.log(1e4 * span_p))

    def unpack(v):
        return float(v[0]), math.exp(min(max(float(v[1]), log_width[0]), log_width[1]))

    n = pred.size
    gt_c = gt - gt.mean()

    # low + gain * sig - gt with the closed-form levels, written on centred
    # vectors; this runs thousands of times per fit, so it avoids np.mean
    def resid(v):
        sig = _sigmoid(pred, *unpack(v))
        sig_c = sig - np.add.reduce(sig) / n
        var = np.dot(sig_c, sig_c)
        gain = np.dot(sig_c, gt_c) / var if var > 0 else 0.0
        return gain * sig_c - gt_c

    def jac(v):
        centre, width = unpack(v)
        sig = _sigmoid(pred, centre, width)
        sig_c = sig - np.add.reduce(sig) / n
        var = np.dot(sig_c, sig_c)
        out = np.zeros((n, 2))
        if not var > 0:
            return out
        gain = np.dot(sig_c, gt_c) / var
        slope = sig * (1.0 - sig) / width
        # d sig / d centre and d sig / d log width (zero where the width is clamped)
        cols = [-slope, -slope * (pred - centre)]
        if not log_width[0] < v[1] < log_width[1]:
            cols[1] = np.zeros(n)
        for j, d in enumerate(cols):
            d_c = d - np.add.reduce(d) / n
            d_gain = (np.dot(d_c, gt_c) - 2.0 * gain * np.dot(sig_c, d_c)) / var
            out[:, j] = d_gain * sig_c + gain * d_c
        return out

    grid_c, grid_w = _grid_start(pred, gt)
    centre = float(pred.mean())
    starts = ((grid_c, math.log(grid_w)),
              (centre, math.log(max(pred.std(), 1e-6 * span_p))),
              (centre, math.log(1e3 * span_p)))
    best = None
    for x0 in starts:
        res = least_squares(resid, np.array(x0, dtype=np.float64), jac=jac, method="lm",
                            max_nfev=LOGISTIC_MAX_NFEV)
        sse = float(np.dot(res.fun, res.fun))
        if best is None or sse < best[1]:
            best = (res, sse)
    res, sse = best
    b3, b4 = unpack(res.x)
    low, gain = _levels(_sigmoid(pred, b3, b4), gt)
    return LogisticFit((low + gain, low, b3, b4), bool(res.status > 0), sse)


def plcc_rmse(pred, gt, fit: Optional[LogisticFit] = None):
    """PLCC and RMSE of logistically mapped predictions against labels."""
    pred, gt = _pair(pred, gt, 5)
    fit = fit or fit_logistic(pred, gt)
    mapped = logistic4(pred, *fit.params)
    if np.ptp(mapped) == 0:
        raise UndefinedCorrelation("logistic map collapsed predictions to a constant")
    return pearson(mapped, gt), float(np.sqrt(np.mean((mapped - gt) ** 2)))


def mos_metrics(pred, gt) -> MosEvalReport:
    fit = fit_logistic(pred, gt)
    plcc, rmse = plcc_rmse(pred, gt, fit)
    return MosEvalReport(srcc(pred, gt), plcc, rmse, fit.params, fit.converged)


def _xlogy_ratio(p, q):
    # sum p log2(p/q) with 0 log 0 = 0
    nz = p > 0
    return float(np.sum(p[nz] * np.log2(p[nz] / q[nz])))


def jensen_shannon_distance(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    js = 0.5 * _xlogy_ratio(p, m) + 0.5 * _xlogy_ratio(q, m)
    return float(np.sqrt(max(js, 0.0)))


def dos_metrics(pred: OpinionDistribution, gt: OpinionDistribution) -> DosEvalReport:
    if pred.scale != gt.scale:
        raise ScaleMismatch("distributions are on different scales")
    p, g = pred.probs, gt.probs
    cos = float(np.dot(p, g) / (np.linalg.norm(p) * np.linalg.norm(g)))
    return DosEvalReport(
        jsd=jensen_shannon_distance(p, g),
        emd=emd_loss(pred, gt),
        rmse=float(np.sqrt(np.mean((p - g) ** 2))),
        intersection=float(np.minimum(p, g).sum()),
        cosine=cos,
    )


def mean_dos_metrics(preds, gts) -> DosEvalReport:
    reports = [dos_metrics(p, g) for p, g in zip(preds, gts)]
    if not reports:
        raise ValidationError("no distributions to evaluate")
    keys = ("jsd", "emd", "rmse", "intersection", "cosine")
    return DosEvalReport(**{k: float(np.mean([getattr(r, k) for r in reports])) for k in keys})


def results_record(split_id, mos: MosEvalReport, dos: Optional[DosEvalReport] = None) -> dict:
    """One entry of the JSON results schema."""
    rec = {"split_id": split_id, "mos": mos.summary()}
    if dos is not None:
        rec["dos"] = dos.summary()
    return rec
