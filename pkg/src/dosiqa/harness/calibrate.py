"""Fit the SOS-MOS coefficient ``a`` on a labelled manifest."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..data.manifest import DatasetManifest, load_manifest
from ..errors import ConfigError
from ..rating_stats import LabelCategory, expected_sos, fit_a, sos_of


def mos_sos_pairs(manifest: DatasetManifest):
    """(mos, sos) per entry; sos comes from the distribution when only a DOS is stored."""
    if manifest.category is LabelCategory.MOS_ONLY:
        raise ConfigError(
            f"manifest {manifest.name!r} has MOS labels only; calibrating a needs per-image "
            "sos (MOS_SOS_AVAILABLE) or full opinion distributions (DOS_AVAILABLE)")
    pairs = []
    for i in range(len(manifest)):
        lab = manifest.labels(i)
        sos = sos_of(lab.dos) if lab.dos is not None else lab.sos
        pairs.append((lab.mos, sos))
    return np.asarray(pairs, dtype=np.float64)


def calibrate_a(manifest: DatasetManifest) -> dict:
    pairs = mos_sos_pairs(manifest)
    scale = manifest.scale
    a = fit_a(pairs, scale)
    pred = np.array([expected_sos(m, scale, a) for m in pairs[:, 0]])
    resid = pairs[:, 1] - pred
    return {
        "manifest": manifest.name,
        "category": manifest.category.value,
        "n": int(len(pairs)),
        "a": a,
        "residual": {
            "mean": float(resid.mean()),
            "std": float(resid.std()),
            "rmse": float(np.sqrt(np.mean(resid ** 2))),
            "max_abs": float(np.abs(resid).max()),
        },
    }


def cmd_calibrate_a(manifest_path, out=None) -> dict:
    report = calibrate_a(load_manifest(manifest_path))
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report, indent=2) + "\n")
    return report
