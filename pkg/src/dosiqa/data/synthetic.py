"""Procedural stand-in for an IQA database.

Each image is a structured pattern (gratings, checkerboards, disks) degraded
by Gaussian blur and additive noise.  Its latent quality, and hence its MOS, is
a deterministic function of the blur radius and noise level; the SOS follows
the quadratic SOS-MOS law with a known ``a`` plus small jitter; the DOS is a
discretized Gaussian whose mean equals the MOS exactly.  All three labels are
kept as hidden oracle values while the manifest exposes only what the chosen
category provides.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter
from scipy.optimize import brentq

from ..rating_stats import LabelCategory, QualityScale, expected_sos
from .manifest import DatasetManifest, ManifestEntry, save_manifest

MAX_BLUR = 2.5
MAX_NOISE = 0.2
SOS_JITTER = 0.05


def latent_quality(blur: float, noise: float) -> float:
    """1 for a pristine image, 0 at maximum blur and noise."""
    return 1.0 - 0.5 * blur / MAX_BLUR - 0.5 * noise / MAX_NOISE


def quality_to_mos(q: float, scale: QualityScale) -> float:
    width = scale.range_end - scale.range_start
    return scale.range_start + (0.15 + 0.7 * q) * width


def _gaussian_weights(centre, sigma, scores):
    w = np.exp(-0.5 * ((scores - centre) / sigma) ** 2)
    return w / w.sum()


def gaussian_dos_with_mean(mos: float, sos: float, scale: QualityScale) -> np.ndarray:
    """Discretized Gaussian whose centre is shifted so the distribution mean is ``mos``.

    The mean of the tilted family is strictly increasing in the centre, so a
    bracketing root finder always succeeds for ``mos`` inside (s_1, s_C).
    """
    s = scale.array
    width = scale.range_end - scale.range_start

    def gap(c):
        return float(np.dot(_gaussian_weights(c, sos, s), s)) - mos

    lo, hi = mos - width, mos + width
    while gap(lo) > 0:
        lo -= width
    while gap(hi) < 0:
        hi += width
    centre = brentq(gap, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
    return _gaussian_weights(centre, sos, s)


def render_pattern(rng: np.random.Generator, size: int) -> np.ndarray:
    """Random edge-rich RGB pattern in [0, 1], shape size x size x 3."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    img = np.zeros((size, size, 3))
    # oriented grating
    theta = rng.uniform(0, np.pi)
    freq = rng.uniform(3, 9)
    phase = xx * np.cos(theta) + yy * np.sin(theta)
    grating = (np.sin(2 * np.pi * freq * phase) > 0).astype(np.float64)
    c1, c2 = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
    img += grating[..., None] * c1 + (1 - grating[..., None]) * c2
    # checkerboard patch
    cells = int(rng.integers(4, 10))
    checker = ((np.floor(xx * cells) + np.floor(yy * cells)) % 2).astype(np.float64)
    x0, y0 = rng.uniform(0, 0.5, 2)
    patch = (xx > x0) & (xx < x0 + 0.5) & (yy > y0) & (yy < y0 + 0.5)
    img[patch] = checker[patch][:, None] * rng.uniform(0, 1, 3)
    # a few disks
    for _ in range(int(rng.integers(2, 5))):
        cx, cy, r = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.05, 0.2)
        disk = (xx - cx) ** 2 + (yy - cy) ** 2 < r * r
        img[disk] = rng.uniform(0, 1, 3)
    return np.clip(img, 0, 1)


def degrade(img: np.ndarray, blur: float, noise: float, rng: np.random.Generator) -> np.ndarray:
    out = img
    if blur > 0:
        out = np.stack([gaussian_filter(out[..., c], blur, mode="reflect") for c in range(3)], -1)
    out = out + noise * rng.standard_normal(out.shape)
    return np.clip(out, 0, 1)


def generate_synthetic_dataset(n: int, scale: QualityScale, category, seed: int, a_true: float,
                               out_dir, image_size: int = 96, name: str = "synthetic") -> DatasetManifest:
    """Write ``n`` images plus ``manifest.jsonl`` and ``oracle.json`` under ``out_dir``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    category = LabelCategory(category)
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    oracle = {"mos": [], "sos": [], "dos": [], "blur": [], "noise": [], "a_true": a_true}
    entries = []
    for i in range(n):
        blur = float(rng.uniform(0, MAX_BLUR))
        noise = float(rng.uniform(0, MAX_NOISE))
        img = degrade(render_pattern(rng, image_size), blur, noise, rng)
        rel = f"images/{i:05d}.png"
        Image.fromarray(np.round(img * 255).astype(np.uint8), mode="RGB").save(out_dir / rel)

        mos = quality_to_mos(latent_quality(blur, noise), scale)
        sos = expected_sos(mos, scale, a_true) * (1.0 + SOS_JITTER * float(rng.standard_normal()))
        sos = max(sos, 1e-3 * (scale.range_end - scale.range_start))
        dos = gaussian_dos_with_mean(mos, sos, scale)
        for k, v in (("mos", mos), ("sos", sos), ("dos", dos.tolist()), ("blur", blur), ("noise", noise)):
            oracle[k].append(v)

        entry = ManifestEntry(rel, mos)
        if category is LabelCategory.MOS_SOS_AVAILABLE:
            entry.sos = sos
        elif category is LabelCategory.DOS_AVAILABLE:
            entry.dos = dos.tolist()
        entries.append(entry)

    manifest = DatasetManifest(name, scale, category, entries, root=out_dir, oracle=oracle)
    save_manifest(manifest, out_dir / "manifest.jsonl")
    (out_dir / "oracle.json").write_text(json.dumps(oracle) + "\n")
    return manifest
