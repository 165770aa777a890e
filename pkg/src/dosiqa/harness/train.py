"""Training loop."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np
import torch

from ..data.manifest import DatasetManifest, load_manifest
from ..data.preprocess import crop, load_image, resize
from ..data.splits import SplitPlan, make_splits
from ..errors import ConfigError, NumericError
from ..losses import collate_targets, loss_terms, route_labels
from ..network.checkpoint import save_checkpoint
from ..network.model import QualityNet
from .config import RunConfig, build_model

log = logging.getLogger(__name__)

LOSS_KEYS = ("total", "emd", "l1", "esd")


class ImageStore:
    """Decoded images resized once and kept in memory; crops are taken per epoch."""

    def __init__(self, manifest: DatasetManifest, size: int):
        self.manifest = manifest
        self.size = size
        self._cache = {}

    def resized(self, i: int) -> np.ndarray:
        if i not in self._cache:
            self._cache[i] = resize(load_image(self.manifest.image_file(i)), self.size)
        return self._cache[i]

    def batch(self, indices, crop_size: int, train_mode: bool, rng=None) -> torch.Tensor:
        return torch.stack([crop(self.resized(i), crop_size, train_mode, rng) for i in indices])


@dataclass
class TrainResult:
    model: QualityNet
    checkpoint: Optional[Path]
    loss_log: List[dict]
    train_indices: np.ndarray
    plan: SplitPlan
    config: RunConfig


def seed_everything(seed: int):
    torch.manual_seed(seed)
    np.random.seed(seed % (2 ** 32))


def check_scale(manifest: DatasetManifest, config: RunConfig):
    if manifest.scale.num_levels != config.slm.num_levels:
        raise ConfigError(
            f"manifest scale has {manifest.scale.num_levels} levels, model predicts {config.slm.num_levels}")


def training_indices(config: RunConfig, n: int):
    sc = config.split
    plan = make_splits(n, sc.seed, sc.num_repeats, sc.train_fraction)
    if sc.index is None:
        return plan, np.arange(n)
    if not 0 <= sc.index < len(plan):
        raise ConfigError(f"split index {sc.index} outside 0..{len(plan) - 1}")
    return plan, plan[sc.index][0]


def train(config: RunConfig, out_dir=None, manifest: DatasetManifest = None) -> TrainResult:
    """Train one model; writes ``model.pt``/``model.json``, ``loss_log.jsonl`` and
    ``config.json`` to ``out_dir`` when given."""
    manifest = manifest or load_manifest(config.manifest_path)
    check_scale(manifest, config)
    seed_everything(config.seed)
    plan, idx = training_indices(config, len(manifest))
    targets = [route_labels(manifest.labels(int(i)), manifest.scale, config.a) for i in idx]

    model = build_model(config, manifest.scale)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=config.optimizer.lr)
    store = ImageStore(manifest, config.resize_size)

    loss_log = []
    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng([config.seed, epoch])
        order = rng.permutation(len(idx))
        sums = dict.fromkeys(LOSS_KEYS, 0.0)
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            pos = order[start:start + config.batch_size]
            x = store.batch([int(idx[p]) for p in pos], config.crop_size, True, rng)
            tgt = collate_targets([targets[p] for p in pos])
            terms = loss_terms(model(x), tgt, config.weights)
            for k in LOSS_KEYS:
                v = float(terms[k].detach())
                if not math.isfinite(v):
                    raise NumericError(
                        f"epoch {epoch}, batch {b} (samples {[int(idx[p]) for p in pos]}): "
                        f"{k} loss is {v}")
                sums[k] += v * len(pos)
            opt.zero_grad()
            terms["total"].backward()
            opt.step()
        row = {"epoch": epoch, **{k: sums[k] / len(idx) for k in LOSS_KEYS}}
        loss_log.append(row)
        log.info("epoch %d total %.5f emd %.5f l1 %.5f esd %.5f", epoch,
                 row["total"], row["emd"], row["l1"], row["esd"])

    model.eval()
    ckpt = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ckpt = save_checkpoint(model, out_dir / "model.pt", config.backbone_factory)
        with open(out_dir / "loss_log.jsonl", "w") as fh:
            for row in loss_log:
                fh.write(json.dumps(row) + "\n")
        config.save(out_dir / "config.json")
    return TrainResult(model, ckpt, loss_log, np.asarray(idx), plan, config)
