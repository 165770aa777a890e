"""Evaluation of a trained model on a manifest and split protocol."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from ..data.manifest import DatasetManifest, load_manifest
from ..data.preprocess import default_resize
from ..data.splits import make_splits
from ..errors import ConfigError
from ..metrics import DosEvalReport, MosEvalReport, mean_dos_metrics, mos_metrics, results_record
from ..network.checkpoint import load_checkpoint
from ..network.model import QualityNet, to_numpy_distributions
from ..rating_stats import OpinionDistribution
from .train import ImageStore

SUBSETS = ("test", "train", "full")


@dataclass
class Predictions:
    mos: np.ndarray   # N
    dos: np.ndarray   # N x C, float64, rows sum to 1


def predict_manifest(model: QualityNet, manifest: DatasetManifest, indices, resize_size: int,
                     batch_size: int = 32, store: ImageStore = None) -> Predictions:
    store = store or ImageStore(manifest, resize_size)
    crop_size = model.backbone.input_size
    was_training = model.training
    model.eval()
    mos, dos = [], []
    with torch.no_grad():
        for start in range(0, len(indices), batch_size):
            chunk = [int(i) for i in indices[start:start + batch_size]]
            pred = model(store.batch(chunk, crop_size, train_mode=False))
            d = to_numpy_distributions(pred.d_p)
            dos.append(d)
            mos.append(d @ manifest.scale.array)
    model.train(was_training)
    return Predictions(np.concatenate(mos), np.concatenate(dos))


def check_compatible(model: QualityNet, manifest: DatasetManifest):
    if model.scale.num_levels != manifest.scale.num_levels:
        raise ConfigError(
            f"model predicts {model.scale.num_levels} levels, manifest has {manifest.scale.num_levels}")
    if model.scale != manifest.scale:
        raise ConfigError(f"model scale {model.scale.to_dict()} != manifest scale {manifest.scale.to_dict()}")


def evaluate_indices(preds: Predictions, manifest: DatasetManifest, indices):
    """MOS report, plus a DOS report when the manifest carries ground-truth distributions."""
    indices = np.asarray(indices)
    mos_rep = mos_metrics(preds.mos[indices], manifest.mos_array(indices))
    dos_rep = None
    if manifest.has_dos:
        scale = manifest.scale
        pred_d = [OpinionDistribution(preds.dos[i], scale) for i in indices]
        gt_d = [manifest.labels(int(i)).dos for i in indices]
        dos_rep = mean_dos_metrics(pred_d, gt_d)
    return mos_rep, dos_rep


def mean_record(records) -> dict:
    out = {"split_id": "mean", "mos": {}}
    for k in ("srcc", "plcc", "rmse"):
        out["mos"][k] = float(np.mean([r["mos"][k] for r in records]))
    if all("dos" in r for r in records):
        out["dos"] = {k: float(np.mean([r["dos"][k] for r in records]))
                      for k in ("jsd", "emd", "rmse", "intersection", "cosine")}
    return out


def evaluate(model: QualityNet, manifest: DatasetManifest, split="all", subset: str = "test",
             split_seed: int = 0, num_repeats: int = 10, train_fraction: float = 0.8,
             resize_size: Optional[int] = None) -> dict:
    """Evaluate on one split (an int), every split (``"all"``) or the whole manifest
    (``split=None``).  Returns ``{"splits": [records...], "mean": record}``."""
    check_compatible(model, manifest)
    if subset not in SUBSETS:
        raise ConfigError(f"subset must be one of {SUBSETS}")
    if resize_size is None:
        resize_size = default_resize(model.backbone.input_size)
    n = len(manifest)
    preds = predict_manifest(model, manifest, np.arange(n), resize_size)

    if split is None or subset == "full":
        targets = [("full", np.arange(n), None)]
    else:
        plan = make_splits(n, split_seed, num_repeats, train_fraction)
        ks = range(len(plan)) if split == "all" else [int(split)]
        targets = []
        for k in ks:
            if not 0 <= k < len(plan):
                raise ConfigError(f"split {k} outside 0..{len(plan) - 1}")
            train_idx, test_idx = plan[k]
            targets.append((k, test_idx if subset == "test" else train_idx, plan.digest(k)))

    records = []
    for split_id, idx, digest in targets:
        mos_rep, dos_rep = evaluate_indices(preds, manifest, idx)
        rec = results_record(split_id, mos_rep, dos_rep)
        rec["subset"] = subset
        rec["n"] = int(len(idx))
        if digest:
            rec["split_digest"] = digest
        records.append(rec)
    return {"manifest": manifest.name, "splits": records, "mean": mean_record(records)}


def cmd_eval(checkpoint, manifest_path, split="all", subset="test", split_seed=0,
             num_repeats=10, out=None) -> dict:
    manifest = load_manifest(manifest_path)
    model = load_checkpoint(checkpoint)
    result = evaluate(model, manifest, split, subset, split_seed, num_repeats)
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(result, indent=2) + "\n")
    return result
