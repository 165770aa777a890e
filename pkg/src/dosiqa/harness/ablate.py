"""Ablation sweeps: one base config, a generated list of variants, paired splits.

Every variant trains with the base seed and split, so rows are paired
comparisons; each row records the digest of the split it used.  A variant
that raises is recorded as failed and the sweep moves on.
"""

from __future__ import annotations

import enum
import itertools
import json
import logging
import traceback
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional

from ..data.manifest import DatasetManifest, load_manifest
from ..errors import ConfigError, DosIqaError
from ..losses import LossName
from .config import RunConfig
from .evaluate import evaluate
from .train import train

log = logging.getLogger(__name__)


class AblationAxis(str, enum.Enum):
    STAGES = "STAGES"
    PATHWAYS = "PATHWAYS"
    LOSSES = "LOSSES"
    BALANCE = "BALANCE"


@dataclass(frozen=True)
class Variant:
    name: str
    flags: dict
    config: RunConfig


def _nonempty_subsets(items):
    items = list(items)
    for r in range(1, len(items) + 1):
        yield from itertools.combinations(items, r)


def stage_variants(base: RunConfig) -> List[Variant]:
    out = []
    for sub in _nonempty_subsets((1, 2, 3)):
        flags = {f"stage{i}": i in sub for i in (1, 2, 3)}
        out.append(Variant("stages_" + "".join(map(str, sub)), flags, base.with_(stages=sub)))
    return out


def pathway_variants(base: RunConfig) -> List[Variant]:
    out = []
    for direct, indirect in itertools.product((True, False), repeat=2):
        slm = replace(base.slm, enable_direct_pathway=direct, enable_indirect_pathway=indirect)
        name = f"direct_{'on' if direct else 'off'}_indirect_{'on' if indirect else 'off'}"
        out.append(Variant(name, {"direct": direct, "indirect": indirect}, base.with_(slm=slm)))
    return out


def loss_variants(base: RunConfig) -> List[Variant]:
    order = (LossName.EMD, LossName.L1, LossName.ESD)
    out = []
    for sub in _nonempty_subsets(order):
        weights = replace(base.weights, enabled=frozenset(sub))
        flags = {n.value: n in sub for n in order}
        out.append(Variant("losses_" + "+".join(n.value for n in sub), flags,
                           base.with_(weights=weights)))
    return out


def balance_variants(base: RunConfig) -> List[Variant]:
    w = base.weights
    out = [Variant("base", {"alpha": w.alpha, "beta": w.beta, "gamma": w.gamma}, base)]
    for name, sym in ((LossName.EMD, "alpha"), (LossName.L1, "beta"), (LossName.ESD, "gamma")):
        for factor, tag in ((2.0, "x2"), (0.5, "x0.5")):
            nw = w.scaled(name, factor)
            flags = {"alpha": nw.alpha, "beta": nw.beta, "gamma": nw.gamma}
            out.append(Variant(f"{sym}_{tag}", flags, base.with_(weights=nw)))
    return out


GENERATORS = {
    AblationAxis.STAGES: stage_variants,
    AblationAxis.PATHWAYS: pathway_variants,
    AblationAxis.LOSSES: loss_variants,
    AblationAxis.BALANCE: balance_variants,
}


def ablation_variants(axis, base: RunConfig, only=None) -> List[Variant]:
    """All variants of ``axis``; ``only`` keeps the named subset (in axis order)."""
    try:
        axis = AblationAxis(str(axis).upper())
    except ValueError as exc:
        raise ConfigError(f"unknown ablation axis {axis!r}; choose from "
                          f"{[a.value for a in AblationAxis]}") from exc
    variants = GENERATORS[axis](base)
    if only:
        names = {v.name for v in variants}
        missing = set(only) - names
        if missing:
            raise ConfigError(f"unknown {axis.value} variants {sorted(missing)}; known: {sorted(names)}")
        variants = [v for v in variants if v.name in set(only)]
    return variants


def _scores(record: dict) -> dict:
    return {"srcc": record["mos"]["srcc"], "plcc": record["mos"]["plcc"]}


def run_variant(variant: Variant, manifest: DatasetManifest, out_dir: Optional[Path]) -> dict:
    cfg = variant.config
    row = {"variant": variant.name, "flags": variant.flags, "status": "ok"}
    try:
        res = train(cfg, out_dir / variant.name if out_dir else None, manifest=manifest)
        split = cfg.split
        kw = dict(split_seed=split.seed, num_repeats=split.num_repeats,
                  train_fraction=split.train_fraction, resize_size=cfg.resize_size)
        if split.index is None:
            full = evaluate(res.model, manifest, None, "full", **kw)["splits"][0]
            row["train"] = _scores(full)
            row["split_digest"] = None
        else:
            tr = evaluate(res.model, manifest, split.index, "train", **kw)["splits"][0]
            te = evaluate(res.model, manifest, split.index, "test", **kw)["splits"][0]
            row["train"], row["test"] = _scores(tr), _scores(te)
            row["split_digest"] = tr["split_digest"]
        row["final_loss"] = res.loss_log[-1]["total"] if res.loss_log else None
    except (DosIqaError, ArithmeticError, RuntimeError, ValueError) as exc:
        log.warning("variant %s failed: %s", variant.name, exc)
        row["status"] = "failed"
        row["error"] = {"type": type(exc).__name__, "message": str(exc),
                        "trace": traceback.format_exc(limit=3)}
    return row


def markdown_table(axis: str, rows: List[dict]) -> str:
    flag_keys = list(rows[0]["flags"]) if rows else []
    has_test = any("test" in r for r in rows)
    cols = ["variant"] + flag_keys + ["train SRCC", "train PLCC"]
    if has_test:
        cols += ["test SRCC", "test PLCC"]
    cols.append("status")
    lines = [f"### {axis}", "", "| " + " | ".join(cols) + " |",
             "|" + "---|" * len(cols)]

    def fmt_flag(v):
        if isinstance(v, bool):
            return "x" if v else ""
        return f"{v:g}"

    for r in rows:
        cells = [r["variant"]] + [fmt_flag(r["flags"][k]) for k in flag_keys]
        for part in ("train", "test") if has_test else ("train",):
            s = r.get(part)
            cells += [f"{s['srcc']:.4f}", f"{s['plcc']:.4f}"] if s else ["-", "-"]
        cells.append(r["status"])
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def cmd_ablate(base: RunConfig, axis, out_dir=None, only=None,
               manifest: DatasetManifest = None) -> dict:
    """Train and evaluate every variant; writes ``ablation_<axis>.json`` and ``.md``."""
    variants = ablation_variants(axis, base, only)
    axis = AblationAxis(str(axis).upper()).value
    manifest = manifest or load_manifest(base.manifest_path)
    out_dir = Path(out_dir) if out_dir is not None else None
    rows = [run_variant(v, manifest, out_dir) for v in variants]
    digests = {r.get("split_digest") for r in rows if r["status"] == "ok"}
    table = {"axis": axis, "base": base.to_dict(), "rows": rows,
             "paired": len(digests) <= 1}
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"ablation_{axis.lower()}.json").write_text(json.dumps(table, indent=2) + "\n")
        (out_dir / f"ablation_{axis.lower()}.md").write_text(markdown_table(axis, rows))
    return table
