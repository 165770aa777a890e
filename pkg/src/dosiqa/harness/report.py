"""Summary tables and static plots from a directory of result JSON files.

Two kinds of input are recognised: evaluation results (``{"splits": [...]}``)
and ablation tables (``{"axis": ..., "rows": [...]}``).  Output is a markdown
summary, a JSON copy of the combined numbers and PNG charts; rendering is
deterministic for identical inputs.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..errors import NoResults, ParseError  # noqa: E402

MOS_COLS = ("srcc", "plcc", "rmse")
DOS_COLS = ("jsd", "emd", "rmse", "intersection", "cosine")
# PNG metadata without a software/version stamp keeps files byte-identical
PNG_META = {"Software": None}


def _load_json(path: Path):
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc


def collect(results_dir) -> tuple:
    """Split records (with their source file) and ablation tables found in ``results_dir``."""
    results_dir = Path(results_dir)
    if not results_dir.is_dir():
        raise NoResults(f"results directory {results_dir} does not exist")
    records, ablations = [], []
    for path in sorted(results_dir.glob("*.json")):
        obj = _load_json(path)
        if not isinstance(obj, dict):
            continue
        if "axis" in obj and "rows" in obj:
            ablations.append(obj)
        elif "splits" in obj:
            for rec in obj["splits"]:
                records.append({"source": path.name, **rec})
    if not records and not ablations:
        raise NoResults(f"no result files in {results_dir}")
    return records, ablations


def shared_columns(records: List[dict]) -> List[str]:
    """``mos.*`` always; ``dos.*`` only if every record carries a DOS section."""
    cols = [f"mos.{k}" for k in MOS_COLS]
    if records and all("dos" in r for r in records):
        cols += [f"dos.{k}" for k in DOS_COLS]
    return cols


def _value(rec, col):
    part, key = col.split(".")
    return float(rec[part][key])


def mean_row(records: List[dict], cols: List[str]) -> dict:
    return {c: math.fsum(_value(r, c) for r in records) / len(records) for c in cols}


def summary_table(records: List[dict]) -> dict:
    cols = shared_columns(records)
    rows = [{"source": r["source"], "split_id": r["split_id"],
             **{c: _value(r, c) for c in cols}} for r in records]
    out = {"columns": cols, "rows": rows}
    if len(rows) > 1:
        out["mean"] = mean_row(records, cols)
    return out


def summary_markdown(table: dict) -> str:
    cols = table["columns"]
    lines = ["| source | split | " + " | ".join(cols) + " |", "|" + "---|" * (len(cols) + 2)]
    for r in table["rows"]:
        lines.append(f"| {r['source']} | {r['split_id']} | "
                     + " | ".join(f"{r[c]:.4f}" for c in cols) + " |")
    if "mean" in table:
        lines.append("| **mean** | | " + " | ".join(f"{table['mean'][c]:.4f}" for c in cols) + " |")
    return "\n".join(lines) + "\n"


def _save(fig, path: Path):
    fig.savefig(path, dpi=100, metadata=PNG_META)
    plt.close(fig)


def plot_splits(table: dict, path: Path):
    rows = table["rows"]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    x = range(len(rows))
    for col in ("mos.srcc", "mos.plcc"):
        ax.plot(list(x), [r[col] for r in rows], marker="o", label=col.split(".")[1].upper())
    ax.set_xticks(list(x))
    ax.set_xticklabels([str(r["split_id"]) for r in rows], rotation=45, fontsize=7)
    ax.set_xlabel("split")
    ax.set_ylabel("correlation")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_ablation(abl: dict, path: Path):
    rows = [r for r in abl["rows"] if r["status"] == "ok"]
    names = [r["variant"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(5, 0.9 * len(names)), 3.5))
    width = 0.38
    xs = list(range(len(names)))
    ax.bar([x - width / 2 for x in xs], [r["train"]["srcc"] for r in rows], width, label="SRCC")
    ax.bar([x + width / 2 for x in xs], [r["train"]["plcc"] for r in rows], width, label="PLCC")
    ax.set_xticks(xs)
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("train correlation")
    ax.set_title(abl["axis"])
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_balance(abl: dict, path: Path):
    """Grouped bars: for each loss weight, its halved / base / doubled SRCC."""
    by_name = {r["variant"]: r for r in abl["rows"] if r["status"] == "ok"}
    base = by_name.get("base")
    fig, ax = plt.subplots(figsize=(6, 3.5))
    groups = ("alpha", "beta", "gamma")
    width = 0.26
    for j, (suffix, label) in enumerate((("x0.5", "halved"), (None, "base"), ("x2", "doubled"))):
        vals = []
        for g in groups:
            r = base if suffix is None else by_name.get(f"{g}_{suffix}")
            vals.append(r["train"]["srcc"] if r else float("nan"))
        ax.bar([i + (j - 1) * width for i in range(len(groups))], vals, width, label=label)
    ax.set_xticks(range(len(groups)))
    ax.set_xticklabels(groups)
    ax.set_ylabel("train SRCC")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def cmd_report(results_dir, out_dir=None) -> dict:
    """Render ``summary.md``/``summary.json`` and PNGs into ``out_dir`` (default: ``results_dir/report``)."""
    from .ablate import markdown_table

    records, ablations = collect(results_dir)
    out_dir = Path(out_dir) if out_dir is not None else Path(results_dir) / "report"
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    md = ["# Results", ""]
    summary = {}
    if records:
        table = summary_table(records)
        summary["evaluation"] = table
        md += ["## Evaluation", "", summary_markdown(table)]
        plot_splits(table, out_dir / "splits.png")
        files.append("splits.png")
    for abl in sorted(ablations, key=lambda a: a["axis"]):
        axis = abl["axis"].lower()
        summary.setdefault("ablations", {})[abl["axis"]] = abl["rows"]
        md += ["## Ablation", "", markdown_table(abl["axis"], abl["rows"])]
        if any(r["status"] == "ok" for r in abl["rows"]):
            plot_ablation(abl, out_dir / f"ablation_{axis}.png")
            files.append(f"ablation_{axis}.png")
            if abl["axis"] == "BALANCE":
                plot_balance(abl, out_dir / "balance.png")
                files.append("balance.png")
    (out_dir / "summary.md").write_text("\n".join(md))
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return {"out_dir": str(out_dir), "summary": summary, "files": ["summary.md", "summary.json"] + files}
