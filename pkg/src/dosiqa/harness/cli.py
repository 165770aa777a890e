"""Command-line entry point: ``dosiqa <train|eval|ablate|calibrate-a|synth|report>``.

Run settings come from ``--config run.json`` with individual flags layered on
top.  Results go to stdout as JSON; every handled error is printed to stderr
as a JSON object and the process exits with status 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from ..errors import ConfigError, DosIqaError
from ..losses import LossName, LossWeights
from ..rating_stats import LabelCategory, QualityScale

EXIT_ERROR = 2


def _add_run_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("run configuration (overrides --config)")
    g.add_argument("--config", help="RunConfig JSON file")
    g.add_argument("--manifest", dest="manifest_path")
    g.add_argument("--epochs", type=int)
    g.add_argument("--backbone", choices=("reference_tiny", "external"))
    g.add_argument("--backbone-factory", help="'module:callable' returning a Backbone")
    g.add_argument("--resize", type=int)
    g.add_argument("--crop", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--a", type=float, help="SOS-MOS coefficient")
    g.add_argument("--stages", type=int, nargs="+", choices=(1, 2, 3))
    g.add_argument("--hidden-channels", type=int)
    g.add_argument("--lambda-mix", type=float)
    g.add_argument("--no-direct", action="store_true", help="disable the direct pathway")
    g.add_argument("--no-indirect", action="store_true", help="disable the indirect pathway")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--losses", nargs="+", choices=[n.value for n in LossName])
    g.add_argument("--split-index", type=int, help="-1 trains on every entry")
    g.add_argument("--split-seed", type=int)
    g.add_argument("--num-repeats", type=int)
    g.add_argument("--train-fraction", type=float)


def run_config_from_args(args):
    from .config import OptimizerConfig, RunConfig

    base = {}
    if args.config:
        base = RunConfig.load(args.config).to_dict()
    for key in ("manifest_path", "epochs", "backbone", "backbone_factory", "resize", "crop",
                "batch_size", "seed", "a", "stages"):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    cfg = RunConfig.from_dict(base)

    slm = cfg.slm
    if args.hidden_channels is not None:
        slm = replace(slm, hidden_channels=args.hidden_channels)
    if args.lambda_mix is not None:
        slm = replace(slm, lambda_mix=args.lambda_mix)
    if args.no_direct:
        slm = replace(slm, enable_direct_pathway=False)
    if args.no_indirect:
        slm = replace(slm, enable_indirect_pathway=False)

    w = cfg.weights
    weights = LossWeights(
        args.alpha if args.alpha is not None else w.alpha,
        args.beta if args.beta is not None else w.beta,
        args.gamma if args.gamma is not None else w.gamma,
        frozenset(args.losses) if args.losses else w.enabled)

    opt = cfg.optimizer if args.lr is None else OptimizerConfig(cfg.optimizer.kind, args.lr)
    split = cfg.split
    if args.split_index is not None:
        split = replace(split, index=None if args.split_index < 0 else args.split_index)
    for key in ("split_seed", "num_repeats", "train_fraction"):
        val = getattr(args, key)
        if val is not None:
            split = replace(split, **{key.replace("split_", ""): val})
    return cfg.with_(slm=slm, weights=weights, optimizer=opt, split=split)


def cmd_train_args(args):
    from .train import train

    cfg = run_config_from_args(args)
    res = train(cfg, args.out)
    return {"checkpoint": str(res.checkpoint), "epochs": cfg.epochs,
            "final_loss": res.loss_log[-1] if res.loss_log else None}


def cmd_eval_args(args):
    from .evaluate import cmd_eval

    split = "all" if args.split == "all" else (None if args.split == "none" else int(args.split))
    return cmd_eval(args.checkpoint, args.manifest, split, args.subset, args.split_seed,
                    args.num_repeats, args.out)


def cmd_ablate_args(args):
    from .ablate import cmd_ablate

    cfg = run_config_from_args(args)
    table = cmd_ablate(cfg, args.axis, args.out, only=args.only)
    return {"axis": table["axis"], "paired": table["paired"],
            "rows": [{k: r.get(k) for k in ("variant", "status", "train", "test")}
                     for r in table["rows"]]}


def cmd_calibrate_args(args):
    from .calibrate import cmd_calibrate_a

    return cmd_calibrate_a(args.manifest, args.out)


def cmd_synth_args(args):
    from ..data.synthetic import generate_synthetic_dataset

    if args.bins:
        scale = QualityScale.bins(args.levels, args.range_start, args.range_end)
    else:
        scale = QualityScale.integer(args.levels, int(args.range_start))
    m = generate_synthetic_dataset(args.n, scale, args.category, args.seed, args.a_true, args.out,
                                   image_size=args.image_size, name=args.name)
    return {"manifest": str(m.root / "manifest.jsonl"), "n": len(m), "category": m.category.value}


def cmd_report_args(args):
    from .report import cmd_report

    res = cmd_report(args.results, args.out)
    return {"out_dir": res["out_dir"], "files": res["files"]}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dosiqa", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one model")
    _add_run_flags(t)
    t.add_argument("--out", required=True, help="output directory")
    t.set_defaults(func=cmd_train_args)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--manifest", required=True)
    e.add_argument("--split", default="all", help="'all', 'none' or a split index")
    e.add_argument("--subset", default="test", choices=("test", "train", "full"))
    e.add_argument("--split-seed", type=int, default=0)
    e.add_argument("--num-repeats", type=int, default=10)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval_args)

    a = sub.add_parser("ablate", help="run an ablation sweep")
    _add_run_flags(a)
    a.add_argument("--axis", required=True, type=str.upper,
                   choices=("STAGES", "PATHWAYS", "LOSSES", "BALANCE"))
    a.add_argument("--only", nargs="+", help="variant names to keep")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_ablate_args)

    c = sub.add_parser("calibrate-a", help="fit the SOS-MOS coefficient")
    c.add_argument("--manifest", required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate_args)

    s = sub.add_parser("synth", help="write a synthetic dataset")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--category", default=LabelCategory.DOS_AVAILABLE.value,
                   choices=[c.value for c in LabelCategory])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--a-true", type=float, default=0.15)
    s.add_argument("--levels", type=int, default=5)
    s.add_argument("--range-start", type=float, default=1.0)
    s.add_argument("--range-end", type=float, default=5.0)
    s.add_argument("--bins", action="store_true", help="bin-centre scores over [start, end]")
    s.add_argument("--image-size", type=int, default=96)
    s.add_argument("--name", default="synthetic")
    s.set_defaults(func=cmd_synth_args)

    r = sub.add_parser("report", help="render tables and plots from result JSON files")
    r.add_argument("--results", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_report_args)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except DosIqaError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, TypeError) as exc:
        err = ConfigError(str(exc)) if not isinstance(exc, OSError) else exc
        payload = err.to_dict() if isinstance(err, DosIqaError) else {
            "error": "io_error", "type": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        return EXIT_ERROR
    print(json.dumps(result, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
