"""Command-line entry point: ``hetdag <command> ...``.

Every command writes ``resolved-config.json`` into its output directory.
Without ``--out`` the directory is ``$HETDAG_OUTPUT_ROOT/<command>`` (or
``./hetdag-runs/<command>`` when the variable is unset).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io
from .bivariate import DEFAULT_MARGIN, accuracy, decide_direction, pair_config
from .experiments import BLOCKS, GraphSpec, bench, generate_trials, gradient_check, trial_seeds
from .metrics import DEFAULT_THRESHOLD, SHDC_RANGE, SHDC_STEP, evaluate
from .trainer import TrainConfig, fit

OUTPUT_ROOT_ENV = "HETDAG_OUTPUT_ROOT"
GRADCHECK_LIMIT = 1e-4

log = logging.getLogger("hetdag")


class CommandError(Exception):
    """User-facing failure; printed without a traceback."""


def output_dir(args):
    if args.out is not None:
        path = Path(args.out)
    else:
        path = Path(os.environ.get(OUTPUT_ROOT_ENV, "hetdag-runs")) / args.command
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CommandError(f"cannot create output directory {path}: {exc.strerror}") from exc
    return path


def snapshot(out, command, **resolved):
    io.write_json(out / "resolved-config.json", {"command": command, **resolved})


def load_train_config(path, args):
    """TrainConfig from an optional JSON file, then explicit flag overrides."""
    d = {}
    if path is not None:
        d = io.read_json(path)
        if not isinstance(d, dict):
            raise CommandError(f"{path}: expected a JSON object")
    for key in ("seed", "lambda1", "threshold", "outer_iters"):
        value = getattr(args, key, None)
        if value is not None:
            d[key] = value
    try:
        return TrainConfig.from_dict(d)
    except TypeError as exc:
        raise CommandError(f"bad training config: {exc}") from exc


def graph_spec(args):
    return GraphSpec(n_nodes=args.nodes, k=args.k, regime=args.regime, n_samples=args.samples,
                     output_scale=args.output_scale, hetero_scale=args.hetero_scale)


# ------------------------------------------------------------------ commands

def cmd_generate(args):
    spec = graph_spec(args)
    out = output_dir(args)
    snapshot(out, "generate", graph=asdict(spec), trials=args.trials, seed=args.seed,
             trial_seeds=trial_seeds(args.seed, args.trials))
    if args.trials <= 0:
        log.warning("trials=%d: nothing to generate", args.trials)
        return 0
    dirs = generate_trials(spec, out, args.trials, args.seed)
    print(f"wrote {len(dirs)} trial(s) under {out}")
    return 0


def cmd_fit(args):
    X, header = io.read_matrix(args.data)
    if X.shape[1] < 2:
        raise CommandError(f"{args.data}: need at least 2 variables, found {X.shape[1]}")
    if X.shape[0] < 2:
        raise CommandError(f"{args.data}: need at least 2 rows, found {X.shape[0]}")
    cfg = load_train_config(args.config, args)
    if args.standardize:
        sd = X.std(axis=0)
        X = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    out = output_dir(args)
    snapshot(out, "fit", data=str(args.data), standardize=args.standardize, train=cfg.to_dict())
    res = fit(X, cfg)
    io.write_matrix(out / "adjacency.csv", res.adjacency)
    io.write_edges(out / "dag.edges", res.thresholded_dag)
    io.write_json(out / "history.json", {"columns": header, "history": res.history})
    print(f"{int(res.thresholded_dag.sum())} edge(s); results in {out}")
    return 0


def cmd_eval(args):
    A, _ = io.read_matrix(args.adjacency)
    if A.shape[0] != A.shape[1]:
        raise CommandError(f"{args.adjacency}: adjacency must be square, got {A.shape[0]}x{A.shape[1]}")
    T = io.read_edges(args.truth)
    if T.shape[0] > A.shape[0]:
        raise CommandError(f"dimension mismatch: truth mentions {T.shape[0]} nodes, adjacency has {A.shape[0]}")
    T = io.read_edges(args.truth, n_nodes=A.shape[0])
    out = output_dir(args)
    snapshot(out, "eval", adjacency=str(args.adjacency), truth=str(args.truth),
             threshold=args.threshold, shdc_range=[args.lo, args.hi], shdc_step=args.step)
    report = evaluate(A, T, args.threshold, args.lo, args.hi, args.step)
    (out / "metrics.json").write_text(report.to_json() + "\n")
    print(report.to_json())
    return 0


def cmd_gradcheck(args):
    if not 1 <= args.nodes <= 6 or not 1 <= args.samples <= 50:
        raise CommandError("gradcheck is meant for small problems: nodes <= 6, samples <= 50")
    out = output_dir(args)
    snapshot(out, "gradcheck", nodes=args.nodes, samples=args.samples, seed=args.seed,
             limit=GRADCHECK_LIMIT, inject_fault=args.inject_fault)
    errors = gradient_check(args.nodes, args.samples, args.seed, corrupt=args.inject_fault)
    ok = all(e <= GRADCHECK_LIMIT for e in errors.values())
    for name in BLOCKS:
        print(f"{name:4s} max relative error {errors[name]:.3e}")
    print("PASS" if ok else f"FAIL: some block exceeds {GRADCHECK_LIMIT:g}")
    io.write_json(out / "gradcheck.json", {"max_relative_error": errors, "passed": ok})
    return 0 if ok else 1


def _pair_files(pair_dir):
    files = sorted(p for p in Path(pair_dir).glob("*.csv"))
    if not files:
        raise CommandError(f"{pair_dir}: no .csv pair files found")
    return files


def cmd_pairs(args):
    files = _pair_files(args.pair_dir)
    labels = {}
    label_path = Path(args.labels) if args.labels else Path(args.pair_dir) / "labels.json"
    if label_path.exists():
        labels = io.read_json(label_path)
    elif args.labels:
        raise CommandError(f"{label_path}: no such file")
    cfg = pair_config(seed=args.seed)
    out = output_dir(args)
    snapshot(out, "pairs", pair_dir=str(args.pair_dir), labels=str(label_path) if labels else None,
             margin=args.margin, train=cfg.to_dict())
    decisions = {}
    for path in files:
        XY, _ = io.read_matrix(path)
        if XY.shape[1] != 2:
            raise CommandError(f"{path}: a pair file needs exactly 2 columns, found {XY.shape[1]}")
        d = decide_direction(XY, cfg, args.margin)
        decisions[path.stem] = d.to_dict()
        print(f"{path.stem}: {d.decision} (gap {d.gap:.3f}, margin {d.margin:.3f})")
    acc = accuracy({k: v["decision"] for k, v in decisions.items()}, labels)
    if acc is not None:
        print(f"accuracy {acc:.3f}")
    io.write_json(out / "pairs.json", {"pairs": decisions, "accuracy": acc})
    return 0


def cmd_bench(args):
    spec = graph_spec(args)
    cfg = load_train_config(args.config, args)
    seeds = args.seeds if args.seeds else list(range(args.n_seeds))
    out = output_dir(args)
    snapshot(out, "bench", graph=asdict(spec), train=cfg.to_dict(), seeds=seeds,
             shdc_range=[args.lo, args.hi], shdc_step=args.step)
    record = bench(spec, cfg, seeds, (args.lo, args.hi), args.step, jobs=args.jobs)
    io.write_json(out / "run-record.json", record)
    agg = record["aggregate"]
    for m, s in agg.items():
        se = "n/a" if s["se"] is None else f"{s['se']:.3f}"
        mean = "n/a" if s["mean"] is None else f"{s['mean']:.3f}"
        print(f"{m}: {mean} +- {se} (n={s['n']})")
    if record["n_failed"]:
        print(f"{record['n_failed']} seed(s) failed; see run-record.json")
    return 0


# -------------------------------------------------------------------- parser

def _add_graph_args(p):
    p.add_argument("--nodes", type=int, default=5)
    p.add_argument("--k", type=float, default=1.0, help="expected edges per node")
    p.add_argument("--regime", choices=["homo_ev", "homo_nv", "hetero"], default="hetero")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--hetero-scale", type=float, default=1.0)
    p.add_argument("--output-scale", type=float, default=1.0,
                   help="multiplier on the ground-truth output-layer weights (e.g. 0.01 for 1/hidden)")


def _add_train_args(p):
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--outer-iters", dest="outer_iters", type=int)


def _add_range_args(p):
    p.add_argument("--lo", type=float, default=SHDC_RANGE[0])
    p.add_argument("--hi", type=float, default=SHDC_RANGE[1])
    p.add_argument("--step", type=float, default=SHDC_STEP)


def build_parser():
    parser = argparse.ArgumentParser(prog="hetdag", description="DAG learning under heteroscedastic noise")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate benchmark trials")
    _add_graph_args(p)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="learn a DAG from a CSV file")
    p.add_argument("data")
    _add_train_args(p)
    p.add_argument("--standardize", action="store_true", help="z-score columns before fitting")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score a weighted adjacency against a true edge list")
    p.add_argument("adjacency")
    p.add_argument("truth")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    _add_range_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="compare analytic and numeric NLL gradients")
    p.add_argument("--nodes", type=int, default=3)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", choices=BLOCKS, help=argparse.SUPPRESS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("pairs", help="infer cause-effect direction for 2-column CSV files")
    p.add_argument("pair_dir")
    p.add_argument("--labels", help="JSON mapping file stem to 'x->y' or 'y->x' (default: PAIR_DIR/labels.json)")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN, help="per-row NLL indecision band")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("bench", help="generate, fit and score over several seeds")
    _add_graph_args(p)
    _add_train_args(p)
    _add_range_args(p)
    p.add_argument("--seeds", type=int, nargs="*")
    p.add_argument("--n-seeds", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with np.errstate(all="ignore"):
            return args.func(args)
    except (CommandError, io.ParseError, OSError, ValueError) as exc:
        print(f"hetdag {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
