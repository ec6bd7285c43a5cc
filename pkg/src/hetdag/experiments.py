"""Multi-trial plumbing shared by the command line: generation, benchmarking, gradient checks."""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import io
from .datagen import REGIMES, generate, sample_er_dag, sample_sem
from .metrics import SHDC_RANGE, SHDC_STEP, evaluate
from .model import ModelParams, grad_nll, self_column_mask
from .numerics import finite_diff_grad, make_rng
from .trainer import TrainConfig, fit

log = logging.getLogger(__name__)

BLOCKS = ("W1", "W2", "W3", "W30")


@dataclass
class GraphSpec:
    n_nodes: int = 5
    k: float = 1.0
    regime: str = "hetero"
    n_samples: int = 1000
    hidden: int = 100
    output_scale: float = 1.0
    hetero_scale: float = 1.0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be >= 2")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def simulate(self, seed):
        rng = make_rng(seed)
        dag = sample_er_dag(self.n_nodes, self.k, rng)
        gt = sample_sem(
            dag, self.regime, rng, hidden=self.hidden,
            output_scale=self.output_scale, hetero_scale=self.hetero_scale,
        )
        return gt, generate(gt, self.n_samples, rng)


def trial_seeds(base_seed, trials):
    """Per-trial seeds spawned deterministically from one base seed."""
    if trials <= 0:
        return []
    state = np.random.SeedSequence(int(base_seed)).generate_state(trials, dtype=np.uint32)
    return [int(s) for s in state]


def write_trial(out_dir, spec, seed):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gt, X = spec.simulate(seed)
    io.write_matrix(out_dir / "data.csv", X)
    io.write_edges(out_dir / "truth.edges", gt.dag)
    meta = {"seed": seed, "spec": asdict(spec), **gt.metadata()}
    io.write_json(out_dir / "meta.json", meta)
    return out_dir


def generate_trials(spec, out_dir, trials, base_seed=0):
    """Write ``trial_000``, ``trial_001``, ... under ``out_dir``; returns their paths."""
    return [
        write_trial(Path(out_dir) / f"trial_{i:03d}", spec, seed)
        for i, seed in enumerate(trial_seeds(base_seed, trials))
    ]


# ---------------------------------------------------------------- benchmark

BENCH_METRICS = ("shd_at_default", "shd_min_over_range", "au_shdc", "au_prc")


def _fit_summary(result):
    last = result.history[-1]
    return {
        "final_nll": last["nll"],
        "final_h": last["h"],
        "n_edges": int(result.thresholded_dag.sum()),
        "phase2_status": [h["phase2_status"] for h in result.history],
        "nll_history": [h["nll"] for h in result.history],
    }


def run_seed(spec, cfg, seed, shdc_range=SHDC_RANGE, shdc_step=SHDC_STEP):
    """Generate, fit and score one seed.  Timing is returned separately."""
    t0 = time.perf_counter()
    gt, X = spec.simulate(seed)
    res = fit(X, TrainConfig.from_dict({**cfg.to_dict(), "seed": seed}))
    report = evaluate(res.adjacency, gt.dag, cfg.threshold, shdc_range[0], shdc_range[1], shdc_step)
    entry = {
        "seed": seed,
        "status": "ok",
        "fit": _fit_summary(res),
        "metrics": asdict(report),
    }
    return entry, time.perf_counter() - t0


def _safe_run(args):
    spec, cfg, seed, shdc_range, shdc_step = args
    try:
        return run_seed(spec, cfg, seed, shdc_range, shdc_step)
    except Exception as exc:  # recorded, never fatal for the whole run
        log.warning("seed %s failed: %s", seed, exc)
        return {"seed": seed, "status": "failed", "error": f"{type(exc).__name__}: {exc}"}, math.nan


def mean_se(values):
    """Mean and standard error; the error is ``None`` for fewer than two values."""
    values = [v for v in values if v is not None]
    if not values:
        return {"mean": None, "se": None, "n": 0}
    arr = np.asarray(values, dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else None
    return {"mean": float(arr.mean()), "se": se, "n": int(arr.size)}


def aggregate(entries):
    ok = [e for e in entries if e["status"] == "ok"]
    return {m: mean_se([e["metrics"][m] for e in ok]) for m in BENCH_METRICS}


def bench(spec, cfg, seeds, shdc_range=SHDC_RANGE, shdc_step=SHDC_STEP, jobs=1):
    """Run every seed and assemble a run record.

    Everything except the ``"meta"`` entry (timestamps, wall-clock) is a
    deterministic function of the inputs.
    """
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    work = [(spec, cfg, int(s), tuple(shdc_range), shdc_step) for s in seeds]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_safe_run, work))
    else:
        outcomes = [_safe_run(w) for w in work]
    entries = [e for e, _ in outcomes]
    return {
        "config": {"graph": asdict(spec), "train": cfg.to_dict(), "seeds": [int(s) for s in seeds],
                   "shdc_range": list(shdc_range), "shdc_step": shdc_step},
        "seeds": entries,
        "n_failed": sum(e["status"] != "ok" for e in entries),
        "aggregate": aggregate(entries),
        "meta": {
            "started": started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "wall_clock_total": time.perf_counter() - t0,
            "wall_clock_per_seed": {str(e["seed"]): dt for e, dt in outcomes},
        },
    }


# ----------------------------------------------------------- gradient check

def _kink_free(params, X, gap=1e-4):
    S = 1.0 / (1.0 + np.exp(-np.einsum("mj,nkj->mnk", X, params.W1)))
    U = np.einsum("mnk,nk->mn", S, params.W3)
    return bool(np.all(np.abs(U) >= gap))


def _draw_instance(N, M, rng, max_tries=100):
    for _ in range(max_tries):
        X = rng.standard_normal((M, N))
        W1 = rng.uniform(-1, 1, (N, 10, N)) * self_column_mask(N, 10)
        p = ModelParams(W1, rng.uniform(-1, 1, (N, 10)), rng.uniform(-1, 1, (N, 10)), rng.uniform(-1, 0, N))
        if _kink_free(p, X):
            return p, X
    raise RuntimeError("could not draw a parameter point away from the ReLU kink")


def gradient_check(N=3, M=20, seed=0, eps=1e-5, corrupt=None):
    """Compare the analytic full-mode gradient with central differences.

    Returns the largest relative error per parameter block, measured as
    ``max|analytic - numeric| / max(max|numeric|, 1e-12)``.  Self-columns of
    ``W1`` are structural zeros and are left out.  ``corrupt`` names a block
    whose analytic gradient is deliberately perturbed (test hook).
    """
    if corrupt is not None and corrupt not in BLOCKS:
        raise ValueError(f"unknown block {corrupt!r}; expected one of {BLOCKS}")
    params, X = _draw_instance(N, M, make_rng(seed))
    m1 = params.m1
    _, g = grad_nll(params, X)
    if corrupt is not None:
        block = getattr(g, corrupt)
        block += 1e-2 * (np.abs(block).max() + 1.0)
    v0 = params.to_vector()

    def f(v):
        p = ModelParams.from_vector(v, N, m1)
        return grad_nll(p, X)[0]

    numeric = ModelParams.from_vector(finite_diff_grad(f, v0, eps), N, m1)
    keep = {"W1": self_column_mask(N, m1)}
    errors = {}
    for name in BLOCKS:
        a, n = np.ravel(getattr(g, name)), np.ravel(getattr(numeric, name))
        if name in keep:
            a, n = a[keep[name].ravel()], n[keep[name].ravel()]
        errors[name] = float(np.max(np.abs(a - n)) / max(np.max(np.abs(n)), 1e-12))
    return errors
