"""Two-phase training loop.

Each outer round runs

1. **Phase I**: with the shared layer and mean heads frozen, fit the variance
   heads (``W3``, ``W30``) by minimising the full NLL, then freeze the
   resulting per-cell variances ``sigma2_hat``.
2. **Phase II**: with ``sigma2_hat`` fixed, fit the shared layer and mean heads
   (``W1``, ``W2``) by an augmented Lagrangian method under ``h(W1) = 0``.

Objectives handed to the optimizer use the per-sample NLL (divided by ``M``)
so that penalty weights and ALM constants do not depend on sample size.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .constraint import acyclicity_w1, group_l1_w1, weighted_adjacency
from .graphs import find_cycle
from .loss import nll, nll_fixed_sigma
from .model import (
    PHASE1,
    PHASE2,
    ModelParams,
    check_data,
    forward_std,
    grad_nll,
    init_params,
    self_column_mask,
)
from .numerics import LbfgsConfig, OptimizationError, lbfgs_minimize, make_rng

log = logging.getLogger(__name__)


@dataclass
class AlmConfig:
    h_tol: float = 1e-8
    progress_ratio: float = 0.25
    rho_factor: float = 10.0
    rho_init: float = 1.0
    rho_max: float = 1e16
    alpha_init: float = 0.0
    max_steps: int = 10

    def __post_init__(self):
        if not 0.0 < self.progress_ratio < 1.0:
            raise ValueError("progress_ratio must lie in (0, 1)")
        if self.rho_factor <= 1.0:
            raise ValueError("rho_factor must exceed 1")
        if self.rho_init <= 0:
            raise ValueError("rho_init must be positive")


@dataclass
class TrainConfig:
    outer_iters: int = 5
    alm: AlmConfig = field(default_factory=AlmConfig)
    lbfgs: LbfgsConfig = field(default_factory=LbfgsConfig)
    lambda1: float = 0.01
    threshold: float = 0.3
    seed: int = 0
    init_scale: float = 0.1
    m1: int = 10
    warmup: bool = True

    def __post_init__(self):
        if isinstance(self.alm, dict):
            self.alm = AlmConfig(**self.alm)
        if isinstance(self.lbfgs, dict):
            self.lbfgs = LbfgsConfig(**self.lbfgs)
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be >= 1")
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be non-negative")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class PhaseIIInfo:
    h: float
    rho: float
    alpha: float
    steps: int
    status: str  # "ok" or "constraint-not-met"


@dataclass
class FitResult:
    params: ModelParams
    adjacency: np.ndarray
    thresholded_dag: np.ndarray
    history: list = field(default_factory=list)


def alm_update(h_val, h_prev, rho, alpha, cfg):
    """One dual step: ``alpha += rho h``; grow ``rho`` unless ``h`` shrank enough."""
    alm = cfg.alm if isinstance(cfg, TrainConfig) else cfg
    if rho <= 0:
        raise ValueError("rho must be positive")
    alpha_new = alpha + rho * h_val
    rho_new = rho * alm.rho_factor if h_val > alm.progress_ratio * h_prev else rho
    return rho_new, alpha_new


def phase1(params, X, cfg):
    """Fit the variance heads with everything else frozen.

    Returns
    -------
    params : ModelParams
        Copy of the input with new ``W3``/``W30``.
    sigma2_hat : ndarray of shape (M, N)
    status : str
        Optimizer status, or ``"failed"`` if the objective broke down (the
        input parameters are then returned unchanged).
    """
    M, N = X.shape
    m1 = params.m1
    work = params.copy()

    def objective(v):
        work.W3 = v[: N * m1].reshape(N, m1)
        work.W30 = v[N * m1 :]
        value, g = grad_nll(work, X, mode=PHASE1)
        return value / M, np.concatenate([g.W3.ravel(), g.W30]) / M

    v0 = np.concatenate([params.W3.ravel(), params.W30])
    out = params.copy()
    try:
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            res = lbfgs_minimize(objective, v0, cfg.lbfgs)
    except OptimizationError as exc:
        log.warning("phase I failed: %s", exc)
        return out, forward_std(out, X) ** 2, "failed"
    out.W3 = res.x[: N * m1].reshape(N, m1).copy()
    out.W30 = res.x[N * m1 :].copy()
    return out, forward_std(out, X) ** 2, res.status


def _free_w1_mask(N, m1, edge_mask):
    free = self_column_mask(N, m1)
    if edge_mask is not None:
        allowed = np.asarray(edge_mask, dtype=bool)  # allowed[j, n]: j may feed n
        free &= allowed.T[:, None, :]
    return free


def phase2(params, X, sigma2_hat, cfg, edge_mask=None):
    """Fit ``W1``/``W2`` under the acyclicity constraint with fixed variances.

    The sub-problem minimised at each ALM step is::

        nll_fixed_sigma / M + lambda1 * sum(A) + rho/2 h^2 + alpha h

    Parameters
    ----------
    edge_mask : ndarray of shape (N, N), optional
        ``edge_mask[j, n]`` False pins every weight from ``j`` into ``n`` at 0.

    Returns
    -------
    params : ModelParams
    info : PhaseIIInfo
    """
    sigma2_hat = np.asarray(sigma2_hat, dtype=float)
    if sigma2_hat.shape != X.shape or not np.all(sigma2_hat > 0):
        raise ValueError("sigma2_hat must be a strictly positive M x N array")
    M, N = X.shape
    m1 = params.m1
    free = _free_w1_mask(N, m1, edge_mask)
    n_free = int(free.sum())
    lam = cfg.lambda1
    W1 = params.W1.copy()
    W1[~free] = 0.0
    work = params.copy()

    def unpack(v):
        W1 = np.zeros((N, m1, N))
        W1[free] = v[:n_free]
        return W1, v[n_free:].reshape(N, m1)

    def objective(v, rho, alpha):
        work.W1, work.W2 = unpack(v)
        data, g = grad_nll(work, X, mode=PHASE2, sigma2_hat=sigma2_hat)
        h, gh = acyclicity_w1(work.W1)
        pen, gpen = group_l1_w1(work.W1) if lam > 0 else (0.0, 0.0)
        value = data / M + lam * pen + 0.5 * rho * h * h + alpha * h
        gW1 = g.W1 / M + lam * gpen + (rho * h + alpha) * gh
        return value, np.concatenate([gW1[free], (g.W2 / M).ravel()])

    v = np.concatenate([W1[free], params.W2.ravel()])
    alm = cfg.alm
    rho, alpha = alm.rho_init, alm.alpha_init
    h_prev = math.inf
    h = acyclicity_w1(W1)[0]
    steps = 0
    for steps in range(1, alm.max_steps + 1):
        with np.errstate(over="ignore"):
            res = lbfgs_minimize(lambda u: objective(u, rho, alpha), v, cfg.lbfgs)
        v = res.x
        h = acyclicity_w1(unpack(v)[0])[0]
        if h <= alm.h_tol:
            break
        rho, alpha = alm_update(h, h_prev, rho, alpha, alm)
        h_prev = h
        if rho >= alm.rho_max:
            break
    W1, W2 = unpack(v)
    out = params.copy()
    out.W1, out.W2 = W1, W2.copy()
    status = "ok" if h <= alm.h_tol else "constraint-not-met"
    return out, PhaseIIInfo(h=float(h), rho=float(rho), alpha=float(alpha), steps=steps, status=status)


def threshold_and_repair(A, tau):
    """Binarise ``A > tau``, then drop the weakest edge of any remaining cycle until acyclic."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    A = np.asarray(A, dtype=float)
    B = (A > tau).astype(int)
    np.fill_diagonal(B, 0)
    while True:
        cycle = find_cycle(B)
        if cycle is None:
            return B
        i, j = min(cycle, key=lambda e: (A[e], e))
        B[i, j] = 0


def fit(X, cfg=None, edge_mask=None):
    """Learn a DAG from an ``M x N`` data matrix.

    Runs ``cfg.outer_iters`` rounds of Phase I followed by Phase II.  From
    the second round on, a Phase II result that would raise the NLL is
    discarded in favour of the Phase I parameters, so the recorded NLL never
    increases.
    """
    cfg = cfg or TrainConfig()
    X = check_data(X)
    M, N = X.shape
    if N < 2:
        raise ValueError("need at least 2 variables")
    rng = make_rng(cfg.seed)
    params = init_params(N, cfg.m1, cfg.init_scale, rng)
    params.W1[~_free_w1_mask(N, cfg.m1, edge_mask)] = 0.0
    history = []
    for t in range(cfg.outer_iters):
        if t == 0 and cfg.warmup:
            p1, status1 = params.copy(), "skipped"
            sigma2_hat = forward_std(params, X) ** 2
        else:
            p1, sigma2_hat, status1 = phase1(params, X, cfg)
        nll1 = nll(p1, X)
        p2, info = phase2(p1, X, sigma2_hat, cfg, edge_mask)
        nll2 = nll(p2, X)
        accepted = not history or nll2 <= history[-1]["nll"]
        params = p2 if accepted else p1
        record = {
            "iteration": t,
            "nll": nll2 if accepted else nll1,
            "nll_phase1": nll1,
            "nll_fixed_sigma": nll_fixed_sigma(p2, X, sigma2_hat),
            "h": info.h if accepted else acyclicity_w1(p1.W1)[0],
            "rho": info.rho,
            "alpha": info.alpha,
            "alm_steps": info.steps,
            "phase1_status": status1,
            "phase2_status": info.status,
            "accepted": accepted,
        }
        history.append(record)
        log.info("round %d: nll=%.6f h=%.3e rho=%.1e accepted=%s", t, record["nll"], record["h"], info.rho, accepted)
    A = weighted_adjacency(params)
    return FitResult(params=params, adjacency=A, thresholded_dag=threshold_and_repair(A, cfg.threshold), history=history)
