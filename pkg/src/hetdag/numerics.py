"""Dense numeric substrate: matrix exponential, L-BFGS, gradient oracle, RNG.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# Taylor degree for the scaled matrix; with ||M/2^s||_inf <= 0.5 the
# truncation error is below 0.5**19 / 19! ~ 1e-23.
_TAYLOR_DEGREE = 18

CONVERGED = "converged"
MAX_ITERS = "max_iters"
LINE_SEARCH_FAILURE = "line_search_failure"


class DimensionError(ValueError):
    """Raised when an operand does not have the required shape."""


class OptimizationError(RuntimeError):
    """Raised when the objective or gradient becomes non-finite."""


def as_matrix(M, name="matrix"):
    """Validate ``M`` as a finite 2-D float array and return it."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def _check_square(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    return M


def mat_exp(M):
    """Matrix exponential by scaling and squaring around a Taylor core.

    The matrix is scaled by ``2**-s`` until its infinity norm is at most 0.5,
    the truncated series is summed with Horner's rule, and the result is
    squared ``s`` times.

    Parameters
    ----------
    M : array_like of shape (n, n)

    Returns
    -------
    ndarray of shape (n, n)
    """
    M = _check_square(M)
    n = M.shape[0]
    norm = np.abs(M).sum(axis=1).max()
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    A = M / (2.0 ** s)
    eye = np.eye(n)
    E = eye.copy()
    for k in range(_TAYLOR_DEGREE, 0, -1):
        E = eye + (A @ E) / k
    for _ in range(s):
        E = E @ E
    return E


def trace(M):
    """Sum of the diagonal of a square matrix."""
    M = _check_square(M)
    return float(np.trace(M))


def finite_diff_grad(f, x, eps=1e-5):
    """Central-difference gradient of a scalar function.

    Component ``i`` is ``(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.array(x, dtype=float, copy=True)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    g = np.empty_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        xi = flat[i]
        flat[i] = xi + eps
        fp = f(x[0] if scalar else x)
        flat[i] = xi - eps
        fm = f(x[0] if scalar else x)
        flat[i] = xi
        gflat[i] = (fp - fm) / (2.0 * eps)
    return g[0] if scalar else g


def make_rng(seed):
    """Seeded generator (PCG64 through ``SeedSequence``); one owner per stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


@dataclass
class LbfgsConfig:
    """Settings for :func:`lbfgs_minimize`."""

    memory: int = 10
    max_iters: int = 200
    grad_tol: float = 1e-6
    ftol: float = 2.220446049250313e-09
    c1: float = 1e-4
    c2: float = 0.9
    max_ls: int = 40

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ValueError("line search needs 0 < c1 < c2 < 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")


@dataclass
class LbfgsResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    status: str
    n_iters: int
    n_evals: int
    message: str = ""
    grad_norm: float = field(init=False)

    def __post_init__(self):
        self.grad_norm = float(np.max(np.abs(self.grad))) if self.grad.size else 0.0


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic through (a, fa, ga) and (b, fb, gb), or None."""
    if a == b:
        return None
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    rad = d1 * d1 - ga * gb
    if rad < 0:
        return None
    d2 = math.copysign(math.sqrt(rad), b - a)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return None
    t = b - (b - a) * (gb + d2 - d1) / denom
    if not math.isfinite(t):
        return None
    return t


def _strong_wolfe(phi, f0, g0, step, c1, c2, max_ls):
    """Bracketing / zoom line search for the strong Wolfe conditions.

    ``phi(t)`` returns ``(value, directional_derivative, payload)``.
    Returns ``(t, value, payload, ok)``; if the search fails, the best
    point with sufficient decrease seen so far is returned with ``ok=False``
    (or ``t=0`` when there is none).
    """
    best = (0.0, f0, None)
    evals = 0

    def record(t, ft, pt):
        nonlocal best
        if ft < best[1] and ft <= f0 + c1 * t * g0:
            best = (t, ft, pt)

    t_prev, f_prev, g_prev = 0.0, f0, g0
    t = step
    lo = hi = None
    while evals < max_ls:
        ft, gt, pt = phi(t)
        evals += 1
        if not math.isfinite(ft):
            # overshoot into a non-finite region: shrink and keep bracketing
            hi = (t, math.inf, math.nan)
            lo = (t_prev, f_prev, g_prev)
            break
        record(t, ft, pt)
        if ft > f0 + c1 * t * g0 or (evals > 1 and ft >= f_prev):
            lo, hi = (t_prev, f_prev, g_prev), (t, ft, gt)
            break
        if abs(gt) <= -c2 * g0:
            return t, ft, pt, True
        if gt >= 0:
            lo, hi = (t, ft, gt), (t_prev, f_prev, g_prev)
            break
        t_prev, f_prev, g_prev = t, ft, gt
        t = 2.0 * t
    else:
        return best[0], best[1], best[2], False

    while evals < max_ls:
        (a, fa, ga), (b, fb, gb) = lo, hi
        width = abs(b - a)
        cand = None
        if math.isfinite(fb) and math.isfinite(gb):
            cand = _cubic_min(a, fa, ga, b, fb, gb)
        lo_end, hi_end = min(a, b), max(a, b)
        if cand is None or not (lo_end + 0.1 * width <= cand <= hi_end - 0.1 * width):
            cand = 0.5 * (a + b)
        if width < 1e-16 * max(1.0, hi_end):
            break
        ft, gt, pt = phi(cand)
        evals += 1
        if not math.isfinite(ft):
            hi = (cand, math.inf, math.nan)
            continue
        record(cand, ft, pt)
        if ft > f0 + c1 * cand * g0 or ft >= fa:
            hi = (cand, ft, gt)
        else:
            if abs(gt) <= -c2 * g0:
                return cand, ft, pt, True
            if gt * (b - a) >= 0:
                hi = lo
            lo = (cand, ft, gt)
    return best[0], best[1], best[2], False


def lbfgs_minimize(f: Callable, x0, cfg: LbfgsConfig | None = None) -> LbfgsResult:
    """Minimize ``f`` with limited-memory BFGS and a strong-Wolfe line search.

    Parameters
    ----------
    f : callable
        ``f(x) -> (value, gradient)``.
    x0 : array_like
        Flat starting point.
    cfg : LbfgsConfig, optional

    Returns
    -------
    LbfgsResult
        ``status`` is one of ``"converged"`` (gradient infinity norm at most
        ``grad_tol``, or relative decrease of one step at most ``ftol``),
        ``"max_iters"`` or ``"line_search_failure"``.  The
        returned value never exceeds ``f(x0)``.

    Raises
    ------
    OptimizationError
        If the objective or gradient is non-finite at an iterate.
    """
    cfg = cfg or LbfgsConfig()
    x = np.array(x0, dtype=float, copy=True).reshape(-1)
    fx, gx = f(x)
    fx = float(fx)
    gx = np.asarray(gx, dtype=float).reshape(-1)
    n_evals = 1
    if not math.isfinite(fx) or not np.all(np.isfinite(gx)):
        raise OptimizationError("non-finite objective or gradient at iteration 0")
    if gx.shape != x.shape:
        raise DimensionError(f"gradient has shape {gx.shape}, expected {x.shape}")

    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    status = MAX_ITERS
    message = ""
    it = 0
    for it in range(cfg.max_iters + 1):
        if np.max(np.abs(gx), initial=0.0) <= cfg.grad_tol:
            status, message = CONVERGED, "gradient norm below grad_tol"
            break
        if it == cfg.max_iters:
            status = MAX_ITERS
            break

        # two-loop recursion
        q = -gx
        alphas = []
        for s, y, r in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = r * s.dot(q)
            alphas.append(a)
            q = q - a * y
        if s_hist:
            gamma = s_hist[-1].dot(y_hist[-1]) / y_hist[-1].dot(y_hist[-1])
            q = gamma * q
        for (s, y, r), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = r * y.dot(q)
            q = q + (a - b) * s
        d = q
        dg0 = d.dot(gx)
        if dg0 >= 0:
            # lost descent; restart from steepest descent
            s_hist.clear()
            y_hist.clear()
            rho_hist.clear()
            d = -gx
            dg0 = d.dot(gx)
        step = 1.0 if s_hist else min(1.0, 1.0 / np.linalg.norm(gx))

        def phi(t, x=x, d=d):
            nonlocal n_evals
            xt = x + t * d
            ft, gt = f(xt)
            n_evals += 1
            ft = float(ft)
            gt = np.asarray(gt, dtype=float).reshape(-1)
            if not math.isfinite(ft) or not np.all(np.isfinite(gt)):
                return math.inf, math.nan, None
            return ft, float(gt.dot(d)), (xt, gt)

        # a step with sufficient decrease but no curvature match is still taken
        t, ft, payload, _ = _strong_wolfe(phi, fx, dg0, step, cfg.c1, cfg.c2, cfg.max_ls)
        if payload is None:
            status, message = LINE_SEARCH_FAILURE, "no step with sufficient decrease"
            break
        x_new, g_new = payload
        s = x_new - x
        y = g_new - gx
        sy = s.dot(y)
        f_old = fx
        x, fx, gx = x_new, ft, g_new
        if f_old - fx <= cfg.ftol * max(abs(f_old), abs(fx), 1.0):
            status, message = CONVERGED, "relative decrease below ftol"
            it += 1
            break
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > cfg.memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
    return LbfgsResult(x=x, fun=fx, grad=gx, status=status, n_iters=it, n_evals=n_evals, message=message)
