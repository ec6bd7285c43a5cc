"""Graph-accuracy scores: SHD, area under the SHD-threshold curve, auPRC."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .trainer import threshold_and_repair

DEFAULT_THRESHOLD = 0.3
SHDC_RANGE = (0.2, 0.75)
SHDC_STEP = 0.05


class UndefinedMetricError(ValueError):
    """The metric has no meaning for the given input (e.g. an edgeless truth)."""


def _binary(B, name):
    B = np.asarray(B)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {B.shape}")
    return (B != 0).astype(int)


def shd(pred, truth):
    """Structural Hamming distance; a reversed edge counts once.

    Each unordered pair ``{i, j}`` contributes 1 when the two graphs disagree
    on it (missing, extra or reversed edge).
    """
    P, T = _binary(pred, "pred"), _binary(truth, "truth")
    if P.shape != T.shape:
        raise ValueError(f"size mismatch: {P.shape} vs {T.shape}")
    iu = np.triu_indices(P.shape[0], k=1)
    differs = (P[iu] != T[iu]) | (P.T[iu] != T.T[iu])
    return int(differs.sum())


def threshold_grid(lo=SHDC_RANGE[0], hi=SHDC_RANGE[1], step=SHDC_STEP):
    if not lo < hi:
        raise ValueError("need lo < hi")
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(np.floor((hi - lo) / step + 1e-9))
    grid = np.round(lo + step * np.arange(n + 1), 12)
    if grid[-1] < hi - 1e-12:
        grid = np.append(grid, hi)
    return grid


def shd_curve(A, truth, grid):
    return np.array([shd(threshold_and_repair(A, t), truth) for t in grid], dtype=float)


def au_shdc(A, truth, lo=SHDC_RANGE[0], hi=SHDC_RANGE[1], step=SHDC_STEP):
    """Trapezoid-rule area under SHD(threshold) over ``[lo, hi]``."""
    grid = threshold_grid(lo, hi, step)
    A = np.asarray(A, dtype=float)
    curve = shd_curve(A, _binary(truth, "truth"), grid)
    return float(np.trapezoid(curve, grid))


def au_prc(A, truth):
    """Area under the direction-aware precision-recall curve.

    All ordered off-diagonal pairs are ranked by ``|A|``.  Pairs with equal
    weight enter the ranking together as one step, so the area is
    independent of how ties are ordered; with every weight equal it is the
    edge prevalence.  Precision is held constant to the right of each step.
    """
    A = np.abs(np.asarray(A, dtype=float))
    T = _binary(truth, "truth")
    if A.shape != T.shape:
        raise ValueError(f"size mismatch: {A.shape} vs {T.shape}")
    off = ~np.eye(T.shape[0], dtype=bool)
    scores, labels = A[off], T[off]
    n_pos = labels.sum()
    if n_pos == 0:
        raise UndefinedMetricError("auPRC is undefined for a truth graph without edges")
    order = np.argsort(-scores, kind="stable")
    scores, labels = scores[order], labels[order]
    # last index of each block of tied scores
    ends = np.r_[np.nonzero(np.diff(scores))[0], scores.size - 1]
    tp = np.cumsum(labels)[ends]
    precision = tp / (ends + 1)
    recall = tp / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


@dataclass
class MetricsReport:
    shd_at_default: int
    shd_min_over_range: int
    au_shdc: float
    au_prc: float | None
    threshold_grid: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def evaluate(A, truth, threshold=DEFAULT_THRESHOLD, lo=SHDC_RANGE[0], hi=SHDC_RANGE[1], step=SHDC_STEP):
    """All metrics for one weighted adjacency against one truth graph.

    ``au_prc`` is ``None`` when the truth has no edges.
    """
    A = np.asarray(A, dtype=float)
    T = _binary(truth, "truth")
    if A.shape != T.shape:
        raise ValueError(f"dimension mismatch: adjacency {A.shape} vs truth {T.shape}")
    grid = threshold_grid(lo, hi, step)
    curve = shd_curve(A, T, grid)
    try:
        prc = au_prc(A, T)
    except UndefinedMetricError:
        prc = None
    return MetricsReport(
        shd_at_default=shd(threshold_and_repair(A, threshold), T),
        shd_min_over_range=int(curve.min()),
        au_shdc=float(np.trapezoid(curve, grid)),
        au_prc=prc,
        threshold_grid=[float(t) for t in grid],
    )
