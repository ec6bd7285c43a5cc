"""Synthetic benchmarks: Erdos-Renyi DAGs and random-MLP structural equation models.

Three noise regimes are supported:

``homo_ev``  ``X_n = f_n(pa) + Z_n``,          ``Z_n ~ N(0, 1)``
``homo_nv``  ``X_n = f_n(pa) + Z_n``,          ``Z_n ~ N(0, s_n)``, ``s_n ~ U[0.5, 2]``
``hetero``   ``X_n = f_n(pa) + exp(g_n(pa)) Z_n``, ``Z_n ~ N(0, 1)``

``f_n`` and ``g_n`` are one-hidden-layer sigmoid perceptrons over the parents.
``g_n`` is squashed with ``tanh`` and multiplied by ``hetero_scale`` so the
noise scale stays within ``exp(+-hetero_scale)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .graphs import parents, topological_order
from .numerics import make_rng

REGIMES = ("homo_ev", "homo_nv", "hetero")
WEIGHT_LOW, WEIGHT_HIGH = 0.5, 2.0


def sample_er_dag(N, k, rng):
    """ER graph with ``k N`` expected edges, oriented along a random permutation.

    Each unordered pair is connected with probability ``2 k / (N - 1)``
    (capped at 1).
    """
    if N < 2:
        raise ValueError("need at least 2 nodes")
    if k <= 0:
        raise ValueError("k must be positive")
    p = min(1.0, 2.0 * k * N / (N * (N - 1)))
    upper = np.triu(rng.random((N, N)) < p, k=1)
    perm = rng.permutation(N)
    B = np.zeros((N, N), dtype=int)
    rows, cols = np.nonzero(upper)
    B[perm[rows], perm[cols]] = 1
    return B


def sample_weights(rng, size):
    """Draws from ``U([-2, -0.5] U [0.5, 2])``."""
    mag = rng.uniform(WEIGHT_LOW, WEIGHT_HIGH, size=size)
    sign = rng.choice([-1.0, 1.0], size=size)
    return mag * sign


@dataclass
class RandomMLP:
    """``x -> W_out @ sigmoid(W_in @ x)``; ``W_in`` is nonzero only on parent columns."""

    W_in: np.ndarray  # (hidden, N)
    W_out: np.ndarray  # (hidden,)

    def __call__(self, X):
        return expit(X @ self.W_in.T) @ self.W_out


@dataclass
class GroundTruth:
    dag: np.ndarray
    regime: str
    mean_fns: list = field(default_factory=list)  # RandomMLP or None (parentless)
    var_fns: list | None = None
    node_variances: np.ndarray | None = None
    hetero_scale: float = 1.0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if topological_order(self.dag) is None:
            raise ValueError("ground-truth graph has a cycle")
        if (self.node_variances is not None) != (self.regime == "homo_nv"):
            raise ValueError("node_variances must be given exactly for the homo_nv regime")
        if (self.var_fns is not None) != (self.regime == "hetero"):
            raise ValueError("var_fns must be given exactly for the hetero regime")

    @property
    def n_nodes(self):
        return self.dag.shape[0]

    def mean(self, n, X):
        fn = self.mean_fns[n]
        return np.zeros(X.shape[0]) if fn is None else fn(X)

    def log_scale(self, n, X):
        """``g_n``: log of the noise standard deviation of node ``n`` (hetero only)."""
        if self.var_fns is None or self.var_fns[n] is None:
            return np.zeros(X.shape[0])
        return self.hetero_scale * np.tanh(self.var_fns[n](X))

    def metadata(self):
        return {
            "n_nodes": int(self.n_nodes),
            "regime": self.regime,
            "n_edges": int(self.dag.sum()),
            "hetero_scale": self.hetero_scale if self.regime == "hetero" else None,
            "node_variances": None if self.node_variances is None else [float(v) for v in self.node_variances],
        }


def _random_mlp(pa, N, hidden, rng, output_scale):
    W_in = np.zeros((hidden, N))
    W_in[:, pa] = sample_weights(rng, (hidden, len(pa)))
    W_out = sample_weights(rng, hidden) * output_scale
    return RandomMLP(W_in, W_out)


def sample_sem(dag, regime="hetero", rng=None, hidden=100, output_scale=1.0, hetero_scale=1.0):
    """Random ground-truth SEM over ``dag``.

    Parentless nodes get ``f_n = 0`` (and ``g_n = 0``).  ``output_scale``
    multiplies the output-layer weights; ``1 / hidden`` gives a
    variance-preserving variant of the default unscaled draw.
    """
    rng = np.random.default_rng() if rng is None else rng
    dag = (np.asarray(dag) != 0).astype(int)
    N = dag.shape[0]
    if topological_order(dag) is None:
        raise ValueError("graph has a cycle")
    mean_fns, var_fns = [], [] if regime == "hetero" else None
    for n in range(N):
        pa = parents(dag, n)
        if len(pa) == 0:
            mean_fns.append(None)
            if var_fns is not None:
                var_fns.append(None)
            continue
        mean_fns.append(_random_mlp(pa, N, hidden, rng, output_scale))
        if var_fns is not None:
            var_fns.append(_random_mlp(pa, N, hidden, rng, output_scale))
    node_variances = rng.uniform(0.5, 2.0, size=N) if regime == "homo_nv" else None
    return GroundTruth(dag, regime, mean_fns, var_fns, node_variances, hetero_scale)


def generate(gt, M, rng):
    """Ancestral sampling of ``M`` rows from ``gt``; returns an ``M x N`` array."""
    if M < 1:
        raise ValueError("M must be >= 1")
    N = gt.n_nodes
    Z = rng.standard_normal((M, N))
    X = np.zeros((M, N))
    for n in topological_order(gt.dag):
        if gt.regime == "homo_ev":
            noise = Z[:, n]
        elif gt.regime == "homo_nv":
            noise = np.sqrt(gt.node_variances[n]) * Z[:, n]
        else:
            noise = np.exp(gt.log_scale(n, X)) * Z[:, n]
        X[:, n] = gt.mean(n, X) + noise
    return X


def simulate(N, k, regime, M, seed, **sem_kw):
    """Convenience wrapper: graph, SEM and data from one integer seed."""
    rng = make_rng(seed)
    dag = sample_er_dag(N, k, rng)
    gt = sample_sem(dag, regime, rng, **sem_kw)
    return gt, generate(gt, M, rng)
