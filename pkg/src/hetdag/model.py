"""Heteroscedastic SEM: per-node two-layer perceptrons with a shared first layer.

For node ``n`` and observation row ``x``::

    hidden = sigmoid(W1[n] @ x)                     # shape (m1,)
    mean   = W2[n] @ hidden
    std    = relu(W3[n] @ hidden) + exp(W30[n])

``W1[n][:, n]`` is held at zero so a node never feeds itself.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.utils.validation import check_array

from .numerics import DimensionError

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

FULL = "full"
PHASE1 = "phase1"
PHASE2 = "phase2"


@dataclass
class NodeParams:
    """Read-only view of one node's weights."""

    W1: np.ndarray  # (m1, N)
    W2: np.ndarray  # (m1,)
    W3: np.ndarray  # (m1,)
    W30: float


@dataclass
class ModelParams:
    """Stacked weights for all ``N`` nodes.

    Attributes
    ----------
    W1 : ndarray of shape (N, m1, N)
        Shared first layer; ``W1[n, k, j]`` connects input ``j`` to hidden
        unit ``k`` of node ``n``.
    W2 : ndarray of shape (N, m1)
        Mean heads.
    W3 : ndarray of shape (N, m1)
        Variance heads.
    W30 : ndarray of shape (N,)
        Log of each node's standard-deviation floor.
    """

    W1: np.ndarray
    W2: np.ndarray
    W3: np.ndarray
    W30: np.ndarray

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=float)
        self.W2 = np.asarray(self.W2, dtype=float)
        self.W3 = np.asarray(self.W3, dtype=float)
        self.W30 = np.asarray(self.W30, dtype=float).reshape(-1)
        N, m1, N2 = self.W1.shape
        if N2 != N or self.W2.shape != (N, m1) or self.W3.shape != (N, m1) or self.W30.shape != (N,):
            raise DimensionError("inconsistent parameter block shapes")

    @property
    def n_nodes(self):
        return self.W1.shape[0]

    @property
    def m1(self):
        return self.W1.shape[1]

    def node(self, n):
        return NodeParams(self.W1[n], self.W2[n], self.W3[n], float(self.W30[n]))

    def copy(self):
        return ModelParams(self.W1.copy(), self.W2.copy(), self.W3.copy(), self.W30.copy())

    @classmethod
    def zeros(cls, N, m1=10):
        return cls(np.zeros((N, m1, N)), np.zeros((N, m1)), np.zeros((N, m1)), np.zeros(N))

    def to_vector(self):
        """Flatten node by node: ``W1[n]`` row-major, ``W2[n]``, ``W3[n]``, ``W30[n]``."""
        N = self.n_nodes
        return np.concatenate(
            [self.W1.reshape(N, -1), self.W2, self.W3, self.W30[:, None]], axis=1
        ).ravel()

    @classmethod
    def from_vector(cls, v, N, m1):
        blocks = np.asarray(v, dtype=float).reshape(N, m1 * N + 2 * m1 + 1)
        W1 = blocks[:, : m1 * N].reshape(N, m1, N)
        W2 = blocks[:, m1 * N : m1 * N + m1]
        W3 = blocks[:, m1 * N + m1 : m1 * N + 2 * m1]
        W30 = blocks[:, -1]
        return cls(W1.copy(), W2.copy(), W3.copy(), W30.copy())

    def allclose(self, other, **kw):
        return all(
            np.allclose(a, b, **kw)
            for a, b in zip(
                (self.W1, self.W2, self.W3, self.W30),
                (other.W1, other.W2, other.W3, other.W30),
            )
        )


def check_data(X, min_rows=2):
    """Validate an ``M x N`` observation matrix (finite, no missing values)."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=min_rows)
    return X


def _check_dims(params, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.n_nodes:
        raise DimensionError(
            f"data has shape {X.shape} but the model has {params.n_nodes} nodes"
        )
    return X


def _sigmoid(Z):
    # cheaper than scipy's expit; exp overflow just drives the output to 0
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-Z))


def _hidden(X, W1):
    N, m1, _ = W1.shape
    return _sigmoid(X @ W1.reshape(N * m1, N).T).reshape(X.shape[0], N, m1)


def _w1_grad(dZ, X):
    """Contract hidden-layer sensitivities (M, N, m1) with the inputs into W1's shape."""
    M, N, m1 = dZ.shape
    g = (dZ.reshape(M, N * m1).T @ X).reshape(N, m1, N)
    g[np.arange(N), :, np.arange(N)] = 0.0
    return g


def hidden_activations(params, X):
    """Sigmoid hidden layer for every (row, node) pair; shape (M, N, m1)."""
    X = _check_dims(params, X)
    return _hidden(X, params.W1)


def forward_mean(params, X, hidden=None):
    """Conditional means ``f_n(X(m))``, shape (M, N)."""
    S = hidden_activations(params, X) if hidden is None else hidden
    return np.einsum("mnk,nk->mn", S, params.W2)


def forward_std(params, X, hidden=None):
    """Conditional standard deviations ``sigma_n(X(m))``, shape (M, N); always > 0."""
    S = hidden_activations(params, X) if hidden is None else hidden
    U = np.einsum("mnk,nk->mn", S, params.W3)
    return np.maximum(U, 0.0) + np.exp(params.W30)[None, :]


def self_column_mask(N, m1):
    """Boolean mask over ``W1`` that is False on each node's own input column."""
    mask = np.ones((N, m1, N), dtype=bool)
    idx = np.arange(N)
    mask[idx, :, idx] = False
    return mask


def grad_nll(params, X, mode=FULL, sigma2_hat=None):
    """Negative log-likelihood and its gradient for every parameter block.

    Parameters
    ----------
    params : ModelParams
    X : ndarray of shape (M, N)
    mode : {"full", "phase1", "phase2"}
        ``"phase1"`` keeps only the ``W3``/``W30`` gradients, ``"phase2"``
        only ``W1``/``W2``.  Inactive blocks are returned as zeros.
    sigma2_hat : ndarray of shape (M, N), optional
        Fixed variances; required (and only used) in ``"phase2"`` mode.

    Returns
    -------
    value : float
    grad : ModelParams
    """
    X = _check_dims(params, X)
    M, N = X.shape
    S = hidden_activations(params, X)
    F = np.einsum("mnk,nk->mn", S, params.W2)
    R = X - F

    if mode == PHASE2:
        if sigma2_hat is None:
            raise ValueError("phase2 mode needs sigma2_hat")
        sigma2_hat = np.asarray(sigma2_hat, dtype=float)
        if sigma2_hat.shape != (M, N):
            raise DimensionError(f"sigma2_hat has shape {sigma2_hat.shape}, expected {(M, N)}")
        if not np.all(sigma2_hat > 0):
            raise ValueError("sigma2_hat must be strictly positive")
        value = M * N * LOG_SQRT_2PI + 0.5 * np.log(sigma2_hat).sum() + (R * R / (2.0 * sigma2_hat)).sum()
        dF = -R / sigma2_hat
        dS = dF[:, :, None] * params.W2[None]
        dZ = dS * S * (1.0 - S)
        gW1 = _w1_grad(dZ, X)
        gW2 = np.einsum("mn,mnk->nk", dF, S)
        zeros = ModelParams.zeros(N, params.m1)
        return float(value), ModelParams(gW1, gW2, zeros.W3, zeros.W30)

    if mode not in (FULL, PHASE1):
        raise ValueError(f"unknown mode {mode!r}")
    U = np.einsum("mnk,nk->mn", S, params.W3)
    active = U > 0.0
    floor = np.exp(params.W30)
    sig = np.where(active, U, 0.0) + floor[None, :]
    inv2 = 1.0 / (sig * sig)
    value = M * N * LOG_SQRT_2PI + np.log(sig).sum() + 0.5 * (R * R * inv2).sum()

    dsig = 1.0 / sig - R * R * inv2 / sig
    dU = np.where(active, dsig, 0.0)
    gW3 = np.einsum("mn,mnk->nk", dU, S)
    gW30 = dsig.sum(axis=0) * floor
    if mode == PHASE1:
        zeros = ModelParams.zeros(N, params.m1)
        return float(value), ModelParams(zeros.W1, zeros.W2, gW3, gW30)

    dF = -R * inv2
    gW2 = np.einsum("mn,mnk->nk", dF, S)
    dS = dF[:, :, None] * params.W2[None] + dU[:, :, None] * params.W3[None]
    dZ = dS * S * (1.0 - S)
    return float(value), ModelParams(_w1_grad(dZ, X), gW2, gW3, gW30)


def init_params(N, m1=10, scale=0.1, rng=None):
    """Small uniform initialisation in ``[-scale, scale]``; ``W30 = 0``, self-columns zero."""
    if scale < 0:
        raise ValueError("scale must be non-negative")
    if rng is None:
        rng = np.random.default_rng()
    W1 = rng.uniform(-scale, scale, size=(N, m1, N))
    W1[~self_column_mask(N, m1)] = 0.0
    W2 = rng.uniform(-scale, scale, size=(N, m1))
    W3 = rng.uniform(-scale, scale, size=(N, m1))
    return ModelParams(W1, W2, W3, np.zeros(N))
