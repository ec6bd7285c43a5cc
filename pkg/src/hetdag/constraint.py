"""Weighted adjacency from the shared first layer, and the acyclicity function.

``A[j, n]`` is the Euclidean norm of the weights through which variable ``j``
enters node ``n``; ``h(A) = tr(exp(A * A)) - N`` vanishes exactly on acyclic
supports.
"""
from __future__ import annotations

import numpy as np

from .numerics import _check_square, mat_exp


def squared_adjacency(W1):
    """``A * A`` computed directly from ``W1`` (shape (N, m1, N)); smooth in ``W1``."""
    S = np.einsum("nkj->jn", W1 * W1)
    np.fill_diagonal(S, 0.0)
    return S


def weighted_adjacency(params):
    """Edge strengths ``A[j, n] = ||W1[n][:, j]||_2`` with a zero diagonal."""
    W1 = params.W1 if hasattr(params, "W1") else np.asarray(params)
    return np.sqrt(squared_adjacency(W1))


def acyclicity(A):
    A = _check_square(A)
    return float(np.trace(mat_exp(A * A)) - A.shape[0])


def acyclicity_grad(A):
    """Gradient of :func:`acyclicity` with respect to ``A``: ``exp(A*A).T * 2A``."""
    A = _check_square(A)
    return mat_exp(A * A).T * 2.0 * A


def acyclicity_w1(W1):
    """``h`` and its gradient with respect to ``W1`` itself.

    Working on ``A * A`` avoids the square root, so the result is smooth even
    where a column norm is zero.
    """
    S = squared_adjacency(W1)
    E = mat_exp(S)
    h = float(np.trace(E) - S.shape[0])
    # d h / d S[j, n] = E[n, j];  d S[j, n] / d W1[n, k, j] = 2 W1[n, k, j]
    grad = 2.0 * W1 * E[:, None, :]
    N = W1.shape[0]
    grad[np.arange(N), :, np.arange(N)] = 0.0
    return h, grad


def group_l1_w1(W1):
    """Sum of column norms of ``W1`` and its gradient (zero on zero columns)."""
    A = weighted_adjacency(W1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(A > 0, 1.0 / A, 0.0)
    grad = W1 * inv.T[:, None, :]
    return float(A.sum()), grad
