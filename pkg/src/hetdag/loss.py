"""Scalar objectives built on the SEM forward pass.

All constants (``log sqrt(2 pi)`` and profile-likelihood terms) are kept so
that values are comparable between the two training phases.
"""
from __future__ import annotations

import numpy as np

from .model import LOG_SQRT_2PI, _check_dims, forward_mean, forward_std, hidden_activations

VARIANCE_FLOOR = 1e-12


def gaussian_nll(X, F, sigma2):
    """``sum log(sigma sqrt(2 pi)) + (X - F)^2 / (2 sigma^2)`` over every cell."""
    R = X - F
    return float(X.size * LOG_SQRT_2PI + 0.5 * np.log(sigma2).sum() + (R * R / (2.0 * sigma2)).sum())


def nll(params, X):
    """Negative log-likelihood of ``X`` under the heteroscedastic model."""
    X = _check_dims(params, X)
    S = hidden_activations(params, X)
    sig = forward_std(params, X, hidden=S)
    return gaussian_nll(X, forward_mean(params, X, hidden=S), sig * sig)


def nll_fixed_sigma(params, X, sigma2_hat):
    """NLL with the variances replaced by the fixed field ``sigma2_hat`` (M x N)."""
    X = _check_dims(params, X)
    sigma2_hat = np.asarray(sigma2_hat, dtype=float)
    if sigma2_hat.shape != X.shape:
        raise ValueError(f"sigma2_hat has shape {sigma2_hat.shape}, expected {X.shape}")
    if not np.all(sigma2_hat > 0):
        raise ValueError("sigma2_hat must be strictly positive")
    return gaussian_nll(X, forward_mean(params, X), sigma2_hat)


def reconstruction_loss(params, X):
    """Least-squares score ``||X - f(X)||_F^2 / (2M)``."""
    X = _check_dims(params, X)
    R = X - forward_mean(params, X)
    return float((R * R).sum() / (2.0 * X.shape[0]))


def profile_variance(residuals):
    """Per-column mean squared residual, clamped below at 1e-12."""
    R = np.atleast_2d(np.asarray(residuals, dtype=float))
    return np.maximum((R * R).mean(axis=0), VARIANCE_FLOOR)


def golem_nv_constant(M, N):
    """Constant dropped from :func:`golem_nv_loss`: ``MN/2 (1 + log 2pi - log M)``."""
    return 0.5 * M * N * (1.0 + np.log(2.0 * np.pi) - np.log(M))


def golem_nv_loss(residual_sq_sums, M, include_constant=False):
    """Profiled per-node-variance objective ``(M/2) sum_n log(sum_m r^2)``.

    With ``include_constant=True`` the value equals the Gaussian NLL at the
    profile variances; otherwise it differs from it by
    :func:`golem_nv_constant`.
    """
    sums = np.maximum(np.asarray(residual_sq_sums, dtype=float), VARIANCE_FLOOR)
    value = 0.5 * M * np.log(sums).sum()
    if include_constant:
        value += golem_nv_constant(M, sums.size)
    return float(value)
