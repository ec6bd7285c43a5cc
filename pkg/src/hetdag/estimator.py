"""scikit-learn style front end for the two-phase learner."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .loss import gaussian_nll
from .model import forward_mean, forward_std, hidden_activations
from .numerics import LbfgsConfig
from .trainer import AlmConfig, TrainConfig, fit


class HeteroscedasticDAGLearner(BaseEstimator):
    """Learn a DAG whose nodes have input-dependent noise scales.

    Parameters
    ----------
    outer_iters : int, default=5
        Rounds of variance fitting followed by constrained mean fitting.
    lambda1 : float, default=0.01
        Group-sparsity weight on the first-layer columns.
    threshold : float, default=0.3
        Edge weights above this value are kept in ``dag_``.
    hidden : int, default=10
        Hidden units per node.
    init_scale : float, default=0.1
    max_iter : int, default=200
        L-BFGS iteration cap for every sub-problem.
    alm_steps : int, default=10
        Dual updates per constrained solve.
    h_tol : float, default=1e-8
    warmup : bool, default=True
        Start the first round from unit variances instead of fitting them.
    standardize : bool, default=False
        Z-score the columns before fitting.  Predictions are mapped back.
    random_state : int, default=0

    Attributes
    ----------
    params_ : ModelParams
    adjacency_ : ndarray of shape (n_features, n_features)
        ``adjacency_[i, j]`` is the strength of the edge ``i -> j``.
    dag_ : ndarray of shape (n_features, n_features)
        Thresholded acyclic graph.
    history_ : list of dict
    n_features_in_ : int
    """

    def __init__(
        self,
        outer_iters=5,
        lambda1=0.01,
        threshold=0.3,
        hidden=10,
        init_scale=0.1,
        max_iter=200,
        alm_steps=10,
        h_tol=1e-8,
        warmup=True,
        standardize=False,
        random_state=0,
    ):
        self.outer_iters = outer_iters
        self.lambda1 = lambda1
        self.threshold = threshold
        self.hidden = hidden
        self.init_scale = init_scale
        self.max_iter = max_iter
        self.alm_steps = alm_steps
        self.h_tol = h_tol
        self.warmup = warmup
        self.standardize = standardize
        self.random_state = random_state

    def train_config(self):
        return TrainConfig(
            outer_iters=self.outer_iters,
            alm=AlmConfig(h_tol=self.h_tol, max_steps=self.alm_steps),
            lbfgs=LbfgsConfig(max_iters=self.max_iter),
            lambda1=self.lambda1,
            threshold=self.threshold,
            seed=self.random_state,
            init_scale=self.init_scale,
            m1=self.hidden,
            warmup=self.warmup,
        )

    def _scale(self, X):
        return (X - self.loc_) / self.scale_

    def fit(self, X, y=None, edge_mask=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2, ensure_min_features=2)
        if self.standardize:
            self.loc_ = X.mean(axis=0)
            sd = X.std(axis=0)
            self.scale_ = np.where(sd > 0, sd, 1.0)
        else:
            self.loc_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        res = fit(self._scale(X), self.train_config(), edge_mask=edge_mask)
        self.params_ = res.params
        self.adjacency_ = res.adjacency
        self.dag_ = res.thresholded_dag
        self.history_ = res.history
        self.n_features_in_ = X.shape[1]
        return self

    def _check(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self._scale(X)

    def predict(self, X):
        """Conditional mean of every variable given the others, in data units."""
        Z = self._check(X)
        return forward_mean(self.params_, Z) * self.scale_ + self.loc_

    def predict_std(self, X):
        Z = self._check(X)
        return forward_std(self.params_, Z) * self.scale_

    def transform(self, X):
        """Standardized residuals ``(x - mean) / std``: the estimated noise terms."""
        Z = self._check(X)
        S = hidden_activations(self.params_, Z)
        return (Z - forward_mean(self.params_, Z, hidden=S)) / forward_std(self.params_, Z, hidden=S)

    def score(self, X, y=None):
        """Average log-likelihood per row (higher is better), in data units."""
        Z = self._check(X)
        S = hidden_activations(self.params_, Z)
        sig = forward_std(self.params_, Z, hidden=S)
        value = gaussian_nll(Z, forward_mean(self.params_, Z, hidden=S), sig * sig)
        value += Z.shape[0] * np.log(self.scale_).sum()
        return -value / Z.shape[0]
