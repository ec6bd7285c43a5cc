import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import cyclic_by_dfs
from hetdag.constraint import acyclicity
from hetdag.datagen import generate, sample_sem
from hetdag.loss import nll, nll_fixed_sigma, reconstruction_loss
from hetdag.model import forward_mean, init_params
from hetdag.numerics import make_rng
from hetdag.trainer import (
    AlmConfig,
    TrainConfig,
    alm_update,
    fit,
    phase1,
    phase2,
    threshold_and_repair,
)

CHAIN = np.array([[0, 1], [0, 0]])


def chain_data(seed=0, M=1000):
    rng = make_rng(seed)
    gt = sample_sem(CHAIN, "hetero", rng)
    return generate(gt, M, rng)


def unit_noise_data(seed, M=1000):
    """Data whose true mean is the model's own mean function with N(0, 1) noise."""
    rng = make_rng(seed)
    p = init_params(2, 10, 0.5, rng)
    p.W1[0] = 0.0
    p.W2 *= 4
    Z = rng.standard_normal((M, 2))
    X = np.zeros((M, 2))
    X[:, 0] = forward_mean(p, X)[:, 0] + Z[:, 0]
    X[:, 1] = forward_mean(p, X)[:, 1] + Z[:, 1]
    return p, X


# ---- alm_update

def test_alm_update_examples():
    cfg = TrainConfig()
    assert alm_update(0.0, 1.0, 3.0, 0.5, cfg) == (3.0, 0.5)
    assert alm_update(0.2, 0.2, 3.0, 0.5, cfg) == pytest.approx((30.0, 0.5 + 3.0 * 0.2))
    assert alm_update(0.02, 0.2, 3.0, 0.5, cfg) == pytest.approx((3.0, 0.56))


def test_alm_update_accepts_alm_config_and_validates():
    assert alm_update(1.0, 1.0, 1.0, 0.0, AlmConfig(rho_factor=5)) == (5.0, 1.0)
    with pytest.raises(ValueError):
        alm_update(1.0, 1.0, 0.0, 0.0, AlmConfig())


@pytest.mark.parametrize("kw", [dict(progress_ratio=1.0), dict(progress_ratio=0.0), dict(rho_factor=1.0)])
def test_alm_config_validation(kw):
    with pytest.raises(ValueError):
        AlmConfig(**kw)


@pytest.mark.parametrize("kw", [dict(outer_iters=0), dict(lambda1=-1.0), dict(threshold=-0.1)])
def test_train_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_train_config_round_trip():
    cfg = TrainConfig(lambda1=0.05, alm=AlmConfig(max_steps=3))
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


# ---- threshold_and_repair

def test_threshold_examples():
    assert threshold_and_repair(np.full((3, 3), 0.1), 0.3).sum() == 0
    A = np.array([[0, 0.5, 0.9], [0, 0, 0.4], [0, 0, 0]])
    np.testing.assert_array_equal(threshold_and_repair(A, 0.3), (A > 0.3).astype(int))
    two = np.array([[0, 0.9], [0.4, 0]])
    np.testing.assert_array_equal(threshold_and_repair(two, 0.3), [[0, 1], [0, 0]])


def test_threshold_ignores_diagonal():
    assert threshold_and_repair(np.eye(3), 0.3).sum() == 0
    with pytest.raises(ValueError):
        threshold_and_repair(np.zeros((2, 2)), -1)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 20))
def test_threshold_output_is_acyclic(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0, 1, (n, n))
    B = threshold_and_repair(A, 0.3)
    assert not cyclic_by_dfs(B)
    # only edges above the threshold can survive
    assert np.all(A[B == 1] > 0.3)


# ---- phase1

def test_phase1_touches_only_variance_heads():
    p, X = unit_noise_data(0)
    q, s2, status = phase1(p, X, TrainConfig())
    assert np.array_equal(q.W1, p.W1) and np.array_equal(q.W2, p.W2)
    assert nll(q, X) <= nll(p, X) + 1e-12
    assert s2.shape == X.shape and np.all(s2 > 0)
    assert status in {"converged", "max_iters", "line_search_failure"}


def test_phase1_recovers_unit_variances():
    for seed in range(3):
        p, X = unit_noise_data(seed)
        _, s2, _ = phase1(p, X, TrainConfig())
        np.testing.assert_allclose(s2.mean(axis=0), 1.0, atol=0.2)
        assert np.mean(np.abs(s2 - 1.0) <= 0.2) >= 0.8


def test_phase1_is_a_fixed_point():
    p, X = unit_noise_data(1)
    cfg = TrainConfig()
    q, _, _ = phase1(p, X, cfg)
    r, _, _ = phase1(q, X, cfg)
    assert nll(q, X) - nll(r, X) <= 1e-6


# ---- phase2

def test_phase2_touches_only_mean_side():
    X = chain_data()
    p = init_params(2, 10, 0.1, make_rng(0))
    q, info = phase2(p, X, np.ones_like(X), TrainConfig(alm=AlmConfig(max_steps=2)))
    assert np.array_equal(q.W3, p.W3) and np.array_equal(q.W30, p.W30)
    assert info.steps <= 2
    assert info.status in {"ok", "constraint-not-met"}
    assert info.h == pytest.approx(acyclicity(np.sqrt((q.W1 ** 2).sum(axis=1)).T))


def test_phase2_rejects_bad_variances():
    X = chain_data(M=50)
    p = init_params(2, 10, 0.1, make_rng(0))
    with pytest.raises(ValueError):
        phase2(p, X, np.zeros_like(X), TrainConfig())


def test_phase2_huge_penalty_empties_graph():
    X = chain_data()
    p = init_params(2, 10, 0.1, make_rng(0))
    q, _ = phase2(p, X, np.ones_like(X), TrainConfig(lambda1=100.0))
    A = np.sqrt((q.W1 ** 2).sum(axis=1)).T
    assert np.all(A < 0.3)


def test_phase2_unit_variance_objective_is_reconstruction():
    X = chain_data(M=200)
    p = init_params(2, 10, 0.1, make_rng(3))
    q, _ = phase2(p, X, np.ones_like(X), TrainConfig(alm=AlmConfig(max_steps=1)))
    const = X.size * 0.5 * np.log(2 * np.pi)
    for params in (p, q):
        assert nll_fixed_sigma(params, X, np.ones_like(X)) - const == pytest.approx(
            X.shape[0] * reconstruction_loss(params, X), rel=1e-12
        )
    # fitting the means lowered the least-squares score
    assert reconstruction_loss(q, X) < reconstruction_loss(p, X)


def test_phase2_edge_mask_pins_weights():
    X = chain_data(M=200)
    p = init_params(2, 10, 0.1, make_rng(0))
    mask = np.array([[False, True], [False, False]])
    q, info = phase2(p, X, np.ones_like(X), TrainConfig(), edge_mask=mask)
    assert np.all(q.W1[0] == 0)  # nothing may feed node 0
    assert info.h <= 1e-12


# ---- fit

def test_fit_two_node_chain():
    res = fit(chain_data(0))
    np.testing.assert_array_equal(res.thresholded_dag, CHAIN)


def test_fit_is_deterministic():
    X = chain_data(1, M=300)
    cfg = TrainConfig(outer_iters=2, seed=4)
    a, b = fit(X, cfg), fit(X, cfg)
    assert a.params.allclose(b.params, rtol=0, atol=0)
    assert a.history == b.history


def test_fit_history_and_output_shape():
    X = chain_data(2, M=300)
    res = fit(X, TrainConfig(outer_iters=3))
    assert len(res.history) == 3
    nlls = [h["nll"] for h in res.history]
    assert all(b <= a + 1e-6 for a, b in zip(nlls, nlls[1:]))
    assert res.history[0]["phase1_status"] == "skipped"
    assert res.adjacency.shape == (2, 2) and np.all(np.diag(res.adjacency) == 0)
    assert not cyclic_by_dfs(res.thresholded_dag)


def test_fit_without_warmup_runs_phase1_first():
    res = fit(chain_data(2, M=200), TrainConfig(outer_iters=1, warmup=False))
    assert res.history[0]["phase1_status"] != "skipped"


def test_fit_rejects_single_variable():
    with pytest.raises(ValueError):
        fit(np.random.default_rng(0).standard_normal((10, 1)))
