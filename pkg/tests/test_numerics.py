import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hetdag.numerics import (
    DimensionError,
    LbfgsConfig,
    OptimizationError,
    as_matrix,
    finite_diff_grad,
    lbfgs_minimize,
    make_rng,
    mat_exp,
    trace,
)


def series_oracle(M, terms=60):
    mpmath.mp.dps = 50
    A = mpmath.matrix(M.tolist())
    n = M.shape[0]
    term = mpmath.eye(n)
    total = mpmath.eye(n)
    for k in range(1, terms + 1):
        term = term * A / k
        total += term
    return np.array(total.tolist(), dtype=float)


def inf_norm(M):
    return np.abs(M).sum(axis=1).max()


# ---- mat_exp

def test_mat_exp_of_zero_is_identity():
    assert np.array_equal(mat_exp(np.zeros((3, 3))), np.eye(3))


def test_mat_exp_nilpotent():
    np.testing.assert_allclose(mat_exp([[0.0, 1.0], [0.0, 0.0]]), [[1.0, 1.0], [0.0, 1.0]], rtol=0, atol=1e-15)


def test_mat_exp_diagonal():
    np.testing.assert_allclose(mat_exp(np.diag([1.0, 2.0])), np.diag([math.e, math.exp(2.0)]), rtol=1e-14)


def test_mat_exp_rejects_non_square():
    with pytest.raises(DimensionError):
        mat_exp(np.ones((2, 3)))


@given(
    n=st.integers(1, 5),
    data=st.data(),
)
def test_mat_exp_matches_extended_precision_series(n, data):
    M = data.draw(arrays(float, (n, n), elements=st.floats(-4, 4)))
    norm = inf_norm(M)
    if norm > 10:
        M = M * (10 / norm)  # keeps the spectral radius <= 10
    ref = series_oracle(M)
    err = inf_norm(mat_exp(M) - ref) / (1 + inf_norm(ref))
    assert err <= 1e-10


@given(n=st.integers(1, 6), data=st.data())
def test_mat_exp_strictly_upper_has_unit_diagonal(n, data):
    M = np.triu(data.draw(arrays(float, (n, n), elements=st.floats(-5, 5))), k=1)
    E = mat_exp(M)
    np.testing.assert_allclose(np.diag(E), 1.0, rtol=0, atol=1e-12)
    assert trace(E) == pytest.approx(n)


# ---- trace

def test_trace_examples():
    assert trace(np.eye(4)) == 4
    assert trace(np.zeros((3, 3))) == 0
    assert trace([[1, 5], [7, 3]]) == 4


def test_trace_rejects_non_square():
    with pytest.raises(DimensionError):
        trace(np.ones((1, 2)))


def test_as_matrix_validation():
    with pytest.raises(ValueError):
        as_matrix([[np.nan]])
    with pytest.raises(DimensionError):
        as_matrix(np.ones(3))


# ---- lbfgs

def sq(x):
    return float(x @ x), 2 * x


def rosenbrock(x):
    a, b = x
    f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
    g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
    return f, g


def test_lbfgs_quadratic():
    res = lbfgs_minimize(sq, [3.0, 4.0])
    np.testing.assert_allclose(res.x, 0.0, atol=1e-8)
    assert res.fun == pytest.approx(0.0, abs=1e-8)
    assert res.status == "converged"


def test_lbfgs_rosenbrock():
    res = lbfgs_minimize(rosenbrock, [-1.2, 1.0])
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-4)


def test_lbfgs_constant_function_stops_at_start():
    res = lbfgs_minimize(lambda x: (7.0, np.zeros_like(x)), [1.0, -2.0])
    assert res.status == "converged"
    assert res.fun == 7.0
    np.testing.assert_array_equal(res.x, [1.0, -2.0])
    assert res.n_iters == 0


def test_lbfgs_max_iters_status():
    res = lbfgs_minimize(rosenbrock, [-1.2, 1.0], LbfgsConfig(max_iters=3))
    assert res.status == "max_iters"
    assert res.n_iters == 3


def test_lbfgs_nan_at_start_reports_iteration():
    with pytest.raises(OptimizationError, match="iteration 0"):
        lbfgs_minimize(lambda x: (math.nan, x), [1.0])


def test_lbfgs_backs_off_from_non_finite_region():
    # log barrier: anything at or beyond x = 1 is infinite
    def f(x):
        if x[0] >= 1:
            return math.inf, np.array([math.nan])
        return float(-np.log(1 - x[0]) + x[0] ** 2), np.array([1 / (1 - x[0]) + 2 * x[0]])

    res = lbfgs_minimize(f, [0.9])
    assert res.x[0] < 1
    assert res.fun <= f([0.9])[0]


@pytest.mark.parametrize("kw", [dict(memory=0), dict(c1=0.5, c2=0.4), dict(c1=0.0), dict(max_iters=-1)])
def test_lbfgs_config_validation(kw):
    with pytest.raises(ValueError):
        LbfgsConfig(**kw)


@given(
    n=st.integers(1, 6),
    seed=st.integers(0, 2**32 - 1),
    max_iters=st.integers(0, 30),
)
def test_lbfgs_never_increases_objective(n, seed, max_iters):
    rng = np.random.default_rng(seed)
    C = rng.standard_normal((n, n))
    b = rng.standard_normal(n)

    def f(x):
        # smooth non-convex test function
        z = C @ x - b
        return float(np.sum(np.log1p(z * z)) + 0.01 * x @ x), C.T @ (2 * z / (1 + z * z)) + 0.02 * x

    x0 = rng.standard_normal(n) * 3
    res = lbfgs_minimize(f, x0, LbfgsConfig(max_iters=max_iters))
    assert res.fun <= f(x0)[0] + 1e-12
    assert res.status in {"converged", "max_iters", "line_search_failure"}
    assert res.grad_norm == pytest.approx(np.max(np.abs(f(res.x)[1])))


# ---- finite differences

def test_finite_diff_examples():
    assert finite_diff_grad(lambda x: x * x, 3.0) == pytest.approx(6.0, abs=1e-8)
    a = np.array([1.5, -2.0, 0.25])
    np.testing.assert_allclose(finite_diff_grad(lambda x: a @ x, np.zeros(3)), a, rtol=1e-9)
    assert finite_diff_grad(np.sin, 0.0) == pytest.approx(1.0, abs=1e-9)


def test_finite_diff_rejects_bad_eps():
    with pytest.raises(ValueError):
        finite_diff_grad(np.sin, 0.0, eps=0)


@given(n=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_finite_diff_on_quadratic(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    Q = B @ B.T + np.eye(n)
    x = rng.standard_normal(n)
    g = finite_diff_grad(lambda v: 0.5 * v @ Q @ v, x, eps=1e-5)
    exact = Q @ x
    assert np.max(np.abs(g - exact)) <= 1e-6 * max(1.0, np.max(np.abs(exact)))


def test_finite_diff_does_not_mutate_input():
    x = np.array([1.0, 2.0])
    finite_diff_grad(lambda v: v.sum(), x)
    np.testing.assert_array_equal(x, [1.0, 2.0])


# ---- rng

def test_rng_reproducible():
    a = make_rng(123).random(5)
    b = make_rng(123).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, make_rng(124).random(5))


def test_rng_reference_sequence():
    # PCG64 seeded through SeedSequence(0); pinned to catch accidental algorithm changes
    assert make_rng(0).integers(0, 2**63, size=3, dtype=np.uint64).tolist() == REFERENCE


REFERENCE = [5874934615388537135, 2488343231644625808, 377914054924498012]
