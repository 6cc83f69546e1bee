from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from panelseg.errors import InsufficientPanels, InvalidArgument, InvalidTrainingWindow
from panelseg.estimation import (
    CovarianceEstimate, banded_covariance, convex_regression, convexity_violation,
    estimated_exact_weights, ma1_time_covariance, natural_covariance, partial_sum_coefficients,
    quadratic_form_f, quadratic_forms,
)
from panelseg.model import CommonFactorSpec, NoiseModel, SignalSpec, generate_panel
from panelseg.weights import WeightScheme, exact_weights_from_v, v_squared_vector, weight_vector


def test_natural_covariance_examples():
    np.testing.assert_array_equal(natural_covariance(np.array([[0.0, 2.0], [1.0, 1.0]])).matrix,
                                  [[2.0, 0.0], [0.0, 0.0]])
    same = np.tile(np.array([[1.0], [4.0], [-2.0]]), (1, 2))
    np.testing.assert_array_equal(natural_covariance(same).matrix, np.zeros((3, 3)))
    with pytest.raises(InsufficientPanels):
        natural_covariance(np.ones((4, 1)))


def test_natural_covariance_iid_oracle():
    Y = generate_panel(SignalSpec.constant(6), NoiseModel.iid(2.0), d=100_000, seed=5).values
    S = natural_covariance(Y).matrix
    assert np.array_equal(S, S.T)
    np.testing.assert_allclose(np.diag(S), 2.0, rtol=0.05)


def test_partial_sum_coefficients_sum_to_zero():
    A = partial_sum_coefficients(17)
    np.testing.assert_allclose(A.sum(axis=1), 0, atol=1e-14)


def test_quadratic_form_examples():
    n, s2 = 30, 1.7
    f = quadratic_forms(s2 * np.eye(n))
    np.testing.assert_allclose(f, s2 * v_squared_vector(NoiseModel.iid(), n), rtol=1e-12)
    assert quadratic_form_f(np.zeros((n, n)), 4) == 0
    assert quadratic_form_f(s2 * np.eye(n), 4) == pytest.approx(f[3], rel=1e-14)
    with pytest.raises(InvalidArgument):
        quadratic_form_f(np.eye(n), n)
    with pytest.raises(InvalidArgument):
        quadratic_forms(np.ones((3, 4)))


@settings(deadline=None)
@given(st.floats(-5, 5), st.floats(-2, 2), st.floats(0.1, 10), st.integers(3, 200))
def test_quadratic_forms_match_closed_form(phi, theta, s2, n):
    model = NoiseModel.ma1(phi, theta, s2)
    f = quadratic_forms(ma1_time_covariance(model, n))
    np.testing.assert_allclose(f / model.sigma2, v_squared_vector(model, n), rtol=1e-12, atol=1e-14)


def test_banded_validation():
    Y = np.random.default_rng(0).normal(size=(20, 5))
    with pytest.raises(InvalidTrainingWindow):
        banded_covariance(Y, 5, 5)
    with pytest.raises(InvalidTrainingWindow):
        banded_covariance(Y, 1, 21)
    with pytest.raises(InvalidTrainingWindow):
        banded_covariance(Y, 1, 3, h=3)
    with pytest.raises(InsufficientPanels):
        banded_covariance(Y[:, :1], 1, 10)


def test_banded_structure():
    Y = np.random.default_rng(1).normal(size=(12, 50))
    est = banded_covariance(Y, 2, 9, h=2)
    S = est.matrix
    assert np.array_equal(S, S.T)
    i, j = np.indices(S.shape)
    assert np.all(S[np.abs(i - j) > 2] == 0)
    for r in range(3):
        assert np.ptp(np.diagonal(S, r)) == 0
    assert est.window == (2, 9) and est.band == 2
    constant = np.tile(np.arange(12.0)[:, None], (1, 4))
    np.testing.assert_array_equal(banded_covariance(constant, 1, 12, h=3).matrix, 0)


def test_banded_iid_h0_oracle():
    Y = generate_panel(SignalSpec.constant(30), NoiseModel.iid(3.0), d=100_000, seed=2).values
    S = banded_covariance(Y, 1, 20, h=0).matrix
    assert np.count_nonzero(S - np.diag(np.diag(S))) == 0
    np.testing.assert_allclose(np.diag(S), 3.0, rtol=0.05)


def test_banded_ma1_lag_one_oracle():
    s2 = 2.0
    Y = generate_panel(SignalSpec.constant(30), NoiseModel.ma1(-1.0, 0.0, s2), d=100_000, seed=3).values
    S = banded_covariance(Y, 1, 20, h=1).matrix
    assert S[0, 1] == pytest.approx(-s2, rel=0.05)


def test_centered_banded_tolerates_panel_levels():
    rng = np.random.default_rng(4)
    levels = rng.normal(0, 10, size=200)
    Y = rng.normal(size=(25, 200)) + levels[None, :]
    raw = banded_covariance(Y, 1, 20, h=1).matrix
    centered = banded_covariance(Y, 1, 20, h=1, centered=True).matrix
    # panel levels are constant in time, so centering per panel removes them
    assert abs(centered[0, 0] - 1.0) < 0.2
    assert raw[0, 0] > 10


def test_estimated_weights_examples():
    n = 25
    est = estimated_exact_weights(CovarianceEstimate(np.eye(n), "natural"))
    assert not est.fallback_used and est.source == "exact-est"
    ratio = est.weights / weight_vector(WeightScheme.standard(), n)
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-12)

    # Sigma = 1 1^T gives f_i = 0 because each row of coefficients sums to zero
    flat = estimated_exact_weights(CovarianceEstimate(np.ones((n, n)), "banded"))
    assert flat.fallback_used and flat.source == "exact-banded"
    np.testing.assert_array_equal(flat.weights, weight_vector(WeightScheme.standard(), n))


@pytest.mark.slow
def test_estimated_weights_consistency_dependent_noise():
    n, model = 100, NoiseModel.ma1(-3.0, 1.0, 9.0)
    Y = generate_panel(SignalSpec.constant(n), model, CommonFactorSpec(), d=10_000, seed=6).values
    w_hat = estimated_exact_weights(natural_covariance(Y)).weights
    w = exact_weights_from_v(np.sqrt(v_squared_vector(model, n)))
    mid = n // 2 - 1
    np.testing.assert_allclose(w_hat * (w[mid] / w_hat[mid]), w, rtol=0.05)


@pytest.mark.slow
def test_natural_estimate_error_shrinks_with_d():
    n, model = 20, NoiseModel.ma1(0.7, 0.5, 1.0)
    f_true = quadratic_forms(ma1_time_covariance(model, n))
    medians = []
    for d in (100, 1000, 10_000):
        errs = []
        for seed in range(20):
            Y = generate_panel(SignalSpec.constant(n), model, d=d, seed=seed).values
            errs.append(np.max(np.abs(quadratic_forms(natural_covariance(Y).matrix) - f_true)))
        medians.append(np.median(errs))
    assert medians[0] > medians[1] > medians[2]


# -- convex regression -------------------------------------------------------

def _cvxpy_projection(y, convex=True):
    cp = pytest.importorskip("cvxpy")
    x = cp.Variable(y.size)
    d2 = x[2:] - 2 * x[1:-1] + x[:-2]
    cons = [d2 >= 0] if convex else [d2 <= 0]
    cp.Problem(cp.Minimize(cp.sum_squares(x - y)), cons).solve(solver="CLARABEL")
    return np.asarray(x.value)


def test_convex_regression_identity_on_convex_inputs():
    w = weight_vector(WeightScheme.standard(), 60)
    out = convex_regression(w)
    assert not out.fallback_used and out.source == "exact-reg"
    np.testing.assert_allclose(out.weights, w, atol=1e-8 * w.max())
    affine = 3.0 + 0.5 * np.arange(10)
    np.testing.assert_allclose(convex_regression(affine).weights, affine, atol=1e-10)
    np.testing.assert_allclose(convex_regression(affine, "concave").weights, affine, atol=1e-10)


def test_convex_regression_matches_qp_oracle():
    rng = np.random.default_rng(10)
    for m in (5, 20, 60):
        x = np.linspace(-1, 1, m)
        y = 2 + x**2 + rng.normal(0, 0.2, size=m)
        fit = convex_regression(y).weights
        ref = _cvxpy_projection(y)
        np.testing.assert_allclose(fit, ref, atol=1e-5)
        assert np.sum((fit - y) ** 2) <= np.sum((ref - y) ** 2) + 1e-9


def test_concave_regression_matches_qp_oracle():
    rng = np.random.default_rng(11)
    y = 5 - np.linspace(-1, 1, 30) ** 2 + rng.normal(0, 0.3, size=30)
    fit = convex_regression(y, "concave").weights
    np.testing.assert_allclose(fit, _cvxpy_projection(y, convex=False), atol=1e-5)
    assert np.all(np.diff(fit, 2) <= 1e-8)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.1, 100), min_size=3, max_size=80))
def test_convex_regression_feasible_and_no_worse_than_affine(values):
    y = np.array(values)
    fit = convex_regression(y).weights
    if np.all(fit == weight_vector(WeightScheme.standard(), y.size + 1)):
        return  # non-positive fit fell back to standard weights
    scale = max(1.0, np.abs(y).max())
    assert convexity_violation(fit) <= 1e-8 * scale
    assert np.all(np.diff(fit, 2) >= -1e-8 * scale)
    i = np.arange(y.size)
    affine = np.polyval(np.polyfit(i, y, 1), i)
    assert np.sum((fit - y) ** 2) <= np.sum((affine - y) ** 2) * (1 + 1e-9) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=40))
def test_convex_regression_idempotent(values):
    from panelseg.estimation import _convex_projection

    y = np.array(values)
    once = _convex_projection(y)
    np.testing.assert_allclose(_convex_projection(once), once, atol=1e-8 * max(1.0, np.abs(y).max()))


def test_convex_regression_fallback_and_validation():
    out = convex_regression(np.array([-1.0, -2.0, -3.0, -4.0]))
    assert out.fallback_used
    np.testing.assert_array_equal(out.weights, weight_vector(WeightScheme.standard(), 5))
    with pytest.raises(InvalidArgument):
        convex_regression(np.array([1.0]))
    with pytest.raises(InvalidArgument):
        convex_regression(np.ones(4), "wiggly")
