from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from panelseg.errors import InvalidArgument, NonPositiveVariance
from panelseg.model import NoiseModel
from panelseg.weights import (
    WeightScheme, exact_weights_from_v, exact_weights_from_v_squared, v_squared, v_squared_vector,
    weight, weight_vector,
)

gammas = st.floats(0.0, 0.5)
schemes = st.one_of(
    st.just(WeightScheme.simple()), st.just(WeightScheme.standard()), gammas.map(WeightScheme.weighted),
)


def test_weight_examples():
    assert weight(WeightScheme.weighted(0.0), 7, 20) == 1.0
    assert weight(WeightScheme.standard(), 50, 100) == pytest.approx(2.0, abs=1e-15)
    np.testing.assert_allclose(weight_vector(WeightScheme.weighted(0.5), 37),
                               weight_vector(WeightScheme.standard(), 37), rtol=1e-15)
    np.testing.assert_array_equal(weight_vector(WeightScheme.simple(), 9), np.ones(8))


def test_weight_range_checked():
    for i in (0, 10):
        with pytest.raises(InvalidArgument):
            weight(WeightScheme.simple(), i, 10)
    with pytest.raises(InvalidArgument):
        WeightScheme.weighted(0.6)
    with pytest.raises(NonPositiveVariance):
        WeightScheme.exact([1.0, 0.0])


@given(schemes, st.integers(3, 300))
def test_weights_positive_and_symmetric(scheme, n):
    w = weight_vector(scheme, n)
    assert np.all(w > 0)
    np.testing.assert_allclose(w, w[::-1], rtol=1e-12)


def test_v_squared_iid():
    assert v_squared(NoiseModel.iid(), 25, 100) == pytest.approx(0.1875, abs=1e-16)


@given(st.floats(-5, 5), st.integers(3, 200))
def test_v_squared_phi_zero_matches_iid(theta, n):
    np.testing.assert_allclose(v_squared_vector(NoiseModel.ma1(0.0, theta), n),
                               v_squared_vector(NoiseModel.iid(), n), rtol=1e-12, atol=0)


def _brute_force_v2(phi, n, i):
    """Exact rational Var(S_i) / sigma^2 for eps_j = eta_j + phi eta_{j-1}, theta = 0."""
    phi = Fraction(phi)
    a = [Fraction(1) - Fraction(i, n) if j <= i else -Fraction(i, n) for j in range(1, n + 1)]
    # coefficient of eta_m (m = 0..n) in sum_j a_j eps_j
    coef = [Fraction(0)] * (n + 1)
    for j in range(1, n + 1):
        coef[j] += a[j - 1]
        coef[j - 1] += phi * a[j - 1]
    var = sum(c * c for c in coef) / n
    return var / (1 + phi * phi)


def test_v_squared_hand_example():
    assert _brute_force_v2(-1, 4, 2) == Fraction(3, 16)
    assert v_squared(NoiseModel.ma1(-1.0, 0.0), 2, 4) == pytest.approx(3 / 16, abs=1e-15)


@given(st.integers(-6, 6), st.integers(3, 25), st.data())
def test_v_squared_rational_oracle(phi2, n, data):
    phi = Fraction(phi2, 2)
    i = data.draw(st.integers(1, n - 1))
    got = v_squared(NoiseModel.ma1(float(phi), 0.0), i, n)
    assert got == pytest.approx(float(_brute_force_v2(phi, n, i)), rel=1e-12, abs=1e-15)


@given(st.floats(-5, 5), st.integers(3, 200))
def test_v_squared_theta_independent(phi, n):
    base = v_squared_vector(NoiseModel.ma1(phi, 0.0), n)
    for theta in (-2.0, 1.0, 5.0):
        np.testing.assert_allclose(v_squared_vector(NoiseModel.ma1(phi, theta), n), base, rtol=1e-12, atol=0)


@given(st.floats(-50, 50), st.floats(-5, 5), st.integers(3, 300))
def test_v_squared_strictly_positive(phi, theta, n):
    assert np.all(v_squared_vector(NoiseModel.ma1(phi, theta), n) > 0)


def test_exact_weights_examples():
    n = 40
    V = np.sqrt(v_squared_vector(NoiseModel.iid(), n))
    w = exact_weights_from_v(V)
    # exact coincides with standard for uncorrelated noise
    np.testing.assert_allclose(w, weight_vector(WeightScheme.standard(), n), rtol=1e-12)
    np.testing.assert_array_equal(exact_weights_from_v(np.ones(5)), np.ones(5))
    with pytest.raises(NonPositiveVariance):
        exact_weights_from_v([1.0, -1.0])
    with pytest.raises(NonPositiveVariance):
        exact_weights_from_v_squared([1.0, 0.0])


def test_exact_weights_concave_shape_for_negative_alpha():
    n = 100
    model = NoiseModel.ma1(-3.0, 1.0, 9.0)
    w = WeightScheme.exact_for(model, n).vector(n)
    inv_sq = w**-2.0
    assert np.all(np.diff(inv_sq, 2) < 0)
    np.testing.assert_allclose(inv_sq, v_squared_vector(model, n), rtol=1e-12)


def test_scheme_str():
    assert str(WeightScheme.weighted(0.25)) == "weighted:0.25"
    assert str(WeightScheme.standard()) == "standard"
