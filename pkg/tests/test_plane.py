import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plapmvf.errors import NoSignChange, ValidationError
from plapmvf.plane import (
    A_value,
    HodographParams,
    exponent_table,
    find_p0,
    gamma_exponent,
    hodograph_map,
    invert_A,
    lambda_kn,
    modulus_factor,
    mvf_of_A,
    mvf_of_A_direct,
    random_params,
    threshold_gap,
)


def test_lambda_at_p2_is_harmonic_exponent():
    # p = 2: lambda = k - n
    for n in (1, 2, 3):
        for k in (1, 2, 5):
            assert lambda_kn(n, k, 2.0) == pytest.approx(k - n, abs=1e-15)


@given(st.integers(1, 4), st.floats(min_value=1.01, max_value=10.0))
def test_lambda_root_of_quadratic(n, p):
    # lambda solves lambda^2 + n p lambda - (k^2 (p-1) - n^2 (p-1)) = 0
    for k in (n + 1, n + 2):
        lam = lambda_kn(n, k, p)
        resid = lam * lam + n * p * lam - (p - 1) * (k * k - n * n)
        assert abs(resid) <= 1e-9 * (1 + k * k * p)
        assert lam > 0


def test_p0_values():
    p1 = find_p0(1)
    p2 = find_p0(2)
    assert 1.116 <= p1 <= 1.118
    assert 1.05 <= p2 <= 1.07
    assert threshold_gap(1, p1 + 0.01) > 0 > threshold_gap(1, p1 - 0.01)


def test_exponent_table_flags_inequality():
    assert exponent_table(1, 1.5).inequality
    assert not exponent_table(1, 1.1).inequality
    t = exponent_table(1, 1.5)
    assert t.gamma == pytest.approx(gamma_exponent(1, 1.5))
    assert t.threshold == pytest.approx(3.0)


def test_find_p0_without_sign_change():
    with pytest.raises(NoSignChange):
        find_p0(1, bracket=(1.5, 2.0))
    with pytest.raises(ValidationError):
        find_p0(1, bracket=(1.5, 1.2))


def test_params_validation():
    with pytest.raises(ValidationError):
        HodographParams(1, 1.0, 1.0, 1.0, 0.34)
    with pytest.raises(ValidationError):
        HodographParams(1, -1.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValidationError):
        HodographParams(0, 1.0, 1.0, 1.0, 0.0)


params_st = st.builds(
    lambda n, c, a, b, u: HodographParams(n, c, a, b, 0.95 * u / (2 * n + 1)),
    st.integers(1, 2), st.floats(0.5, 2.0), st.floats(0.5, 3.0), st.floats(0.5, 2.0),
    st.floats(-1.0, 1.0),
)


@given(params_st, st.floats(0.05, 2.0), st.floats(-math.pi, math.pi))
def test_modulus_matches_point(params, r, t):
    pt, mod, jac = hodograph_map(params, r, t)
    assert math.hypot(*pt) == pytest.approx(mod, rel=1e-12)
    assert jac > 0


def test_zero_eps_is_conformal_power():
    prm = HodographParams(1, 1.0, 1.0, 1.7, 0.0)
    pt, mod, jac = hodograph_map(prm, 0.5, 0.3)
    assert mod == pytest.approx(0.5**1.7)
    assert jac == pytest.approx(1.7 * 0.5 ** (2 * 0.7))
    assert modulus_factor(HodographParams(2, 1, 1, 1, 0.1), 0.0) == pytest.approx(1.1)


@settings(max_examples=30)
@given(params_st, st.floats(0.1, 1.5), st.floats(-3.0, 3.0))
def test_jacobian_matches_finite_differences(params, r, t):
    h = 1e-6
    x, y = r * math.cos(t), r * math.sin(t)

    def A(x, y):
        return hodograph_map(params, math.hypot(x, y), math.atan2(y, x))[0]

    J = np.column_stack([(A(x + h, y) - A(x - h, y)) / (2 * h), (A(x, y + h) - A(x, y - h)) / (2 * h)])
    _, _, jac = hodograph_map(params, r, t)
    assert np.linalg.det(J) == pytest.approx(jac, rel=1e-6)


@settings(max_examples=30)
@given(params_st, st.floats(0.1, 1.5), st.floats(-3.0, 3.0))
def test_invert_round_trip(params, r, t):
    pt, _, _ = hodograph_map(params, r, t)
    r2, t2 = invert_A(params, pt)
    assert r2 == pytest.approx(r, rel=1e-9)
    assert math.remainder(t2 - t, 2 * math.pi) == pytest.approx(0.0, abs=1e-9)


def test_zero_eps_inverse_closed_form():
    prm = HodographParams(1, 1.0, 1.0, 2.0, 0.0)
    r, t = invert_A(prm, [0.25, 0.0])
    assert r == pytest.approx(0.5)
    assert t == pytest.approx(0.0)
    assert A_value(prm, [0.25, 0.0]) == pytest.approx(0.5)


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("p", [1.1, 1.5, 2.5])
def test_integral_vanishes(n, p):
    rng = np.random.default_rng(n)
    for _ in range(5):
        res = mvf_of_A(random_params(n, rng), p)
        assert abs(res.value) <= 1e-8 * res.scale


def test_integral_change_of_variables_agrees_with_image_plane():
    prm = HodographParams(1, 1.0, 1.5, 1.2, 0.2)
    res = mvf_of_A(prm, 1.5)
    signed, absval = mvf_of_A_direct(prm, 1.5, n_radial=48)
    assert absval == pytest.approx(res.scale, rel=2e-2)
    assert abs(signed) <= 2e-2 * absval


def test_integral_needs_integrability():
    with pytest.raises(ValidationError):
        mvf_of_A(HodographParams(1, 1.0, -5.0, 0.5, 0.0), 2.0)
