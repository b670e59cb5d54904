import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plapmvf.core import (
    PExponent,
    as_exponent,
    fundamental_solution,
    jp,
    jp_inverse,
    linear_function,
    p_laplacian,
    quadratic_function,
    radial_power,
)
from plapmvf.errors import SingularGradient, ValidationError

exponents = st.floats(min_value=1.05, max_value=8.0)
reals = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
# subnormals carry no relative precision
normal = st.one_of(st.just(0.0), st.floats(min_value=1e-100, max_value=1e6),
                   st.floats(min_value=-1e6, max_value=-1e-100))


@pytest.mark.parametrize("p", [1.0, 0.5, -2.0, math.inf, math.nan])
def test_exponent_rejects_out_of_range(p):
    with pytest.raises(ValidationError):
        PExponent(p)


def test_exponent_derived_quantities():
    e = as_exponent(3)
    assert e.pm1 == 2.0
    assert e.conjugate == 1.5
    assert as_exponent(e) is e


def test_jp_known_values():
    assert jp(2, -3.5) == -3.5
    assert jp(3, -2.0) == pytest.approx(-4.0, rel=1e-15)
    assert jp(4, 2.0) == pytest.approx(8.0, rel=1e-15)
    assert jp(1.5, 4.0) == pytest.approx(2.0, rel=1e-15)
    assert jp(3.7, 0.0) == 0.0
    assert jp_inverse(3, -4.0) == pytest.approx(-2.0, rel=1e-15)


def test_jp_arrays_keep_shape():
    t = np.linspace(-2, 2, 12).reshape(3, 4)
    assert jp(2.5, t).shape == (3, 4)
    assert isinstance(jp(2.5, 1.0), float)


@given(exponents, reals)
def test_jp_is_odd(p, t):
    assert jp(p, -t) == -jp(p, t)


@given(exponents, reals, reals)
def test_jp_is_monotone(p, s, t):
    lo, hi = min(s, t), max(s, t)
    assert jp(p, lo) <= jp(p, hi)


@given(exponents, st.floats(min_value=1e-6, max_value=1e6), st.sampled_from([-1.0, 1.0]))
def test_jp_inverse_round_trip(p, mag, sign):
    t = sign * mag
    assert jp_inverse(p, jp(p, t)) == pytest.approx(t, rel=1e-11)


@given(exponents, normal, st.floats(min_value=1e-3, max_value=1e3))
def test_jp_homogeneity(p, t, lam):
    assert jp(p, lam * t) == pytest.approx(lam ** (p - 1) * jp(p, t), rel=1e-12, abs=1e-300)


def test_p2_laplacian_is_trace(rng):
    H = rng.normal(size=(3, 3))
    phi = quadratic_function(rng.normal(size=3), H)
    assert p_laplacian(2, phi, rng.normal(size=3)) == pytest.approx(np.trace(H), rel=1e-13)


def test_linear_function_is_p_harmonic():
    phi = linear_function([1.0, -2.0])
    for p in (1.5, 2.0, 3.0):
        assert p_laplacian(p, phi, [0.3, 0.4]) == 0.0


@pytest.mark.parametrize("p,d", [(1.5, 2), (3.0, 2), (4.0, 3), (2.0, 2), (3.0, 3)])
def test_fundamental_solution_is_p_harmonic(p, d):
    u = fundamental_solution(p, d)
    x = np.linspace(0.3, 0.9, d)
    assert abs(p_laplacian(p, u, x)) < 1e-10


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
@pytest.mark.parametrize("d", [2, 3])
def test_barrier_profile_has_constant_p_laplacian(p, d):
    q = p / (p - 1)
    u = radial_power(np.zeros(d), q)
    x = np.full(d, 0.7)
    assert p_laplacian(p, u, x) == pytest.approx(d * q ** (p - 1), rel=1e-12)


def test_singular_gradient_below_two():
    phi = quadratic_function([0.0, 0.0], np.eye(2))
    with pytest.raises(SingularGradient):
        p_laplacian(1.5, phi, [0.0, 0.0])
    assert p_laplacian(2.0, phi, [0.0, 0.0]) == pytest.approx(2.0)
    assert p_laplacian(3.0, phi, [0.0, 0.0]) == 0.0
