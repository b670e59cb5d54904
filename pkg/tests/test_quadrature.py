import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plapmvf.errors import NonFiniteIntegrand, ValidationError
from plapmvf.quadrature import (
    adaptive_ball_average,
    adaptive_sphere_average,
    adaptive_split_average,
    axial_sphere_rule,
    ball_average,
    ball_rule,
    mc_average,
    sphere_average,
    sphere_rule,
    split_ball_rule,
    split_sphere_rule,
    tanh_sinh_nodes,
)

RULES = [sphere_rule(2, 32), sphere_rule(3, 16), axial_sphere_rule(2), axial_sphere_rule(3),
         ball_rule(2), ball_rule(3, 4, 8)]


@pytest.mark.parametrize("rule", RULES, ids=lambda r: f"{r.kind}{r.dimension}")
def test_weights_sum_to_one_and_nodes_antipodal(rule):
    assert math.fsum(rule.weights) == pytest.approx(1.0, abs=1e-14)
    h = rule.half
    np.testing.assert_array_equal(rule.nodes[h:], -rule.nodes[:h])
    np.testing.assert_array_equal(rule.weights[h:], rule.weights[:h])


@pytest.mark.parametrize("rule", RULES, ids=lambda r: f"{r.kind}{r.dimension}")
def test_odd_integrand_cancels_exactly(rule):
    # products and sums only, so f(-y) == -f(y) holds in floating point
    f = lambda Y: Y[:, 0] * Y[:, 0] * Y[:, -1] + 2.0 * Y[:, 0]
    assert sphere_average(rule, f, np.zeros(rule.dimension), 1.0) == 0.0


@pytest.mark.parametrize("d", [2, 3])
def test_sphere_second_moments(d):
    rule = sphere_rule(d, 16)
    zero = np.zeros(d)
    assert sphere_average(rule, lambda Y: Y[:, 0] ** 2, zero, 1.0) == pytest.approx(1 / d, abs=1e-14)
    m4 = 3.0 / (d * (d + 2))
    assert sphere_average(rule, lambda Y: Y[:, 0] ** 4, zero, 1.0) == pytest.approx(m4, abs=1e-14)


@pytest.mark.parametrize("d", [2, 3])
def test_ball_moment(d):
    rule = ball_rule(d, 4, 16)
    val = ball_average(rule, lambda Y: np.sum(Y**2, axis=1), np.zeros(d), 1.0)
    assert val == pytest.approx(d / (d + 2), abs=1e-14)


def test_sphere_average_scales_with_radius_and_center():
    rule = sphere_rule(2, 64)
    c = np.array([0.3, -1.2])
    val = sphere_average(rule, lambda Y: np.sum((Y - c) ** 2, axis=1), c, 0.25)
    assert val == pytest.approx(0.0625, abs=1e-15)


def test_one_dimensional_rule():
    rule = sphere_rule(1)
    assert rule.size == 2
    assert sphere_average(rule, lambda Y: Y[:, 0] ** 2, [1.0], 2.0) == pytest.approx(5.0)


def test_bad_inputs():
    with pytest.raises(ValidationError):
        sphere_rule(2, 7)
    with pytest.raises(ValidationError):
        sphere_rule(4, 8)
    with pytest.raises(ValidationError):
        sphere_average(sphere_rule(2, 8), lambda Y: Y[:, 0], [0.0, 0.0], -1.0)
    with pytest.raises(NonFiniteIntegrand):
        sphere_average(sphere_rule(2, 8), lambda Y: np.full(len(Y), np.nan), [0.0, 0.0], 1.0)


def test_tanh_sinh_endpoint_singularity():
    x, xm, w = tanh_sinh_nodes(6)
    assert np.sum(w * x**-0.5) == pytest.approx(2.0, rel=1e-12)
    assert np.sum(w * xm**-0.75) == pytest.approx(4.0, rel=1e-9)


@pytest.mark.parametrize("d,p", [(2, 1.2), (2, 1.5), (3, 1.5)])
def test_axial_rule_handles_equator_singularity(d, p):
    # avg |y1|^(p-2) has a closed form through Beta functions
    ref = math.gamma(d / 2) * math.gamma((p - 1) / 2) / (math.sqrt(math.pi) * math.gamma((d + p - 2) / 2))
    res = adaptive_sphere_average(lambda Y: np.abs(Y[:, 0]) ** (p - 2), d, np.zeros(d), 1.0,
                                  tol=1e-12, kind="axial")
    assert res.converged
    assert res.value == pytest.approx(ref, rel=1e-10)


def test_adaptive_ball_average_smooth():
    res = adaptive_ball_average(lambda Y: np.exp(Y[:, 0]), 2, np.zeros(2), 1.0, tol=1e-12)
    # avg over the unit disc of e^x is 2 I_1(1)
    from scipy.special import iv
    assert res.value == pytest.approx(2 * iv(1, 1.0), rel=1e-11)


@pytest.mark.parametrize("surface", [True, False])
def test_monte_carlo_agrees_with_rule(surface):
    f = lambda Y: np.abs(Y[:, 0]) ** 3
    det = (sphere_average(sphere_rule(3, 32), f, np.zeros(3), 1.0) if surface
           else ball_average(ball_rule(3, 16, 32), f, np.zeros(3), 1.0))
    mean, se = mc_average(3, surface, f, np.zeros(3), 1.0, 200_000, seed=3)
    assert abs(mean - det) <= 4 * se


def test_monte_carlo_is_deterministic():
    f = lambda Y: Y[:, 0] ** 2
    assert mc_average(2, True, f, [0, 0], 1.0, 5000, seed=7) == mc_average(2, True, f, [0, 0], 1.0, 5000, seed=7)


@given(st.floats(min_value=-2.0, max_value=2.0), st.floats(min_value=0.0, max_value=2 * math.pi))
def test_split_circle_rule_exact_for_kinked_integrand(offset, angle):
    # |cos(t - angle) - c|, kinks where cos(t - angle) = c
    c = math.tanh(offset)
    e = np.array([math.cos(angle), math.sin(angle)])
    F = lambda Y: Y @ e - c
    rule = split_sphere_rule(F, 2, np.zeros(2), 1.0, level=5)
    val = sphere_average(rule, lambda Y: np.abs(F(Y)), np.zeros(2), 1.0)
    a = math.acos(c)
    ref = (2 * math.sqrt(1 - c * c) + c * (math.pi - 2 * a)) / math.pi
    assert val == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_split_rules_are_averages():
    F = lambda Y: Y[:, 0] - 0.2 * Y[:, 1] ** 2
    for rule in (split_sphere_rule(F, 2, np.zeros(2), 1.0), split_sphere_rule(F, 3, np.zeros(3), 1.0),
                 split_ball_rule(F, 2, np.zeros(2), 1.0)):
        assert math.fsum(rule.weights) == pytest.approx(1.0, abs=1e-13)


def test_adaptive_split_converges_on_holder_integrand():
    p = 1.5
    F = lambda Y: Y[:, 0] + 0.3 * Y[:, 1] ** 2
    g = lambda Y: np.sign(F(Y)) * np.abs(F(Y)) ** (p - 1)
    res = adaptive_split_average(g, F, 2, np.zeros(2), 1.0, tol=1e-12)
    assert res.converged
    fine = sphere_average(split_sphere_rule(F, 2, np.zeros(2), 1.0, level=9), g, np.zeros(2), 1.0)
    assert res.value == pytest.approx(fine, abs=1e-11)
