import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plapmvf.constants import compute_constants
from plapmvf.core import jp_inverse
from plapmvf.dpp import (
    BACKEND,
    COLLAR,
    INTERIOR,
    DppProblem,
    DppScheme,
    ball_average_field,
    ball_domain,
    barrier,
    box_domain,
    build_grid,
    check_hull,
    comparison_check,
    convergence_study,
    make_stencil,
    paper_initial_field,
    picard_iterate,
    pointwise_solve,
    scheme_monotonicity_check,
    scheme_residual,
    scheme_value,
)
from plapmvf.dpp import _kernels_py
from plapmvf.dpp.kernels import backend_module, jp_mode
from plapmvf.errors import (
    BracketFailure,
    EmptyDomain,
    GridTooCoarse,
    InterpolationOutOfHull,
    MaxIterExceeded,
    ValidationError,
)

DISC = ball_domain([0.0, 0.0], 1.0)


def linear(a, b=0.0):
    a = np.asarray(a, dtype=float)
    return lambda X: np.asarray(X) @ a + b


def power_problem(p, r):
    q = p / (p - 1)
    u = lambda X: np.linalg.norm(np.asarray(X) - [2.0, 0.0], axis=-1) ** q
    return DppProblem(DISC, p, r, -2.0 * q ** (p - 1), u, exact=u)


# ---------------------------------------------------------------------------
# problem and grid


def test_problem_validation():
    with pytest.raises(ValidationError):
        DppProblem(DISC, 3.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValidationError):
        DppProblem(DISC, 3.0, 0.1, "f", 0.0)
    with pytest.raises(ValidationError):
        ball_domain([0, 0], -1)
    with pytest.raises(ValidationError):
        box_domain([0, 0], [1, -1])


def test_box_signed_distance():
    box = box_domain([0, 0], [2, 1])
    sd = box.sdf(np.array([[1.0, 0.5], [3.0, 0.5], [1.0, 2.0], [3.0, 2.0]]))
    np.testing.assert_allclose(sd, [-0.5, 1.0, 1.0, math.sqrt(2.0)])


def test_interior_nodes_are_inside_disc():
    prob = DppProblem(DISC, 3.0, 0.2, 0.0, 0.0)
    grid = build_grid(prob, 0.05)
    X = grid.coordinates()
    rad = np.linalg.norm(X, axis=1)
    np.testing.assert_array_equal(grid.node_class == INTERIOR, rad < 1)
    in_collar = (rad >= 1) & (rad <= 1.2)
    assert np.all(grid.node_class[in_collar] == COLLAR)


def test_grid_preconditions():
    prob = DppProblem(DISC, 3.0, 0.2, 0.0, 0.0)
    with pytest.raises(GridTooCoarse):
        build_grid(prob, 0.2)
    with pytest.raises(ValidationError):
        build_grid(prob, -0.1)
    tiny = DppProblem(ball_domain([0.013, 0.017], 1e-3), 3.0, 0.2, 0.0, 0.0)
    with pytest.raises(EmptyDomain):
        build_grid(tiny, 0.05)


def test_collar_starts_at_boundary_data():
    prob = DppProblem(DISC, 3.0, 0.2, 0.0, linear([1.0, -2.0], 0.5))
    grid = build_grid(prob, 0.05)
    col = grid.collar
    np.testing.assert_allclose(grid.values[col], grid.coordinates(col) @ [1.0, -2.0] + 0.5)
    assert np.all(grid.values[grid.interior] == 0.0)


@pytest.mark.parametrize("domain", [DISC, box_domain([-1, -0.5], [1.0, 0.7])])
def test_stencil_stays_in_hull(domain):
    prob = DppProblem(domain, 3.0, 0.2, 0.0, 0.0)
    grid = build_grid(prob, 0.05)
    check_hull(grid, make_stencil(grid, 0.2))


def test_hull_violation_detected():
    prob = DppProblem(DISC, 3.0, 0.2, 0.0, 0.0)
    grid = build_grid(prob, 0.05)
    wide = make_stencil(grid, 0.6)
    with pytest.raises(InterpolationOutOfHull):
        check_hull(grid, wide)


def test_stencil_interpolation_is_exact_for_bilinear():
    prob = DppProblem(DISC, 3.0, 0.2, 0.0, 0.0)
    grid = build_grid(prob, 0.05)
    st_ = make_stencil(grid, 0.2)
    X = grid.coordinates()
    grid.values[:] = 1.0 + 2.0 * X[:, 0] - X[:, 1] + 3.0 * X[:, 0] * X[:, 1]
    k = int(grid.interior[len(grid.interior) // 2])
    x = X[k]
    interp = (grid.values[k + st_.offsets] * st_.corner_w).sum(axis=1)
    Y = x + 0.2 * st_.rule.nodes
    exact = 1.0 + 2.0 * Y[:, 0] - Y[:, 1] + 3.0 * Y[:, 0] * Y[:, 1]
    np.testing.assert_allclose(interp, exact, atol=1e-13)


# ---------------------------------------------------------------------------
# pointwise operations


def _field(prob, h, fun):
    grid = build_grid(prob, h)
    grid.values[grid.node_class > 0] = fun(grid.coordinates(np.flatnonzero(grid.node_class > 0)))
    return grid


def _centre_node(grid):
    X = grid.coordinates(grid.interior)
    return int(grid.interior[np.argmin(np.linalg.norm(X, axis=1))])


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_constant_field_functional(p):
    prob = DppProblem(DISC, p, 0.2, 0.0, 0.0)
    grid = _field(prob, 0.05, lambda X: np.full(len(X), 0.7))
    F = ball_average_field(prob, grid, _centre_node(grid))
    for a in (-1.0, 0.2, 3.0):
        t = 0.7 - a
        assert F(a) == pytest.approx(np.sign(t) * abs(t) ** (p - 1), rel=1e-14)
    # interpolated values are 0.7 up to a few ulps
    assert abs(F(0.7)) <= 4e-16 ** (p - 1)


def test_linear_field_functional_vanishes_at_centre_value():
    prob = DppProblem(DISC, 3.0, 0.2, 0.0, 0.0)
    grid = _field(prob, 0.05, linear([0.4, -1.1], 0.3))
    k = _centre_node(grid)
    F = ball_average_field(prob, grid, k)
    assert abs(F(grid.values[k])) < 1e-15


def test_quadratic_moment():
    prob = DppProblem(DISC, 2.0, 0.2, 0.0, 0.0)
    grid = _field(prob, 0.05, lambda X: np.sum(np.asarray(X) ** 2, axis=1))
    k = _centre_node(grid)
    assert np.allclose(grid.coordinates([k]), 0.0)
    F = ball_average_field(prob, grid, k)
    # bilinear interpolation of x_i^2 overshoots by h^2 s (1 - s) at cell fraction s
    st_ = make_stencil(grid, 0.2)
    Y = 0.2 * st_.rule.nodes / 0.05
    s_ = Y - np.floor(Y)
    bias = 0.05**2 * np.sum(st_.qw * np.sum(s_ * (1 - s_), axis=1))
    assert F(0.0) == pytest.approx(0.02 + bias, rel=1e-12)
    assert 0 < bias < 2 * 0.05**2 / 4


def test_functional_rejects_collar_node():
    prob = DppProblem(DISC, 3.0, 0.2, 0.0, 0.0)
    grid = build_grid(prob, 0.05)
    with pytest.raises(ValidationError):
        ball_average_field(prob, grid, int(grid.collar[0]))


@settings(max_examples=25)
@given(st.sampled_from([1.5, 2.0, 3.0, 4.0]), st.floats(-3, 3), st.floats(-5, 5))
def test_pointwise_constant_closed_form(p, c, f):
    prob = DppProblem(DISC, p, 0.2, f, 0.0)
    grid = _field(prob, 0.05, lambda X: np.full(len(X), c))
    F = ball_average_field(prob, grid, _centre_node(grid))
    D = compute_constants(2, p).D
    a = pointwise_solve(F, f, D, 0.2, p)
    assert a == pytest.approx(c + jp_inverse(p, D * 0.2**p * f), abs=1e-11)


@settings(max_examples=25)
@given(st.sampled_from([1.5, 3.0]), st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_pointwise_linear_returns_centre_value(p, a):
    prob = DppProblem(DISC, p, 0.2, 0.0, 0.0)
    grid = _field(prob, 0.05, linear(a, 0.1))
    k = _centre_node(grid)
    F = ball_average_field(prob, grid, k)
    root = pointwise_solve(F, 0.0, compute_constants(2, p).D, 0.2, p)
    assert root == pytest.approx(grid.values[k], abs=1e-11)


def test_pointwise_bad_bracket():
    prob = DppProblem(DISC, 3.0, 0.2, 0.0, 0.0)
    grid = _field(prob, 0.05, lambda X: np.full(len(X), 1.0))
    F = ball_average_field(prob, grid, _centre_node(grid))
    with pytest.raises(BracketFailure):
        pointwise_solve(F, 0.0, 1.0, 0.2, 3.0, bracket=(2.0, 3.0))


@settings(max_examples=20)
@given(st.integers(0, 2**31 - 1))
def test_functional_strictly_decreasing(seed):
    rng = np.random.default_rng(seed)
    prob = DppProblem(DISC, 1.5, 0.2, 0.0, 0.0)
    grid = _field(prob, 0.05, lambda X: rng.normal(size=len(X)))
    F = ball_average_field(prob, grid, int(rng.choice(grid.interior)))
    a = np.sort(rng.normal(size=10) * 2)
    vals = [F(x) for x in a]
    assert all(u > v for u, v in zip(vals, vals[1:]) if True)


# ---------------------------------------------------------------------------
# barrier and iteration


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_barrier_is_discrete_supersolution(p):
    prob = DppProblem(DISC, p, 0.2, lambda X: np.sin(3 * X[:, 0]), linear([1.0, 1.0]))
    grid = build_grid(prob, 0.05)
    sch = DppScheme.build(prob, grid)
    psi = barrier(prob, grid, sch)
    vals = psi(grid.coordinates())
    op = sch.minus_M(vals)
    rng = np.random.default_rng(0)
    pick = rng.choice(op.size, 20, replace=False)
    assert np.all(op[pick] >= 1.0 - 1e-9)  # ||f|| + margin with ||f|| <= 1
    assert np.all(vals[grid.collar] >= grid.values[grid.collar])
    assert np.all(np.linalg.norm(grid.coordinates() - psi.z, axis=1) > 1.0)


def test_barrier_zero_data():
    prob = DppProblem(DISC, 3.0, 0.2, 0.0, 0.0)
    psi = barrier(prob)
    grid = build_grid(prob, 0.05)
    assert np.all(psi(grid.coordinates(grid.collar)) >= 0.0)


def test_constant_boundary_is_fixed_point():
    prob = DppProblem(DISC, 3.0, 0.2, 0.0, 1.25)
    grid = build_grid(prob, 0.05)
    U0 = grid.copy()
    U0.values[grid.interior] = 1.25
    U, rep = picard_iterate(prob, grid, U0=U0)
    assert rep.iterations == 1
    assert np.max(np.abs(U.values[grid.interior] - 1.25)) <= 1e-12
    assert scheme_residual(prob, U) <= 1e-10


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_linear_data_reproduced(p):
    ell = linear([0.6, -0.3], 0.2)
    prob = DppProblem(DISC, p, 0.4, 0.0, ell, exact=ell)
    grid = build_grid(prob, 0.1)
    U, rep = picard_iterate(prob, grid)
    assert rep.converged
    assert rep.sup_error <= 1e-6
    assert rep.monotonicity_violations == 0
    assert rep.bound_violations == 0


def test_iterates_monotone_and_bounded():
    prob = power_problem(3.0, 0.4)
    grid = build_grid(prob, 0.1)
    U, rep = picard_iterate(prob, grid)
    assert rep.monotonicity_violations == 0
    assert rep.bound_violations == 0
    hist = np.asarray(rep.residual_history)
    assert np.all(np.diff(hist[5:]) <= 1e-12)
    psi = barrier(prob, grid)
    assert np.max(np.abs(U.values[grid.node_class > 0])) <= np.max(np.abs(psi(grid.coordinates())))


def test_scheme_residual_branches():
    prob = DppProblem(DISC, 3.0, 0.2, 0.0, linear([1.0, 0.0]))
    grid = build_grid(prob, 0.05)
    garbage = grid.copy()
    garbage.values[grid.interior] = np.random.default_rng(0).normal(size=grid.interior.size)
    assert scheme_residual(prob, garbage) > 1.0
    U, rep = picard_iterate(prob, grid)
    sch = DppScheme.build(prob, grid)
    bound = 1e-9 * (1 + 1 / sch.scale) * 10
    assert scheme_residual(prob, U) <= bound


def test_max_iterations_reports_best_iterate():
    prob = power_problem(3.0, 0.4)
    grid = build_grid(prob, 0.1)
    with pytest.raises(MaxIterExceeded) as info:
        picard_iterate(prob, grid, max_iter=3)
    assert info.value.report.iterations == 3
    assert info.value.field is not None


def test_gauss_seidel_reaches_same_fixed_point():
    prob = power_problem(3.0, 0.4)
    grid = build_grid(prob, 0.1)
    Uj, _ = picard_iterate(prob, grid, tol=1e-11)
    Ug, rep = picard_iterate(prob, grid, tol=1e-11, mode="gauss_seidel")
    assert rep.iterations < 400
    assert np.max(np.abs(Uj.values - Ug.values)) < 1e-8


def test_unknown_mode():
    prob = power_problem(3.0, 0.4)
    with pytest.raises(ValidationError):
        picard_iterate(prob, build_grid(prob, 0.1), mode="sor")


def test_thread_count_does_not_change_result():
    prob = power_problem(1.5, 0.4)
    grid = build_grid(prob, 0.1)
    U1, _ = picard_iterate(prob, grid, threads=1)
    U3, _ = picard_iterate(prob, grid, threads=3)
    np.testing.assert_array_equal(U1.values, U3.values)


# ---------------------------------------------------------------------------
# comparison, monotonicity, convergence


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_comparison_small(p):
    prob = DppProblem(DISC, p, 0.4, 0.0, 0.0)
    res = comparison_check(prob, trials=4, seed=11)
    assert res.violations == 0
    assert res.shift_error <= 2 * res.tol


def test_identical_data_no_violation():
    prob = DppProblem(DISC, 3.0, 0.4, lambda X: X[:, 0], linear([0.0, 1.0]))
    from plapmvf.dpp import lockstep
    grid = build_grid(prob, 0.1)
    psi = barrier(prob, grid)
    U0 = paper_initial_field(prob, grid, psi)
    Ua, Ub, _ = lockstep(prob, prob, grid, grid, U0, U0)
    np.testing.assert_array_equal(Ua, Ub)


def test_scheme_value_collar_branch():
    prob = DppProblem(DISC, 3.0, 0.2, 0.0, linear([1.0, 0.0]))
    grid = build_grid(prob, 0.05)
    k = int(grid.collar[0])
    x = grid.coordinates([k])[0]
    assert scheme_value(prob, grid, k, 5.0) == pytest.approx(5.0 - x[0])


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_scheme_monotone(p):
    prob = DppProblem(DISC, p, 0.3, lambda X: X[:, 1], 0.0)
    res = scheme_monotonicity_check(prob, trials=100, seed=5)
    assert res.violations == 0


def test_convergence_study_linear_floor():
    ell = linear([0.5, 0.5])
    rows = convergence_study(lambda r: DppProblem(DISC, 3.0, r, 0.0, ell, exact=ell), [0.4, 0.3])
    assert all(row.sup_error < 1e-6 for row in rows)


def test_convergence_study_validation():
    with pytest.raises(ValidationError):
        convergence_study(lambda r: power_problem(3.0, r), [0.2, 0.4])
    with pytest.raises(ValidationError):
        convergence_study(lambda r: DppProblem(DISC, 3.0, r, 0.0, 0.0), [0.4])


# ---------------------------------------------------------------------------
# backends


def _sweep_inputs(p):
    prob = power_problem(p, 0.3)
    grid = build_grid(prob, 0.075)
    sch = DppScheme.build(prob, grid)
    psi = barrier(prob, grid, sch)
    U0 = paper_initial_field(prob, grid, psi).values
    return sch, U0


@pytest.mark.skipif(BACKEND != "compiled", reason="compiled kernels not built")
@pytest.mark.parametrize("p", [1.5, 2.0, 2.5, 3.0, 4.0])
def test_backends_agree(p):
    sch, U0 = _sweep_inputs(p)
    fast = backend_module("compiled")
    outs = []
    for mod in (fast, _kernels_py):
        U, N = U0.copy(), U0.copy()
        steps = np.zeros(sch.nodes.size, np.int32)
        fail = np.zeros(sch.nodes.size, np.int32)
        for _ in range(5):
            mod.jacobi_sweep(U, N, sch.nodes, sch.stencil.offsets, sch.stencil.corner_w,
                             sch.stencil.qw, sch.target, p, jp_mode(p), 1e-12, 1, True, steps, fail)
            U, N = N, U
        outs.append(U)
        assert not np.any(fail)
    # fast paths are bit-identical; the generic pow may differ in the last
    # bits, which the root solve can turn into a few root_tol
    atol = 0.0 if jp_mode(p) else 5e-12
    np.testing.assert_allclose(outs[0], outs[1], rtol=0, atol=atol)


def test_pure_python_backend_selected_by_environment():
    code = "from plapmvf.dpp import BACKEND; print(BACKEND)"
    env = dict(os.environ, PLAPMVF_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


def test_operator_values_backends_agree():
    sch, U0 = _sweep_inputs(3.0)
    a = U0[sch.nodes] + 0.1
    ref = _kernels_py.operator_values(U0, sch.nodes, sch.stencil.offsets, sch.stencil.corner_w,
                                      sch.stencil.qw, a, 3.0, jp_mode(3.0))
    np.testing.assert_allclose(sch.average(U0, a), ref, rtol=1e-14, atol=1e-15)
