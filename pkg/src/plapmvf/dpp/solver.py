"""Fixed-radius DPP: pointwise solves, monotone iteration and experiments.

Discrete problem: at every interior lattice node ``x``

    -(1/(D r^p)) avg_{B_r} J_p(U(x+y) - U(x)) dy = f(x),

with the ball average taken by a :class:`~plapmvf.quadrature.BallRule` and
off-lattice values by multilinear interpolation.  Collar nodes hold ``G``.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import bisect

from ..constants import compute_constants
from ..core import jp, jp_inverse
from ..errors import BracketFailure, MaxIterExceeded, NumericalError, ValidationError
from . import kernels
from .grid import GridField, Stencil, build_grid, check_hull, make_stencil
from .problem import DppProblem

ROOT_TOL = 1e-12
ITER_TOL = 1e-9
MAX_ITER = 100_000
BARRIER_MARGIN = 1.0


@dataclass
class DppScheme:
    """Everything a sweep needs, precomputed once per (problem, grid)."""

    problem: DppProblem
    grid: GridField
    stencil: Stencil
    nodes: np.ndarray
    target: np.ndarray
    scale: float
    mode: int

    @classmethod
    def build(cls, problem: DppProblem, grid: GridField, stencil: Stencil | None = None):
        stencil = make_stencil(grid, problem.r) if stencil is None else stencil
        check_hull(grid, stencil)
        nodes = np.ascontiguousarray(grid.interior, dtype=np.int64)
        D = compute_constants(problem.dimension, problem.p).D
        scale = D * problem.r ** problem.p.p
        X = grid.coordinates(nodes)
        f = np.asarray(problem.f(X), dtype=float).reshape(-1)
        if not np.all(np.isfinite(f)):
            raise ValidationError("source f is not finite at some interior node")
        target = np.ascontiguousarray(scale * f)
        return cls(problem, grid, stencil, nodes, target, scale, kernels.jp_mode(problem.p.p))

    def sweep(self, U_old, U_new, threads=1, check_bracket=True, tol_a=ROOT_TOL):
        n = self.nodes.size
        steps = np.zeros(n, dtype=np.int32)
        fail = np.zeros(n, dtype=np.int32)
        kernels.jacobi_sweep(U_old, U_new, self.nodes, self.stencil.offsets,
                             self.stencil.corner_w, self.stencil.qw, self.target,
                             self.problem.p.p, self.mode, tol_a, int(threads),
                             bool(check_bracket), steps, fail)
        return steps, fail

    def gauss_seidel(self, U, check_bracket=True, tol_a=ROOT_TOL):
        n = self.nodes.size
        steps = np.zeros(n, dtype=np.int32)
        fail = np.zeros(n, dtype=np.int32)
        kernels.gauss_seidel_sweep(U, self.nodes, self.stencil.offsets, self.stencil.corner_w,
                                   self.stencil.qw, self.target, self.problem.p.p, self.mode,
                                   tol_a, bool(check_bracket), steps, fail)
        return steps, fail

    def average(self, U, a) -> np.ndarray:
        """``avg_{B_r} J_p(U(x+y) - a_x)`` at every interior node."""
        return kernels.operator_values(np.ascontiguousarray(U, dtype=float), self.nodes,
                                       self.stencil.offsets, self.stencil.corner_w,
                                       self.stencil.qw, np.ascontiguousarray(a, dtype=float),
                                       self.problem.p.p, self.mode)

    def minus_M(self, U) -> np.ndarray:
        """``-M_r[U](x)`` at every interior node."""
        U = np.asarray(U, dtype=float)
        return -self.average(U, U[self.nodes]) / self.scale


def _scheme(problem, grid, stencil=None) -> DppScheme:
    if isinstance(stencil, DppScheme):
        return stencil
    return DppScheme.build(problem, grid, stencil)


def _values(field_or_array) -> np.ndarray:
    if isinstance(field_or_array, GridField):
        return field_or_array.values
    return np.asarray(field_or_array, dtype=float)


# --------------------------------------------------------------------------
# pointwise operations


def ball_average_field(problem: DppProblem, field: GridField, node: int,
                       stencil: Stencil | None = None) -> Callable[[float], float]:
    """Return ``a -> avg_{B_r(x)} J_p(field(x+y) - a) dy`` for interior ``node``.

    ``node`` is a flat lattice index.  The functional is strictly
    decreasing in ``a``.
    """
    stencil = make_stencil(field, problem.r) if stencil is None else stencil
    node = int(node)
    if field.node_class[node] != 1:
        raise ValidationError(f"node {node} is not interior")
    check_hull(field, stencil, [node])
    V = (field.values[node + stencil.offsets] * stencil.corner_w).sum(axis=1)
    w = stencil.qw
    p = problem.p

    def functional(a: float) -> float:
        return float(np.sum(w * jp(p, V - float(a))))

    functional.values = V  # interpolated values at the quadrature points
    return functional


def pointwise_solve(functional, f_value: float, D: float, r: float, p,
                    bracket: tuple | None = None, tol_a: float = ROOT_TOL,
                    tol_residual: float = 1e-12) -> float:
    """Root of ``functional(a) + D r^p f = 0`` by bisection.

    The default bracket is ``[min V + J^{-1}(D r^p f), max V + J^{-1}(D r^p f)]``
    with ``V`` the values seen by the functional, which lies inside the
    interval built from the field's extreme values on the ball.
    """
    target = float(D) * float(r) ** float(p) * float(f_value)
    if bracket is None:
        V = functional.values
        shift = jp_inverse(p, target)
        bracket = (float(V.min()) + shift, float(V.max()) + shift)
    lo, hi = map(float, bracket)
    if hi <= lo:
        return lo

    def g(a):
        return functional(a) + target

    glo, ghi = g(lo), g(hi)
    scale = tol_residual * (abs(target) + abs(functional(lo)) + abs(functional(hi)) + 1e-300)
    if glo < -scale or ghi > scale:
        raise BracketFailure(f"no sign change on [{lo}, {hi}]: g = ({glo}, {ghi})")
    if glo <= 0.0:
        return lo
    if ghi >= 0.0:
        return hi
    return float(bisect(g, lo, hi, xtol=tol_a, rtol=4 * np.finfo(float).eps, maxiter=500))


# --------------------------------------------------------------------------
# barrier


@dataclass(frozen=True)
class Barrier:
    """``psi(x) = C - K |x - z|^(p/(p-1))`` with ``-Delta_p psi = D``."""

    z: np.ndarray
    C: float
    D: float
    K: float
    exponent: float
    operator_floor: float

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.C - self.K * np.linalg.norm(X - self.z, axis=-1) ** self.exponent

    @property
    def params(self) -> dict:
        return {"z": self.z.tolist(), "C": self.C, "D": self.D, "K": self.K,
                "exponent": self.exponent, "operator_floor": self.operator_floor}


def _barrier_coefficient(p, d, D):
    q = p.conjugate
    return (D / d) ** (1.0 / p.pm1) / q


def barrier(problem: DppProblem, grid: GridField | None = None, stencil=None,
            margin: float = BARRIER_MARGIN, f_bound: float | None = None,
            G_bound: float | None = None) -> Barrier:
    """Supersolution bounding every DPP solution of ``problem``.

    ``z`` sits at ``centroid + (diameter + 2) e1`` so the unit ball around it
    misses the computational region.  The operator is homogeneous of degree
    ``p - 1``, so the discrete ``-M_r[psi]`` is ``D`` times its value for
    ``D = 1``; ``D`` is calibrated on that minimum over interior nodes so the
    supersolution inequality holds for the discrete scheme, not only in the
    limit.  ``C`` makes ``psi >= ||G||_inf`` on every stored node.
    """
    grid = build_grid(problem, problem.r / 4) if grid is None else grid
    sch = _scheme(problem, grid, stencil)
    p, d = problem.p, problem.dimension
    dom = problem.domain
    z = dom.centroid.copy()
    z[0] += dom.diameter + 2.0
    q = p.conjugate
    X = grid.coordinates()
    rho_q = np.linalg.norm(X - z, axis=-1) ** q
    unit = -_barrier_coefficient(p, d, 1.0) * rho_q
    floor = float(np.min(sch.minus_M(unit)))
    if not floor > 0:
        raise NumericalError(f"discrete barrier operator is not positive (min {floor})")
    fmax = float(np.max(np.abs(sch.target))) / sch.scale if f_bound is None else float(f_bound)
    D = (fmax + margin) / floor
    K = _barrier_coefficient(p, d, D)
    stored = grid.node_class > 0
    if G_bound is None:
        G_bound = float(np.max(np.abs(grid.values[grid.collar])))
    C = float(G_bound) + float(np.max(K * rho_q[stored]))
    return Barrier(z, C, D, K, q, floor)


def paper_initial_field(problem: DppProblem, grid: GridField, psi: Barrier,
                        G_inf: float | None = None) -> GridField:
    """``inf G - psi`` on interior nodes and ``G`` on the collar."""
    U0 = grid.copy()
    g_inf = float(np.min(grid.values[grid.collar])) if G_inf is None else float(G_inf)
    nodes = grid.interior
    U0.values[nodes] = g_inf - psi(grid.coordinates(nodes))
    return U0


# --------------------------------------------------------------------------
# iteration


@dataclass
class SolverReport:
    iterations: int
    residual_history: list
    scheme_residual: float
    sup_error: Optional[float]
    monotonicity_violations: int
    bound_violations: int
    bracket_failures: int
    newton_steps: int
    converged: bool
    mode: str
    backend: str
    seconds: float
    interior_nodes: int
    h: float
    r: float

    def as_dict(self, history=True) -> dict:
        out = asdict(self)
        if not history:
            out.pop("residual_history")
        return out


def _error(problem, grid, U):
    if problem.exact is None:
        return None
    nodes = grid.interior
    ex = np.asarray(problem.exact(grid.coordinates(nodes)), dtype=float)
    return float(np.max(np.abs(U[nodes] - ex)))


def picard_iterate(problem: DppProblem, grid: GridField, U0: GridField | None = None,
                   max_iter: int = MAX_ITER, tol: float = ITER_TOL, mode: str = "picard",
                   root_tol: float = ROOT_TOL, stencil=None, threads: int = 1,
                   check_bracket: bool = True, upper_bound=None, raise_on_failure=True):
    """Monotone fixed-point iteration ``-L[U_k, U_{k-1}] = f``.

    ``mode="picard"`` is the Jacobi sweep (every node reads the previous
    iterate); ``"gauss_seidel"`` updates in place and is not monotone in
    general, so the monotonicity counter is not maintained there.  With
    ``U0=None`` the start is ``inf G - psi`` with the barrier ``psi``, and
    the iterates are checked against ``psi`` from above.

    Returns ``(field, report)``.  Raises MaxIterExceeded (carrying both) when
    the cap is reached and BracketFailure if a pointwise bracket fails.
    """
    if mode not in ("picard", "gauss_seidel"):
        raise ValidationError(f"unknown iteration mode {mode!r}")
    t0 = time.perf_counter()
    sch = _scheme(problem, grid, stencil)
    if U0 is None:
        psi = barrier(problem, grid, sch)
        U0 = paper_initial_field(problem, grid, psi)
        if upper_bound is None:
            upper_bound = psi
    U = np.ascontiguousarray(_values(U0), dtype=float).copy()
    if U.shape != grid.values.shape:
        raise ValidationError("initial field does not match the grid")
    col = grid.collar
    if not np.array_equal(U[col], grid.values[col]):
        raise ValidationError("initial field must equal G on the collar")
    bound = None
    if upper_bound is not None:
        bound = (upper_bound(grid.coordinates(sch.nodes)) if callable(upper_bound)
                 else np.asarray(upper_bound, dtype=float)[sch.nodes])
    nodes = sch.nodes
    U_new = U.copy()
    history = []
    mono = bound_viol = brackets = newton = 0
    converged = False
    it = 0
    for it in range(1, int(max_iter) + 1):
        if mode == "picard":
            steps, fail = sch.sweep(U, U_new, threads, check_bracket, root_tol)
            diff = U_new[nodes] - U[nodes]
            mono += int(np.count_nonzero(diff < -2.0 * root_tol))
            U, U_new = U_new, U
        else:
            prev = U[nodes].copy()
            steps, fail = sch.gauss_seidel(U, check_bracket, root_tol)
            diff = U[nodes] - prev
        newton += int(steps.sum())
        brackets += int(np.count_nonzero(fail & 1))
        if bound is not None:
            bound_viol += int(np.count_nonzero(U[nodes] > bound + 2.0 * root_tol))
        delta = float(np.max(np.abs(diff))) if diff.size else 0.0
        history.append(delta)
        if brackets and raise_on_failure:
            raise BracketFailure(f"{brackets} pointwise brackets without a sign change")
        if delta <= tol:
            converged = True
            break
    out = grid.copy(U)
    report = SolverReport(
        iterations=it, residual_history=history,
        scheme_residual=scheme_residual(problem, out, sch),
        sup_error=_error(problem, grid, U),
        monotonicity_violations=mono if mode == "picard" else 0,
        bound_violations=bound_viol, bracket_failures=brackets, newton_steps=newton,
        converged=converged, mode=mode, backend=kernels.BACKEND,
        seconds=time.perf_counter() - t0, interior_nodes=int(nodes.size),
        h=grid.h, r=problem.r)
    if not converged and raise_on_failure:
        raise MaxIterExceeded(f"no convergence in {max_iter} iterations "
                              f"(last change {history[-1]:.3e})", field=out, report=report)
    return out, report


def scheme_residual(problem: DppProblem, field, stencil=None) -> float:
    """``sup |S(r, x, U(x), U)|`` over interior and collar nodes."""
    grid = field if isinstance(field, GridField) else None
    if grid is None:
        raise ValidationError("scheme_residual needs a GridField")
    sch = _scheme(problem, grid, stencil)
    U = grid.values
    inner = sch.minus_M(U) - sch.target / sch.scale
    col = grid.collar
    G = np.asarray(problem.G(grid.coordinates(col)), dtype=float)
    edge = U[col] - G
    parts = [np.abs(inner), np.abs(edge)]
    return float(max(np.max(a) if a.size else 0.0 for a in parts))


def scheme_value(problem: DppProblem, field: GridField, node: int, t: float,
                 stencil: Stencil | None = None) -> float:
    """``S(r, x, t, U)`` at lattice ``node``.

    Interior: ``-(1/(D r^p)) avg_{B_r} J_p(U(x+y) - t) dy - f(x)``.
    Collar: ``t - G(x)``.
    """
    node = int(node)
    X = field.coordinates([node])
    cls = int(field.node_class[node])
    if cls == 2:
        return float(t) - float(np.asarray(problem.G(X), dtype=float)[0])
    if cls != 1:
        raise ValidationError(f"node {node} is outside the stored region")
    D = compute_constants(problem.dimension, problem.p).D
    avg = ball_average_field(problem, field, node, stencil)(t)
    f = float(np.asarray(problem.f(X), dtype=float)[0])
    return -avg / (D * problem.r ** problem.p.p) - f


@dataclass
class MonotonicityResult:
    trials: int
    violations: int
    max_excess: float
    slack: float

    def as_dict(self):
        return asdict(self)


def scheme_monotonicity_check(problem: DppProblem, trials: int = 1000, seed: int = 0,
                              h: float | None = None, slack: float = 1e-12) -> MonotonicityResult:
    """Random ``(psi >= phi, x, t)``: count cases with ``S(psi) > S(phi) + slack``.

    Fields are i.i.d. normal nodal values, ``psi = phi + |noise|``; ``x`` is a
    random interior or collar node and ``t`` is drawn around the local
    values.  The slack is relative to ``max(1, |S(phi)|)``.
    """
    rng = np.random.default_rng(seed)
    grid = build_grid(problem, problem.r / 4 if h is None else h)
    stencil = make_stencil(grid, problem.r)
    stored = np.flatnonzero(grid.node_class != 0)
    phi, psi = grid.copy(), grid.copy()
    bad, worst = 0, 0.0
    for _ in range(int(trials)):
        vals = np.zeros(grid.values.size)
        vals[stored] = rng.normal(size=stored.size)
        phi.values[:] = vals
        psi.values[:] = vals
        psi.values[stored] += np.abs(rng.normal(size=stored.size)) * rng.uniform(0, 2)
        node = int(rng.choice(stored))
        t = float(vals[node] + rng.normal())
        s_phi = scheme_value(problem, phi, node, t, stencil)
        s_psi = scheme_value(problem, psi, node, t, stencil)
        excess = s_psi - s_phi
        worst = max(worst, excess)
        if excess > slack * max(1.0, abs(s_phi)):
            bad += 1
    return MonotonicityResult(int(trials), bad, worst, slack)


# --------------------------------------------------------------------------
# comparison


@dataclass
class ComparisonResult:
    trials: int
    violations: int
    max_excess: float
    shift_error: float
    tol: float

    def as_dict(self):
        return asdict(self)


def _random_data(rng, d, scale=1.0):
    """Smooth random field: constant + linear + quadratic."""
    c = rng.normal()
    a = rng.normal(size=d)
    H = rng.normal(size=(d, d))
    H = 0.5 * (H + H.T)
    return lambda X: scale * (c + X @ a + 0.5 * np.einsum("ni,ij,nj->n", X, H, X))


def _nonneg(rng, d):
    """Random nonnegative field: ``c + (b . (x - x0))^2``, ``c >= 0``."""
    c = abs(rng.normal()) * rng.integers(0, 2)
    b = rng.normal(size=d)
    x0 = rng.normal(size=d)
    return lambda X: c + ((X - x0) @ b) ** 2


def lockstep(problem_a: DppProblem, problem_b: DppProblem, grid_a: GridField,
             grid_b: GridField, U0_a, U0_b, tol=ITER_TOL, max_iter=MAX_ITER,
             root_tol=ROOT_TOL, threads=1):
    """Run two Picard iterations with the same number of sweeps.

    Stops once both have converged.  Because the Jacobi map is monotone in
    the field and in the data, ordered starts stay ordered at every step.
    """
    sa = DppScheme.build(problem_a, grid_a)
    sb = DppScheme.build(problem_b, grid_b, sa.stencil)
    Ua, Ub = _values(U0_a).copy(), _values(U0_b).copy()
    Na, Nb = Ua.copy(), Ub.copy()
    nodes = sa.nodes
    for it in range(1, int(max_iter) + 1):
        _, fa = sa.sweep(Ua, Na, threads, True, root_tol)
        _, fb = sb.sweep(Ub, Nb, threads, True, root_tol)
        if np.any(fa & 1) or np.any(fb & 1):
            raise BracketFailure("pointwise bracket without a sign change")
        da = np.max(np.abs(Na[nodes] - Ua[nodes]))
        db = np.max(np.abs(Nb[nodes] - Ub[nodes]))
        Ua, Na, Ub, Nb = Na, Ua, Nb, Ub
        if max(da, db) <= tol:
            return Ua, Ub, it
    raise MaxIterExceeded(f"lockstep did not converge in {max_iter} iterations")


def comparison_check(problem: DppProblem, trials: int = 50, seed: int = 0,
                     h: float | None = None, tol: float = ITER_TOL,
                     root_tol: float = ROOT_TOL, threads: int = 1) -> ComparisonResult:
    """Count ordering violations over random ordered data pairs.

    Trial data are ``f1 <= f2`` and ``G1 <= G2``; both problems are iterated
    in lockstep from ``inf G - psi`` with a barrier valid for both.  Nodes
    where ``U1 > U2 + 2 tol`` are violations.  The shift test solves
    ``(f1, G1)`` and ``(f1, G1 + c)`` from starts differing by ``c`` and
    reports ``sup |U_shift - U - c|``.
    """
    rng = np.random.default_rng(seed)
    d = problem.dimension
    h = problem.r / 4 if h is None else float(h)
    violations, excess, shift_err = 0, 0.0, 0.0
    grid0 = build_grid(problem, h)
    for trial in range(int(trials)):
        f1 = _random_data(rng, d, 0.5)
        bump_f = _nonneg(rng, d)
        G1 = _random_data(rng, d)
        bump_G = _nonneg(rng, d)
        f2 = (lambda X, f1=f1, b=bump_f: f1(X) + b(X))
        G2 = (lambda X, G1=G1, b=bump_G: G1(X) + b(X))
        pa = problem.with_data(f=f1, G=G1)
        pb = problem.with_data(f=f2, G=G2)
        ga, gb = build_grid(pa, h), build_grid(pb, h)
        sa = DppScheme.build(pa, ga)
        fmax = float(max(np.max(np.abs(sa.target)),
                         np.max(np.abs(DppScheme.build(pb, gb, sa.stencil).target)))) / sa.scale
        Gmax = float(max(np.max(np.abs(ga.values)), np.max(np.abs(gb.values))))
        psi = barrier(pa, ga, sa, f_bound=fmax, G_bound=Gmax)
        g_inf = float(min(np.min(ga.values[ga.collar]), np.min(gb.values[gb.collar])))
        Ua0 = paper_initial_field(pa, ga, psi, g_inf)
        Ub0 = paper_initial_field(pb, gb, psi, g_inf)
        Ua, Ub, _ = lockstep(pa, pb, ga, gb, Ua0, Ub0, tol, root_tol=root_tol,
                             threads=threads)
        gap = Ua - Ub
        violations += int(np.count_nonzero(gap > 2.0 * tol))
        excess = max(excess, float(np.max(gap)))
        if trial == 0:
            c = float(rng.uniform(0.5, 2.0))
            pc = problem.with_data(f=f1, G=lambda X, G1=G1, c=c: G1(X) + c)
            gc = build_grid(pc, h)
            Uc0 = Ua0.copy(Ua0.values + c)
            Uc0.values[gc.collar] = gc.values[gc.collar]
            U1, U2, _ = lockstep(pa, pc, ga, gc, Ua0, Uc0, tol, root_tol=root_tol,
                                 threads=threads)
            shift_err = float(np.max(np.abs(U2 - U1 - c)[ga.node_class > 0]))
    return ComparisonResult(int(trials), violations, excess, shift_err, tol)


# --------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceRow:
    r: float
    h: float
    sup_error: float
    iterations: int
    interior_nodes: int
    seconds: float
    monotonicity_violations: int = 0
    bound_violations: int = 0

    def as_dict(self):
        return asdict(self)


def convergence_study(make_problem: Callable[[float], DppProblem], radii: Sequence[float],
                      h_rule: Callable[[float], float] = lambda r: r / 4,
                      **solver_kwargs) -> list:
    """Solve for each radius with ``h = h_rule(r)`` and record the sup error."""
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValidationError("radii must be strictly decreasing")
    rows = []
    for r in radii:
        prob = make_problem(r)
        if prob.exact is None:
            raise ValidationError("convergence_study needs an exact solution")
        grid = build_grid(prob, h_rule(r))
        _, rep = picard_iterate(prob, grid, **solver_kwargs)
        rows.append(ConvergenceRow(r, grid.h, rep.sup_error, rep.iterations,
                                   rep.interior_nodes, rep.seconds,
                                   rep.monotonicity_violations, rep.bound_violations))
    return rows
