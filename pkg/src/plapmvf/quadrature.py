"""Averages over spheres and balls.

All rules compute *averages* (weights sum to one).  Nodes are generated as a
half set followed by its antipodes, so an odd integrand cancels pair by pair
before the weighted sum is taken.

Three deterministic families are provided:

* ``sphere_rule``: uniform angles (d=2), Gauss-Legendre in the polar
  cosine times uniform azimuth (d=3), the two-point set (d=1).
* ``axial_sphere_rule``: tanh-sinh in the angle measured from the ``e1``
  axis, split at the equator ``y1 = 0``.  Integrands such as
  ``|y1|^(p-2)`` with ``p < 2`` are singular exactly there; the uniform
  rule converges like ``N^(-1/2)`` on them while this one converges
  exponentially.
* ``ball_rule``: radial Gauss-Jacobi for the weight ``rho^(d-1)`` tensored
  with a sphere rule.

``mc_average`` is an independent Monte Carlo oracle for any dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

from .errors import NonFiniteIntegrand, ValidationError

ADAPTIVE_TOL = 1e-8
MAX_UNIFORM_NODES = 2**20
MAX_POLAR_NODES = 2**10


@dataclass(frozen=True)
class SphereRule:
    """Averaging rule on the unit sphere S^(d-1).

    ``nodes`` holds ``2m`` unit vectors: rows ``m..2m-1`` are the negatives
    of rows ``0..m-1`` and carry the same weights.
    """

    dimension: int
    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "sphere"

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def half(self) -> int:
        return self.weights.size // 2


@dataclass(frozen=True)
class BallRule(SphereRule):
    """Averaging rule on the closed unit ball, same antipodal layout."""

    kind: str = "ball"


@dataclass(frozen=True)
class AdaptiveResult:
    value: float
    change: float
    scale: float
    nodes: int
    converged: bool


def _antipodal(half_nodes, half_weights, dimension, cls=SphereRule, kind=None):
    half_nodes = np.asarray(half_nodes, dtype=float).reshape(-1, dimension)
    hw = np.asarray(half_weights, dtype=float)
    hw = hw / (2.0 * math.fsum(hw))
    nodes = np.concatenate([half_nodes, -half_nodes])
    weights = np.concatenate([hw, hw])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    if kind is None:
        return cls(dimension, nodes, weights)
    return cls(dimension, nodes, weights, kind)


@lru_cache(maxsize=16)
def sphere_rule(dimension: int, n: int = 64) -> SphereRule:
    """Deterministic sphere rule.

    d=2: ``n`` uniform angles offset by half a step (no node on an axis).
    d=3: ``n`` Gauss-Legendre nodes in ``cos(theta)`` times ``2n`` uniform
    azimuths.  d=1: ``{+1, -1}``; ``n`` is ignored.
    """
    d = int(dimension)
    if d == 1:
        return _antipodal([[1.0]], [1.0], 1)
    if n < 2 or n % 2:
        raise ValidationError(f"sphere rule needs an even node count >= 2, got {n}")
    if d == 2:
        k = np.arange(n // 2)
        th = (k + 0.5) * (2.0 * math.pi / n)
        half = np.stack([np.cos(th), np.sin(th)], axis=1)
        return _antipodal(half, np.ones(n // 2), 2)
    if d == 3:
        z, wz = np.polynomial.legendre.leggauss(n)
        # keep the upper half of the polar nodes; the antipodes supply the rest
        z, wz = z[n // 2:], wz[n // 2:]
        m = 2 * n
        phi = (np.arange(m) + 0.5) * (2.0 * math.pi / m)
        s = np.sqrt(1.0 - z * z)
        half = np.stack(
            [np.repeat(z, m), np.outer(s, np.cos(phi)).ravel(), np.outer(s, np.sin(phi)).ravel()],
            axis=1,
        )
        return _antipodal(half, np.repeat(wz, m), 3)
    raise ValidationError(f"deterministic sphere rules exist for d in {{1,2,3}}, got {d}")


def tanh_sinh_nodes(level: int, t_max: float = 6.0):
    """Tanh-sinh nodes on (0, 1).

    Returns ``(x, one_minus_x, w)`` with both distances to the endpoints
    computed without cancellation, which matters for integrands singular
    at an endpoint.
    """
    h = 2.0 ** (-level)
    t = np.arange(-int(t_max / h), int(t_max / h) + 1) * h
    u = 0.5 * math.pi * np.sinh(t)
    # x = 1/(1+exp(-2u)), 1-x = 1/(1+exp(2u))
    x = np.exp(-np.logaddexp(0.0, -2.0 * u))
    xm = np.exp(-np.logaddexp(0.0, 2.0 * u))
    w = h * 0.5 * math.pi * np.cosh(t) * x * xm * 2.0
    keep = (x > 0.0) & (xm > 0.0) & (w > 0.0)
    return x[keep], xm[keep], w[keep]


@lru_cache(maxsize=64)
def axial_sphere_rule(dimension: int, level: int = 6, n_azimuth: int = 8) -> SphereRule:
    """Sphere rule graded towards the equator ``y1 = 0`` and the ``e1`` poles."""
    d = int(dimension)
    if d == 1:
        return sphere_rule(1)
    x, xm, w = tanh_sinh_nodes(level)
    if d == 2:
        # half circle theta in (0, pi) split at pi/2; delta = distance to pi/2
        s = 0.5 * math.pi * x   # small near the equator
        c = 0.5 * math.pi * xm  # pi/2 - s
        y1 = np.sin(s)
        y2 = np.sin(c)
        half = np.concatenate([np.stack([y1, y2], 1), np.stack([-y1, y2], 1)])
        return _antipodal(half, np.concatenate([w, w]), 2, kind="axial")
    if d == 3:
        # upper hemisphere y1 > 0: theta in (0, pi/2) from e1, y1 = cos(theta)
        theta = 0.5 * math.pi * x
        y1 = np.sin(0.5 * math.pi * xm)
        s = np.sin(theta)
        m = int(n_azimuth)
        phi = (np.arange(m) + 0.5) * (2.0 * math.pi / m)
        half = np.stack(
            [np.repeat(y1, m), np.outer(s, np.cos(phi)).ravel(), np.outer(s, np.sin(phi)).ravel()],
            axis=1,
        )
        return _antipodal(half, np.repeat(w * s, m), 3, kind="axial")
    raise ValidationError(f"axial rules exist for d in {{1,2,3}}, got {d}")


@lru_cache(maxsize=16)
def ball_rule(dimension: int, n_radial: int = 4, n_sphere: int = 16) -> BallRule:
    """Radial Gauss-Jacobi (weight ``rho^(d-1)``) times ``sphere_rule``."""
    d = int(dimension)
    xi, wi = roots_jacobi(int(n_radial), 0.0, d - 1.0)
    rho = 0.5 * (xi + 1.0)
    wi = wi / math.fsum(wi)
    sph = sphere_rule(d, n_sphere)
    h = sph.half
    half = (rho[:, None, None] * sph.nodes[None, :h, :]).reshape(-1, d)
    hw = np.outer(wi, sph.weights[:h]).ravel()
    return _antipodal(half, hw, d, cls=BallRule)


def _evaluate(rule: SphereRule, f: Callable, center, r: float) -> np.ndarray:
    if not r > 0:
        raise ValidationError(f"radius must be positive, got {r}")
    center = np.asarray(center, dtype=float).reshape(-1)
    if center.size != rule.dimension:
        raise ValidationError(f"center has dimension {center.size}, rule has {rule.dimension}")
    vals = np.asarray(f(center + r * rule.nodes), dtype=float).reshape(-1)
    if vals.size != rule.size:
        raise ValidationError("integrand must return one value per node")
    if not np.all(np.isfinite(vals)):
        raise NonFiniteIntegrand(f"{np.count_nonzero(~np.isfinite(vals))} non-finite integrand values")
    return vals


def rule_sum(rule: SphereRule, vals: np.ndarray) -> float:
    """Weighted sum with antipodal pairs combined first."""
    h = rule.half
    return float(np.sum(rule.weights[:h] * (vals[:h] + vals[h:])))


def sphere_average(rule: SphereRule, f: Callable, center, r: float) -> float:
    """Approximate the average of ``f`` over the sphere of radius ``r``.

    ``f`` maps an ``(n, d)`` array of points to ``(n,)`` values.
    """
    return rule_sum(rule, _evaluate(rule, f, center, r))


def ball_average(rule: BallRule, f: Callable, center, r: float) -> float:
    """Approximate the average of ``f`` over the ball of radius ``r``."""
    return rule_sum(rule, _evaluate(rule, f, center, r))


def _adaptive(make_rule, sizes, f, center, r, tol):
    prev = None
    change = math.inf
    for size in sizes:
        rule = make_rule(size)
        vals = _evaluate(rule, f, center, r)
        value = rule_sum(rule, vals)
        scale = float(np.sum(rule.weights * np.abs(vals)))
        if prev is not None:
            change = abs(value - prev)
            if change <= tol * scale or scale == 0.0:
                return AdaptiveResult(value, change, scale, rule.size, True)
        prev = value
    return AdaptiveResult(value, change, scale, rule.size, False)


def adaptive_sphere_average(f, dimension, center, r, tol=ADAPTIVE_TOL, n_start=16,
                            kind="uniform") -> AdaptiveResult:
    """Sphere average with node doubling until two results agree.

    Agreement is relative: ``|S_2N - S_N| <= tol * sum(w |f|)``.  ``kind``
    selects the uniform/Gauss family or the ``"axial"`` tanh-sinh family.
    """
    d = int(dimension)
    if d == 1:
        rule = sphere_rule(1)
        vals = _evaluate(rule, f, center, r)
        return AdaptiveResult(rule_sum(rule, vals), 0.0, float(np.mean(np.abs(vals))), 2, True)
    if kind == "axial":
        levels = range(3, 11)
        return _adaptive(lambda k: axial_sphere_rule(d, k, 2 ** (k + 1) if d == 3 else 8),
                         levels, f, center, r, tol)
    if d == 2:
        sizes = [n_start * 2**k for k in range(64) if n_start * 2**k <= MAX_UNIFORM_NODES]
    else:
        sizes = [n_start * 2**k for k in range(64) if n_start * 2**k <= MAX_POLAR_NODES]
    return _adaptive(lambda n: sphere_rule(d, n), sizes, f, center, r, tol)


def adaptive_ball_average(f, dimension, center, r, tol=ADAPTIVE_TOL, n_start=8) -> AdaptiveResult:
    """Ball average doubling radial and angular counts together."""
    d = int(dimension)
    cap = 2**9 if d == 2 else 2**6
    sizes = [n_start * 2**k for k in range(64) if n_start * 2**k <= cap]
    n_sphere = (lambda n: 4 * n) if d == 2 else (lambda n: n)
    return _adaptive(lambda n: ball_rule(d, n, n_sphere(n)), sizes, f, center, r, tol)


def mc_average(dimension, surface, f, center, r, sample_count=10**6, seed=0):
    """Monte Carlo average over a sphere (``surface=True``) or ball.

    Directions are normalised Gaussian vectors; ball radii are ``U^(1/d)``.
    Returns ``(mean, standard_error)``; deterministic for a fixed seed.
    """
    d = int(dimension)
    n = int(sample_count)
    if n < 1000:
        raise ValidationError(f"sample_count must be >= 1000, got {n}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    if not surface:
        g *= rng.random(n)[:, None] ** (1.0 / d)
    center = np.asarray(center, dtype=float).reshape(-1)
    vals = np.asarray(f(center + r * g), dtype=float).reshape(-1)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteIntegrand("non-finite Monte Carlo sample")
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n))
    return mean, se


# ---------------------------------------------------------------------------
# Kink-aware rules.
#
# J_p(phi(x+y) - phi(x)) is only Hoelder continuous where phi(x+y) = phi(x)
# when p < 2.  Uniform rules converge slowly there and, after the odd part
# cancels, the remaining signal is a fraction ~r of the integrand size.  The
# rules below locate the sign changes of a companion function F, split the
# angular variable at them (and at their antipodes, keeping the node set
# antipodal) and use tanh-sinh on every piece.

_SAMPLE = 1024
_MAX_BREAKS = 64
_PRUNE = 1e-20


def _bisect_brackets(fun, lo, hi, flo, iterations=60):
    """Vectorised bisection of ``fun`` on brackets ``[lo, hi]``."""
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _sign_breaks(values, grid, fun, periodic):
    """Zeros of a sampled function, refined by bisection.

    ``values[k] = fun(grid[k])``; ``fun`` evaluates a flat array of
    parameters.  Returns the zero locations (unsorted).
    """
    v = values
    if periodic:
        a, b = v, np.roll(v, -1)
        ga, gb = grid, np.roll(grid, -1)
        gb = np.where(gb < ga, gb + 2.0 * math.pi, gb)
    else:
        a, b = v[:-1], v[1:]
        ga, gb = grid[:-1], grid[1:]
    exact = grid[v == 0.0]
    change = (a * b < 0.0)
    if np.count_nonzero(change) + exact.size > _MAX_BREAKS:
        return None
    if not np.any(change):
        return exact
    z = _bisect_brackets(fun, ga[change], gb[change], a[change])
    return np.concatenate([exact, z])


def _piece_nodes(breaks, lo, hi, level, t_max, prune=_PRUNE):
    """Tanh-sinh nodes on ``[lo, hi]`` split at ``breaks``."""
    pts = np.unique(np.concatenate([[lo], np.sort(breaks[(breaks > lo) & (breaks < hi)]), [hi]]))
    x, xm, w = tanh_sinh_nodes(level, t_max)
    if prune:
        keep = w > prune * w.max()
        x, xm, w = x[keep], xm[keep], w[keep]
    thetas, weights = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        width = b - a
        if width <= 0.0:
            continue
        th = np.where(x < 0.5, a + width * x, b - width * xm)
        thetas.append(th)
        weights.append(width * w)
    return np.concatenate(thetas), np.concatenate(weights)


def _frame(axis):
    e = np.asarray(axis, dtype=float)
    e = e / np.linalg.norm(e)
    trial = np.eye(3)[np.argmin(np.abs(e))]
    u = trial - (trial @ e) * e
    u /= np.linalg.norm(u)
    return e, u, np.cross(e, u)


def _gradient_axis(F, center, r, d):
    rule = sphere_rule(d, 16)
    vals = np.asarray(F(center + r * rule.nodes), dtype=float)
    g = (rule.weights * vals) @ rule.nodes
    n = np.linalg.norm(g)
    return g / n if n > 0 and np.isfinite(n) else np.eye(d)[0]


def _circle_half(F, center, r, level, t_max, n_sample=_SAMPLE):
    """Half-circle angles/weights for one radius (d=2)."""
    grid = (np.arange(n_sample) + 0.5) * (2.0 * math.pi / n_sample)

    def fun(th):
        return np.asarray(F(center + r * np.stack([np.cos(th), np.sin(th)], 1)), dtype=float)

    zeros = _sign_breaks(fun(grid), grid, fun, periodic=True)
    if zeros is None:
        zeros = np.empty(0)
    zeros = np.mod(zeros, 2.0 * math.pi)
    breaks = np.mod(np.concatenate([zeros, zeros - math.pi]), 2.0 * math.pi)
    breaks = breaks[breaks < math.pi]
    return _piece_nodes(breaks, 0.0, math.pi, level, t_max)


def _meridian_half(F, center, r, level, n_azimuth, t_max, frame, n_sample=_SAMPLE // 2):
    """Directions/weights for half the meridians about ``frame[0]`` (d=3)."""
    e, u, v = frame
    m = int(n_azimuth)
    psi = (np.arange(m) + 0.5) * (2.0 * math.pi / m)
    grid = (np.arange(n_sample) + 0.5) * (math.pi / n_sample)
    dirs, wts = [], []

    def direction(th, ps):
        return (np.cos(th)[:, None] * e
                + np.sin(th)[:, None] * (np.cos(ps)[:, None] * u + np.sin(ps)[:, None] * v))

    for j in range(m // 2):
        opposite = j + m // 2
        br = []
        for jj, mirror in ((j, False), (opposite, True)):
            ps = psi[jj]

            def fun(th, ps=ps):
                return np.asarray(F(center + r * direction(th, np.full(th.shape, ps))), dtype=float)

            z = _sign_breaks(fun(grid), grid, fun, periodic=False)
            if z is not None:
                br.append(math.pi - z if mirror else z)
        breaks = np.concatenate(br) if br else np.empty(0)
        th, w = _piece_nodes(breaks, 0.0, math.pi, level, t_max)
        dirs.append(direction(th, np.full(th.shape, psi[j])))
        wts.append(w * np.sin(th))
    return np.concatenate(dirs), np.concatenate(wts)


def split_sphere_rule(F, dimension, center, r, level=4, n_azimuth=16, t_max=3.5) -> SphereRule:
    """Sphere rule whose angular pieces end at the sign changes of ``F``."""
    d = int(dimension)
    center = np.asarray(center, dtype=float).reshape(-1)
    if d == 1:
        return sphere_rule(1)
    if d == 2:
        th, w = _circle_half(F, center, r, level, t_max)
        return _antipodal(np.stack([np.cos(th), np.sin(th)], 1), w, 2, kind="split")
    if d == 3:
        frame = _frame(_gradient_axis(F, center, r, d))
        dirs, w = _meridian_half(F, center, r, level, n_azimuth, t_max, frame)
        return _antipodal(dirs, w, 3, kind="split")
    raise ValidationError(f"split rules exist for d in {{1,2,3}}, got {d}")


def split_ball_rule(F, dimension, center, r, level=4, n_azimuth=16, t_max=3.5) -> BallRule:
    """Ball rule: tanh-sinh in the radius, split sphere rule on every shell."""
    d = int(dimension)
    center = np.asarray(center, dtype=float).reshape(-1)
    x, xm, w = tanh_sinh_nodes(level, t_max)
    keep = w > _PRUNE * w.max()
    rho, w = x[keep], w[keep] * d * x[keep] ** (d - 1)
    if d == 1:
        return _antipodal(rho[:, None], w, 1, cls=BallRule, kind="split")
    frame = _frame(_gradient_axis(F, center, r, d)) if d == 3 else None
    pts, wts = [], []
    for rk, wk in zip(rho, w):
        if d == 2:
            th, wt = _circle_half(F, center, r * rk, level, t_max)
            dirs = np.stack([np.cos(th), np.sin(th)], 1)
        elif d == 3:
            dirs, wt = _meridian_half(F, center, r * rk, level, n_azimuth, t_max, frame)
        else:
            raise ValidationError(f"split rules exist for d in {{1,2,3}}, got {d}")
        pts.append(rk * dirs)
        wts.append(wk * wt / wt.sum())
    return _antipodal(np.concatenate(pts), np.concatenate(wts), d, cls=BallRule, kind="split")


def adaptive_split_average(g, F, dimension, center, r, ball=False, tol=ADAPTIVE_TOL,
                           levels=range(3, 8)) -> AdaptiveResult:
    """Average of ``g`` with split rules refined until two levels agree.

    ``F`` is the signed function whose zero set carries the kinks of ``g``;
    for the mean value operators ``F(y) = phi(y) - phi(x)``.
    """
    d = int(dimension)
    if d == 1 and not ball:
        rule = sphere_rule(1)
        vals = _evaluate(rule, g, center, r)
        return AdaptiveResult(rule_sum(rule, vals), 0.0, float(np.mean(np.abs(vals))), 2, True)
    make = split_ball_rule if ball else split_sphere_rule
    prev = None
    change = math.inf
    for k, level in enumerate(levels):
        rule = make(F, d, center, r, level=level, n_azimuth=8 * 2**k)
        vals = _evaluate(rule, g, center, r)
        value = rule_sum(rule, vals)
        scale = float(np.sum(rule.weights * np.abs(vals)))
        if prev is not None:
            change = abs(value - prev)
            if change <= tol * scale or scale == 0.0:
                return AdaptiveResult(value, change, scale, rule.size, True)
        prev = value
    return AdaptiveResult(value, change, scale, rule.size, False)
