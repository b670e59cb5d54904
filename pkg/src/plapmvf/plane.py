"""Planar exponents, the threshold p0 and the hodograph expansion function.

Near a critical point of order ``n`` a planar p-harmonic function is
approximated by ``A = A~ o Acal^{-1}`` where, in complex notation,

    Acal(r e^{it}) = r^beta (e^{it} + eps e^{-i(2n+1)t}),
    A~(r e^{it})   = C r^alpha cos((n+1)t).

``mvf_of_A`` integrates ``J_p(A)`` over ``B_R`` after changing variables to
the preimage ``{r^beta < R / m(t)}``; the radial integral is closed form.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import bisect

from .core import as_exponent
from .errors import NewtonDiverged, NoSignChange, ValidationError
from .quadrature import tanh_sinh_nodes

P0_TOL = 1e-8


def lambda_kn(n: int, k: int, p) -> float:
    """``(-n p + sqrt(4 k^2 (p-1) + n^2 (p-2)^2)) / 2``."""
    p = as_exponent(p).p
    n, k = int(n), int(k)
    if n < 1 or k < 1:
        raise ValidationError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    return 0.5 * (-n * p + math.sqrt(4.0 * k * k * (p - 1.0) + n * n * (p - 2.0) ** 2))


def gamma_exponent(n: int, p) -> float:
    """``1 + lambda_{n+2} / lambda_{n+1}^2``."""
    l1 = lambda_kn(n, n + 1, p)
    if l1 == 0.0:
        raise ValidationError("lambda_{n+1} vanishes")
    return 1.0 + lambda_kn(n, n + 2, p) / l1**2


def eta_inverse(n: int, p) -> float:
    """``1/eta_n = (-p + sqrt(4 (1 + 1/n)^2 (p-1) + (p-2)^2)) / 2``."""
    p = as_exponent(p).p
    n = int(n)
    if n < 1:
        raise ValidationError(f"need n >= 1, got {n}")
    return 0.5 * (-p + math.sqrt(4.0 * (1.0 + 1.0 / n) ** 2 * (p - 1.0) + (p - 2.0) ** 2))


@dataclass(frozen=True)
class ExponentTable:
    n: int
    p: float
    lambda_n1: float
    lambda_n2: float
    gamma: float
    threshold: float
    inequality: bool
    eta_inverse: float

    def as_dict(self):
        return asdict(self)


def exponent_table(n: int, p) -> ExponentTable:
    pe = as_exponent(p)
    g = gamma_exponent(n, pe)
    return ExponentTable(int(n), pe.p, lambda_kn(n, n + 1, pe), lambda_kn(n, n + 2, pe), g,
                         pe.conjugate, bool(g > pe.conjugate), eta_inverse(n, pe))


def threshold_gap(n: int, p: float) -> float:
    """``lambda_{n+2}/lambda_{n+1}^2 - 1/(p-1)``; positive iff gamma > p/(p-1)."""
    return gamma_exponent(n, p) - 1.0 - 1.0 / (p - 1.0)


def find_p0(n: int = 1, bracket=(1.0, 2.0), tol: float = P0_TOL) -> float:
    """Root of :func:`threshold_gap` in ``bracket`` by bisection.

    A left endpoint at ``p = 1`` is replaced by ``1 + 1e-9`` since the gap
    is a ``0/0`` form there (its sign just above 1 is negative).
    """
    lo, hi = map(float, bracket)
    if lo <= 1.0:
        lo = 1.0 + 1e-9
    if not lo < hi:
        raise ValidationError(f"empty bracket {bracket}")
    flo, fhi = threshold_gap(n, lo), threshold_gap(n, hi)
    if flo * fhi > 0:
        raise NoSignChange(f"threshold gap has one sign on [{lo}, {hi}]: {flo:.3e}, {fhi:.3e}")
    return float(bisect(lambda q: threshold_gap(n, q), lo, hi, xtol=tol, maxiter=200))


# ---------------------------------------------------------------------------
# hodograph map


@dataclass(frozen=True)
class HodographParams:
    n: int
    C: float
    alpha: float
    beta: float
    eps: float

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        object.__setattr__(self, "n", n)
        for name in ("C", "alpha", "beta", "eps"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValidationError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if not self.C > 0:
            raise ValidationError(f"C must be positive, got {self.C}")
        if not self.beta > 0:
            raise ValidationError(f"beta must be positive, got {self.beta}")
        if not abs(self.eps) < 1.0 / (2 * n + 1):
            raise ValidationError(f"|eps| must be below 1/(2n+1) = {1 / (2 * n + 1):.6g}")

    def as_dict(self):
        return asdict(self)


def random_params(n: int, rng, eps_fraction: float = 0.95) -> HodographParams:
    """Admissible parameters: ``|eps| < eps_fraction / (2n+1)``, positive ``C``, ``alpha``, ``beta``."""
    n = int(n)
    return HodographParams(
        n=n,
        C=float(rng.uniform(0.5, 2.0)),
        alpha=float(rng.uniform(0.5, 3.0)),
        beta=float(rng.uniform(0.5, 2.0)),
        eps=float(rng.uniform(-1.0, 1.0) * eps_fraction / (2 * n + 1)),
    )


def modulus_factor(params: HodographParams, theta):
    """``m(t) = sqrt(1 + eps^2 + 2 eps cos(2(n+1)t))``."""
    e, n = params.eps, params.n
    return np.sqrt(1.0 + e * e + 2.0 * e * np.cos(2 * (n + 1) * np.asarray(theta, dtype=float)))


def jacobian_factor(params: HodographParams, theta):
    """``j(t) = 1 - (2n+1) eps^2 - 2 n eps cos(2(n+1)t)``."""
    e, n = params.eps, params.n
    return 1.0 - (2 * n + 1) * e * e - 2 * n * e * np.cos(2 * (n + 1) * np.asarray(theta, dtype=float))


def hodograph_map(params: HodographParams, r, theta):
    """``Acal(r e^{it})`` as plane points, with its modulus and Jacobian.

    Returns ``(point, modulus, jacobian)``; ``point`` has a trailing axis of
    length 2.  The modulus is ``r^beta m(t)`` and the Jacobian determinant
    (with respect to Cartesian coordinates) is ``beta r^(2(beta-1)) j(t)``.
    """
    r = np.asarray(r, dtype=float)
    t = np.asarray(theta, dtype=float)
    if np.any(r <= 0):
        raise ValidationError("r must be positive")
    n, e, b = params.n, params.eps, params.beta
    rb = r**b
    k = 2 * n + 1
    pt = np.stack([rb * (np.cos(t) + e * np.cos(k * t)), rb * (np.sin(t) - e * np.sin(k * t))], -1)
    mod = rb * modulus_factor(params, t)
    jac = b * r ** (2.0 * (b - 1.0)) * jacobian_factor(params, t)
    if pt.ndim == 1:
        return pt, float(mod), float(jac)
    return pt, mod, jac


def invert_A(params: HodographParams, w, newton_tol: float = 1e-12, max_steps: int = 100):
    """Solve ``Acal(r, t) = w`` by damped Newton; returns ``(r, t)``.

    Works in ``(log r, t)`` so the radius stays positive.  The start is
    ``r = |w|^(1/beta)``, ``t = arg w``, exact when ``eps = 0``.
    """
    w = np.asarray(w, dtype=float).reshape(2)
    nw = float(np.hypot(*w))
    if nw == 0.0:
        raise ValidationError("w = 0 has no unique preimage")
    n, e, b = params.n, params.eps, params.beta
    k = 2 * n + 1
    s, t = math.log(nw) / b, math.atan2(w[1], w[0])

    def residual(s, t):
        rb = math.exp(b * s)
        return np.array([rb * (math.cos(t) + e * math.cos(k * t)) - w[0],
                         rb * (math.sin(t) - e * math.sin(k * t)) - w[1]])

    res = residual(s, t)
    for _ in range(max_steps):
        err = float(np.hypot(*res))
        if err <= newton_tol * max(1.0, nw):
            return math.exp(s), math.remainder(t, 2 * math.pi)
        rb = math.exp(b * s)
        Jm = np.array([
            [b * rb * (math.cos(t) + e * math.cos(k * t)), rb * (-math.sin(t) - k * e * math.sin(k * t))],
            [b * rb * (math.sin(t) - e * math.sin(k * t)), rb * (math.cos(t) - k * e * math.cos(k * t))],
        ])
        step = np.linalg.solve(Jm, -res)
        lam = 1.0
        while lam > 1e-6:
            cand = residual(s + lam * step[0], t + lam * step[1])
            if np.hypot(*cand) < err:
                break
            lam *= 0.5
        s, t = s + lam * step[0], t + lam * step[1]
        res = cand
    raise NewtonDiverged(f"no preimage of {w.tolist()} within {max_steps} steps")


def A_value(params: HodographParams, w) -> float:
    """``A(w) = C r^alpha cos((n+1) t)`` with ``(r, t)`` the preimage of ``w``."""
    r, t = invert_A(params, w)
    return params.C * r**params.alpha * math.cos((params.n + 1) * t)


# ---------------------------------------------------------------------------
# vanishing integral


@dataclass(frozen=True)
class HodographIntegral:
    value: float
    scale: float
    nodes: int
    change: float
    history: tuple

    def as_dict(self):
        d = asdict(self)
        d["history"] = [list(h) for h in self.history]
        return d


def _angular_sums(params, p, R, level):
    """Signed and absolute angular integrals at one tanh-sinh level.

    The circle is cut at the zeros of ``cos((n+1)t)`` into ``2(n+1)`` pieces
    of length ``pi/(n+1)``.  ``m`` and ``j`` have that period, so piece ``i``
    and piece ``i+1`` carry equal magnitudes with opposite signs; they are
    summed node by node before the pieces are accumulated.
    """
    n = params.n
    e = params.alpha * (p - 1.0) + 2.0 * params.beta
    x, xm, w = tanh_sinh_nodes(level)
    width = math.pi / (n + 1)
    absc = np.where(x < 0.5, np.sin(math.pi * x), np.sin(math.pi * xm))
    ang = absc ** (p - 1.0)
    pieces = []
    for i in range(2 * (n + 1)):
        t0 = (0.5 * math.pi + i * math.pi) / (n + 1)
        t = np.where(x < 0.5, t0 + width * x, t0 + width - width * xm)
        rt = (R / modulus_factor(params, t)) ** (1.0 / params.beta)
        pieces.append(w * width * ang * jacobian_factor(params, t) * rt**e / e)
    # cos((n+1)t) is negative on even pieces and positive on odd ones.
    signed = [pieces[i + 1] - pieces[i] for i in range(0, 2 * (n + 1), 2)]
    k = params.C ** (p - 1.0) * params.beta
    value = k * math.fsum(math.fsum(s) for s in signed)
    scale = k * math.fsum(math.fsum(s) for s in pieces)
    return value, scale, 2 * (n + 1) * x.size


def mvf_of_A(params: HodographParams, p, R: float = 1.0, tol: float = 1e-12,
             levels=range(3, 10)) -> HodographIntegral:
    """``int_{B_R} J_p(A) dA`` in preimage coordinates.

    The angular rule is refined level by level until the absolute-value
    integral (the scale) changes by less than ``tol`` relative; the signed
    value is reported at the final level.
    """
    pe = as_exponent(p)
    R = float(R)
    if not R > 0:
        raise ValidationError(f"R must be positive, got {R}")
    e = params.alpha * pe.pm1 + 2.0 * params.beta
    if not e > 0:
        raise ValidationError("alpha (p-1) + 2 beta must be positive for integrability")
    history = []
    prev = None
    change = math.inf
    for level in levels:
        value, scale, nodes = _angular_sums(params, pe.p, R, level)
        history.append((nodes, value, scale))
        if prev is not None:
            change = abs(scale - prev)
            if change <= tol * scale:
                break
        prev = scale
    return HodographIntegral(value, scale, nodes, change, tuple(history))


def mvf_of_A_direct(params: HodographParams, p, R: float = 1.0, n_radial: int = 64,
                    n_angle: int | None = None) -> tuple:
    """``(int J_p(A), int |A|^(p-1))`` over ``B_R`` in image coordinates.

    Every node is pulled back by :func:`invert_A`.  Slow; meant as an
    independent check of the change of variables.
    """
    pe = as_exponent(p)
    base = 2 * (params.n + 1)
    M = n_angle or 8 * base
    x, w = np.polynomial.legendre.leggauss(int(n_radial))
    rho = 0.5 * R * (x + 1.0)
    wr = 0.5 * R * w * rho
    phi = (np.arange(M) + 0.5) * (2.0 * math.pi / M)
    vals = np.empty((rho.size, M))
    for i, rr in enumerate(rho):
        for j, ph in enumerate(phi):
            vals[i, j] = A_value(params, (rr * math.cos(ph), rr * math.sin(ph)))
    J = np.sign(vals) * np.abs(vals) ** pe.pm1
    dphi = 2.0 * math.pi / M
    return float(wr @ J.sum(axis=1) * dphi), float(wr @ np.abs(J).sum(axis=1) * dphi)
