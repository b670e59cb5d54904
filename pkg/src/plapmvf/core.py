"""Exponent arithmetic, the nonlinearity J_p and closed-form Delta_p.

``J_p(t) = |t|^(p-2) t`` is the odd, strictly increasing map that appears in
every mean value operator of the package.  It is evaluated through
``exp((p-1) log|t|)`` with ``t == 0`` short-circuited, which keeps it odd
bit-for-bit (``log|t|`` does not see the sign).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SingularGradient, ValidationError

GRADIENT_FLOOR = 1e-10


@dataclass(frozen=True)
class PExponent:
    """An exponent ``1 < p < inf`` with the quantities derived from it."""

    p: float

    def __post_init__(self):
        p = float(self.p)
        if not (math.isfinite(p) and p > 1.0):
            raise ValidationError(f"exponent must satisfy 1 < p < inf, got {self.p!r}")
        object.__setattr__(self, "p", p)

    @property
    def pm1(self) -> float:
        return self.p - 1.0

    @property
    def conjugate(self) -> float:
        """``p/(p-1)``, the homogeneity of the p-harmonic barrier."""
        return self.p / (self.p - 1.0)

    def __float__(self):
        return self.p


def as_exponent(p) -> PExponent:
    return p if isinstance(p, PExponent) else PExponent(p)


def _signed_power(t, e):
    t = np.asarray(t, dtype=float)
    at = np.abs(t)
    with np.errstate(divide="ignore"):
        mag = np.exp(e * np.log(at))
    out = np.where(t > 0, mag, np.where(t < 0, -mag, 0.0))
    return out if out.ndim else float(out)


def jp(p, t):
    """``|t|^(p-2) t``; accepts scalars or arrays."""
    p = as_exponent(p)
    if p.p == 2.0:
        t = np.asarray(t, dtype=float)
        return t.copy() if t.ndim else float(t)
    return _signed_power(t, p.pm1)


def jp_inverse(p, s):
    """Inverse of :func:`jp`: ``sign(s) |s|^(1/(p-1))``."""
    p = as_exponent(p)
    if p.p == 2.0:
        s = np.asarray(s, dtype=float)
        return s.copy() if s.ndim else float(s)
    return _signed_power(s, 1.0 / p.pm1)


@dataclass(frozen=True)
class SmoothTestFunction:
    """A C^2 scalar field with analytic first and second derivatives.

    ``value`` must accept an ``(n, d)`` array and return ``(n,)``; a single
    point of shape ``(d,)`` returns a scalar.  ``gradient`` and ``hessian``
    are evaluated one point at a time.  ``validity_radius`` bounds the
    radius around ``base_point`` in which the field is C^2.
    """

    dimension: int
    value: Callable
    gradient: Callable
    hessian: Callable
    name: str = "anonymous"
    base_point: np.ndarray | None = None
    validity_radius: float = math.inf
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.value(x)


def _pointwise(fun):
    """Lift an ``(n, d) -> (n,)`` evaluator so that ``(d,)`` gives a float."""

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(fun(x[None, :])[0])
        return fun(x)

    return wrapped


def linear_function(a, b=0.0) -> SmoothTestFunction:
    a = np.asarray(a, dtype=float)
    d = a.size
    return SmoothTestFunction(
        dimension=d,
        value=_pointwise(lambda X: X @ a + b),
        gradient=lambda x: a.copy(),
        hessian=lambda x: np.zeros((d, d)),
        name="linear",
        params={"a": a.tolist(), "b": float(b)},
    )


def quadratic_function(a, H, c=0.0) -> SmoothTestFunction:
    """``c + a.x + x^T H x / 2`` with symmetric ``H``."""
    a = np.asarray(a, dtype=float)
    H = np.asarray(H, dtype=float)
    H = 0.5 * (H + H.T)
    d = a.size
    return SmoothTestFunction(
        dimension=d,
        value=_pointwise(lambda X: c + X @ a + 0.5 * np.einsum("ni,ij,nj->n", X, H, X)),
        gradient=lambda x: a + H @ np.asarray(x, dtype=float),
        hessian=lambda x: H.copy(),
        name="quadratic",
        params={"a": a.tolist(), "H": H.tolist(), "c": float(c)},
    )


def radial_power(center, exponent, scale=1.0) -> SmoothTestFunction:
    """``scale * |x - center|^exponent``; smooth away from ``center``."""
    z = np.asarray(center, dtype=float)
    q = float(exponent)
    d = z.size

    def value(X):
        return scale * np.linalg.norm(X - z, axis=-1) ** q

    def gradient(x):
        v = np.asarray(x, dtype=float) - z
        rho = np.linalg.norm(v)
        return scale * q * rho ** (q - 2.0) * v

    def hessian(x):
        v = np.asarray(x, dtype=float) - z
        rho = np.linalg.norm(v)
        return scale * q * rho ** (q - 2.0) * (
            np.eye(d) + (q - 2.0) * np.outer(v, v) / rho**2
        )

    return SmoothTestFunction(
        dimension=d,
        value=_pointwise(value),
        gradient=gradient,
        hessian=hessian,
        name="radial_power",
        base_point=z,
        validity_radius=math.inf,
        params={"center": z.tolist(), "exponent": q, "scale": float(scale)},
    )


def fundamental_solution(p, dimension, center=None) -> SmoothTestFunction:
    """Radial p-harmonic function ``|x|^((p-d)/(p-1))`` (``log|x|`` if p = d)."""
    p = as_exponent(p)
    d = int(dimension)
    z = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    if p.p == d:
        def value(X):
            return np.log(np.linalg.norm(X - z, axis=-1))

        def gradient(x):
            v = np.asarray(x, dtype=float) - z
            return v / (v @ v)

        def hessian(x):
            v = np.asarray(x, dtype=float) - z
            rr = v @ v
            return np.eye(d) / rr - 2.0 * np.outer(v, v) / rr**2

        fn = SmoothTestFunction(d, _pointwise(value), gradient, hessian,
                                name="fundamental_solution", base_point=z)
    else:
        fn = radial_power(z, (p.p - d) / p.pm1)
        fn = SmoothTestFunction(d, fn.value, fn.gradient, fn.hessian,
                                name="fundamental_solution", base_point=z,
                                params={"exponent": (p.p - d) / p.pm1})
    return fn


def p_laplacian(p, phi: SmoothTestFunction, x) -> float:
    """Delta_p phi(x) = |g|^(p-2) (tr H + (p-2) <H g/|g|, g/|g|>).

    Raises SingularGradient when ``p < 2`` and ``|grad phi(x)|`` is below
    the gradient floor.  For ``p >= 2`` and a vanishing gradient the value
    is the limit (``tr H`` at p = 2, zero above).
    """
    p = as_exponent(p)
    x = np.asarray(x, dtype=float)
    g = np.asarray(phi.gradient(x), dtype=float)
    H = np.asarray(phi.hessian(x), dtype=float)
    gn = float(np.linalg.norm(g))
    if gn < GRADIENT_FLOOR:
        if p.p < 2.0:
            raise SingularGradient(f"|grad phi| = {gn:.3e} below floor with p = {p.p}")
        if p.p == 2.0:
            return float(np.trace(H))
        return 0.0
    if p.p == 2.0:
        return float(np.trace(H))
    e = g / gn
    return float(gn ** (p.p - 2.0) * (np.trace(H) + (p.p - 2.0) * (e @ H @ e)))
