"""Sphere and ball mean value operators and consistency experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .constants import compute_constants
from .core import SmoothTestFunction, as_exponent, jp, p_laplacian
from .errors import ValidationError
from .quadrature import (
    ADAPTIVE_TOL,
    adaptive_split_average,
    ball_average,
    sphere_average,
)

DEFAULT_RADII = tuple(0.1 * 2.0**-k for k in range(5))


@dataclass(frozen=True)
class MvfSample:
    r: float
    value_sphere: float
    value_ball: float
    reference: float
    error_sphere: float
    error_ball: float

    def as_dict(self):
        return asdict(self)


def _values(phi):
    return phi.value if isinstance(phi, SmoothTestFunction) else phi


def _difference(phi, x):
    f = _values(phi)
    x = np.asarray(x, dtype=float).reshape(-1)
    fx = float(np.asarray(f(x[None, :])).reshape(-1)[0])
    return lambda Y: np.asarray(f(Y), dtype=float) - fx


def _difference_integrand(p, phi, x):
    F = _difference(phi, x)
    return lambda Y: jp(p, F(Y))


def mvf_sphere(p, phi, x, r, rule=None, tol=ADAPTIVE_TOL) -> float:
    """``(1/(C r^p)) avg_{|y|=r} J_p(phi(x+y) - phi(x))``.

    ``phi`` is a :class:`SmoothTestFunction` or any callable mapping an
    ``(n, d)`` array to ``(n,)`` values; only point values are used.  With
    ``rule=None`` the angular variable is split where ``phi(x+y) = phi(x)``
    and the rule is refined until two levels agree to ``tol`` relative to
    the average of ``|integrand|``.
    """
    p = as_exponent(p)
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x.size
    g = _difference_integrand(p, phi, x)
    if rule is None:
        avg = adaptive_split_average(g, _difference(phi, x), d, x, r, tol=tol).value
    else:
        avg = sphere_average(rule, g, x, r)
    return avg / (compute_constants(d, p).C * r**p.p)


def mvf_ball(p, phi, x, r, rule=None, tol=ADAPTIVE_TOL) -> float:
    """``(1/(D r^p)) avg_{|y|<r} J_p(phi(x+y) - phi(x))``."""
    p = as_exponent(p)
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x.size
    g = _difference_integrand(p, phi, x)
    if rule is None:
        avg = adaptive_split_average(g, _difference(phi, x), d, x, r, ball=True, tol=tol).value
    else:
        avg = ball_average(rule, g, x, r)
    return avg / (compute_constants(d, p).D * r**p.p)


def consistency_sweep(p, phi: SmoothTestFunction, x, radii=DEFAULT_RADII, tol=ADAPTIVE_TOL):
    """Evaluate both operators along decreasing radii against ``Delta_p phi(x)``.

    Raises SingularGradient (through :func:`p_laplacian`) when ``p < 2`` and
    the gradient vanishes at ``x``.
    """
    p = as_exponent(p)
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValidationError("radii must be positive and strictly decreasing")
    if radii and radii[0] > phi.validity_radius:
        raise ValidationError("largest radius exceeds the validity radius of phi")
    reference = p_laplacian(p, phi, x)
    out = []
    for r in radii:
        vs = mvf_sphere(p, phi, x, r, tol=tol)
        vb = mvf_ball(p, phi, x, r, tol=tol)
        out.append(MvfSample(r, vs, vb, reference, abs(vs - reference), abs(vb - reference)))
    return out


def empirical_rate(radii, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(r)``."""
    r = np.log(np.asarray(radii, dtype=float))
    e = np.log(np.maximum(np.asarray(errors, dtype=float), 1e-300))
    return float(np.polyfit(r, e, 1)[0])


def critical_point_probe(p, beta, pairs, tol=ADAPTIVE_TOL):
    """Unnormalised sphere operator of ``|x|^beta`` along shrinking ``(r, x)``.

    Returns ``(1/r^p) avg_{|y|=r} J_p(phi(x+y) - phi(x))`` for each pair.  The
    limit is zero whenever ``1 < p < 2`` and ``beta > p/(p-1)``.
    """
    p = as_exponent(p)
    beta = float(beta)
    if not 1.0 < p.p < 2.0:
        raise ValidationError(f"probe requires 1 < p < 2, got {p.p}")
    if not beta > p.conjugate:
        raise ValidationError(f"probe requires beta > p/(p-1) = {p.conjugate:.6g}, got {beta}")
    out = []
    for r, x in pairs:
        x = np.asarray(x, dtype=float).reshape(-1)
        phi = lambda Y: np.linalg.norm(Y, axis=-1) ** beta
        g = _difference_integrand(p, phi, x)
        avg = adaptive_split_average(g, _difference(phi, x), x.size, x, float(r), tol=tol).value
        out.append(avg / float(r) ** p.p)
    return out
