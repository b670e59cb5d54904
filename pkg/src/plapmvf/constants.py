"""Normalisation constants of the sphere and ball mean value operators.

``C = 1/2 * avg_{|y|=1} |y_1|^p`` and ``D = d C / (p + d)``.  Both come from
the axial sphere rule; Monte Carlo is used only as a cross-check in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import as_exponent
from .errors import ValidationError
from .quadrature import adaptive_sphere_average

CONSTANT_TOL = 1e-14
IBP_MIN_EXPONENT = 1.1


@dataclass(frozen=True)
class NormalizationConstants:
    d: int
    p: float
    C: float
    D: float

    def as_dict(self):
        return {"d": self.d, "p": self.p, "C": self.C, "D": self.D}


@lru_cache(maxsize=256)
def _constants(d: int, p: float) -> NormalizationConstants:
    if d == 1:
        C = 0.5
    else:
        res = adaptive_sphere_average(lambda Y: np.abs(Y[:, 0]) ** p, d, np.zeros(d), 1.0,
                                      tol=CONSTANT_TOL, kind="axial")
        C = 0.5 * res.value
    return NormalizationConstants(d, p, C, d * C / (p + d))


def compute_constants(d, p) -> NormalizationConstants:
    """Return ``C_{d,p}`` and ``D_{d,p}`` for ``d >= 1`` and ``p > 1``."""
    d = int(d)
    if d < 1:
        raise ValidationError(f"dimension must be >= 1, got {d}")
    return _constants(d, as_exponent(p).p)


@dataclass(frozen=True)
class IbpCheck:
    """Both sides of the integration-by-parts identity and their gap.

    ``skipped`` is set for ``p < 1.1``: the identity holds analytically but
    the ``|y_1|^(p-2)`` integrand is too close to non-integrable for the
    comparison to mean anything at double precision.
    """

    d: int
    p: float
    i: int
    lhs: float
    rhs: float
    residual: float
    skipped: bool = False


def check_ibp_identity(d, p, i=2) -> IbpCheck:
    """Compare ``1/2 avg|y1|^p`` with ``(p-1)/2 avg |y1|^(p-2) y_i^2``.

    ``i`` is 1-based and must differ from 1.  Each side is integrated on its
    own; nothing about one side is reused for the other.
    """
    d = int(d)
    p = as_exponent(p).p
    i = int(i)
    if d < 2:
        raise ValidationError("the identity needs d >= 2")
    if not 2 <= i <= d:
        raise ValidationError(f"coordinate index must be in 2..{d}, got {i}")
    if p < IBP_MIN_EXPONENT:
        return IbpCheck(d, p, i, math.nan, math.nan, math.nan, skipped=True)
    zero = np.zeros(d)
    lhs = 0.5 * adaptive_sphere_average(lambda Y: np.abs(Y[:, 0]) ** p, d, zero, 1.0,
                                        tol=CONSTANT_TOL, kind="axial").value
    rhs = 0.5 * (p - 1.0) * adaptive_sphere_average(
        lambda Y: np.abs(Y[:, 0]) ** (p - 2.0) * Y[:, i - 1] ** 2, d, zero, 1.0,
        tol=CONSTANT_TOL, kind="axial").value
    return IbpCheck(d, p, i, lhs, rhs, abs(lhs - rhs))
