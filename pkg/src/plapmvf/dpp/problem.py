"""Boundary value problems for the fixed-radius dynamic programming principle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..core import PExponent, as_exponent
from ..errors import ValidationError


@dataclass(frozen=True)
class Domain:
    """Bounded open set given by a signed distance (negative inside).

    ``sdf`` maps an ``(n, d)`` array to ``(n,)``.  It must be 1-Lipschitz;
    collar classification and the interpolation-support padding rely on it.
    """

    dimension: int
    sdf: Callable
    lower: np.ndarray
    upper: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def centroid(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))


def ball_domain(center, radius) -> Domain:
    c = np.asarray(center, dtype=float).reshape(-1)
    R = float(radius)
    if not R > 0:
        raise ValidationError(f"ball radius must be positive, got {radius}")
    return Domain(c.size, lambda X: np.linalg.norm(np.asarray(X) - c, axis=-1) - R,
                  c - R, c + R, kind="ball", params={"center": c.tolist(), "radius": R})


def box_domain(lower, upper) -> Domain:
    lo = np.asarray(lower, dtype=float).reshape(-1)
    hi = np.asarray(upper, dtype=float).reshape(-1)
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ValidationError("box needs lower < upper componentwise")
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def sdf(X):
        q = np.abs(np.asarray(X, dtype=float) - mid) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    return Domain(lo.size, sdf, lo, hi, kind="box",
                  params={"lower": lo.tolist(), "upper": hi.tolist()})


def _as_field(fun, name):
    """Accept a callable on ``(n, d)`` arrays or a constant."""
    if callable(fun):
        return fun
    try:
        c = float(fun)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} must be callable or a number") from exc
    return lambda X: np.full(np.asarray(X).shape[0], c)


@dataclass(frozen=True)
class DppProblem:
    """``-M_r[U] = f`` in the domain, ``U = G`` on the collar.

    ``f``, ``G`` and ``exact`` are vectorised over ``(n, d)`` arrays; numbers
    are promoted to constant fields.
    """

    domain: Domain
    p: PExponent
    r: float
    f: Callable
    G: Callable
    exact: Optional[Callable] = None
    name: str = "problem"

    def __post_init__(self):
        object.__setattr__(self, "p", as_exponent(self.p))
        r = float(self.r)
        if not (math.isfinite(r) and r > 0):
            raise ValidationError(f"horizon radius must be positive, got {self.r}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "f", _as_field(self.f, "f"))
        object.__setattr__(self, "G", _as_field(self.G, "G"))
        if self.exact is not None:
            object.__setattr__(self, "exact", _as_field(self.exact, "exact"))

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def with_radius(self, r) -> "DppProblem":
        return DppProblem(self.domain, self.p, r, self.f, self.G, self.exact, self.name)

    def with_data(self, f=None, G=None, exact=None) -> "DppProblem":
        return DppProblem(self.domain, self.p, self.r,
                          self.f if f is None else f,
                          self.G if G is None else G,
                          exact, self.name)
