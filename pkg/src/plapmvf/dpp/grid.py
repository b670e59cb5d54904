"""Uniform lattice storage for DPP fields and the interpolation stencil."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyDomain, GridTooCoarse, InterpolationOutOfHull, ValidationError
from ..quadrature import BallRule, ball_rule
from .problem import DppProblem

OUTSIDE, INTERIOR, COLLAR = 0, 1, 2
MAX_H_RATIO = 1.0 / 3.0


@dataclass
class GridField:
    """Nodal values on ``origin + h * Z^d`` restricted to a box.

    ``node_class`` holds INTERIOR, COLLAR or OUTSIDE per node (flattened, C
    order).  OUTSIDE nodes are padding that no stencil may touch.
    """

    h: float
    origin: np.ndarray
    shape: tuple
    node_class: np.ndarray
    values: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.shape)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.node_class == INTERIOR)

    @property
    def collar(self) -> np.ndarray:
        return np.flatnonzero(self.node_class == COLLAR)

    def coordinates(self, idx=None) -> np.ndarray:
        idx = np.arange(self.values.size) if idx is None else np.asarray(idx)
        multi = np.stack(np.unravel_index(idx, self.shape), axis=-1)
        return self.origin + self.h * multi

    def copy(self, values=None) -> "GridField":
        vals = self.values.copy() if values is None else np.asarray(values, dtype=float).copy()
        return GridField(self.h, self.origin, self.shape, self.node_class, vals)


def build_grid(problem: DppProblem, h: float) -> GridField:
    """Lattice over the bounding box inflated by ``r + 2h``.

    Interior nodes have negative signed distance.  Collar nodes have signed
    distance in ``[0, r + sqrt(d) h]``: the exact collar plus the extra shell
    that multilinear interpolation reads from.  Collar values start at ``G``
    and interior values at zero.
    """
    h = float(h)
    r = problem.r
    d = problem.dimension
    if not (math.isfinite(h) and h > 0):
        raise ValidationError(f"lattice spacing must be positive, got {h}")
    if h > MAX_H_RATIO * r * (1 + 1e-12):
        raise GridTooCoarse(f"h = {h} exceeds r/3 = {r / 3}")
    dom = problem.domain
    pad = r + 2.0 * h
    lo_idx = np.floor((dom.lower - pad) / h).astype(np.int64)
    hi_idx = np.ceil((dom.upper + pad) / h).astype(np.int64)
    shape = tuple(int(n) for n in hi_idx - lo_idx + 1)
    origin = lo_idx * h
    grid = GridField(h, origin, shape, np.zeros(int(np.prod(shape)), dtype=np.int8),
                     np.zeros(int(np.prod(shape))))
    X = grid.coordinates()
    sd = np.asarray(dom.sdf(X), dtype=float)
    grid.node_class[sd < 0] = INTERIOR
    grid.node_class[(sd >= 0) & (sd <= r + math.sqrt(d) * h)] = COLLAR
    if not np.any(grid.node_class == INTERIOR):
        raise EmptyDomain("no lattice node lies inside the domain")
    col = grid.collar
    grid.values[col] = np.asarray(problem.G(X[col]), dtype=float)
    return grid


@dataclass(frozen=True)
class Stencil:
    """Ball quadrature with interpolation folded into flat index offsets.

    For node ``k`` the value at quadrature point ``q`` is
    ``sum_c corner_w[q, c] * U[k + offsets[q, c]]``; this is translation
    invariant because every node sits on the same lattice.
    """

    offsets: np.ndarray
    corner_w: np.ndarray
    qw: np.ndarray
    multi_offsets: np.ndarray
    rule: BallRule


def make_stencil(grid: GridField, r: float, rule: BallRule | None = None,
                 n_radial: int = 4, n_sphere: int = 16) -> Stencil:
    d = grid.dimension
    rule = ball_rule(d, n_radial, n_sphere) if rule is None else rule
    Y = rule.nodes * (r / grid.h)
    base = np.floor(Y).astype(np.int64)
    frac = Y - base
    corners = np.array(np.meshgrid(*([[0, 1]] * d), indexing="ij")).reshape(d, -1).T
    multi = base[:, None, :] + corners[None, :, :]
    cw = np.ones((Y.shape[0], corners.shape[0]))
    for i in range(d):
        cw *= np.where(corners[None, :, i] == 1, frac[:, None, i], 1.0 - frac[:, None, i])
    strides = np.array([int(np.prod(grid.shape[i + 1:])) for i in range(d)], dtype=np.int64)
    offsets = multi @ strides
    return Stencil(np.ascontiguousarray(offsets), np.ascontiguousarray(cw),
                   np.ascontiguousarray(rule.weights, dtype=float), multi, rule)


def check_hull(grid: GridField, stencil: Stencil, nodes=None) -> None:
    """Raise InterpolationOutOfHull if a stencil reads outside stored data."""
    nodes = grid.interior if nodes is None else np.asarray(nodes)
    multi = np.stack(np.unravel_index(nodes, grid.shape), axis=-1)
    touched = np.unique(stencil.multi_offsets.reshape(-1, grid.dimension), axis=0)
    shape = np.array(grid.shape)
    strides = np.array([int(np.prod(grid.shape[i + 1:])) for i in range(grid.dimension)])
    for off in touched:
        m = multi + off
        if np.any(m < 0) or np.any(m >= shape):
            raise InterpolationOutOfHull("stencil leaves the lattice box")
        if np.any(grid.node_class[m @ strides] == OUTSIDE):
            raise InterpolationOutOfHull("stencil reads a node outside the collar")
