"""JSON-friendly descriptions of test functions, data and domains.

Every field is a mapping with a ``kind`` key; the remaining keys are the
parameters of that kind.  Plain numbers are constants.

Kinds
-----
constant      ``value``
linear        ``a``, ``b`` (default 0)
quadratic     ``a``, ``H``, ``c`` (default 0)
radial_power  ``center``, ``exponent``, ``scale`` (default 1)
fundamental   ``p``, ``center`` (default origin); needs ``dimension``
sin           ``frequency`` (vector), ``amplitude`` (default 1), ``phase`` (default 0)
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .core import (
    SmoothTestFunction,
    as_exponent,
    fundamental_solution,
    linear_function,
    quadratic_function,
    radial_power,
)
from .dpp.problem import Domain, DppProblem, ball_domain, box_domain
from .errors import ValidationError


def _constant(spec, dimension):
    c = float(spec["value"])
    return lambda X: np.full(np.asarray(X).reshape(-1, dimension).shape[0], c)


def _sin(spec, dimension):
    k = np.asarray(spec["frequency"], dtype=float)
    amp = float(spec.get("amplitude", 1.0))
    ph = float(spec.get("phase", 0.0))
    return lambda X: amp * np.sin(np.asarray(X, dtype=float) @ k + ph)


_SMOOTH = {
    "linear": lambda s, d: linear_function(s["a"], s.get("b", 0.0)),
    "quadratic": lambda s, d: quadratic_function(s["a"], s["H"], s.get("c", 0.0)),
    "radial_power": lambda s, d: radial_power(s["center"], s["exponent"], s.get("scale", 1.0)),
    "fundamental": lambda s, d: fundamental_solution(s["p"], d, s.get("center")),
}
_PLAIN = {"constant": _constant, "sin": _sin}
KINDS = tuple(sorted(set(_SMOOTH) | set(_PLAIN)))


def smooth_function(spec: Mapping, dimension: int) -> SmoothTestFunction:
    """Build a :class:`SmoothTestFunction` from its description."""
    kind = _kind(spec)
    if kind not in _SMOOTH:
        raise ValidationError(f"'{kind}' has no analytic derivatives; use one of {sorted(_SMOOTH)}")
    try:
        fn = _SMOOTH[kind](spec, dimension)
    except KeyError as exc:
        raise ValidationError(f"'{kind}' is missing parameter {exc}") from exc
    if fn.dimension != dimension:
        raise ValidationError(f"'{kind}' has dimension {fn.dimension}, expected {dimension}")
    return fn


def field(spec, dimension: int) -> Callable:
    """Vectorised ``(n, d) -> (n,)`` evaluator for any known kind or a number."""
    if isinstance(spec, (int, float)):
        return _constant({"value": spec}, dimension)
    kind = _kind(spec)
    if kind in _PLAIN:
        try:
            return _PLAIN[kind](spec, dimension)
        except KeyError as exc:
            raise ValidationError(f"'{kind}' is missing parameter {exc}") from exc
    fn = smooth_function(spec, dimension)
    return lambda X: np.asarray(fn.value(np.asarray(X, dtype=float).reshape(-1, dimension)))


def _kind(spec) -> str:
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise ValidationError(f"expression needs a 'kind' key, got {spec!r}")
    kind = spec["kind"]
    if kind not in KINDS:
        raise ValidationError(f"unknown expression kind '{kind}'; known: {', '.join(KINDS)}")
    return kind


def domain(spec: Mapping) -> Domain:
    """``{"kind": "ball", "center", "radius"}`` or ``{"kind": "box", "lower", "upper"}``."""
    kind = spec.get("kind") if isinstance(spec, Mapping) else None
    if kind == "ball":
        return ball_domain(spec["center"], spec["radius"])
    if kind == "box":
        return box_domain(spec["lower"], spec["upper"])
    raise ValidationError(f"unknown domain {spec!r}; use kind 'ball' or 'box'")


def power_solution(p, dimension: int, center) -> dict:
    """Radial solution ``|x - z|^(p/(p-1))`` with constant source.

    ``-Delta_p`` of it equals ``-d (p/(p-1))^(p-1)``; this is returned as the
    ``f`` entry so that ``-M_r[U] = f`` is the matching discrete problem.
    """
    pe = as_exponent(p)
    q = pe.conjugate
    src = -float(dimension) * q ** pe.pm1
    u = {"kind": "radial_power", "center": list(map(float, center)), "exponent": q}
    return {"f": {"kind": "constant", "value": src}, "G": u, "exact": u}


def problem_from_config(cfg: Mapping) -> DppProblem:
    """DPP problem from a config mapping.

    Keys: ``domain``, ``p``, ``r`` and either ``f``/``G`` (optional ``exact``)
    or ``preset: {"kind": "power_solution", "center": [...]}``.
    """
    try:
        dom = domain(cfg["domain"])
        p, r = cfg["p"], cfg["r"]
    except KeyError as exc:
        raise ValidationError(f"config is missing {exc}") from exc
    data = dict(cfg)
    preset = cfg.get("preset")
    if preset is not None:
        if preset.get("kind") != "power_solution":
            raise ValidationError(f"unknown preset {preset!r}")
        data.update(power_solution(p, dom.dimension, preset["center"]))
    if "f" not in data or "G" not in data:
        raise ValidationError("config needs f and G (or a preset)")
    d = dom.dimension
    exact = field(data["exact"], d) if data.get("exact") is not None else None
    return DppProblem(dom, p, r, field(data["f"], d), field(data["G"], d), exact,
                      name=str(cfg.get("name", "problem")))
