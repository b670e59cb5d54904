"""Empirical checks of the auxiliary inequalities behind the consistency proofs.

The inequalities only assert that some constant exists.  Each check reports
the empirical supremum of LHS/RHS and whether it is stable under doubling
the sample (or node) count and under a change of seed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import binom

from .core import as_exponent
from .errors import NonFiniteIntegrand, ValidationError
from .quadrature import tanh_sinh_nodes

STABILITY = 0.10
LOG_RANGE = (-3.0, 3.0)
SERIES_CUTOFF = 1e-3


@dataclass(frozen=True)
class LemmaCheck:
    lemma: str
    sup_ratio: float
    samples: int
    sup_doubled: float
    sup_reseeded: float
    stable: bool
    params: dict

    def as_dict(self):
        return asdict(self)


def sample_pairs(n: int, seed: int, log_range=LOG_RANGE):
    """``(a, b)`` with log-uniform magnitudes and independent random signs."""
    rng = np.random.default_rng(seed)
    lo, hi = log_range
    mag = 10.0 ** rng.uniform(lo, hi, size=(2, int(n)))
    sgn = rng.choice([-1.0, 1.0], size=(2, int(n)))
    return sgn[0] * mag[0], sgn[1] * mag[1]


def _power_minus_one(x, q):
    """``(1 + x)^q - 1`` for ``x > -1`` without cancellation."""
    return np.expm1(q * np.log1p(x))


def _taylor_remainder(x, q, terms=10):
    """``(1 + x)^q - 1 - q x`` for ``x > -1``; series when ``|x|`` is small."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_CUTOFF
    out = np.empty_like(x)
    xs = x[small]
    acc = np.zeros_like(xs)
    for k in range(terms, 1, -1):
        acc = (acc + binom(q, k)) * xs
    out[small] = acc * xs
    xl = x[~small]
    out[~small] = _power_minus_one(xl, q) - q * xl
    return out


def lemma_a1_lhs(p, a, b):
    """``|J_p(a+b) - J_p(a) - (p-1)|a|^(p-2) b|`` evaluated stably."""
    q = as_exponent(p).pm1
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(np.broadcast(a, b).shape)
    a, b = np.broadcast_arrays(a, b)
    zero = a == 0.0
    out[zero] = np.abs(b[zero]) ** q
    nz = ~zero
    x = b[nz] / a[nz]
    amag = np.abs(a[nz]) ** q
    same = x > -1.0
    r = np.empty_like(x)
    r[same] = np.abs(_taylor_remainder(x[same], q))
    xo = x[~same]
    # sign flip: J(a+b)/J(a) = -|1+x|^q
    r[~same] = np.abs(-np.abs(1.0 + xo) ** q - 1.0 - q * xo)
    out[nz] = amag * r
    return out


def lemma_a2_lhs(p, a, b):
    """``|J_p(a+b) - J_p(a)|`` evaluated stably."""
    q = as_exponent(p).pm1
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape)
    zero = a == 0.0
    out[zero] = np.abs(b[zero]) ** q
    nz = ~zero
    x = b[nz] / a[nz]
    amag = np.abs(a[nz]) ** q
    same = x > -1.0
    r = np.empty_like(x)
    r[same] = np.abs(_power_minus_one(x[same], q))
    # sign flip: the two values have opposite signs and add in magnitude
    r[~same] = np.abs(1.0 + x[~same]) ** q + 1.0
    out[nz] = amag * r
    return out


def _ratios_a1(p, eps, a, b):
    pe = as_exponent(p)
    lhs = lemma_a1_lhs(pe, a, b)
    rhs = np.maximum(np.abs(a), np.abs(a + b)) ** (pe.p - 2.0 - eps) * np.abs(b) ** (1.0 + eps)
    return np.where(b == 0.0, 0.0, lhs / np.where(rhs == 0.0, 1.0, rhs))


def _ratios_a2(p, a, b):
    pe = as_exponent(p)
    lhs = lemma_a2_lhs(pe, a, b)
    rhs = (np.abs(a) + np.abs(b)) ** (pe.p - 2.0) * np.abs(b)
    return np.where(b == 0.0, 0.0, lhs / np.where(rhs == 0.0, 1.0, rhs))


def _stable(values):
    hi, lo = max(values), min(values)
    return bool(np.isfinite(hi) and (hi == 0.0 or (hi - lo) <= STABILITY * hi))


def _sup(ratio_fn, samples, seed):
    a, b = sample_pairs(samples, seed)
    r = ratio_fn(a, b)
    if not np.all(np.isfinite(r)):
        raise NonFiniteIntegrand("non-finite ratio in the inequality check")
    return float(np.max(r))


def check_lemma_a1(p, eps=0.0, samples=100_000, seed=0) -> LemmaCheck:
    """Empirical constant for the Taylor bound of ``J_p``, ``p >= 2``.

    Ratio: ``|J(a+b) - J(a) - (p-1)|a|^(p-2) b|`` over
    ``max(|a|, |a+b|)^(p-2-eps) |b|^(1+eps)``.
    """
    pe = as_exponent(p)
    eps = float(eps)
    if pe.p < 2.0:
        raise ValidationError(f"this bound needs p >= 2, got {pe.p}")
    if not 0.0 <= eps < pe.p - 2.0 and not (pe.p == 2.0 and eps == 0.0):
        raise ValidationError(f"eps must lie in [0, p-2), got {eps}")
    fn = lambda a, b: _ratios_a1(pe, eps, a, b)
    s1 = _sup(fn, samples, seed)
    s2 = _sup(fn, 2 * samples, seed)
    s3 = _sup(fn, samples, seed + 1)
    return LemmaCheck("a1", s1, int(samples), s2, s3, _stable([s1, s2, s3]),
                      {"p": pe.p, "eps": eps, "seed": int(seed)})


def check_lemma_a2(p, samples=100_000, seed=0) -> LemmaCheck:
    """Empirical constant for ``|J(a+b) - J(a)| <= C (|a|+|b|)^(p-2) |b|``, ``1 < p < 2``."""
    pe = as_exponent(p)
    if not pe.p < 2.0:
        raise ValidationError(f"this bound needs 1 < p < 2, got {pe.p}")
    fn = lambda a, b: _ratios_a2(pe, a, b)
    s1 = _sup(fn, samples, seed)
    s2 = _sup(fn, 2 * samples, seed)
    s3 = _sup(fn, samples, seed + 1)
    return LemmaCheck("a2", s1, int(samples), s2, s3, _stable([s1, s2, s3]),
                      {"p": pe.p, "seed": int(seed)})


# ---------------------------------------------------------------------------
# singular sphere average


@dataclass(frozen=True)
class SphereSingularCheck:
    sup_integral: float
    forms: int
    max_change: float
    stable: bool
    integrals: tuple
    params: dict

    def as_dict(self):
        d = asdict(self)
        d["integrals"] = list(self.integrals)
        return d


def random_form(d: int, rng, fraction: float | None = None) -> np.ndarray:
    """Symmetric matrix with ``max_|w|=1 |w^T L w| = fraction / (d^2 + 1)``."""
    M = rng.normal(size=(d, d))
    M = 0.5 * (M + M.T)
    rad = float(np.max(np.abs(np.linalg.eigvalsh(M))))
    frac = rng.uniform(0.0, 0.99) if fraction is None else float(fraction)
    return M * (frac / ((d * d + 1) * rad)) if rad > 0 else M * 0.0


def _meridian(L, g, s, level, d):
    """``int_0^pi |cos t + L(w, w)|^(-s) sin^(d-2) t dt`` with ``w = (cos t, sin t g)``."""
    a = L[0, 0]
    bvec = L[0, 1:]
    b = float(bvec @ g)
    c = float(g @ L[1:, 1:] @ g)
    half, amp = 0.5 * (a - c), 0.5 * (a + c)

    def f(t):
        return np.cos(t) + amp + half * np.cos(2 * t) + b * np.sin(2 * t)

    t0 = brentq(f, 0.25 * math.pi, 0.75 * math.pi, xtol=1e-300, rtol=4 * np.finfo(float).eps)

    def f_shift(delta):
        # f(t0 + delta) - f(t0), free of cancellation for tiny delta
        return (-2.0 * np.sin(t0 + 0.5 * delta) * np.sin(0.5 * delta)
                - 2.0 * half * np.sin(2 * t0 + delta) * np.sin(delta)
                + 2.0 * b * np.cos(2 * t0 + delta) * np.sin(delta))

    x, xm, w = tanh_sinh_nodes(level)
    total = 0.0
    for lo_len, sign in ((t0, -1.0), (math.pi - t0, 1.0)):
        # distance from t0 along the piece: small where x (or xm) is small
        dist = np.where(x < 0.5, lo_len * x, lo_len - lo_len * xm) if sign > 0 else \
            np.where(x < 0.5, lo_len - lo_len * x, lo_len * xm)
        delta = sign * dist
        vals = np.abs(f_shift(delta)) ** (-s)
        if d > 2:
            vals = vals * np.sin(t0 + delta) ** (d - 2)
        total += lo_len * float(np.sum(w * vals))
    return total


def sphere_singular_average(L, s: float, level: int = 5, n_azimuth: int = 32) -> float:
    """``avg_{|w|=1} |e1.w + L(w, w)|^(-s)`` for ``d in {2, 3}``."""
    L = np.asarray(L, dtype=float)
    d = L.shape[0]
    if d == 2:
        parts = [_meridian(L, np.array([g]), s, level, 2) for g in (1.0, -1.0)]
        return float(sum(parts) / (2.0 * math.pi))
    if d == 3:
        m = int(n_azimuth)
        phi = (np.arange(m) + 0.5) * (2.0 * math.pi / m)
        parts = [_meridian(L, np.array([math.cos(f), math.sin(f)]), s, level, 3) for f in phi]
        return float(sum(parts) * (2.0 * math.pi / m) / (4.0 * math.pi))
    raise ValidationError(f"deterministic sphere averages exist for d in {{2,3}}, got {d}")


def check_lemma_a3(d=2, s=0.5, forms=20, seed=0, level=5, n_azimuth=32,
                   stability_tol=1e-6) -> SphereSingularCheck:
    """Supremum of the singular sphere average over random admissible forms.

    Each form is scaled below ``1/(d^2+1)``.  Every integral is recomputed
    with doubled nodes (one tanh-sinh level up and twice the azimuths); the
    largest relative change is reported.
    """
    d = int(d)
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ValidationError(f"s must lie in (0, 1), got {s}")
    rng = np.random.default_rng(seed)
    vals, change = [], 0.0
    for _ in range(int(forms)):
        L = random_form(d, rng)
        v1 = sphere_singular_average(L, s, level, n_azimuth)
        v2 = sphere_singular_average(L, s, level + 1, 2 * n_azimuth)
        if not (math.isfinite(v1) and math.isfinite(v2)):
            raise NonFiniteIntegrand("singular sphere average did not stay finite")
        change = max(change, abs(v2 - v1) / abs(v2))
        vals.append(v2)
    return SphereSingularCheck(float(max(vals)), int(forms), change, bool(change <= stability_tol),
                               tuple(vals), {"d": d, "s": s, "seed": int(seed), "level": level})
