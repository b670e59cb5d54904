"""NumPy implementation of the sweep kernels.

Same algorithm and signatures as the compiled module, vectorised across
nodes.  Sums over quadrature points run in the same order as the compiled
loops so the two backends agree to rounding.
"""

from __future__ import annotations

import numpy as np

MAX_ITER = 200


def _jp(t, mode, pm1):
    if mode == 1:
        return t.copy()
    if mode == 2:
        return t * np.abs(t)
    if mode == 3:
        return t * t * t
    a = np.abs(t)
    if mode == 4:
        mag = np.sqrt(a)
    else:
        with np.errstate(divide="ignore"):
            mag = np.exp(pm1 * np.log(a))
    return np.where(t > 0, mag, np.where(t < 0, -mag, 0.0))


def _djp(t, mode, pm1):
    if mode == 1:
        return np.ones_like(t)
    if mode == 2:
        return 2.0 * np.abs(t)
    if mode == 3:
        return 3.0 * t * t
    a = np.abs(t)
    with np.errstate(divide="ignore", over="ignore"):
        if mode == 4:
            out = 0.5 / np.sqrt(a)
        else:
            out = pm1 * np.exp((pm1 - 1.0) * np.log(a))
    return np.where(a == 0.0, np.inf if pm1 < 1.0 else 0.0, out)


def _jp_inv(s, mode, pm1):
    if mode == 1:
        return s.copy()
    if mode == 2:
        return np.sign(s) * np.sqrt(np.abs(s))
    if mode == 3:
        return np.cbrt(s)
    if mode == 4:
        return s * np.abs(s)
    with np.errstate(divide="ignore"):
        mag = np.exp(np.log(np.abs(s)) / pm1)
    return np.where(s > 0, mag, np.where(s < 0, -mag, 0.0))


def _interp(U, nodes, offsets, corner_w):
    vals = U[nodes[:, None, None] + offsets[None, :, :]]
    V = np.zeros(vals.shape[:2])
    for c in range(offsets.shape[1]):
        V = V + corner_w[None, :, c] * vals[:, :, c]
    return V


def _g(V, w, a, target, mode, pm1):
    t = V - a[:, None]
    j = w[None, :] * _jp(t, mode, pm1)
    dj = w[None, :] * _djp(t, mode, pm1)
    s = target.copy()
    sc = np.abs(target)
    ds = np.zeros_like(target)
    for q in range(V.shape[1]):
        s = s + j[:, q]
        sc = sc + np.abs(j[:, q])
        ds = ds - dj[:, q]
    return s, ds, sc


def _solve(V, w, target, a0, mode, pm1, tol_a, check, steps, fail):
    n = V.shape[0]
    lo = V.min(axis=1)
    hi = V.max(axis=1)
    s = _jp_inv(target, mode, pm1)
    a_lo = lo + s
    a_hi = hi + s
    out = np.empty(n)
    flat = a_hi <= a_lo
    out[flat] = a_lo[flat]
    act = np.flatnonzero(~flat)
    if act.size == 0:
        return out
    Va, ta = V[act], target[act]
    lo_, hi_ = a_lo[act], a_hi[act]
    if check:
        g, _, sc = _g(Va, w, lo_, ta, mode, pm1)
        bad = g < -1e-12 * sc
        g, _, sc = _g(Va, w, hi_, ta, mode, pm1)
        bad |= g > 1e-12 * sc
        fail[act[bad]] |= 1
    a = np.asarray(a0, dtype=float)[act].copy()
    inside = (lo_ < a) & (a < hi_)
    a = np.where(inside, a, 0.5 * (lo_ + hi_))
    est = a.copy()
    live = np.arange(act.size)
    for _ in range(MAX_ITER):
        if live.size == 0:
            break
        g, dg, _ = _g(Va[live], w, a[live], ta[live], mode, pm1)
        steps[act[live]] += 1
        al, ah, ai = lo_[live], hi_[live], a[live]
        root = g == 0.0
        est[live[root]] = ai[root]
        lo_[live] = al = np.where(g > 0.0, ai, al)
        hi_[live] = ah = np.where(g > 0.0, ah, ai)
        done = root | (ah - al <= tol_a)
        mid = 0.5 * (al + ah)
        newton = (dg < 0.0) & (dg > -np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            an = np.where(newton, ai - g / np.where(newton, dg, -1.0), mid)
        small = ~done & (np.abs(an - ai) <= 0.5 * tol_a) & (al <= an) & (an <= ah)
        est[live[small]] = an[small]
        probe = np.where(g > 0.0, an + 0.5 * tol_a, an - 0.5 * tol_a)
        probe = np.where((al < probe) & (probe < ah), probe, mid)
        an = np.where((al < an) & (an < ah), an, mid)
        an = np.where(small, probe, an)
        a[live] = an
        # Exact roots keep their value; clamp them into their own bracket.
        lo_[live[root]] = hi_[live[root]] = ai[root]
        live = live[~done]
    if live.size:
        fail[act[live]] |= 2
    res = np.where((lo_ <= est) & (est <= hi_), est, 0.5 * (lo_ + hi_))
    out[act] = res
    return out


def jacobi_sweep(U_old, U_new, nodes, offsets, corner_w, qw, target, p, mode,
                 tol_a, threads, check_bracket, steps, fail):
    V = _interp(U_old, nodes, offsets, corner_w)
    U_new[nodes] = _solve(V, qw, target, U_old[nodes], mode, p - 1.0, tol_a,
                          check_bracket, steps, fail)


def gauss_seidel_sweep(U, nodes, offsets, corner_w, qw, target, p, mode, tol_a,
                       check_bracket, steps, fail):
    pm1 = p - 1.0
    for i in range(nodes.size):
        sl = slice(i, i + 1)
        V = _interp(U, nodes[sl], offsets, corner_w)
        U[nodes[i]] = _solve(V, qw, target[sl], U[nodes[sl]], mode, pm1, tol_a,
                             check_bracket, steps[sl], fail[sl])[0]


def operator_values(U, nodes, offsets, corner_w, qw, a, p, mode):
    V = _interp(U, nodes, offsets, corner_w)
    j = qw[None, :] * _jp(V - np.asarray(a, dtype=float)[:, None], mode, p - 1.0)
    s = np.zeros(nodes.size)
    for q in range(qw.size):
        s = s + j[:, q]
    return s
