"""Fast invariant battery behind ``plapmvf selftest``.

Each check returns ``(name, ok, detail)``.  The whole battery runs in a few
seconds; the full suites live in the test directory.
"""

from __future__ import annotations

import math

import numpy as np


def _check_jp_roundtrip(rng):
    from .core import jp, jp_inverse

    t = rng.normal(size=1000) * 10.0 ** rng.uniform(-3, 3, size=1000)
    worst = 0.0
    for p in (1.5, 2.0, 2.7, 3.0, 4.0):
        back = jp_inverse(p, jp(p, t))
        worst = max(worst, float(np.max(np.abs(back - t) / np.abs(t))))
    return worst < 1e-12, f"max relative round-trip error {worst:.2e}"


def _check_constants(rng):
    from .constants import compute_constants

    gaps = [abs(compute_constants(1, 3.3).C - 0.5)]
    gaps += [abs(compute_constants(d, 2).C - 1.0 / (2 * d)) for d in (2, 3)]
    gaps.append(abs(compute_constants(2, 4).C - 0.1875))
    worst = max(gaps)
    return worst < 1e-12, f"max deviation {worst:.2e}"


def _check_mvf_linear(rng):
    from .core import linear_function
    from .mvf import mvf_ball, mvf_sphere

    phi = linear_function(rng.normal(size=2), 0.3)
    x = rng.normal(size=2)
    vals = [abs(f(p, phi, x, 0.05)) for p in (1.5, 3.0) for f in (mvf_sphere, mvf_ball)]
    return max(vals) < 1e-8, f"max |operator| on a linear function {max(vals):.2e}"


def _check_p0(rng):
    from .plane import find_p0

    p1, p2 = find_p0(1), find_p0(2)
    ok = 1.116 <= p1 <= 1.118 and 1.05 <= p2 <= 1.07
    return ok, f"p0(1) = {p1:.7f}, p0(2) = {p2:.7f}"


def _check_hodograph(rng):
    from .plane import mvf_of_A, random_params

    rel = 0.0
    for n in (1, 2):
        for _ in range(3):
            res = mvf_of_A(random_params(n, rng), float(rng.uniform(1.1, 3.0)))
            rel = max(rel, abs(res.value) / res.scale)
    return rel <= 1e-8, f"max relative value {rel:.2e}"


def _check_dpp_constant(rng):
    from .dpp import ball_domain, build_grid, DppProblem, picard_iterate

    c = float(rng.uniform(-2, 2))
    prob = DppProblem(ball_domain([0.0, 0.0], 1.0), 3.0, 0.4, 0.0, c)
    grid = build_grid(prob, 0.1)
    U0 = grid.copy()
    U0.values[grid.interior] = c
    U, rep = picard_iterate(prob, grid, U0=U0)
    err = float(np.max(np.abs(U.values[grid.interior] - c)))
    return err <= 1e-12 and rep.iterations <= 1, f"error {err:.1e} after {rep.iterations} sweep(s)"


def _check_scheme_monotone(rng):
    from .dpp import DppProblem, ball_domain, scheme_monotonicity_check

    prob = DppProblem(ball_domain([0.0, 0.0], 1.0), 1.5, 0.4, lambda X: X[:, 0], 0.0)
    res = scheme_monotonicity_check(prob, trials=50, seed=int(rng.integers(1 << 31)))
    return res.violations == 0, f"{res.violations} violations in {res.trials} trials"


def _check_inequalities(rng):
    from .appendix import check_lemma_a1, check_lemma_a2

    a1 = check_lemma_a1(3.0, 0.0, samples=20_000, seed=int(rng.integers(1 << 31)))
    a2 = check_lemma_a2(1.5, samples=20_000, seed=int(rng.integers(1 << 31)))
    ok = a1.stable and a2.stable and math.isfinite(a1.sup_ratio) and math.isfinite(a2.sup_ratio)
    return ok, f"sup ratios {a1.sup_ratio:.4f} (a1), {a2.sup_ratio:.4f} (a2)"


CHECKS = (
    ("jp-inverse", _check_jp_roundtrip),
    ("constants", _check_constants),
    ("mvf-linear", _check_mvf_linear),
    ("p0", _check_p0),
    ("hodograph", _check_hodograph),
    ("dpp-constant", _check_dpp_constant),
    ("scheme-monotone", _check_scheme_monotone),
    ("inequalities", _check_inequalities),
)


def run_selftest(seed: int = 0):
    rng = np.random.default_rng(seed)
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # report, keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
