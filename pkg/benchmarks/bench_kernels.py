"""Compiled vs pure-Python DPP kernels.

Times Jacobi sweeps, Gauss-Seidel sweeps and operator evaluations on the
manufactured radial problem for several horizon radii, checks that both
backends produce the same field, and prints a table (or CSV with --csv).

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --radii 0.2 0.1 --sweeps 20 --csv
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from plapmvf.dpp import DppProblem, DppScheme, ball_domain, barrier, build_grid, paper_initial_field
from plapmvf.dpp import _kernels_py
from plapmvf.dpp.kernels import backend_module


def make_problem(p, r):
    q = p / (p - 1)
    u = lambda X: np.linalg.norm(np.asarray(X) - [2.0, 0.0], axis=-1) ** q
    return DppProblem(ball_domain([0.0, 0.0], 1.0), p, r, -2.0 * q ** (p - 1), u, exact=u)


def _args(sch):
    st = sch.stencil
    return sch.nodes, st.offsets, st.corner_w, st.qw, sch.target, sch.problem.p.p, sch.mode


def time_backend(mod, sch, U0, sweeps, threads):
    nodes, off, cw, qw, target, p, mode = _args(sch)
    n = nodes.size
    steps = np.zeros(n, np.int32)
    fail = np.zeros(n, np.int32)
    U, N = U0.copy(), U0.copy()
    t0 = time.perf_counter()
    for _ in range(sweeps):
        mod.jacobi_sweep(U, N, nodes, off, cw, qw, target, p, mode, 1e-12, threads, True, steps, fail)
        U, N = N, U
    t_jac = (time.perf_counter() - t0) / sweeps
    G = U0.copy()
    t0 = time.perf_counter()
    for _ in range(sweeps):
        mod.gauss_seidel_sweep(G, nodes, off, cw, qw, target, p, mode, 1e-12, True, steps, fail)
    t_gs = (time.perf_counter() - t0) / sweeps
    a = U[nodes].copy()
    t0 = time.perf_counter()
    for _ in range(sweeps):
        mod.operator_values(U, nodes, off, cw, qw, a, p, mode)
    t_op = (time.perf_counter() - t0) / sweeps
    return U, {"jacobi": t_jac, "gauss_seidel": t_gs, "operator": t_op}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, nargs="+", default=[1.5, 3.0])
    ap.add_argument("--radii", type=float, nargs="+", default=[0.2, 0.1])
    ap.add_argument("--sweeps", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--csv", action="store_true")
    args = ap.parse_args(argv)

    try:
        fast = backend_module("compiled")
    except ImportError:
        fast = None
        print("compiled kernels unavailable; timing the Python backend only")
    rows = []
    for p in args.p:
        for r in args.radii:
            prob = make_problem(p, r)
            grid = build_grid(prob, r / 4)
            sch = DppScheme.build(prob, grid)
            U0 = paper_initial_field(prob, grid, barrier(prob, grid, sch)).values
            U_py, t_py = time_backend(_kernels_py, sch, U0, args.sweeps, 1)
            if fast is not None:
                U_c, t_c = time_backend(fast, sch, U0, args.sweeps, args.threads)
                diff = float(np.max(np.abs(U_c - U_py)))
            else:
                t_c, diff = {k: float("nan") for k in t_py}, float("nan")
            for kernel in t_py:
                rows.append((p, r, sch.nodes.size, kernel, t_c[kernel], t_py[kernel],
                             t_py[kernel] / t_c[kernel], diff))

    head = ("p", "r", "nodes", "kernel", "compiled_s", "python_s", "speedup", "max_diff")
    if args.csv:
        print(",".join(head))
        for row in rows:
            print(",".join(str(v) for v in row))
        return 0
    print(f"{'p':>4} {'r':>6} {'nodes':>7} {'kernel':>13} {'compiled':>11} {'python':>11} "
          f"{'speedup':>8} {'max diff':>9}")
    for p, r, n, k, tc, tp, sp, diff in rows:
        print(f"{p:4.1f} {r:6.3f} {n:7d} {k:>13} {tc * 1e3:9.2f}ms {tp * 1e3:9.2f}ms {sp:7.1f}x {diff:9.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
