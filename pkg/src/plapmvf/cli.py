"""Command-line front end.

Every subcommand reads an optional JSON config (``--config``), writes CSV
or JSON to ``--out`` (default stdout) and exits with 0 on success, 1 on
invalid input and 2 on numerical failure.  Floats are written with 17
significant digits.  Wall-clock timings are left out unless ``--timing``
is given, so repeated runs produce identical bytes.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .errors import NumericalError, PlapError, ValidationError

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# output


def _num(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float at 17 significant digits (non-finite -> null)."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_num(v) if isinstance(v, (float, np.floating)) else str(v)
                           for v in row) + "\n")
    return buf.getvalue()


def _emit(args, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _envelope(command: str, body: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, **body}


# ---------------------------------------------------------------------------
# config


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    version = cfg.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {version}; expected {SCHEMA_VERSION}")
    return cfg


def _pick(args, cfg, name, default=None):
    v = getattr(args, name, None)
    if v is not None:
        return v
    return cfg.get(name, default)


# ---------------------------------------------------------------------------
# subcommands


def cmd_constants(args, cfg):
    from .constants import compute_constants

    d = int(_pick(args, cfg, "d", 2))
    p = float(_pick(args, cfg, "p", 2.0))
    _emit(args, dumps(_envelope("constants", compute_constants(d, p).as_dict())))


DEFAULT_CONSISTENCY = {
    "p": 3.0,
    "x": [0.3, -0.2],
    "phi": {"kind": "quadratic", "a": [1.0, 0.5], "H": [[1.0, 0.3], [0.3, -0.4]]},
}


def cmd_consistency(args, cfg):
    from .expressions import smooth_function
    from .mvf import DEFAULT_RADII, consistency_sweep

    cfg = {**DEFAULT_CONSISTENCY, **cfg}
    p = float(_pick(args, cfg, "p"))
    x = np.asarray(cfg["x"], dtype=float)
    phi = smooth_function(cfg["phi"], x.size)
    radii = cfg.get("radii", list(DEFAULT_RADII))
    rows = consistency_sweep(p, phi, x, radii)
    cols = ["r", "value_sphere", "value_ball", "reference", "error_sphere", "error_ball"]
    _emit(args, csv_text(cols, ([getattr(s, c) for c in cols] for s in rows)))


DEFAULT_SOLVE = {
    "domain": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
    "p": 3.0,
    "r": 0.2,
    "preset": {"kind": "power_solution", "center": [2.0, 0.0]},
}


def _solver_options(cfg):
    opts = dict(cfg.get("solver", {}))
    allowed = {"tol", "max_iter", "mode", "root_tol", "check_bracket"}
    unknown = set(opts) - allowed
    if unknown:
        raise ValidationError(f"unknown solver options {sorted(unknown)}")
    return opts


def cmd_solve(args, cfg):
    from .dpp import build_grid, picard_iterate, scheme_residual
    from .expressions import problem_from_config

    cfg = {**DEFAULT_SOLVE, **cfg}
    problem = problem_from_config(cfg)
    h = float(cfg.get("h", problem.r / 4))
    grid = build_grid(problem, h)
    U, report = picard_iterate(problem, grid, threads=args.threads, **_solver_options(cfg))
    body = report.as_dict(history=bool(cfg.get("history", False)))
    if not args.timing:
        body.pop("seconds", None)
    body["scheme_residual"] = scheme_residual(problem, U)
    _emit(args, dumps(_envelope("solve", body)))
    if args.field_csv:
        nodes = np.flatnonzero(U.node_class != 0)
        X = U.coordinates(nodes)
        cols = [f"x{i}" for i in range(X.shape[1])] + ["value", "node_class"]
        rows = ([*X[k], U.values[n], int(U.node_class[n])] for k, n in enumerate(nodes))
        with open(args.field_csv, "w", encoding="utf-8") as fh:
            fh.write(csv_text(cols, rows))


def cmd_converge(args, cfg):
    from .dpp import convergence_study
    from .expressions import problem_from_config

    cfg = {**DEFAULT_SOLVE, **cfg}
    radii = [float(r) for r in cfg.get("radii", [0.2, 0.1, 0.05])]
    ratio = float(cfg.get("h_ratio", 0.25))
    base = problem_from_config(cfg)
    rows = convergence_study(base.with_radius, radii, h_rule=lambda r: ratio * r,
                             threads=args.threads, **_solver_options(cfg))
    cols = ["r", "h", "sup_error", "iterations", "interior_nodes",
            "monotonicity_violations", "bound_violations"]
    if args.timing:
        cols.append("seconds")
    _emit(args, csv_text(cols, ([getattr(row, c) for c in cols] for row in rows)))


def cmd_p0(args, cfg):
    from .plane import exponent_table, find_p0

    n = int(_pick(args, cfg, "n", 1))
    p0 = find_p0(n)
    body = {"n": n, "p0": p0, "exponents_at_p0": exponent_table(n, p0).as_dict()}
    _emit(args, dumps(_envelope("p0", body)))


def cmd_hodograph(args, cfg):
    from .plane import HodographParams, mvf_of_A, random_params

    p = float(_pick(args, cfg, "p", 1.5))
    R = float(cfg.get("R", 1.0))
    if "params" in cfg:
        sets = [HodographParams(**ps) for ps in cfg["params"]]
    else:
        rng = np.random.default_rng(args.seed)
        n = int(_pick(args, cfg, "n", 1))
        sets = [random_params(n, rng) for _ in range(int(_pick(args, cfg, "count", 20)))]
    results = []
    for prm in sets:
        res = mvf_of_A(prm, p, R)
        results.append({**prm.as_dict(), "value": res.value, "scale": res.scale,
                        "relative": abs(res.value) / res.scale, "nodes": res.nodes})
    body = {"p": p, "R": R, "max_relative": max(r["relative"] for r in results),
            "results": results}
    _emit(args, dumps(_envelope("hodograph", body)))


def cmd_verify(args, cfg):
    from .appendix import check_lemma_a1, check_lemma_a2, check_lemma_a3

    lemma = args.lemma
    seed = args.seed
    if lemma == "a1":
        res = check_lemma_a1(cfg.get("p", 3.0), cfg.get("eps", 0.0),
                             int(cfg.get("samples", 100_000)), seed)
    elif lemma == "a2":
        res = check_lemma_a2(cfg.get("p", 1.5), int(cfg.get("samples", 100_000)), seed)
    else:
        res = check_lemma_a3(int(cfg.get("d", 2)), float(cfg.get("s", 0.5)),
                             int(cfg.get("forms", 20)), seed)
        body = {"lemma": "a3", "sup_ratio": res.sup_integral, "samples": res.forms,
                "stable": res.stable, "max_change": res.max_change, "params": res.params}
        _emit(args, dumps(_envelope("verify-inequalities", body)))
        return
    body = {"lemma": lemma, "sup_ratio": res.sup_ratio, "samples": res.samples,
            "stable": res.stable, "sup_doubled": res.sup_doubled,
            "sup_reseeded": res.sup_reseeded, "params": res.params}
    _emit(args, dumps(_envelope("verify-inequalities", body)))


def cmd_selftest(args, cfg):
    from .selftest import run_selftest

    results = run_selftest(seed=args.seed)
    lines = [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in results]
    _emit(args, "\n".join(lines))
    if not all(ok for _, ok, _ in results):
        raise NumericalError("selftest failed")


COMMANDS = {
    "constants": (cmd_constants, "normalisation constants C and D as JSON"),
    "consistency": (cmd_consistency, "sphere/ball operators vs Delta_p along shrinking radii; "
                    "CSV columns r,value_sphere,value_ball,reference,error_sphere,error_ball"),
    "solve": (cmd_solve, "solve one DPP problem; JSON solver report"),
    "converge": (cmd_converge, "DPP convergence study; CSV columns "
                 "r,h,sup_error,iterations,interior_nodes,monotonicity_violations,"
                 "bound_violations[,seconds]"),
    "p0": (cmd_p0, "threshold exponent p0 for critical points of order n"),
    "hodograph": (cmd_hodograph, "vanishing integral of J_p of the hodograph expansion"),
    "verify-inequalities": (cmd_verify, "empirical constants of the auxiliary inequalities"),
    "selftest": (cmd_selftest, "quick invariant battery; one PASS/FAIL line per check"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--seed", type=int, default=0, help="RNG seed")
    common.add_argument("--timing", action="store_true", help="include wall-clock times")

    parser = argparse.ArgumentParser(prog="plapmvf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    parsers = {}
    for name, (_, help_text) in COMMANDS.items():
        parsers[name] = sub.add_parser(name, parents=[common], help=help_text,
                                       description=help_text)
    parsers["constants"].add_argument("--d", type=int)
    parsers["constants"].add_argument("--p", type=float)
    parsers["consistency"].add_argument("--p", type=float)
    parsers["p0"].add_argument("--n", type=int)
    parsers["hodograph"].add_argument("--n", type=int)
    parsers["hodograph"].add_argument("--p", type=float)
    parsers["hodograph"].add_argument("--count", type=int)
    parsers["solve"].add_argument("--field-csv", help="also dump nodal values to this CSV")
    parsers["verify-inequalities"].add_argument("--lemma", choices=["a1", "a2", "a3"],
                                                required=True)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        cfg = load_config(args.config)
        COMMANDS[args.command][0](args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except PlapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, TypeError) as exc:
        print(f"error: malformed config ({exc})", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
