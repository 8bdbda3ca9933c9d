"""Command-line front end.

Exit codes: 0 on success (or a certified result), 2 when the answer is
Unknown or uncertified, 1 on usage and runtime errors. Diagnostics go to
stderr; results go to stdout or ``--out``.
"""

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import generate as gen
from .certify import certify
from .dual import METHODS, TRACE_COLUMNS, SolverConfig, solve_dual_ascent
from .model import ProblemFormatError, Status, load_problem
from .oracle import GridSpec, OracleError, duality_gap_report
from .rls import RlsError, RlsInstance, rls_fit

logger = logging.getLogger("sepqcqp")

EXIT_OK, EXIT_ERROR, EXIT_UNKNOWN = 0, 1, 2
RLS_COLUMNS = ("iter", "objective", "step", "grad_norm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p):
    p.add_argument("--format", choices=("text", "json"), default="text", help="output format")
    p.add_argument("--out", help="write the result here instead of stdout")
    p.add_argument("--seed", type=int, default=0, help="seed for generated instances and multistarts")
    p.add_argument("--threads", type=int, default=1, help="worker threads for grid and FLEXA work")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="sepqcqp", description="Certified global solutions for separable QCQPs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("certify", help="run the strong-duality certificate")
    p.add_argument("problem")
    p.add_argument("--alpha", type=float, default=0.0, help="level alpha in F0")
    _common(p)

    p = sub.add_parser("solve", help="solve through the dual")
    p.add_argument("problem")
    p.add_argument("--method", choices=METHODS, default="ascent")
    p.add_argument("--mu0", type=float, default=None)
    p.add_argument("--max-outer", type=int, default=3000)
    p.add_argument("--gap-tol", type=float, default=1e-6)
    p.add_argument("--trace", help="trace CSV path; a PNG figure is written next to it")
    p.add_argument("--figure", help="figure path (default: trace path with .png)")
    _common(p)

    p = sub.add_parser("oracle-check", help="compare the dual value with a grid oracle")
    p.add_argument("problem")
    p.add_argument("--points-per-dim", type=int, default=None)
    p.add_argument("--rounds", type=int, default=4)
    _common(p)

    p = sub.add_parser("rls", help="robust least squares fit")
    p.add_argument("data", help="CSV with one observation per row, b in the last column")
    p.add_argument("--rho", required=True, help="radius (scalar or comma-separated list of p+1)")
    p.add_argument("--trace", help="history CSV path; a PNG figure is written next to it")
    p.add_argument("--max-outer", type=int, default=100)
    _common(p)

    p = sub.add_parser("generate", help="write a random instance")
    p.add_argument("kind", choices=gen.KINDS)
    p.add_argument("--p", type=int, default=4, help="variables (rows for rls_toy)")
    p.add_argument("--N", type=int, default=2, help="blocks (columns for rls_toy)")
    _common(p)
    return parser


def _emit(args, text):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(e) for e in v) + "]"
    return str(v)


def _report(args, doc, order=None):
    if args.format == "json":
        _emit(args, json.dumps(doc, indent=2, default=_json_default) + "\n")
        return
    keys = order or list(doc)
    width = max(len(k) for k in keys)
    lines = []
    for k in keys:
        v = doc[k]
        if isinstance(v, list) and v and isinstance(v[0], (str, dict)):
            lines.append(f"{k}:")
            lines += [f"  - {_fmt(e) if not isinstance(e, dict) else json.dumps(e)}" for e in v]
        else:
            lines.append(f"{k:<{width}}  {_fmt(v)}")
    _emit(args, "\n".join(lines) + "\n")


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _clean(v):
    # json has no inf/nan; keep them readable as strings
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c) for c in columns})


def _figure_path(args):
    if getattr(args, "figure", None):
        return args.figure
    return str(Path(args.trace).with_suffix(".png"))


def cmd_certify(args):
    q = load_problem(args.problem)
    cert = certify(q, alpha=args.alpha)
    doc = cert.to_dict()
    doc["p"], doc["N"] = q.p, q.N
    _report(args, doc, ["status", "case", "p", "N", "D", "M", "is_fully_diagonal", "reasons", "slater"])
    return EXIT_OK if cert.certified else EXIT_UNKNOWN


def cmd_solve(args):
    q = load_problem(args.problem)
    cfg = SolverConfig(method=args.method, mu0=args.mu0, max_outer=args.max_outer, gap_tol=args.gap_tol,
                       threads=args.threads, seed=args.seed)
    cert = certify(q)
    sol = solve_dual_ascent(q, cfg, certificate=cert)
    if args.trace:
        write_csv(args.trace, sol.trace, TRACE_COLUMNS)
        from .plotting import plot_trace

        plot_trace(sol.trace, _figure_path(args), title=f"{args.method}: {sol.status.value}")
    elif args.figure:
        from .plotting import plot_trace

        plot_trace(sol.trace, args.figure, title=f"{args.method}: {sol.status.value}")
    doc = {
        "status": sol.status.value,
        "certificate": cert.status.value,
        "primal_value": _clean(float(sol.primal_value)),
        "dual_value": _clean(float(sol.dual_value)),
        "gap": _clean(float(sol.gap)),
        "kkt_residual": _clean(float(sol.kkt_residual)),
        "iterations": sol.iterations,
        "x_star": [_clean(float(v)) for v in sol.x_star],
        "lambda_star": [_clean(float(v)) for v in sol.lambda_star],
    }
    if sol.message:
        doc["message"] = sol.message
    _report(args, doc)
    return EXIT_OK if sol.status is Status.GLOBAL_CERTIFIED else EXIT_UNKNOWN


def cmd_oracle(args):
    q = load_problem(args.problem)
    spec = GridSpec(points_per_dim=args.points_per_dim, refine_rounds=args.rounds)
    rep = duality_gap_report(q, SolverConfig(seed=args.seed, threads=args.threads), spec, threads=args.threads)
    rep = {k: _clean(v) for k, v in rep.items()}
    _report(args, rep, ["certified", "status", "f_oracle", "q_star", "gap", "primal_value", "pitch",
                        "pitch_bound", "x_oracle", "x_star", "lambda_star", "reasons"])
    return EXIT_OK if rep["certified"] else EXIT_UNKNOWN


def _parse_rho(text, cols):
    vals = [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    if len(vals) == 1:
        return vals[0]
    if len(vals) != cols + 1:
        raise ValueError(f"--rho needs 1 or {cols + 1} values, got {len(vals)}")
    return np.array(vals)


def cmd_rls(args):
    data = np.loadtxt(args.data, delimiter=",", ndmin=2)
    if data.shape[1] < 2:
        raise ValueError("the CSV needs at least one column of A and the column b")
    A, b = data[:, :-1], data[:, -1]
    inst = RlsInstance(A, b, _parse_rho(args.rho, A.shape[1]))
    x, history = rls_fit(inst, SolverConfig(seed=args.seed, threads=args.threads), max_outer=args.max_outer)
    if args.trace:
        write_csv(args.trace, history, RLS_COLUMNS)
        from .plotting import plot_rls_history

        plot_rls_history(history, _figure_path(args))
    doc = {
        "x_star": [float(v) for v in x],
        "objective": float(history[-1]["objective"]),
        "iterations": len(history) - 1,
        "ols": [float(v) for v in np.linalg.lstsq(A, b, rcond=None)[0]],
    }
    _report(args, doc)
    return EXIT_OK


def cmd_generate(args):
    _emit(args, gen.generate_text(args.kind, args.seed, args.p, args.N))
    return EXIT_OK


COMMANDS = {
    "certify": cmd_certify,
    "solve": cmd_solve,
    "oracle-check": cmd_oracle,
    "rls": cmd_rls,
    "generate": cmd_generate,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    except SystemExit as exc:
        # --help exits 0 through argparse
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("sepqcqp: error: --threads must be at least 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](args)
    except (OSError, ProblemFormatError, ValueError, OracleError, RlsError) as exc:
        print(f"sepqcqp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
