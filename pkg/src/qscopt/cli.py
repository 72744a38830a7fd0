"""Command-line front end: data loading, instance generation, solver runs
and benchmark reports.

Subcommands
-----------
linf   approximate l-infinity regression on a loaded instance
qsc    quasi-self-concordant minimization with an |t|^p + mu t^2 loss
lewis  row-weight overestimates of a loaded matrix
bench  random-instance benchmark of the trust-region solver vs Newton

All randomness flows from ``--seed``; reports are JSON with a top-level
``"schema": 1`` field and traces are rectangular CSV files, both written
atomically (temp file then rename).
"""

import argparse
import csv
import json
import os
import sys
import tempfile
import time

SCHEMA_VERSION = 1


def _apply_thread_cap():
    cap = os.environ.get("QSC_SOLVE_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def load_matrix(path, fmt=None, rhs_last=False):
    """Load a dense matrix from csv or matrix-market; optionally split the
    last csv column off as the right-hand side."""
    import numpy as np

    from .exceptions import DimensionMismatch, ParseError

    if fmt is None:
        fmt = "matrix-market" if str(path).endswith((".mtx", ".mm")) else "csv"
    if fmt == "matrix-market":
        import scipy.io
        import scipy.sparse

        try:
            M = scipy.io.mmread(path)
        except Exception as exc:
            raise ParseError(f"bad matrix-market file {path}: {exc}") from exc
        if scipy.sparse.issparse(M):
            M = M.toarray()
        return np.asarray(M, dtype=float), None
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DimensionMismatch(
                    f"line {lineno}: expected {width} columns, got {len(vals)}"
                )
            rows.append(vals)
    if not rows:
        raise ParseError(f"empty file {path}")
    M = np.asarray(rows, dtype=float)
    if rhs_last:
        if M.shape[1] < 2:
            raise DimensionMismatch("--rhs-last needs at least two columns")
        return M[:, :-1], M[:, -1]
    return M, None


def generate_instance(rows, cols, seed):
    """Random instance with entries uniform in [0, 1)."""
    import numpy as np

    if rows < cols or cols < 1:
        raise ValueError("need rows >= cols >= 1")
    rng = np.random.default_rng(seed)
    return rng.random((rows, cols)), rng.random(rows)


def write_matrix(path, M):
    import numpy as np

    _atomic_write(path, "\n".join(
        ",".join(repr(float(v)) for v in row) for row in np.atleast_2d(M)
    ) + "\n")


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_report(path, report):
    report = dict(report)
    report["schema"] = SCHEMA_VERSION
    _atomic_write(path, json.dumps(report, indent=2) + "\n")


def _write_trace(path, rows, fieldnames):
    lines = [",".join(fieldnames)]
    for row in rows:
        lines.append(",".join(str(row[k]) for k in fieldnames))
    _atomic_write(path, "\n".join(lines) + "\n")


def _default_R(A, b, x0):
    import numpy as np

    # Heuristic only: four times the initial residual width.
    return 4 * max(float(np.max(np.abs(A @ x0 - b))), 1.0)


def _build_problem(A, b, args):
    import numpy as np

    from .core_linalg import ProblemMatrix
    from .qsc import QscProblem, lp_l2_loss

    loss = lp_l2_loss(args.p, args.mu)
    x0, *_ = np.linalg.lstsq(A, b, rcond=None)
    R = args.R if args.R is not None else _default_R(A, b, x0)
    B = args.B if args.B is not None else 0.0
    return QscProblem(
        mat=ProblemMatrix(A), b=b, loss=loss, x0=x0,
        lower_bound_B=B, diameter_R=R, eps=args.eps,
    )


def cmd_linf(args):
    import numpy as np

    from .linf import homogenize, linf_regress

    A, b = load_matrix(args.input, rhs_last=args.rhs_last)
    if b is None:
        b = np.zeros(A.shape[0])
    inst = homogenize(A, b, args.eps)
    trace_rows = []
    sink = trace_rows.append if args.trace else None
    t0 = time.perf_counter()
    x, trace = linf_regress(inst.A, inst.g, args.eps, trace_sink=sink,
                            verify=args.verify_invariants)
    wall = time.perf_counter() - t0
    value = float(np.max(np.abs(inst.A @ x)))
    report = {
        "command": "linf",
        "objective": value,
        "wall_time_s": wall,
        "linear_solves": trace.solver_calls,
        "binary_search_steps": trace.steps,
        "invariant_checks": trace.invariant_checks,
        "certificates": [tag for (_, _, tag) in trace.guesses],
    }
    _write_report(args.report, report)
    if args.trace and trace_rows:
        _write_trace(args.trace_out, trace_rows,
                     ["P", "M", "tag", "solver_calls"])
    print(f"value {value:.12g} ({len(trace.guesses)} guesses)")
    return 0


def cmd_qsc(args):
    from .qsc import objective, optimize

    A, b = load_matrix(args.input, rhs_last=args.rhs_last)
    if b is None:
        raise SystemExit("qsc requires a right-hand side (--rhs-last)")
    problem = _build_problem(A, b, args)
    trace_rows = []
    t0 = time.perf_counter()
    x, records = optimize(problem, verify=args.verify_invariants,
                          trace_sink=lambda r: trace_rows.append(vars(r)))
    wall = time.perf_counter() - t0
    report = {
        "command": "qsc",
        "objective": objective(problem, x),
        "wall_time_s": wall,
        "outer_iterations": len(records),
        "linear_solves": sum(r.solver_calls for r in records),
        "invariant_checks": sum(r.invariant_checks for r in records),
        "R": problem.diameter_R,
        "B": problem.lower_bound_B,
    }
    _write_report(args.report, report)
    if args.trace and trace_rows:
        _write_trace(args.trace_out, trace_rows,
                     ["t", "h", "nu", "M", "res_value", "solver_calls"])
    print(f"objective {report['objective']:.12g}")
    return 0


def cmd_lewis(args):
    from .lewis_weights import approx_lewis, verify_overestimate

    A, _ = load_matrix(args.input)
    t0 = time.perf_counter()
    est = approx_lewis(A, rng_seed=args.seed, exact=args.exact or None)
    wall = time.perf_counter() - t0
    ok, worst = verify_overestimate(A, est.w)
    report = {
        "command": "lewis",
        "mass": est.mass,
        "verified": bool(ok),
        "max_violation": worst,
        "wall_time_s": wall,
    }
    _write_report(args.report, report)
    print(f"mass {est.mass:.6g} verified={ok}")
    return 0


def cmd_bench(args):
    from .qsc import newton_baseline, objective, optimize

    A, b = generate_instance(args.rows, args.cols, args.seed)
    problem = _build_problem(A, b, args)
    trace_rows = []

    def sink(rec):
        trace_rows.append(vars(rec))

    t0 = time.perf_counter()
    x_ours, records = optimize(problem, verify=args.verify_invariants,
                               trace_sink=sink)
    t_ours = time.perf_counter() - t0
    t0 = time.perf_counter()
    x_newton, newton_records = newton_baseline(problem)
    t_newton = time.perf_counter() - t0
    h_ours = objective(problem, x_ours)
    h_newton = objective(problem, x_newton)
    gap = h_ours - h_newton
    report = {
        "command": "bench",
        "rows": args.rows,
        "cols": args.cols,
        "seed": args.seed,
        "objective_ours": h_ours,
        "objective_newton": h_newton,
        "gap": gap,
        "wall_time_ours_s": t_ours,
        "wall_time_newton_s": t_newton,
        "outer_iterations": len(records),
        "newton_iterations": len(newton_records),
        "linear_solves": sum(r.solver_calls for r in records),
        "invariant_checks": sum(r.invariant_checks for r in records),
    }
    _write_report(args.report, report)
    if trace_rows:
        _write_trace(args.trace_out, trace_rows,
                     ["t", "h", "nu", "M", "res_value", "solver_calls"])
    print(f"gap {gap:.6e}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="qscopt")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True)
            p.add_argument("--rhs-last", action="store_true")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--report", default="report.json")
        p.add_argument("--trace", action="store_true")
        p.add_argument("--trace-out", default="trace.csv")
        p.add_argument("--verify-invariants", action="store_true")

    p = sub.add_parser("linf", help="l-infinity regression")
    common(p)
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(func=cmd_linf)

    p = sub.add_parser("qsc", help="quasi-self-concordant minimization")
    common(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--R", type=float, default=None)
    p.add_argument("--B", type=float, default=None)
    p.set_defaults(func=cmd_qsc)

    p = sub.add_parser("lewis", help="row-weight overestimates")
    common(p)
    p.add_argument("--exact", action="store_true")
    p.set_defaults(func=cmd_lewis)

    p = sub.add_parser("bench", help="solver vs Newton benchmark")
    common(p, needs_input=False)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--p", type=float, default=8.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=1e-10)
    p.add_argument("--R", type=float, default=None)
    p.add_argument("--B", type=float, default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    _apply_thread_cap()
    args = build_parser().parse_args(argv)
    from .exceptions import QscoptError

    try:
        return args.func(args)
    except QscoptError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
