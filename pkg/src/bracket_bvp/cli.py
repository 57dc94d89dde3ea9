"""Command-line front end: solve, verify, kernel dumps, eigenvalues, catalog.

Exit codes: 0 when the produced certificate/report/check passes, 1 for a
failed check or a solver error (diagnosed with the error type name), 2 for
unusable flags.  All numeric output is reproducible bit for bit: floats are
serialized with shortest round-trip representation, nothing depends on
wall-clock time, and the pipeline has no randomness.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .eigen import LAMBDA_SCAN_DEFAULT, boundary_functional, principal_eigenvalue
from .errors import SolverError
from .greens import build_fundamental_pair, green_sign_check, green_tensor
from .model import (
    BoundaryForm,
    GridSpec,
    MeshFunction,
    ProblemSpec,
    compile_expression,
    eval_on_grid,
    grid_nodes,
    problem_from_text,
    problem_to_text,
    validate_problem,
)
from .monotone import (
    IterationSettings,
    IterationTrace,
    solve_region,
    verify_lower,
    verify_upper,
)
from .problems import catalog

__all__ = ["RunConfig", "run", "emit_trace_csv", "main"]


@dataclass(frozen=True)
class RunConfig:
    """Parsed invocation: which command, which problem, how to solve and emit."""

    command: str  # solve | verify | green | eigen | catalog
    problem_source: str  # "catalog_index" | "file_path" | "params" | "none"
    catalog_index: Optional[int] = None
    file_path: Optional[str] = None
    grid: GridSpec = GridSpec(257)
    backend: str = "fdm"
    lambda_override: Optional[float] = None
    tol_sup: float = 1e-10
    max_iters: int = 200
    output_format: str = "table"
    output_path: Optional[str] = None

    def __post_init__(self):
        if self.problem_source == "catalog_index" and not (
            self.catalog_index is not None and 1 <= self.catalog_index <= 6
        ):
            raise SolverError(f"catalog index must lie in 1..6, got {self.catalog_index}")


def _fmt(value) -> str:
    """Shortest round-trip decimal form (17 significant digits equivalent)."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_text(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise SolverError(f"cannot write {path}: {exc}") from exc


def emit_trace_csv(trace: IterationTrace, path: str) -> None:
    """Write `iter,x,value` rows plus an `_summary.csv` sibling per iterate.

    Values carry full round-trip precision, so parsing the file reproduces
    the trace exactly.
    """
    if not trace.iterates:
        raise SolverError("trace is empty; nothing to emit")
    rows = ["iter,x,value"]
    for k, mf in enumerate(trace.iterates, start=1):
        for x, v in zip(mf.nodes, mf.values):
            rows.append(f"{k},{_fmt(float(x))},{_fmt(float(v))}")
    _write_text(path, "\n".join(rows) + "\n")

    summary = ["iter,delta_sup,monotone_violation"]
    for k, (delta, violation) in enumerate(zip(trace.deltas, trace.step_violations), start=1):
        summary.append(f"{k},{_fmt(float(delta))},{_fmt(float(violation))}")
    stem = path[:-4] if path.endswith(".csv") else path
    _write_text(stem + "_summary.csv", "\n".join(summary) + "\n")


def _load_problem(config: RunConfig, alpha0_expr=None, beta0_expr=None):
    """Problem plus bracketing expressions from the catalog or a file."""
    if config.problem_source == "catalog_index":
        entry = catalog()[config.catalog_index - 1]
        return (
            entry.problem,
            alpha0_expr or entry.alpha0_expr,
            beta0_expr or entry.beta0_expr,
        )
    text = Path(config.file_path).read_text()
    problem = problem_from_text(text)
    return problem, alpha0_expr, beta0_expr


def _mesh_from_expr(expr: str, g: GridSpec) -> MeshFunction:
    fn = compile_expression(expr, variables=("x",))
    return eval_on_grid(g, lambda x: fn(x))


def _problem_argument(value: str):
    if value.isdigit():
        return "catalog_index", int(value), None
    return "file_path", None, value


def run(config: RunConfig, *, alpha0_expr=None, beta0_expr=None,
        lambda_for_green=None, samples=128, dump_kernel=None,
        eigen_params=None, eigen_tol=1e-8, scan_max=LAMBDA_SCAN_DEFAULT,
        trace_out=None, stream=None) -> int:
    """Execute one parsed invocation; returns the process exit status."""
    out = stream if stream is not None else sys.stdout
    if config.command == "solve":
        return _cmd_solve(config, alpha0_expr, beta0_expr, trace_out, out)
    if config.command == "verify":
        return _cmd_verify(config, alpha0_expr, beta0_expr, out)
    if config.command == "green":
        return _cmd_green(config, lambda_for_green, samples, dump_kernel, out)
    if config.command == "eigen":
        return _cmd_eigen(config, eigen_params, eigen_tol, scan_max, out)
    if config.command == "catalog":
        return _cmd_catalog(config, out)
    raise SolverError(f"unknown command {config.command!r}")


def _cmd_solve(config, alpha0_expr, beta0_expr, trace_out, out):
    problem, alpha0_expr, beta0_expr = _load_problem(config, alpha0_expr, beta0_expr)
    if alpha0_expr is None or beta0_expr is None:
        raise SolverError("file problems need --alpha0 and --beta0 bracket formulas")
    alpha0 = _mesh_from_expr(alpha0_expr, config.grid)
    beta0 = _mesh_from_expr(beta0_expr, config.grid)
    settings = IterationSettings(
        lam=config.lambda_override,
        max_iters=config.max_iters,
        tol_sup=config.tol_sup,
        grid=config.grid,
        backend=config.backend,
    )
    cert = solve_region(problem, alpha0, beta0, settings)
    payload = cert.to_dict()
    payload["alpha0_expr"] = alpha0_expr
    payload["beta0_expr"] = beta0_expr
    text = json.dumps(payload, indent=2)
    if config.output_path:
        _write_text(config.output_path, text + "\n")
    if trace_out:
        if cert.upper_trace is not None:
            emit_trace_csv(cert.upper_trace, f"{trace_out}_upper.csv")
        if cert.lower_trace is not None:
            emit_trace_csv(cert.lower_trace, f"{trace_out}_lower.csv")
    if config.output_format == "json":
        print(text, file=out)
    else:
        _print_certificate_table(payload, out)
    return 0 if cert.passed else 1


def _print_certificate_table(payload, out):
    p = payload["problem"]
    print(f"problem: {p['label']}  (m={_fmt(p['m'])}, n={_fmt(p['n'])}, "
          f"a1={_fmt(p['a1'])}, a2={_fmt(p['a2'])}, C={_fmt(p['C'])})", file=out)
    print(f"backend: {payload['backend']}  nodes: {payload['grid']['node_count']}", file=out)
    for side in ("lower_report", "upper_report"):
        rep = payload[side]
        if rep is None:
            print(f"{side}: not evaluated", file=out)
            continue
        print(
            f"{rep['kind']:5s}: pass={rep['pass']}  interior_margin={_fmt(rep['interior_margin'])}  "
            f"|s'(0)|={_fmt(rep['boundary_margin_0'])}  robin_slack={_fmt(rep['boundary_margin_1'])}",
            file=out,
        )
    for key in ("theorem", "L_used", "lambda_used", "lambda0", "df_ds_inf", "df_ds_sup"):
        print(f"{key}: {_fmt(payload[key]) if payload[key] is not None else '-'}", file=out)
    for key in ("bracket_gap", "residual_sup", "monotone_violation", "ordering_violation"):
        value = payload[key]
        print(f"{key}: {_fmt(value) if value is not None else '-'}", file=out)
    for tr_key in ("upper_trace", "lower_trace"):
        tr = payload[tr_key]
        if tr is not None:
            print(
                f"{tr_key}: iterations={tr['iterations']} converged={tr['converged']} "
                f"final_delta={_fmt(tr['deltas'][-1]) if tr['deltas'] else '-'}",
                file=out,
            )
    if payload["notes"]:
        for note in payload["notes"]:
            print(f"note: {note}", file=out)
    print(f"pass: {payload['pass']}", file=out)


def _cmd_verify(config, alpha0_expr, beta0_expr, out):
    problem, alpha0_expr, beta0_expr = _load_problem(config, alpha0_expr, beta0_expr)
    if alpha0_expr is None or beta0_expr is None:
        raise SolverError("file problems need --alpha0 and --beta0 bracket formulas")
    alpha0 = _mesh_from_expr(alpha0_expr, config.grid)
    beta0 = _mesh_from_expr(beta0_expr, config.grid)
    lower = verify_lower(problem, alpha0)
    upper = verify_upper(problem, beta0)
    payload = {
        "problem": problem.label,
        "nodes": config.grid.node_count,
        "alpha0_expr": alpha0_expr,
        "beta0_expr": beta0_expr,
        "lower_report": lower.to_dict(),
        "upper_report": upper.to_dict(),
        "pass": lower.passed and upper.passed,
    }
    text = json.dumps(payload, indent=2)
    if config.output_path:
        _write_text(config.output_path, text + "\n")
    if config.output_format == "json":
        print(text, file=out)
    else:
        for rep in (lower, upper):
            print(
                f"{rep.kind:5s}: pass={rep.passed}  interior_margin={_fmt(rep.interior_margin)}  "
                f"|s'(0)|={_fmt(rep.boundary_margin_0)}  robin_slack={_fmt(rep.boundary_margin_1)}",
                file=out,
            )
        print(f"pass: {payload['pass']}", file=out)
    return 0 if payload["pass"] else 1


def _cmd_green(config, lam, samples, dump_kernel, out):
    if lam is None:
        raise SolverError("green needs --lambda")
    problem, _, _ = _load_problem(config)
    fp = build_fundamental_pair(problem, lam, config.grid)
    report = green_sign_check(fp, samples)
    if dump_kernel:
        pts = np.arange(1, samples + 1) / samples
        values = green_tensor(fp, pts, pts)
        rows = ["x,t,G"]
        for i, x in enumerate(pts):
            for j, t in enumerate(pts):
                rows.append(f"{_fmt(float(x))},{_fmt(float(t))},{_fmt(float(values[i, j]))}")
        _write_text(dump_kernel, "\n".join(rows) + "\n")
    payload = {
        "lambda": lam,
        "method": fp.method,
        "w1": fp.w1,
        "samples": report.samples,
        "max_G": report.max_value,
        "x_at": report.x_at,
        "t_at": report.t_at,
        "pass": report.passed,
    }
    if config.output_format == "json":
        print(json.dumps(payload, indent=2), file=out)
    else:
        for key, value in payload.items():
            print(f"{key}: {_fmt(value)}", file=out)
    return 0 if report.passed else 1


def _cmd_eigen(config, params, tol, scan_max, out):
    if params is not None:
        m, n, a1, a2 = params
        boundary = BoundaryForm(a1, a2, 0.0)
    else:
        problem, _, _ = _load_problem(config)
        m, n, boundary = problem.m, problem.n, problem.boundary
    result = principal_eigenvalue(m, n, boundary, tol=tol, lam_scan=scan_max)
    step = max(1.0, scan_max / 64.0)
    lams = [k * step for k in range(int(scan_max / step) + 1)]
    rows = ["lambda,phi"]
    for lam in lams:
        rows.append(f"{_fmt(float(lam))},{_fmt(boundary_functional(m, n, boundary, lam))}")
    table = "\n".join(rows) + "\n"
    if config.output_path:
        _write_text(config.output_path, table)
    print(f"lambda0: {_fmt(result.lambda0)}", file=out)
    print(f"bracket: [{_fmt(result.bracket[0])}, {_fmt(result.bracket[1])}]", file=out)
    print(f"evaluations: {result.evaluations}", file=out)
    if not config.output_path and config.output_format == "csv":
        print(table, file=out, end="")
    return 0


def _cmd_catalog(config, out):
    entries = catalog()
    if config.catalog_index is not None:
        entries = (entries[config.catalog_index - 1],)
    if config.output_format == "kv":
        blocks = []
        for entry in entries:
            blocks.append(f"# {entry.problem.label}\n" + problem_to_text(entry.problem))
        text = "\n".join(blocks)
        if config.output_path:
            _write_text(config.output_path, text)
        else:
            print(text, file=out, end="")
        return 0
    if config.output_format == "json":
        payload = [
            {
                "index": i + 1,
                "label": e.problem.label,
                "m": e.problem.m,
                "n": e.problem.n,
                "a1": e.problem.boundary.a1,
                "a2": e.problem.boundary.a2,
                "C": e.problem.boundary.C,
                "f_expr": e.problem.f_expr,
                "region": e.region(),
                "published_L": e.published_L,
                "published_theorem": e.published_theorem,
                "exact_expr": e.exact_expr,
                "source": e.source,
            }
            for i, e in enumerate(catalog())
            if config.catalog_index is None or i + 1 == config.catalog_index
        ]
        text = json.dumps(payload, indent=2)
        if config.output_path:
            _write_text(config.output_path, text + "\n")
        else:
            print(text, file=out)
        return 0
    start = config.catalog_index or 1
    for i, entry in enumerate(entries, start=start):
        p = entry.problem
        print(
            f"{i}. {p.label}: m={_fmt(p.m)} n={_fmt(p.n)} a1={_fmt(p.boundary.a1)} "
            f"a2={_fmt(p.boundary.a2)} C={_fmt(p.boundary.C)} f={p.f_expr}",
            file=out,
        )
        print(f"   region: {entry.region()}   published: L={_fmt(entry.published_L)} "
              f"({entry.published_theorem})", file=out)
        print(f"   source: {entry.source}", file=out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bracket-bvp",
        description="Existence certificates for singular nonlinear diffusion BVPs "
        "by monotone bracketing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_grid(sp):
        sp.add_argument("--nodes", type=int, default=257, help="odd node count >= 9")
        sp.add_argument("--grading", choices=("uniform", "graded_toward_0"), default="uniform")
        sp.add_argument("--grading-exponent", type=float, default=1.0)

    def add_problem(sp, required=True):
        sp.add_argument("--problem", required=required,
                        help="catalog index 1..6 or path to a flat key-value file")

    def add_out(sp):
        sp.add_argument("--out", default=None, help="write the machine artifact here")
        sp.add_argument("--format", choices=("table", "csv", "json"), default="table")

    sp = sub.add_parser("solve", help="run the bracketing solver and emit a certificate")
    add_problem(sp)
    add_grid(sp)
    sp.add_argument("--backend", choices=("green", "fdm"), default="fdm")
    sp.add_argument("--lambda", dest="lambda_override", type=float, default=None,
                    help="bypass the automatic shift choice (resonance guard still applies)")
    sp.add_argument("--tol", type=float, default=1e-10, help="sup-norm stopping tolerance")
    sp.add_argument("--max-iters", type=int, default=200)
    sp.add_argument("--alpha0", default=None, help="lower bracket formula of x")
    sp.add_argument("--beta0", default=None, help="upper bracket formula of x")
    sp.add_argument("--trace-out", default=None,
                    help="prefix for per-direction iterate CSV dumps")
    add_out(sp)

    sp = sub.add_parser("verify", help="check the bracketing inequalities only")
    add_problem(sp)
    add_grid(sp)
    sp.add_argument("--alpha0", default=None)
    sp.add_argument("--beta0", default=None)
    add_out(sp)

    sp = sub.add_parser("green", help="build the kernel and certify its sign")
    add_problem(sp)
    add_grid(sp)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--samples", type=int, default=128)
    sp.add_argument("--dump-kernel", default=None, help="write x,t,G rows to this CSV")
    add_out(sp)

    sp = sub.add_parser("eigen", help="estimate the principal eigenvalue")
    add_problem(sp, required=False)
    sp.add_argument("--m", type=float, default=None)
    sp.add_argument("--n", type=float, default=None)
    sp.add_argument("--a1", type=float, default=None)
    sp.add_argument("--a2", type=float, default=None)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--scan-max", type=float, default=LAMBDA_SCAN_DEFAULT)
    add_out(sp)

    sp = sub.add_parser("catalog", help="list or export the problem catalog")
    sp.add_argument("--index", type=int, default=None, help="restrict to one entry")
    add_out(sp)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "catalog":
            config = RunConfig(
                command="catalog",
                problem_source="none",
                catalog_index=args.index,
                output_format=args.format,
                output_path=args.out,
            )
            if args.index is not None and not 1 <= args.index <= 6:
                raise SolverError(f"catalog index must lie in 1..6, got {args.index}")
            return run(config)

        if args.command == "eigen":
            params = None
            if args.problem is None:
                given = (args.m, args.n, args.a1, args.a2)
                if any(v is None for v in given):
                    parser.error("eigen needs --problem or all of --m --n --a1 --a2")
                params = given
                source, index, path = "none", None, None
            else:
                source, index, path = _problem_argument(args.problem)
            config = RunConfig(
                command="eigen",
                problem_source=source,
                catalog_index=index,
                file_path=path,
                output_format=args.format,
                output_path=args.out,
            )
            return run(config, eigen_params=params, eigen_tol=args.tol, scan_max=args.scan_max)

        source, index, path = _problem_argument(args.problem)
        grid = GridSpec(args.nodes, args.grading, args.grading_exponent)
        if args.command == "solve":
            config = RunConfig(
                command="solve",
                problem_source=source,
                catalog_index=index,
                file_path=path,
                grid=grid,
                backend=args.backend,
                lambda_override=args.lambda_override,
                tol_sup=args.tol,
                max_iters=args.max_iters,
                output_format=args.format,
                output_path=args.out,
            )
            return run(config, alpha0_expr=args.alpha0, beta0_expr=args.beta0,
                       trace_out=args.trace_out)
        if args.command == "verify":
            config = RunConfig(
                command="verify",
                problem_source=source,
                catalog_index=index,
                file_path=path,
                grid=grid,
                output_format=args.format,
                output_path=args.out,
            )
            return run(config, alpha0_expr=args.alpha0, beta0_expr=args.beta0)
        if args.command == "green":
            config = RunConfig(
                command="green",
                problem_source=source,
                catalog_index=index,
                file_path=path,
                grid=grid,
                output_format=args.format,
                output_path=args.out,
            )
            return run(config, lambda_for_green=args.lam, samples=args.samples,
                       dump_kernel=args.dump_kernel)
        parser.error(f"unknown command {args.command}")
    except SolverError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
