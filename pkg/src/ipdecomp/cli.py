"""Command-line front end: ``gen``, ``solve``, ``bench`` and ``verify``.

Exit codes: 0 success, 2 validation failure, 3 budget exhaustion, 4 IO error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .baselines import AdiConfig, adi_solve, oracle_optimum
from .errors import DecompositionError, MaxIterExceeded, ProblemFileError
from .generators import GenSpec, generate
from .path_following import LONG_STEP_TAU, PathConfig, SolveReport, solve
from .problem import SeparableProblem, find_interior_point, validate_rank

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4
CSV_FIELDS = ["m1", "n1", "N", "method", "fct_evals", "outer_iters", "wall_time_s", "gap_bound", "primal_residual"]
# trailing columns so budget-exhausted runs stay distinguishable
CSV_EXTRA = ["family", "status"]


@dataclasses.dataclass
class BenchRow:
    m1: int
    n1: int
    N: int
    method: str
    fct_evals: int
    outer_iters: int
    wall_time_s: float
    gap_bound: float
    primal_residual: float
    family: str = ""
    status: str = "ok"

    @classmethod
    def from_report(cls, shape, report: SolveReport, family="") -> "BenchRow":
        m1, n1, N = shape
        return cls(
            m1=m1,
            n1=n1,
            N=N,
            method=report.method,
            fct_evals=report.fct_evals,
            outer_iters=report.outer_iters,
            wall_time_s=report.wall_time,
            gap_bound=report.gap_bound,
            primal_residual=report.primal_residual,
            family=family,
            status=report.status,
        )


def problem_shape(problem: SeparableProblem) -> tuple[int, int, int]:
    """(m1, n1, N) read off the blocks shaped like the first one."""
    first = problem.blocks[0]
    N = sum(1 for blk in problem.blocks if (blk.n, blk.m_local) == (first.n, first.m_local))
    return first.m_local, first.n, N


def write_rows(path, rows, append: bool) -> None:
    path = Path(path)
    new = not (append and path.exists() and path.stat().st_size > 0)
    with path.open("a" if append else "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS + CSV_EXTRA)
        if new:
            writer.writeheader()
        for row in rows:
            writer.writerow(dataclasses.asdict(row))


def read_rows(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# running a method
# ---------------------------------------------------------------------------


def path_config(args) -> PathConfig:
    kwargs = dict(
        t0=args.t0,
        eps=args.eps,
        tau=args.tau,
        mode=args.mode,
        max_outer=args.max_outer,
        max_inner=args.max_inner,
        eps_x=args.eps_x,
        threads=args.threads,
    )
    if args.eps_v is not None:
        kwargs["eps_v"] = args.eps_v
    return PathConfig(**kwargs)


def adi_config(args) -> AdiConfig:
    return AdiConfig(
        penalty=args.adi_penalty,
        ascent_step=args.adi_step,
        max_sweeps=args.adi_max_sweeps,
        tol=args.adi_tol,
        t_barrier=args.adi_t,
    )


def oracle_report(problem: SeparableProblem) -> SolveReport:
    start = time.perf_counter()
    res = oracle_optimum(problem)
    xs = problem.split(res.x_star)
    return SolveReport(
        method="oracle",
        status="ok",
        x_final=xs,
        lambda_final=np.zeros(problem.m),
        t_final=res.t_grid[-1],
        barrier_complexity=problem.barrier_complexity,
        outer_iters=len(res.t_grid),
        inner_iters_total=0,
        fct_evals=0,
        block_newton_iters=0,
        objective=res.f_star,
        primal_residual=float(np.linalg.norm(problem.coupling_residual(xs))),
        final_decrement=math.nan,
        wall_time=time.perf_counter() - start,
    )


def run_method(problem: SeparableProblem, method: str, args) -> SolveReport:
    """Run one method; budget exhaustion returns the partial report with status 'budget'."""
    try:
        if method == "dip":
            return solve(problem, path_config(args))
        if method == "adi":
            return adi_solve(problem, adi_config(args))
        if method == "oracle":
            return oracle_report(problem)
    except MaxIterExceeded as exc:
        if exc.report is None:
            raise
        logger.warning("%s: %s", method, exc)
        return exc.report
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    spec = GenSpec(args.family, args.m1, args.n1, args.N, args.seed)
    problem = generate(spec)
    problem.save(args.out)
    print(f"wrote {args.out}: {problem.N} blocks, n={problem.n}, m={problem.m}")
    return EXIT_OK


def _print_report(report: SolveReport) -> None:
    print(f"method          {report.method}")
    print(f"status          {report.status}")
    print(f"objective       {report.objective:.10g}")
    print(f"gap_bound       {report.gap_bound:.3e}")
    print(f"primal_residual {report.primal_residual:.3e}")
    print(f"fct_evals       {report.fct_evals}")
    print(f"outer_iters     {report.outer_iters}")
    if report.tau is not None:
        print(f"tau             {report.tau:.6f}")
    print(f"wall_time_s     {report.wall_time:.3f}")


def cmd_solve(args) -> int:
    problem = SeparableProblem.load(args.problem)
    report = run_method(problem, args.method, args)
    _print_report(report)
    if args.report:
        report.save(args.report)
    if args.csv:
        write_rows(args.csv, [BenchRow.from_report(problem_shape(problem), report)], append=True)
    return EXIT_OK if report.status == "ok" else EXIT_BUDGET


def parse_shape(text: str) -> tuple[int, int, int]:
    try:
        m1, n1, N = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"shape must be m1,n1,N, got {text!r}") from exc
    return m1, n1, N


def cmd_bench(args) -> int:
    rows = []
    for family in args.family:
        for shape in args.shapes:
            problem = generate(GenSpec(family, *shape, seed=args.seed))
            for method in args.methods:
                try:
                    report = run_method(problem, method, args)
                    row = BenchRow.from_report(shape, report, family)
                except DecompositionError as exc:
                    logger.error("%s %s %s failed: %s", family, shape, method, exc)
                    nan = math.nan
                    row = BenchRow(*shape, method, 0, 0, nan, nan, nan, family, "error")
                rows.append(row)
                print(
                    f"{family:9s} {shape!s:14s} {method:6s} fct_evals={row.fct_evals:5d} "
                    f"outer={row.outer_iters:5d} time={row.wall_time_s:8.2f}s status={row.status}",
                    flush=True,
                )
    write_rows(args.csv, rows, append=False)
    return EXIT_OK


def cmd_verify(args) -> int:
    """Rank, interior points and DIP against the oracle on one problem file."""
    problem = SeparableProblem.load(args.problem)
    ok = True
    rank = validate_rank(problem)
    print(f"rank conditions     {'PASS' if rank.passed else 'FAIL'}")
    for msg in rank.messages:
        print(f"  {msg}")
    ok &= rank.passed
    for blk in problem.blocks:
        find_interior_point(blk)
    print("interior points     PASS")
    if not ok:
        return EXIT_VALIDATION
    report = solve(problem, path_config(args))
    oracle = oracle_optimum(problem)
    diff = report.objective - oracle.f_star
    agree = -1e-6 <= diff <= report.gap_bound + 1e-6
    print(f"gap certificate     {'PASS' if agree else 'FAIL'} (f - f* = {diff:.3e}, bound {report.gap_bound:.3e})")
    feasible = report.primal_residual <= 1e-6 * (1.0 + np.linalg.norm(problem.b))
    print(f"coupling residual   {'PASS' if feasible else 'FAIL'} ({report.primal_residual:.3e})")
    return EXIT_OK if agree and feasible else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("path-following")
    g.add_argument("--t0", type=float, default=1.0)
    g.add_argument("--eps", type=float, default=1e-4)
    g.add_argument("--eps-v", type=float, default=None, help="centering tolerance (default delta*/2)")
    g.add_argument("--eps-x", type=float, default=1e-8)
    g.add_argument("--tau", type=float, default=LONG_STEP_TAU)
    g.add_argument("--mode", choices=["long", "short"], default="long")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--max-outer", type=int, default=10_000)
    g.add_argument("--max-inner", type=int, default=100)
    a = p.add_argument_group("ADI baseline")
    a.add_argument("--adi-penalty", type=float, default=1.0)
    a.add_argument("--adi-step", type=float, default=1.0)
    a.add_argument("--adi-max-sweeps", type=int, default=5000)
    a.add_argument("--adi-tol", type=float, default=1e-4)
    a.add_argument("--adi-t", type=float, default=1e-6, help="fixed barrier weight")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipdecomp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--family", choices=["network", "quadratic"], required=True)
    g.add_argument("--m1", type=int, required=True)
    g.add_argument("--n1", type=int, required=True)
    g.add_argument("--N", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", "-o", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve a problem file")
    s.add_argument("problem")
    s.add_argument("--method", choices=["dip", "adi", "oracle"], default="dip")
    s.add_argument("--seed", type=int, default=0, help="accepted for symmetry; solvers are deterministic")
    s.add_argument("--report", help="write the full report as JSON")
    s.add_argument("--csv", help="append a benchmark row")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run methods over generated shapes and write a CSV")
    b.add_argument("--family", choices=["network", "quadratic"], nargs="+", default=["network", "quadratic"])
    b.add_argument("--shapes", type=parse_shape, nargs="+", default=[(5, 10, 3), (10, 20, 5), (20, 50, 10)])
    b.add_argument("--methods", choices=["dip", "adi", "oracle"], nargs="+", default=["dip", "adi"])
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--csv", required=True)
    _add_solver_flags(b)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="check rank conditions and DIP against the oracle")
    v.add_argument("problem")
    _add_solver_flags(v)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except MaxIterExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ProblemFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DecompositionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
