"""Command-line front end: ``dykstra-ff {solve,compare,verify,gen}``.

Exit codes: 0 success, 1 budget exhausted or a check failed, 2 bad input,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .. import solve as solve_mode
from ..core import RunOptions, Trace, error_metric, normalize_mode
from ..exceptions import (DegenerateHalfSpaceError, DimensionMismatchError,
                          EnumerationLimitError, NumericalFailureError, OracleError)
from ..oracle import (InstanceSpec, multi_stall_instance, oracle_project, canonical_instance,
                      random_instance, reference_projection, stall_inducing_instance)
from . import traces
from .experiments import compare_runs
from .problem import Problem, ProblemFormatError, dump_problem, load_problem
from .verify import run_suites

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_BUDGET, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

ORIGINAL_CSV = "data_dykstra_original.csv"
MODIFIED_CSV = "data_dykstra_modified.csv"
ITERATES_CSV = "data_iterates.csv"
ITERATES_FF_CSV = "data_iterates_modified.csv"
COMPARE_TRACE_TOL = 1e-7


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("problem", help="JSON problem file")
    p.add_argument("--max-iter", type=int, default=None, help="iteration cap (default 10000)")
    p.add_argument("--eps-stall", type=float, default=None,
                   help="stall tolerance relative to 1 + ||x0|| (default 1e-10)")
    p.add_argument("--tol-feas", type=float, default=None, help="feasibility tolerance (default 1e-9)")
    p.add_argument("--tol-conv", type=float, default=None, help="stationarity tolerance (default 1e-12)")
    p.add_argument("--no-early-stop", action="store_true", help="always run --max-iter iterations")
    p.add_argument("--oracle", action="store_true",
                   help="compare against the exact projection (at most 12 half-spaces)")
    p.add_argument("--watch-halfspace", type=int, default=None,
                   help="half-space reported in the summary activity column "
                        "(default: the one that ended the first stall)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dykstra-ff",
                                     description="Dykstra projection onto polyhedra with stall fast-forwarding.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solver on a problem file")
    _add_run_flags(p)
    p.add_argument("--mode", default="dykstra", type=normalize_mode,
                   help="dykstra, dykstra-ff or map")
    p.add_argument("--trace-out", type=Path, help="per-iteration CSV")
    p.add_argument("--summary-out", type=Path, help="per-cycle CSV (iteration,error,halfspace)")
    p.add_argument("--iterates-out", type=Path, help="planar iterates CSV (x,y)")

    p = sub.add_parser("compare", help="run plain and fast-forward Dykstra side by side")
    _add_run_flags(p)
    p.add_argument("--out-dir", type=Path, default=Path("."),
                   help=f"directory for {ORIGINAL_CSV} and {MODIFIED_CSV}")
    p.add_argument("--trace-out", type=Path, help="per-iteration CSV prefix")

    p = sub.add_parser("verify", help="randomized property suites")
    p.add_argument("--seeds", default="0:50", help="half-open seed range START:STOP")
    p.add_argument("--mutate", action="store_true",
                   help="corrupt the skip count; trace equivalence must then fail")

    p = sub.add_parser("gen", help="write a problem file")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--paper", action="store_true", help="box-and-line instance with x0 = (-4, 1.4)")
    src.add_argument("--stall", action="store_true", help="stall-inducing planar instance")
    src.add_argument("--multi-stall", action="store_true", help="3-D instance with repeated stalls")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=int, default=2, help="dimension for random instances")
    p.add_argument("--n", type=int, default=4, help="half-space count for random instances")
    p.add_argument("-o", "--output", type=Path, help="output path (default stdout)")
    return parser


def _seed_range(text: str) -> range:
    try:
        start, stop = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:STOP, got {text!r}") from None
    return range(start, stop)


def _run_options(problem: Problem, args, mode: str) -> RunOptions:
    overrides = {"max_iter": args.max_iter, "tol_feas": args.tol_feas, "tol_conv": args.tol_conv,
                 "mode": mode}
    if args.eps_stall is not None:
        overrides["eps_stall"] = args.eps_stall * (1.0 + float(np.linalg.norm(problem.x0_array)))
    if args.no_early_stop:
        overrides["early_stop"] = False
    return problem.run_options(**overrides)


def _reference(problem: Problem, poly, args) -> Optional[np.ndarray]:
    if problem.x_star is not None:
        return problem.x_star_array
    if args.oracle:
        return oracle_project(poly, problem.x0_array).x_star
    return None


def _fmt(v) -> str:
    return "[" + ", ".join(f"{x:.12g}" for x in np.asarray(v)) + "]"


def _report_trace(label: str, tr: Trace, ref) -> None:
    print(f"{label}: iterations={tr.iterations} cycles={tr.cycles_completed} "
          f"converged={'yes' if tr.converged else 'no'}")
    print(f"{label}: x = {_fmt(tr.x)}")
    for e in tr.stall_events:
        tag = "ff_event" if e.applied else "stall"
        print(f"{label}: {tag} at m={e.at} n_stall={e.n_stall} i_stall={e.i_stall} "
              f"skipped={e.skip_cycles if e.applied else 0}")
    if ref is not None:
        print(f"{label}: final error ||x - x*||^2 = {error_metric(tr.x, ref):.6e}")


def _oracle_report(poly, x0, traces_: dict) -> None:
    sol = oracle_project(poly, x0)
    res = sol.kkt_residuals()
    print(f"oracle: x* = {_fmt(sol.x_star)} active={list(sol.active_set)} "
          f"kkt={max(res.values()):.2e}")
    for label, tr in traces_.items():
        print(f"{label}: distance to oracle = {np.linalg.norm(tr.x - sol.x_star):.3e}")


def cmd_solve(args) -> int:
    problem = load_problem(args.problem)
    poly = problem.polyhedron()
    opts = _run_options(problem, args, args.mode)
    ref = _reference(problem, poly, args)
    opts.reference = ref
    tr = solve_mode(poly, problem.x0_array, opts)
    _report_trace(tr.mode, tr, ref)
    if args.oracle:
        _oracle_report(poly, problem.x0_array, {tr.mode: tr})
    if args.trace_out:
        traces.write_text(traces.trace_csv(tr), args.trace_out)
    if args.summary_out:
        x_star = ref if ref is not None else reference_projection(poly, problem.x0_array)
        traces.write_text(traces.summary_csv(tr, x_star, args.watch_halfspace), args.summary_out)
    if args.iterates_out:
        traces.write_text(traces.iterates_csv(tr), args.iterates_out)
    return EXIT_OK if tr.converged else EXIT_BUDGET


def cmd_compare(args) -> int:
    problem = load_problem(args.problem)
    poly = problem.polyhedron()
    opts = _run_options(problem, args, "dykstra")
    ref = _reference(problem, poly, args)
    opts.reference = ref
    cmp = compare_runs(poly, problem.x0_array, opts)
    _report_trace("dykstra", cmp.plain, ref)
    _report_trace("dykstra_ff", cmp.ff, ref)
    if args.oracle:
        _oracle_report(poly, problem.x0_array, {"dykstra": cmp.plain, "dykstra_ff": cmp.ff})
    agree = sum(c.agrees for c in cmp.checks)
    print(f"stalls detected: {len(cmp.plain.stall_events)}  fast-forwards: {len(cmp.ff.ff_events)}")
    print(f"cycles saved: {cmp.cycles_saved}  iterations saved: {cmp.iterations_saved}")
    print(f"closed form vs brute force: {agree}/{len(cmp.checks)} agree")
    if cmp.ff.ff_events:
        print(f"excised trace deviation: {cmp.deviation:.3e} over {cmp.matched} iterates")
    else:
        print(f"traces identical: {'yes' if cmp.identical else 'no'}")

    x_star = ref if ref is not None else reference_projection(poly, problem.x0_array)
    watch = args.watch_halfspace
    if watch is None:
        watch = traces.default_watch(cmp.plain)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    traces.write_text(traces.summary_csv(cmp.plain, x_star, watch), args.out_dir / ORIGINAL_CSV)
    traces.write_text(traces.summary_csv(cmp.ff, x_star, watch), args.out_dir / MODIFIED_CSV)
    if poly.dim == 2:
        traces.write_text(traces.iterates_csv(cmp.plain), args.out_dir / ITERATES_CSV)
        traces.write_text(traces.iterates_csv(cmp.ff), args.out_dir / ITERATES_FF_CSV)
    if args.trace_out:
        base = str(args.trace_out)
        traces.write_text(traces.trace_csv(cmp.plain), base + ".original.csv")
        traces.write_text(traces.trace_csv(cmp.ff), base + ".modified.csv")

    consistent = cmp.formula_agrees and cmp.deviation <= COMPARE_TRACE_TOL
    if not consistent:
        print("CHECK FAILED: fast-forward disagrees with the plain run")
        return EXIT_BUDGET
    return EXIT_OK if cmp.plain.converged and cmp.ff.converged else EXIT_BUDGET


def cmd_verify(args) -> int:
    seeds = _seed_range(args.seeds)
    if len(seeds) == 0:
        print(f"warning: seed range {args.seeds} is empty; nothing to verify", file=sys.stderr)
        return EXIT_OK
    report = run_suites(seeds, mutate=args.mutate)
    print(f"seeds {seeds.start}:{seeds.stop}{' (mutated skip count)' if args.mutate else ''}")
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_BUDGET


def generate(args) -> Problem:
    """Problem selected by the ``gen`` flags."""
    if args.paper:
        poly, x0 = canonical_instance()
        return Problem.from_polyhedron(poly, x0, x_star=[0.0, 1.0])
    if args.stall:
        poly, x0 = stall_inducing_instance(args.seed)
    elif args.multi_stall:
        poly, x0 = multi_stall_instance(args.seed)
    else:
        if args.p < 1 or args.n < 1:
            raise ProblemFormatError("--p and --n must be positive")
        poly, x0 = random_instance(InstanceSpec(seed=args.seed, p=args.p, n=args.n))
    x_star = oracle_project(poly, x0).x_star if poly.n <= 12 else None
    return Problem.from_polyhedron(poly, x0, x_star=x_star)


def cmd_gen(args) -> int:
    text = dump_problem(generate(args))
    if args.output is None:
        sys.stdout.write(text)
    else:
        traces.write_text(text, args.output)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "compare": cmd_compare, "verify": cmd_verify, "gen": cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ProblemFormatError, DegenerateHalfSpaceError, DimensionMismatchError,
            EnumerationLimitError, argparse.ArgumentTypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalFailureError, OracleError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
