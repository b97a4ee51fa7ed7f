from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass

from dotenv import load_dotenv

from .admm import SolveTrace
from .benchmark import load_config, run_benchmark, summarize
from .certification import Certificate, certify
from .errors import InvalidParameterError, L0MpccError
from .instances import NoiseSpec, generate_lsr_instance
from .problem import Problem, eval_objective, eval_relaxed_objective
from .problem_file import (
    SCHEMA_VERSION,
    dumps,
    finite_or_none,
    least_squares_to_dict,
    load_problem,
    problem_to_dict,
    validate_solve_report,
    write_solve_report,
)
from .report_formatters import format_fields
from .runners import METHODS, MethodSettings, SolverResult, run_method
from .storage import fingerprint, write_text_atomic

# ===== Configuration =====

load_dotenv()

LOG_LEVEL = os.getenv("L0_MPCC_LOG_LEVEL", "INFO")

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_BUDGET = 2

# First-order residual accepted as a certified KKT point.
KKT_TOL = 1e-3

logger = logging.getLogger("l0_mpcc.cli")


def configure_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(level=level.upper(), format="[%(name)s] %(message)s", stream=sys.stderr, force=True)


# ===== Summary dataclass =====
@dataclass
class SolveSummary:
    method: str
    objective: float
    card: int
    iterations: int
    termination: str
    kkt: str
    result: str


def print_summary(summaries: list[SolveSummary]):
    print("\n=== Solve Summary ===\n")
    for summary in summaries:
        print(
            f"Method: {summary.method}\n"
            f"Objective: {summary.objective:.10g}\n"
            f"Card: {summary.card}\n"
            f"Iterations: {summary.iterations}\n"
            f"Termination: {summary.termination}\n"
            f"KKT: {summary.kkt}\n"
            f"Result: {summary.result}\n"
            "-----------------------\n"
        )


def print_bench_summary(run) -> None:
    print("\n=== Benchmark Summary ===\n")
    table = format_fields("summary", summarize(run.results))
    print(table.to_string(index=False) if len(table) else "(no successful runs)")
    print(f"\nRows: {len(run.results)}\nFailures: {run.failures}\nOutput: {run.out_dir}")
    print("-----------------------\n")


# ==== Arg parsing =====
class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; here 2 means 'budget exhausted'."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="l0-mpcc", description="l0-penalized QP solvers, instance generator and benchmark")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = sub.add_parser("solve", help="Solve one problem file")
    solve.add_argument("--problem", type=str, help="Problem JSON file")
    solve.add_argument("--method", choices=list(METHODS), default="admm-cf")
    solve.add_argument("--eps", type=float, default=1e-4, help="Stop tolerance (default: 1e-4)")
    solve.add_argument("--rho0", type=float, default=None, help="Initial penalty (default: gamma)")
    solve.add_argument("--delta-rho", type=float, default=1.01)
    solve.add_argument("--rho-max", type=float, default=2000.0)
    solve.add_argument("--max-iter", type=int, default=10_000)
    solve.add_argument("--max-time", type=float, default=None, help="Wall-clock budget in seconds")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--schedule", choices=["corollary", "decaying"], default="corollary",
                       help="Perturbed ADMM parameters (default: corollary)")
    solve.add_argument("--perturb-eps", type=float, default=0.05,
                       help="Target gap for the corollary schedule (default: 0.05)")
    solve.add_argument("--n-starts", type=int, default=50, help="IHT starting points (default: 50)")
    solve.add_argument("--tie-break", choices=["canonical_e1", "copy_partner", "seeded_random"],
                       default="canonical_e1")
    solve.add_argument("--out", type=str, help="Solve report path (default: stdout)")
    solve.add_argument("--trace", type=str, help="JSON-lines iteration trace path")
    solve.add_argument("--trace-times", action="store_true", help="Include wall times in the trace")
    solve.add_argument("--certify", action="store_true", help="Recover multipliers and check first-order KKT")
    solve.add_argument("--second-order", action="store_true", help="Also run the second-order check")

    gen = sub.add_parser("gen", help="Generate a synthetic least-squares instance")
    gen.add_argument("--p", type=int, required=True, help="Number of observations")
    gen.add_argument("--n", type=int, required=True, help="Dimension")
    gen.add_argument("--k", type=int, required=True, help="Target cardinality of x_true")
    gen.add_argument("--K", type=float, default=60.0, help="Amplitude of x_true (default: 60)")
    gen.add_argument("--noise", type=str, default="ratio10", help="ratio10 or snr:<v> (default: ratio10)")
    gen.add_argument("--gamma", type=float, default=1.0, help="Penalty written to the file (default: 1)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=str, required=True, help="Problem JSON path")

    bench = sub.add_parser("bench", help="Run a benchmark config")
    bench.add_argument("--config", type=str, required=True, help="Benchmark config JSON")
    bench.add_argument("--out-dir", type=str, default=None, help="Output folder (default: $L0_MPCC_OUT_DIR)")
    bench.add_argument("--jobs", type=int, default=1, help="Worker processes (default: 1)")
    bench.add_argument("--no-progress", action="store_true")
    return parser


def parse_args(argv: list[str] | None = None):
    return build_parser().parse_args(argv)


# ===== solve =====


def settings_from_args(args) -> MethodSettings:
    return MethodSettings(
        eps=args.eps,
        rho0=args.rho0,
        delta_rho=args.delta_rho,
        rho_max=args.rho_max,
        max_iter=args.max_iter,
        max_time=args.max_time,
        seed=args.seed,
        schedule=args.schedule,
        perturb_eps=args.perturb_eps,
        n_starts=args.n_starts,
        tie_break=args.tie_break,
    )


def build_solve_report(
    p: Problem,
    settings: MethodSettings,
    res: SolverResult,
    cert: Certificate | None = None,
    trace_path: str | None = None,
) -> dict:
    trace: SolveTrace | None = res.trace
    relaxed = eval_relaxed_objective(p, trace.final.y) + p.offset if trace is not None else None
    kkt = None
    if cert is not None:
        kkt = {k: (finite_or_none(v) if isinstance(v, float) else v) for k, v in cert.report.to_dict().items()}
        kkt["recovery_residual"] = float(cert.multipliers.recovery_residual)
        kkt["within_tolerance"] = bool(cert.report.max_residual <= KKT_TOL)
    return {
        "schema": SCHEMA_VERSION,
        "solver": {"method": res.method, "label": res.label, "options": asdict(settings)},
        "problem": {"n": p.n, "m": p.m, "gamma": p.gamma, "sha256": fingerprint(problem_to_dict(p))},
        "objective": {
            "reported": res.objective,
            "l0": eval_objective(p, res.x) + p.offset,
            "relaxed": relaxed,
            "relaxed_form": res.relaxed_form,
        },
        "card": res.card,
        "x": [float(v) for v in res.x],
        "termination": res.termination,
        "iterations": res.iterations,
        "kkt_res_admm": finite_or_none(res.kkt_res),
        "kkt": kkt,
        "trace_path": trace_path,
    }


def cli_solve(args) -> int:
    if not args.problem:
        print("solve: --problem is required", file=sys.stderr)
        return EXIT_INPUT_ERROR
    if args.second_order and not args.certify:
        args.certify = True

    p = load_problem(args.problem)
    settings = settings_from_args(args)
    res = run_method(args.method, p, settings)

    cert = None
    if args.certify:
        if res.trace is None:
            logger.warning("--certify applies to admm-cf and perturbed; skipped for %s", args.method)
        else:
            cert = certify(p, res.trace, second_order=args.second_order)

    trace_path = None
    if args.trace:
        if res.trace is None:
            logger.warning("--trace applies to admm-cf and perturbed; no trace for %s", args.method)
        else:
            trace_path = str(res.trace.to_jsonl(args.trace, include_time=args.trace_times))

    report = build_solve_report(p, settings, res, cert, trace_path)
    if not args.out:
        # stdout carries the report itself; no summary.
        validate_solve_report(report)
        sys.stdout.write(dumps(report))
        return EXIT_OK if res.converged else EXIT_BUDGET

    out = write_solve_report(report, args.out)
    # Wall time stays out of the report so identical runs give identical bytes.
    write_text_atomic(
        json.dumps({"report": out.name, "wall_time_s": res.wall_time}, indent=2) + "\n",
        out.with_suffix(".timing.json"),
    )
    logger.info("wrote %s", out)

    kkt = "not requested"
    if cert is not None:
        kkt = f"max residual {cert.report.max_residual:.3e} (nondegenerate={cert.report.nondegenerate})"
    summary = SolveSummary(
        method=res.label or res.method,
        objective=res.objective,
        card=res.card,
        iterations=res.iterations,
        termination=res.termination,
        kkt=kkt,
        result="success" if res.converged else f"budget exhausted: {res.termination}",
    )
    print_summary([summary])
    return EXIT_OK if res.converged else EXIT_BUDGET


# ===== gen =====


def cli_gen(args) -> int:
    if not args.gamma > 0:
        raise InvalidParameterError(f"gamma must be positive, got {args.gamma}")
    noise = NoiseSpec.parse(args.noise)
    inst = generate_lsr_instance(args.p, args.n, args.k, args.K, noise, args.seed)
    out = write_text_atomic(dumps(least_squares_to_dict(inst.C, inst.obs, args.gamma)), args.out)
    truth = out.with_suffix(".truth.json")
    write_text_atomic(dumps(inst.truth()), truth)
    logger.info("wrote %s and %s (card(x_true)=%d)", out, truth, int((inst.x_true != 0).sum()))
    return EXIT_OK


# ===== bench =====


def cli_bench(args) -> int:
    config = load_config(args.config)
    try:
        run = run_benchmark(config, out_dir=args.out_dir, jobs=args.jobs, progress=not args.no_progress)
    except ValueError as e:
        if isinstance(e, L0MpccError):
            raise
        print(f"bench: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    print_bench_summary(run)
    return EXIT_OK


COMMANDS = {"solve": cli_solve, "gen": cli_gen, "bench": cli_bench}


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    configure_logging()
    try:
        return COMMANDS[args.command](args)
    except L0MpccError as e:
        print(f"{args.command}: {e}", file=sys.stderr)
        for note in getattr(e, "__notes__", []):
            print(f"  {note}", file=sys.stderr)
        return EXIT_INPUT_ERROR


def cli():
    sys.exit(main())


if __name__ == "__main__":
    cli()
