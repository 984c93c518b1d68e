"""
Command line entry point: generate instances, solve them with or without
screening, benchmark the screening variants and audit everything against
brute force.

Exit codes: 0 success, 2 usage, 3 numerical failure, 4 verification failure.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

import structlog
from pydantic import ValidationError

from .core.config import get_settings
from .core.errors import SFMError, UsageError, VerificationFailed
from .core.logging_config import configure_logging
from .core.schemas import InstanceKind, RunConfig, ScreeningMode, SolverKind
from .repositories.run_repository import RunRepository
from .services.bench_service import DEFAULT_VARIANTS, BenchService
from .services.instance_service import InstanceService
from .services.solve_service import SolveService
from .services.verify_service import VerifyService

logger = structlog.get_logger(__name__)

MAX_INSTANCE_AUDITS = 3

GENERATE_KINDS = {
    "two-moons": (InstanceKind.TWO_MOONS, {}),
    "grid": (InstanceKind.GRID, {}),
    "modular": (InstanceKind.MODULAR, {}),
    "concave": (InstanceKind.CONCAVE, {}),
    "iwata": (InstanceKind.IWATA, {}),
    "random-cut": (InstanceKind.RANDOM, {"family": "grid_cut"}),
}


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, default=str))


def _run_options(parser: argparse.ArgumentParser, settings) -> None:
    parser.add_argument("--instance", required=True, help="instance JSON file")
    parser.add_argument("--solver", choices=[k.value for k in SolverKind], default=SolverKind.WOLFE.value)
    parser.add_argument("--eps", type=float, default=settings.eps)
    parser.add_argument("--rho", type=float, default=settings.rho)
    parser.add_argument("--max-iter", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(prog="sfm", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--log-level", default=settings.log_level)
    parser.add_argument("--json-logs", action="store_true", help="JSON log lines instead of console output")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write an instance JSON and its data files")
    gen.add_argument("--kind", choices=sorted(GENERATE_KINDS), required=True)
    gen.add_argument("--out", required=True, help="instance JSON path; data files are written next to it")
    gen.add_argument("--name", default=None)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--p", type=int, default=None)
    gen.add_argument("--p0", type=int, default=None)
    gen.add_argument("--alpha", type=float, default=1.5)
    gen.add_argument("--image", default=None, help="PGM/PPM input for grid instances")
    gen.add_argument("--height", type=int, default=None)
    gen.add_argument("--width", type=int, default=None)
    gen.add_argument("--noise", type=float, default=0.1)
    gen.add_argument("--unary", default=None, help="precomputed unary CSV for grid instances")
    gen.add_argument("--strength", type=float, default=1.0)
    gen.add_argument("--family", default=None, help="random family for --kind random-cut")

    solve = sub.add_parser("solve", help="minimize one instance")
    _run_options(solve, settings)
    solve.add_argument("--screening", choices=[m.value for m in ScreeningMode], default=ScreeningMode.IAES.value)

    bench = sub.add_parser("bench", help="time screening variants against the unscreened baseline")
    _run_options(bench, settings)
    bench.add_argument("--variants", nargs="+", choices=[m.value for m in ScreeningMode],
                       default=[m.value for m in DEFAULT_VARIANTS])
    bench.add_argument("--trials", type=int, default=settings.trials)

    verify = sub.add_parser("verify", help="brute-force audit of screening safety and the closed forms")
    verify.add_argument("--instance", default=None, help="audit this instance instead of random families")
    verify.add_argument("--trials", type=int, default=500,
                        help="random instances to audit; with --instance, repeated audits of it (at most 3)")
    verify.add_argument("--p-max", type=int, default=10)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--inject-fault", action="store_true", help="negate every certificate gap")
    verify.add_argument("--out", default=None)

    serve = sub.add_parser("serve", help="start the HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=3000)
    return parser


def cmd_generate(args) -> int:
    kind, extra = GENERATE_KINDS[args.kind]
    params = {k: v for k, v in vars(args).items()
              if k in ("name", "p", "p0", "alpha", "image", "height", "width", "noise", "unary", "strength", "family")
              and v is not None}
    params.update({k: v for k, v in extra.items() if k not in params})
    _, stats = InstanceService().generate(kind, Path(args.out), seed=args.seed, **params)
    _emit(stats.model_dump(mode="json", exclude_none=True))
    return 0


def _load(args):
    config = RunConfig(instance=args.instance, solver=args.solver, screening=getattr(args, "screening", "iaes"),
                       eps=args.eps, rho=args.rho, max_iter=args.max_iter, seed=args.seed,
                       output_dir=args.out or str(Path(get_settings().output_dir) / Path(args.instance).stem))
    spec, oracle = InstanceService().load(Path(config.instance))
    return config, spec, oracle


def cmd_solve(args) -> int:
    config, spec, oracle = _load(args)
    service = SolveService(RunRepository(config.output_dir))
    summary, _ = service.solve(oracle, spec.name, solver=config.solver, screening=config.screening,
                               eps=config.eps, rho=config.rho, max_iter=config.max_iter)
    _emit(summary.model_dump(mode="json"))
    return 0


def cmd_bench(args) -> int:
    config, spec, oracle = _load(args)
    rows = BenchService(RunRepository(config.output_dir)).run(
        oracle, spec.name, solver=config.solver, variants=args.variants, trials=args.trials,
        eps=config.eps, rho=config.rho, max_iter=config.max_iter,
    )
    _emit([r.model_dump() for r in rows])
    return 0


def cmd_verify(args) -> int:
    oracle = None
    trials = args.trials
    if args.instance:
        _, oracle = InstanceService().load(Path(args.instance))
        trials = min(trials, MAX_INSTANCE_AUDITS)
        if trials < args.trials:
            logger.warning("verify_trials_capped", requested=args.trials, trials=trials, instance=args.instance)
    runs = RunRepository(args.out) if args.out else None
    report = VerifyService(runs).run(trials=trials, p_max=args.p_max, seed=args.seed,
                                     inject_fault=args.inject_fault, oracle=oracle)
    _emit(report.model_dump(mode="json"))
    if not report.passed:
        raise VerificationFailed(report.violations)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("src.api.server:app", host=args.host, port=args.port)
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "bench": cmd_bench,
    "verify": cmd_verify,
    "serve": cmd_serve,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level, json_output=args.json_logs)
    try:
        return COMMANDS[args.command](args)
    except SFMError as e:
        logger.error("command_failed", command=args.command, error=e.message or str(e), exit_code=e.exit_code)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (ValidationError, FileNotFoundError) as e:
        logger.error("command_failed", command=args.command, error=str(e), exit_code=UsageError.exit_code)
        print(f"error: {e}", file=sys.stderr)
        return UsageError.exit_code


if __name__ == "__main__":
    sys.exit(main())
