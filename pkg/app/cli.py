import sys
import logging
import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from .config import Config
from .core import FftSign, KernelId, Precision, Workload, enumerate_configurations
from .energymodel import fit_report, load_pmc_csv, nnls_fit
from .pareto import TradeoffSummary, aggregate_tradeoffs
from .errors import BiobjTuneError, SweepAbortedError, UsageError
from .kernels import selftest
from .measure import EnergySourceSpec, parse_energy_spec
from .driver import (
    FORMATS,
    SweepReport,
    SweepSpec,
    emit_report,
    load_samples_csv,
    report_from_samples,
    run_sweep,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="biobj-tune",
        description="Bi-objective (time, dynamic energy) tuning of threadgroup configurations",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    sweep = sub.add_parser("sweep", help="measure every (g, t) configuration and build the front")
    sweep.add_argument("--kernel", required=True, choices=[k.value for k in KernelId])
    sweep.add_argument("--n", type=int, required=True, help="workload size")
    sweep.add_argument("--cores", type=int, default=None, help="cores l (default: physical cores)")
    sweep.add_argument("--preset", choices=list(Config.PRECISION_PRESETS), default=None)
    sweep.add_argument("--cl", type=float, default=None, help="confidence level")
    sweep.add_argument("--eps", type=float, default=None, help="target relative error")
    sweep.add_argument("--min-reps", type=int, default=None)
    sweep.add_argument("--max-reps", type=int, default=None)
    sweep.add_argument("--max-elapsed-s", type=float, default=None)
    sweep.add_argument("--energy", default=None, help="synthetic[:expr], replay:<path> or command:<argv>")
    sweep.add_argument("--static-power-w", type=float, default=None)
    sweep.add_argument("--config", default=None, help="dotenv-syntax sweep config file")
    sweep.add_argument("--out", default="sweep_out", help="report directory")
    sweep.add_argument("--format", action="append", choices=FORMATS, dest="formats")
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--failure-budget", type=int, default=None)
    sweep.add_argument("--pre-exec-hook", default=None)
    sweep.add_argument("--transpose-block", type=int, default=None)
    sweep.add_argument(
        "--copy-bands", action="store_true", help="gemm_v: copy column bands into per-group buffers"
    )
    sweep.add_argument("--alpha", type=float, default=1.0)
    sweep.add_argument("--beta", type=float, default=0.0)
    sweep.add_argument("--sign", choices=[s.value for s in FftSign], default=FftSign.FORWARD.value)

    pareto = sub.add_parser("pareto", help="Pareto front of a CSV of measured samples")
    pareto.add_argument(
        "--input", required=True, action="append", dest="inputs",
        help="CSV with g,t,time_s,dynamic_energy_j; repeat to aggregate several fronts",
    )
    pareto.add_argument("--out", default=None, help="report directory, one subdirectory per input when repeated")
    pareto.add_argument("--format", action="append", choices=FORMATS, dest="formats")

    fit = sub.add_parser("fit-energy", help="fit the dTLB dynamic-energy model to a PMC table")
    fit.add_argument("--input", required=True, help="PMC CSV")
    fit.add_argument("--report", default=None, help="write the fit report as JSON")

    kernels = sub.add_parser("kernels", help="kernel utilities")
    kernels_sub = kernels.add_subparsers(dest="kernels_command", metavar="ACTION")
    kernels_sub.required = True
    check = kernels_sub.add_parser("selftest", help="compare parallel kernels with naive oracles")
    check.add_argument("--n", type=int, default=16, help="matrix size (power of two)")
    check.add_argument("--seed", type=int, default=None)

    configs = sub.add_parser("configs", help="list the configurations for l cores")
    configs.add_argument("--cores", type=int, default=None)

    serve = sub.add_parser("serve", help="run the REST surface")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    return parser


def _precision(args) -> Precision:
    base = Precision.preset(args.preset or Config.PRECISION_PRESET)
    overrides = {
        "confidence_level": args.cl,
        "target_rel_error": args.eps,
        "min_reps": args.min_reps,
        "max_reps": args.max_reps,
        "max_elapsed_s": args.max_elapsed_s,
    }
    return Precision(**{**base.model_dump(), **{k: v for k, v in overrides.items() if v is not None}})


def _energy_source(args, settings: Dict[str, Any]) -> EnergySourceSpec:
    if args.energy:
        return parse_energy_spec(args.energy)
    kind = settings.get("energy_source", Config.ENERGY_SOURCE)
    return EnergySourceSpec(
        kind=kind,
        replay_path=settings.get("replay_path", Config.REPLAY_PATH),
        command_argv=settings.get("command_argv", Config.COMMAND_ARGV),
        synthetic_expr_id=settings.get("synthetic_expr_id", Config.SYNTHETIC_EXPR_ID),
    )


def spec_from_args(args) -> SweepSpec:
    """Flags override the config file, which overrides the environment"""
    settings = Config.from_file(args.config) if args.config else {}
    try:
        workload = Workload(
            kernel_id=KernelId(args.kernel),
            n=args.n,
            scalar_alpha=args.alpha,
            scalar_beta=args.beta,
            fft_sign=FftSign(args.sign),
            transpose_block=args.transpose_block or Config.TRANSPOSE_BLOCK,
            copy_bands=args.copy_bands,
        )
        static_power = args.static_power_w
        if static_power is None:
            static_power = settings.get("static_power_w", Config.STATIC_POWER_W)
        return SweepSpec(
            workload=workload,
            cores_l=args.cores if args.cores is not None else Config.CORES,
            precision=_precision(args),
            energy_source=_energy_source(args, settings),
            static_power_w=static_power,
            output_path=args.out,
            formats=args.formats or ["json"],
            seed=args.seed if args.seed is not None else Config.SEED,
            failure_budget=(
                args.failure_budget if args.failure_budget is not None else Config.FAILURE_BUDGET
            ),
            anomaly_retries=Config.ANOMALY_RETRIES,
            pre_exec_hook=args.pre_exec_hook or Config.PRE_EXEC_HOOK,
            command_cover_timeout_s=Config.COMMAND_COVER_TIMEOUT_S,
        )
    except ValueError as e:
        raise UsageError(str(e))


def _pct(value: Optional[float]) -> str:
    return "undefined" if value is None else f"{value:.3g}%"


def _print_tradeoffs(tradeoffs: Optional[TradeoffSummary]) -> None:
    if tradeoffs is None:
        return
    fast, lean = tradeoffs.performance_optimal, tradeoffs.energy_optimal
    print(
        f"# performance-optimal {' '.join(map(str, fast.configs))}, "
        f"energy-optimal {' '.join(map(str, lean.configs))}, front size {tradeoffs.front_size}"
    )
    print(f"# energy-only optimization degrades performance by {_pct(tradeoffs.performance_degradation_pct)}")
    print(f"# performance-only optimization increases dynamic energy by {_pct(tradeoffs.energy_increase_pct)}")
    base = tradeoffs.base
    if base is not None:
        print(
            f"# vs best base {base.fastest_base}: time improved by {_pct(base.time_improvement_pct)}; "
            f"vs {base.leanest_base}: dynamic energy saved {_pct(base.energy_saving_pct)}"
        )


def _print_front(report: SweepReport) -> None:
    """Front lines sorted by time, then '#' lines with the trade-offs"""
    for entry in report.front.sorted_by_time():
        configs = " ".join(str(c) for c in entry.configs)
        time_s, energy_j = entry.objective
        print(f"{configs}\t{time_s:.6g} s\t{energy_j:.6g} J")
    _print_tradeoffs(report.tradeoffs)


def cmd_sweep(args) -> int:
    spec = spec_from_args(args)
    try:
        report = run_sweep(spec)
    except SweepAbortedError as e:
        logger.error(f"{e}; partial report kept in {spec.output_path}")
        return EXIT_RUNTIME
    _print_front(report)
    return EXIT_OK


def cmd_pareto(args) -> int:
    summaries = []
    for path in args.inputs:
        report = report_from_samples(load_samples_csv(path), source=path)
        if len(args.inputs) > 1:
            print(f"# {path}")
        _print_front(report)
        if report.tradeoffs is not None:
            summaries.append(report.tradeoffs)
        if args.out:
            out = args.out if len(args.inputs) == 1 else str(Path(args.out) / Path(path).stem)
            for fmt in args.formats or ["json"]:
                emit_report(report, fmt, out)

    if len(summaries) > 1:
        agg = aggregate_tradeoffs(summaries)
        print(
            f"# {agg.fronts} fronts: size mean {agg.mean_front_size:.3g} max {agg.max_front_size}; "
            f"performance degradation mean {_pct(agg.mean_performance_degradation_pct)} "
            f"max {_pct(agg.max_performance_degradation_pct)}; "
            f"energy increase mean {_pct(agg.mean_energy_increase_pct)} "
            f"max {_pct(agg.max_energy_increase_pct)}"
        )
    return EXIT_OK


def cmd_fit_energy(args) -> int:
    records = load_pmc_csv(args.input)
    model = nnls_fit(records)
    report = fit_report(records, model)
    print(f"beta1={model.beta1:.6g} beta2={model.beta2:.6g} beta3={model.beta3:.6g}")
    print(f"residual_norm={model.residual_norm:.6g} spearman={report.spearman_rho:.4f} r2={report.r2:.4f}")
    for row in report.rows:
        print(f"{row.config}\t{row.measured_j:.6g}\t{row.predicted_j:.6g}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as f:
            f.write(report.model_dump_json(indent=2))
        logger.info(f"Wrote fit report to {args.report}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    if args.n < 2 or args.n & (args.n - 1):
        raise UsageError(f"--n must be a power of two of at least 2, got {args.n}")
    results = selftest(n_gemm=args.n, n_fft=args.n, seed=args.seed if args.seed is not None else Config.SEED)
    for r in results:
        where = f" {r.config}" if r.config else ""
        print(f"{'PASS' if r.passed else 'FAIL'} {r.check}{where} error={r.error:.3g}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def cmd_configs(args) -> int:
    cores = args.cores if args.cores is not None else Config.CORES
    try:
        configs = enumerate_configurations(cores)
    except ValueError as e:
        raise UsageError(str(e))
    for config in configs:
        print(config)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port)
    return EXIT_OK


COMMANDS = {
    "sweep": cmd_sweep,
    "pareto": cmd_pareto,
    "fit-energy": cmd_fit_energy,
    "kernels": cmd_selftest,
    "configs": cmd_configs,
    "serve": cmd_serve,
}


def cli_main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    logging.basicConfig(
        level=Config.log_level(args.log_level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except (BiobjTuneError, ValidationError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(cli_main())
