"""Sweep orchestration: measure every configuration, keep the Pareto front.

For each (g, t) with g*t <= l the kernel is measured twice to confidence,
once for execution time and once, in separate runs, for dynamic energy.  The
converged means form the objective vector folded into the front.
"""

import os
import shlex
import time
import logging
import platform
import subprocess
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, Field

from .core import (
    Configuration,
    ObjectiveSample,
    Precision,
    Workload,
    enumerate_configurations,
)
from .errors import (
    AnomalousMeasurementError,
    BiobjTuneError,
    InvalidInputError,
    KernelError,
    MeasurementError,
    SweepAbortedError,
)
from .kernels import Kernel, StubKernel, build_kernel
from .measure import EnergySource, EnergySourceSpec, MeasureKind, build_energy_source
from .pareto import (
    ParetoFront,
    TradeoffSummary,
    front_build,
    front_update,
    same_front,
    tradeoff_summary,
)
from .stats import TtestResult, mean_using_ttest

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FORMATS = ("json", "csv", "plotdata")

REPORT_JSON = "report.json"
REPORT_CSV = "samples.csv"
FRONT_DAT = "front.dat"
SAMPLES_DAT = "samples.dat"

SAMPLE_COLUMNS = ["g", "t", "time_s", "dynamic_energy_j"]


class SweepSpec(BaseModel):
    workload: Workload
    cores_l: int = Field(ge=1)
    precision: Precision = Precision()
    energy_source: EnergySourceSpec = EnergySourceSpec(kind="synthetic")
    static_power_w: float = Field(default=0.0, ge=0)
    output_path: Optional[str] = None
    formats: List[str] = ["json"]
    seed: int = 0
    failure_budget: int = Field(default=0, ge=0)
    anomaly_retries: int = Field(default=3, ge=0)
    pre_exec_hook: Optional[str] = None
    command_cover_timeout_s: float = Field(default=5.0, gt=0)


class SampleRecord(BaseModel):
    config: Configuration
    time_s: float
    dynamic_energy_j: float
    time_stats: Optional[TtestResult] = None
    energy_stats: Optional[TtestResult] = None
    mean_overhead_s: float = 0.0

    @property
    def converged(self) -> bool:
        return all(s is None or s.converged for s in (self.time_stats, self.energy_stats))

    def objective_sample(self) -> ObjectiveSample:
        return ObjectiveSample(
            time_s=self.time_s, dynamic_energy_j=self.dynamic_energy_j, config=self.config
        )


class SkippedConfig(BaseModel):
    config: Configuration
    reason: str


class Provenance(BaseModel):
    started_at: datetime
    finished_at: Optional[datetime] = None
    host: Dict[str, str] = {}
    energy_source: str = ""
    spec: Optional[SweepSpec] = None


class SweepReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    samples: List[SampleRecord] = []
    skipped: List[SkippedConfig] = []
    failures: List[str] = []
    front: ParetoFront = ParetoFront()
    tradeoffs: Optional[TradeoffSummary] = None
    complete: bool = True
    provenance: Provenance

    def objective_samples(self) -> List[ObjectiveSample]:
        """Converged samples, the ones the front is built from"""
        return [s.objective_sample() for s in self.samples if s.converged]

    def summarize(self) -> None:
        """Fill ``tradeoffs`` from the current front; left empty while the front is"""
        self.tradeoffs = (
            tradeoff_summary(self.front, self.objective_samples()) if self.front.entries else None
        )


def host_descriptor() -> Dict[str, str]:
    return {
        "node": platform.node(),
        "system": platform.system(),
        "machine": platform.machine(),
        "python": platform.python_version(),
        "logical_cpus": str(os.cpu_count() or 0),
    }


def _now() -> datetime:
    return datetime.now(timezone.utc)


def _run_hook(hook: str, config: Configuration) -> None:
    env = dict(os.environ)
    env["BIOBJ_TUNE_GROUPS"] = str(config.groups)
    env["BIOBJ_TUNE_THREADS"] = str(config.threads_per_group)
    try:
        subprocess.run(shlex.split(hook), env=env, check=True, timeout=60)
    except (OSError, subprocess.SubprocessError) as e:
        raise KernelError(f"pre-exec hook failed for {config}: {e}")


class _Sweeper:
    def __init__(
        self,
        spec: SweepSpec,
        kernel: Kernel,
        source: EnergySource,
        clock: Callable[[], float],
    ):
        self.spec = spec
        self.kernel = kernel
        self.source = source
        self.clock = clock

    def _run_kernel(self, config: Configuration) -> None:
        try:
            self.kernel.run(config)
        except BiobjTuneError:
            raise
        except Exception as e:
            raise KernelError(f"{self.spec.workload.kernel_id.value} failed at {config}: {e}") from e

    def measure_time(self, config: Configuration) -> TtestResult:
        def observe() -> float:
            self.kernel.prepare()
            st = self.clock()
            self._run_kernel(config)
            return self.clock() - st

        return mean_using_ttest(
            observe, self.spec.precision, clock=self.clock, label=f"{MeasureKind.TIME.value} {config}"
        )

    def measure_energy(self, config: Configuration) -> Tuple[TtestResult, float]:
        overheads: List[float] = []

        def observe() -> float:
            for attempt in range(self.spec.anomaly_retries + 1):
                self.kernel.prepare()
                try:
                    measurement = self.source.measure(
                        lambda: self._run_kernel(config), self.spec.workload, config
                    )
                except AnomalousMeasurementError as e:
                    if attempt == self.spec.anomaly_retries:
                        raise
                    logger.warning(f"Anomalous measurement at {config}, retrying: {e}")
                    continue
                overheads.append(measurement.overhead_s)
                return measurement.dynamic_energy_j
            raise MeasurementError(f"no measurement at {config}")

        result = mean_using_ttest(
            observe, self.spec.precision, clock=self.clock, label=f"{MeasureKind.DENERGY.value} {config}"
        )
        return result, (sum(overheads) / len(overheads) if overheads else 0.0)


def _validate(spec: SweepSpec) -> SweepSpec:
    try:
        return SweepSpec.model_validate(spec.model_dump())
    except ValueError as e:
        raise InvalidInputError(f"invalid sweep spec: {e}")


def run_sweep(
    spec: SweepSpec,
    kernel: Optional[Kernel] = None,
    source: Optional[EnergySource] = None,
    clock: Optional[Callable[[], float]] = None,
) -> SweepReport:
    """Measure every configuration for cores_l and return the report with its front"""
    spec = _validate(spec)
    configs = enumerate_configurations(spec.cores_l)

    kernel = kernel or build_kernel(spec.workload, seed=spec.seed)
    if clock is None:
        clock = kernel.clock if isinstance(kernel, StubKernel) else time.perf_counter
    source = source or build_energy_source(
        spec.energy_source,
        spec.static_power_w,
        clock=None if spec.energy_source.kind == "command" else clock,
        seed=spec.seed,
        cover_timeout_s=spec.command_cover_timeout_s,
    )

    report = SweepReport(
        provenance=Provenance(
            started_at=_now(),
            host=host_descriptor(),
            energy_source=source.describe(),
            spec=spec,
        )
    )
    sweeper = _Sweeper(spec, kernel, source, clock)
    front = ParetoFront()

    logger.info(
        f"Starting sweep: {spec.workload.kernel_id.value} n={spec.workload.n}, "
        f"{len(configs)} configurations for l={spec.cores_l}, energy {source.describe()}"
    )

    try:
        for config in configs:
            reason = spec.workload.incompatibility(config)
            if reason:
                logger.warning(f"Skipping {config}: {reason}")
                report.skipped.append(SkippedConfig(config=config, reason=reason))
                continue

            try:
                if spec.pre_exec_hook:
                    _run_hook(spec.pre_exec_hook, config)
                time_stats = sweeper.measure_time(config)
                energy_stats, overhead = sweeper.measure_energy(config)
                record = SampleRecord(
                    config=config,
                    time_s=time_stats.mean,
                    dynamic_energy_j=energy_stats.mean,
                    time_stats=time_stats,
                    energy_stats=energy_stats,
                    mean_overhead_s=overhead,
                )
                sample = record.objective_sample()
            except (KernelError, MeasurementError, ValueError) as e:
                _fail(report, spec, f"{config}: {e}")
                continue

            report.samples.append(record)
            if not record.converged:
                _fail(report, spec, f"{config}: did not converge")
                continue

            front = front_update(front, sample)
            logger.info(
                f"Measured {config}: {sample.time_s:.6g} s, {sample.dynamic_energy_j:.6g} J "
                f"(front size {len(front)})"
            )
    finally:
        source.close()

    report.front = front
    report.summarize()
    report.provenance.finished_at = _now()
    logger.info(
        f"Sweep finished: {len(report.samples)} measured, {len(report.skipped)} skipped, "
        f"front of {len(front)} entries"
    )
    if spec.output_path:
        for fmt in spec.formats:
            emit_report(report, fmt, spec.output_path)
    return report


def _fail(report: SweepReport, spec: SweepSpec, message: str) -> None:
    logger.error(f"Sweep failure: {message}")
    report.failures.append(message)
    if len(report.failures) <= spec.failure_budget:
        return

    report.complete = False
    report.front = front_build(report.objective_samples())
    report.summarize()
    report.provenance.finished_at = _now()
    if spec.output_path:
        try:
            emit_report(report, "json", spec.output_path)
        except (OSError, InvalidInputError) as e:
            logger.error(f"Could not write partial report: {e}")
    raise SweepAbortedError(
        f"sweep aborted after {len(report.failures)} failures "
        f"(budget {spec.failure_budget}): {message}",
        report,
    )


def report_from_samples(samples: List[ObjectiveSample], source: str = "samples") -> SweepReport:
    """Pareto-only report over externally measured samples"""
    report = SweepReport(
        samples=[
            SampleRecord(config=s.config, time_s=s.time_s, dynamic_energy_j=s.dynamic_energy_j)
            for s in samples
        ],
        front=front_build(samples),
        provenance=Provenance(started_at=_now(), host=host_descriptor(), energy_source=source),
    )
    report.summarize()
    report.provenance.finished_at = _now()
    return report


def verify_report(report: SweepReport) -> bool:
    """The stored front is the front of the report's own samples"""
    return same_front(report.front, front_build(report.objective_samples()))


def load_samples_csv(path) -> List[ObjectiveSample]:
    """Samples from any CSV carrying g, t, time_s and dynamic_energy_j columns"""
    frame = pd.read_csv(path, skipinitialspace=True)
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in SAMPLE_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidInputError(f"{path}: missing columns {', '.join(missing)}")

    samples = []
    for line, row in enumerate(frame[SAMPLE_COLUMNS].itertuples(index=False), start=2):
        try:
            samples.append(
                ObjectiveSample(
                    time_s=float(row.time_s),
                    dynamic_energy_j=float(row.dynamic_energy_j),
                    config=Configuration.of(int(row.g), int(row.t)),
                )
            )
        except (TypeError, ValueError) as e:
            raise InvalidInputError(f"{path}: line {line}: {e}")
    logger.info(f"Loaded {len(samples)} samples from {path}")
    return samples


def _plot_lines(points) -> str:
    return "".join(f"{time_s:.17g} {energy_j:.17g}\n" for time_s, energy_j in points)


def emit_report(report: SweepReport, fmt: str, out_dir) -> List[Path]:
    """Write ``report`` under ``out_dir`` in one format; returns the files written"""
    if fmt not in FORMATS:
        raise InvalidInputError(f"unknown report format '{fmt}', expected one of {', '.join(FORMATS)}")
    if not report.samples:
        raise InvalidInputError("refusing to emit an empty report")

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path = out / REPORT_JSON
            path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
            written = [path]
        elif fmt == "csv":
            on_front = {c.as_tuple() for c in report.front.configs()}
            frame = pd.DataFrame(
                [
                    {
                        "g": s.config.groups,
                        "t": s.config.threads_per_group,
                        "time_s": s.time_s,
                        "dynamic_energy_j": s.dynamic_energy_j,
                        "time_reps": s.time_stats.reps_out if s.time_stats else "",
                        "energy_reps": s.energy_stats.reps_out if s.energy_stats else "",
                        "converged": s.converged,
                        "on_front": s.config.as_tuple() in on_front,
                    }
                    for s in report.samples
                ]
            )
            path = out / REPORT_CSV
            frame.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
            written = [path]
        else:
            front_path = out / FRONT_DAT
            samples_path = out / SAMPLES_DAT
            front_path.write_text(
                _plot_lines(e.objective for e in report.front.sorted_by_time()), encoding="utf-8"
            )
            samples_path.write_text(
                _plot_lines((s.time_s, s.dynamic_energy_j) for s in report.samples), encoding="utf-8"
            )
            written = [front_path, samples_path]
    except OSError as e:
        logger.error(f"Could not write {fmt} report to {out}: {e}")
        raise

    logger.info(f"Wrote {fmt} report: {', '.join(str(p) for p in written)}")
    return written


def load_report(path) -> SweepReport:
    return SweepReport.model_validate_json(Path(path).read_text(encoding="utf-8"))
