"""Execution timing, energy sources and dynamic-energy computation.

Dynamic energy over a run window of ``T_E`` seconds is the integrated draw
minus the platform's static power: ``E_D = E_T - P_S * T_E``.  Sources:

* ``replay``    - a recorded power log (one trace, or one trace per configuration)
* ``command``   - an external sampler printing ``timestamp_s,power_w`` lines
* ``synthetic`` - a deterministic function of (workload, configuration)
"""

import math
import shlex
import time
import logging
import threading
import subprocess
from abc import ABC, abstractmethod
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import trapezoid

from .core import Configuration, Workload
from .errors import (
    AnomalousMeasurementError,
    InvalidInputError,
    MeasurementError,
    OutOfRangeError,
)

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["timestamp_s", "power_w"]

Clock = Callable[[], float]


class MeasureKind(str, Enum):
    TIME = "TIME"
    DPOWER = "DPOWER"
    TENERGY = "TENERGY"
    DENERGY = "DENERGY"


class PowerTrace(BaseModel):
    """Timestamped instantaneous power samples"""

    model_config = ConfigDict(frozen=True)

    samples: List[Tuple[float, float]]
    meter_rate_hz: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _check_samples(self):
        times = np.array([s[0] for s in self.samples], dtype=np.float64)
        power = np.array([s[1] for s in self.samples], dtype=np.float64)
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(power))):
            raise ValueError("trace samples must be finite")
        if np.any(np.diff(times) <= 0):
            raise ValueError("trace timestamps must be strictly increasing")
        if np.any(power < 0):
            raise ValueError("trace power must be non-negative")
        return self

    @property
    def times(self) -> np.ndarray:
        return np.fromiter((s[0] for s in self.samples), dtype=np.float64, count=len(self.samples))

    @property
    def power(self) -> np.ndarray:
        return np.fromiter((s[1] for s in self.samples), dtype=np.float64, count=len(self.samples))

    @property
    def span(self) -> Tuple[float, float]:
        return (float(self.samples[0][0]), float(self.samples[-1][0]))

    def __len__(self) -> int:
        return len(self.samples)


class EnergyReading(BaseModel):
    model_config = ConfigDict(frozen=True)

    total_energy_j: float
    elapsed_s: float
    static_power_w: float
    dynamic_energy_j: float

    @model_validator(mode="after")
    def _check_identity(self):
        if self.dynamic_energy_j != self.total_energy_j - self.static_power_w * self.elapsed_s:
            raise ValueError("dynamic energy must equal total - static_power * elapsed")
        return self

    def value(self, kind: MeasureKind) -> float:
        if kind is MeasureKind.TIME:
            return self.elapsed_s
        if kind is MeasureKind.TENERGY:
            return self.total_energy_j
        if kind is MeasureKind.DENERGY:
            return self.dynamic_energy_j
        return self.dynamic_energy_j / self.elapsed_s


class Measurement(BaseModel):
    """One timed run of a workload thunk with its dynamic energy"""

    time_s: float
    dynamic_energy_j: float
    reading: Optional[EnergyReading] = None
    overhead_s: float = 0.0


def _window_points(trace: PowerTrace, t_start: float, t_end: float) -> Tuple[np.ndarray, np.ndarray]:
    if len(trace) == 0:
        raise InvalidInputError("power trace is empty")
    if not (math.isfinite(t_start) and math.isfinite(t_end)) or t_start >= t_end:
        raise InvalidInputError(f"invalid window [{t_start}, {t_end}]")
    first, last = trace.span
    if t_start < first or t_end > last:
        raise OutOfRangeError(
            f"window [{t_start:.6f}, {t_end:.6f}] outside trace span [{first:.6f}, {last:.6f}]"
        )
    times, power = trace.times, trace.power
    inner = (times > t_start) & (times < t_end)
    xs = np.concatenate(([t_start], times[inner], [t_end]))
    ys = np.concatenate(
        ([np.interp(t_start, times, power)], power[inner], [np.interp(t_end, times, power)])
    )
    return xs, ys


def integrate_power(trace: PowerTrace, t_start: float, t_end: float) -> float:
    """Trapezoidal integral of power (joules) over [t_start, t_end]"""
    xs, ys = _window_points(trace, t_start, t_end)
    return float(trapezoid(ys, xs))


def trapezoid_count(trace: PowerTrace, t_start: float, t_end: float) -> int:
    """Number of sample pairs integrate_power uses over the window"""
    xs, _ = _window_points(trace, t_start, t_end)
    return len(xs) - 1


def dynamic_energy(
    trace: PowerTrace, t_start: float, t_end: float, static_power_w: float
) -> EnergyReading:
    if static_power_w < 0:
        raise InvalidInputError(f"static power must be non-negative, got {static_power_w}")
    total = integrate_power(trace, t_start, t_end)
    elapsed = t_end - t_start
    dynamic = total - static_power_w * elapsed
    if dynamic < 0:
        raise AnomalousMeasurementError(
            dynamic,
            f"E_T={total:.6g} J over {elapsed:.6g} s with P_S={static_power_w:.6g} W",
        )
    return EnergyReading(
        total_energy_j=total,
        elapsed_s=elapsed,
        static_power_w=static_power_w,
        dynamic_energy_j=dynamic,
    )


def idle_power(trace: PowerTrace) -> float:
    """Time-weighted mean power of an idle trace, an estimate of P_S"""
    if len(trace) == 0:
        raise InvalidInputError("power trace is empty")
    if len(trace) == 1:
        return float(trace.power[0])
    first, last = trace.span
    return integrate_power(trace, first, last) / (last - first)


def parse_power_lines(lines: Iterable[str], source: str = "<lines>") -> List[Tuple[float, float]]:
    """Parse ``timestamp_s,power_w`` lines; a header line and blank lines are skipped"""
    samples = []
    for number, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.replace(" ", "") == ",".join(TRACE_COLUMNS):
            continue
        parts = text.split(",")
        try:
            if len(parts) != 2:
                raise ValueError(f"expected 2 fields, got {len(parts)}")
            samples.append((float(parts[0]), float(parts[1])))
        except ValueError as e:
            raise MeasurementError(
                f"unparsable power sample in {source}", f"line {number}: {text!r}: {e}"
            )
    return samples


def load_power_trace(path, meter_rate_hz: float = 1.0) -> PowerTrace:
    """Read a ``timestamp_s,power_w`` CSV trace"""
    try:
        frame = pd.read_csv(path, dtype=float)
    except FileNotFoundError:
        raise MeasurementError(f"power trace not found: {path}")
    except ValueError as e:
        raise MeasurementError(f"unparsable power trace {path}", str(e))

    if list(frame.columns) != TRACE_COLUMNS:
        raise MeasurementError(
            f"bad power trace header in {path}",
            f"expected {','.join(TRACE_COLUMNS)}, got {','.join(map(str, frame.columns))}",
        )
    try:
        return PowerTrace(
            samples=list(zip(frame["timestamp_s"].tolist(), frame["power_w"].tolist())),
            meter_rate_hz=meter_rate_hz,
        )
    except ValueError as e:
        raise MeasurementError(f"invalid power trace {path}", str(e))


class SimulatedClock:
    """Deterministic clock that only moves when told to.

    Readings are multiples of RESOLUTION_S, so differences between readings
    are exact and equal advances always measure the same.
    """

    RESOLUTION_S = 2.0 ** -20

    def __init__(self, start: float = 0.0):
        self._now = self._quantize(start)
        self._lock = threading.Lock()

    def __call__(self) -> float:
        with self._lock:
            return self._now

    def advance(self, seconds: float) -> None:
        if seconds < 0:
            raise InvalidInputError("a clock cannot go backwards")
        with self._lock:
            self._now += self._quantize(seconds)

    @classmethod
    def _quantize(cls, seconds: float) -> float:
        return round(float(seconds) / cls.RESOLUTION_S) * cls.RESOLUTION_S


# The physical meter is machine-global: one measurement in flight at a time
_METER_GUARD = threading.Lock()


class EnergySource(ABC):
    kind: str = ""

    def __init__(self, static_power_w: float = 0.0, clock: Clock = time.perf_counter):
        if static_power_w < 0:
            raise InvalidInputError(f"static power must be non-negative, got {static_power_w}")
        self.static_power_w = static_power_w
        self.clock = clock

    def measure(
        self,
        thunk: Callable[[], None],
        workload: Optional[Workload] = None,
        config: Optional[Configuration] = None,
    ) -> Measurement:
        """Run ``thunk`` once and return its wall time and dynamic energy"""
        with _METER_GUARD:
            wall_start = time.perf_counter()
            measurement = self._measure(thunk, workload, config)
            wall = time.perf_counter() - wall_start
        # bookkeeping outside the timed thunk; meaningless on a simulated clock
        overhead = max(0.0, wall - measurement.time_s) if self.clock is time.perf_counter else 0.0
        return measurement.model_copy(update={"overhead_s": overhead})

    def _timed(self, thunk: Callable[[], None]) -> Tuple[float, float]:
        t0 = self.clock()
        thunk()
        t1 = self.clock()
        return t0, t1

    @abstractmethod
    def _measure(
        self,
        thunk: Callable[[], None],
        workload: Optional[Workload],
        config: Optional[Configuration],
    ) -> Measurement:
        ...

    def describe(self) -> str:
        return self.kind

    def close(self) -> None:
        pass


class ReplaySource(EnergySource):
    """Replay a recorded power log.

    ``path`` is either a single trace whose timestamps count from the moment the
    source is created, or a session directory holding ``g{g}_t{t}.csv`` traces
    whose timestamps count from the start of that configuration's run.
    """

    kind = "replay"

    def __init__(self, path, static_power_w: float = 0.0, clock: Clock = time.perf_counter):
        super().__init__(static_power_w, clock)
        self.path = Path(path)
        if not self.path.exists():
            raise MeasurementError(f"replay source unavailable: {self.path} does not exist")
        self.session = self.path.is_dir()
        self._traces: Dict[Tuple[int, int], PowerTrace] = {}
        self._trace = None if self.session else load_power_trace(self.path)
        self._origin = self.clock()
        logger.info(
            f"Replay source on {self.path} ({'session' if self.session else 'single trace'})"
        )

    def trace_for(self, config: Optional[Configuration]) -> PowerTrace:
        if not self.session:
            return self._trace
        if config is None:
            raise MeasurementError("session replay needs the configuration being measured")
        key = config.as_tuple()
        if key not in self._traces:
            self._traces[key] = load_power_trace(self.path / f"g{key[0]}_t{key[1]}.csv")
        return self._traces[key]

    def _measure(self, thunk, workload, config) -> Measurement:
        trace = self.trace_for(config)
        t0, t1 = self._timed(thunk)
        elapsed = t1 - t0
        if self.session:
            window = (0.0, elapsed)
        else:
            window = (t0 - self._origin, t1 - self._origin)
        try:
            reading = dynamic_energy(trace, window[0], window[1], self.static_power_w)
        except OutOfRangeError as e:
            raise MeasurementError("run window not covered by replay trace", str(e))
        return Measurement(time_s=elapsed, dynamic_energy_j=reading.dynamic_energy_j, reading=reading)

    def describe(self) -> str:
        return f"replay:{self.path}"


class CommandSource(EnergySource):
    """Sample power with an external command for the duration of each run.

    The command prints ``timestamp_s,power_w`` lines and is sent SIGTERM once
    the run window is covered.  Timestamps are either epoch seconds, matched
    against the wall clock, or seconds since the sampler started, anchored on
    the arrival of its first sample.
    """

    kind = "command"

    # 2001-09-09 in epoch seconds; smaller stamps count from the sampler's start
    EPOCH_THRESHOLD_S = 1e9

    def __init__(
        self,
        argv: List[str],
        static_power_w: float = 0.0,
        clock: Clock = time.monotonic,
        cover_timeout_s: float = 5.0,
    ):
        super().__init__(static_power_w, clock)
        if not argv:
            raise MeasurementError("command source unavailable: empty command")
        self.argv = list(argv)
        self.cover_timeout_s = cover_timeout_s

    def _timed_wall(self, thunk: Callable[[], None]) -> Tuple[float, float, float]:
        """(t0, t1) on the source clock plus the wall-clock time at t0"""
        wall_start = time.time()
        t0, t1 = self._timed(thunk)
        return t0, t1, wall_start

    def _window(
        self, first: Tuple[float, float], t0: float, t1: float, wall_start: float
    ) -> Tuple[float, float, float]:
        """(origin, start, end): the run window in sampler timestamps less ``origin``.

        ``first`` is (timestamp, local clock at arrival) of the first sample.
        Epoch stamps are rebased on the first one so short windows keep their
        length in double precision.
        """
        first_stamp, first_arrival = first
        if first_stamp >= self.EPOCH_THRESHOLD_S:
            offset = wall_start - first_stamp
            return first_stamp, offset, offset + (t1 - t0)
        anchor = first_arrival - first_stamp
        return 0.0, t0 - anchor, t1 - anchor

    def _measure(self, thunk, workload, config) -> Measurement:
        lines: List[str] = []
        arrivals: List[float] = []
        arrived = threading.Condition()

        try:
            proc = subprocess.Popen(
                self.argv,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise MeasurementError(f"command source unavailable: {self.argv[0]}", str(e))

        def reader():
            for line in proc.stdout:
                stamp = self.clock()
                with arrived:
                    lines.append(line)
                    arrivals.append(stamp)
                    arrived.notify_all()
            with arrived:
                arrived.notify_all()

        pump = threading.Thread(target=reader, daemon=True)
        pump.start()

        def latest() -> Optional[float]:
            samples = parse_power_lines(lines, source=self.argv[0])
            return samples[-1][0] if samples else None

        def first_sample() -> Optional[Tuple[float, float]]:
            for line, stamp in zip(lines, arrivals):
                parsed = parse_power_lines([line], source=self.argv[0])
                if parsed:
                    return parsed[0][0], stamp
            return None

        def wait_for(predicate) -> bool:
            deadline = time.monotonic() + self.cover_timeout_s
            with arrived:
                while not predicate():
                    remaining = deadline - time.monotonic()
                    if remaining <= 0 or (proc.poll() is not None and not pump.is_alive()):
                        return predicate()
                    arrived.wait(timeout=min(remaining, 0.05))
            return True

        try:
            if not wait_for(lambda: latest() is not None):
                raise MeasurementError(
                    f"command produced no samples: {shlex.join(self.argv)}",
                    f"waited {self.cover_timeout_s} s",
                )
            with arrived:
                first = first_sample()
            t0, t1, wall_start = self._timed_wall(thunk)
            origin, start, end = self._window(first, t0, t1, wall_start)
            wait_for(lambda: (latest() or -math.inf) - origin >= end)
        finally:
            self._stop(proc)
            pump.join(timeout=1.0)

        samples = parse_power_lines(lines, source=self.argv[0])
        try:
            trace = PowerTrace(samples=[(stamp - origin, power) for stamp, power in samples])
            reading = dynamic_energy(trace, start, end, self.static_power_w)
        except OutOfRangeError as e:
            raise MeasurementError("run window not covered by command samples", str(e))
        except ValueError as e:
            raise MeasurementError("invalid samples from command", str(e))
        return Measurement(time_s=t1 - t0, dynamic_energy_j=reading.dynamic_energy_j, reading=reading)

    @staticmethod
    def _stop(proc: subprocess.Popen) -> None:
        if proc.poll() is None:
            proc.terminate()
            try:
                proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                logger.warning(f"Sampler {proc.pid} ignored SIGTERM, killing it")
                proc.kill()
                proc.wait()

    def describe(self) -> str:
        return f"command:{shlex.join(self.argv)}"


def _n_scale(workload: Optional[Workload]) -> float:
    return 1.0 if workload is None else workload.n / 64.0


SyntheticExpr = Callable[[Optional[Workload], Configuration, np.random.Generator], float]

SYNTHETIC_EXPRESSIONS: Dict[str, SyntheticExpr] = {
    "unit": lambda w, c, rng: float(c.groups + c.threads_per_group),
    "product": lambda w, c, rng: float(c.groups * c.threads_per_group),
    "tradeoff": lambda w, c, rng: _n_scale(w) * (c.groups + 8.0 / c.threads_per_group),
    "noisy": lambda w, c, rng: float(c.groups + c.threads_per_group) + float(rng.normal(0.0, 0.01)),
}


class SyntheticSource(EnergySource):
    """Energy from a configured function of (workload, configuration).

    Expressions yield dynamic energy directly, so no static power is
    subtracted; a nonzero ``static_power_w`` is reported and then ignored.
    """

    kind = "synthetic"

    def __init__(
        self,
        expr_id: str = "unit",
        seed: int = 0,
        clock: Clock = time.perf_counter,
        static_power_w: float = 0.0,
    ):
        super().__init__(0.0, clock)
        if expr_id not in SYNTHETIC_EXPRESSIONS:
            raise InvalidInputError(
                f"unknown synthetic expression '{expr_id}', "
                f"expected one of {', '.join(SYNTHETIC_EXPRESSIONS)}"
            )
        if static_power_w < 0:
            raise InvalidInputError(f"static power must be non-negative, got {static_power_w}")
        if static_power_w > 0:
            logger.warning(
                f"Ignoring static power {static_power_w:g} W: synthetic '{expr_id}' "
                "already yields dynamic energy"
            )
        self.expr_id = expr_id
        self._expr = SYNTHETIC_EXPRESSIONS[expr_id]
        self._rng = np.random.default_rng(seed)

    def _measure(self, thunk, workload, config) -> Measurement:
        if config is None:
            raise MeasurementError("synthetic source needs the configuration being measured")
        t0, t1 = self._timed(thunk)
        energy = self._expr(workload, config, self._rng)
        if energy < 0:
            raise AnomalousMeasurementError(energy, f"synthetic '{self.expr_id}' at {config}")
        return Measurement(time_s=t1 - t0, dynamic_energy_j=energy)

    def describe(self) -> str:
        return f"synthetic:{self.expr_id}"


class EnergySourceSpec(BaseModel):
    """Configured energy source, as given by ``--energy`` or the config file"""

    kind: str = Field(pattern="^(replay|command|synthetic)$")
    replay_path: Optional[str] = None
    command_argv: List[str] = []
    synthetic_expr_id: str = "unit"

    def label(self) -> str:
        if self.kind == "replay":
            return f"replay:{self.replay_path}"
        if self.kind == "command":
            return f"command:{shlex.join(self.command_argv)}"
        return f"synthetic:{self.synthetic_expr_id}"


def parse_energy_spec(text: str) -> EnergySourceSpec:
    """``synthetic[:expr]``, ``replay:<path>`` or ``command:<argv string>``"""
    kind, _, rest = text.partition(":")
    if kind == "synthetic":
        return EnergySourceSpec(kind=kind, synthetic_expr_id=rest or "unit")
    if kind == "replay":
        if not rest:
            raise InvalidInputError("replay energy source needs a path: replay:<path>")
        return EnergySourceSpec(kind=kind, replay_path=rest)
    if kind == "command":
        argv = shlex.split(rest)
        if not argv:
            raise InvalidInputError("command energy source needs a command: command:<argv>")
        return EnergySourceSpec(kind=kind, command_argv=argv)
    raise InvalidInputError(
        f"unknown energy source '{text}', expected synthetic:<expr>, replay:<path> or command:<argv>"
    )


def build_energy_source(
    spec: EnergySourceSpec,
    static_power_w: float = 0.0,
    clock: Optional[Clock] = None,
    seed: int = 0,
    cover_timeout_s: float = 5.0,
) -> EnergySource:
    if spec.kind == "synthetic":
        return SyntheticSource(
            spec.synthetic_expr_id,
            seed=seed,
            clock=clock or time.perf_counter,
            static_power_w=static_power_w,
        )
    if spec.kind == "replay":
        if not spec.replay_path:
            raise MeasurementError("replay source unavailable: no replay path configured")
        return ReplaySource(spec.replay_path, static_power_w, clock=clock or time.perf_counter)
    return CommandSource(
        spec.command_argv,
        static_power_w,
        clock=clock or time.monotonic,
        cover_timeout_s=cover_timeout_s,
    )
