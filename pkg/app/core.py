"""Domain types shared by every module.

A run is described by a ``Workload`` (which kernel, which size) and swept over
``Configuration`` pairs: ``groups`` identical multithreaded kernel instances
(threadgroups), each running ``threads_per_group`` threads.  Each measured
configuration yields an ``ObjectiveSample`` of (time, dynamic energy).
"""

import math
import re
import logging
from enum import Enum
from typing import List, Tuple

import psutil
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import InvalidInputError

logger = logging.getLogger(__name__)

_CONFIG_RE = re.compile(r"^\s*\(?\s*(\d+)\s*,\s*(\d+)\s*\)?\s*$")


class Configuration(BaseModel):
    """Decision-variable pair (g, t)"""

    model_config = ConfigDict(frozen=True)

    groups: int = Field(ge=1)
    threads_per_group: int = Field(ge=1)

    @property
    def total_threads(self) -> int:
        return self.groups * self.threads_per_group

    @classmethod
    def of(cls, groups: int, threads_per_group: int) -> "Configuration":
        return cls(groups=groups, threads_per_group=threads_per_group)

    @classmethod
    def parse(cls, text: str) -> "Configuration":
        match = _CONFIG_RE.match(text)
        if not match:
            raise InvalidInputError(f"Cannot parse configuration '{text}', expected (g,t)")
        return cls.of(int(match.group(1)), int(match.group(2)))

    def as_tuple(self) -> Tuple[int, int]:
        return (self.groups, self.threads_per_group)

    def __str__(self) -> str:
        return f"({self.groups},{self.threads_per_group})"


class ObjectiveSample(BaseModel):
    """Measured objective vector for one configuration"""

    model_config = ConfigDict(frozen=True)

    time_s: float = Field(gt=0)
    dynamic_energy_j: float
    config: Configuration
    anomalous: bool = False

    @model_validator(mode="after")
    def _check_energy(self):
        if not math.isfinite(self.time_s) or not math.isfinite(self.dynamic_energy_j):
            raise ValueError("objective components must be finite")
        if self.dynamic_energy_j < 0 and not self.anomalous:
            raise ValueError(
                f"negative dynamic energy {self.dynamic_energy_j} J must be flagged anomalous"
            )
        return self

    @property
    def objective(self) -> Tuple[float, float]:
        return (self.time_s, self.dynamic_energy_j)


class Precision(BaseModel):
    """Stopping rule of the repeated-measurement loop"""

    model_config = ConfigDict(frozen=True)

    min_reps: int = Field(default=15, ge=1)
    max_reps: int = Field(default=100000, ge=2)
    max_elapsed_s: float = Field(default=3600.0, ge=0)
    confidence_level: float = Field(default=0.95, gt=0, lt=1)
    target_rel_error: float = Field(default=0.025, gt=0, lt=1)

    @model_validator(mode="after")
    def _check_reps(self):
        if self.min_reps >= self.max_reps:
            raise ValueError(
                f"min_reps ({self.min_reps}) must be below max_reps ({self.max_reps})"
            )
        return self

    @classmethod
    def preset(cls, name: str) -> "Precision":
        if name not in PRECISION_PRESETS:
            raise InvalidInputError(
                f"Unknown precision preset '{name}', "
                f"expected one of {', '.join(PRECISION_PRESETS)}"
            )
        return PRECISION_PRESETS[name]


# Experimental methodology values, and the measurement API example values
PRECISION_PRESETS = {
    "methodology": Precision(),
    "api": Precision(min_reps=15, max_reps=1000),
}


class KernelId(str, Enum):
    GEMM_H = "gemm_h"
    GEMM_V = "gemm_v"
    GEMM_S = "gemm_s"
    FFT_H = "fft_h"
    FFT_V = "fft_v"
    # deterministic time 1/(g*t) on a simulated clock
    STUB = "stub"

    @property
    def is_gemm(self) -> bool:
        return self.value.startswith("gemm")

    @property
    def is_fft(self) -> bool:
        return self.value.startswith("fft")

    @property
    def variant(self) -> str:
        return self.value.rsplit("_", 1)[-1].upper()


class FftSign(str, Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


class Workload(BaseModel):
    model_config = ConfigDict(frozen=True)

    kernel_id: KernelId
    n: int = Field(ge=1)
    scalar_alpha: float = 1.0
    scalar_beta: float = 0.0
    fft_sign: FftSign = FftSign.FORWARD
    transpose_block: int = Field(default=64, ge=1)
    # gemm_v only: per-group contiguous copies of the column bands
    copy_bands: bool = False

    @model_validator(mode="after")
    def _check_fft_size(self):
        if self.kernel_id.is_fft and not is_power_of_two(self.n):
            raise ValueError(f"FFT kernels need n to be a power of two, got {self.n}")
        return self

    def incompatibility(self, config: Configuration) -> str:
        """Reason why ``config`` cannot run this workload, or '' if it can"""
        if self.kernel_id is KernelId.STUB:
            return ""
        if config.groups > self.n:
            return f"{config.groups} groups exceed {self.n} rows"
        if self.kernel_id is KernelId.GEMM_S and not is_perfect_square(config.groups):
            return f"gemm_s needs a square number of groups, got {config.groups}"
        return ""


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def is_perfect_square(n: int) -> bool:
    return n >= 1 and math.isqrt(n) ** 2 == n


def enumerate_configurations(cores: int) -> List[Configuration]:
    """Every (g, t) with g*t <= cores, g ascending then t ascending"""
    if isinstance(cores, bool) or not isinstance(cores, int) or cores < 1:
        raise InvalidInputError(f"core count must be a positive integer, got {cores!r}")

    configs = [
        Configuration.of(g, t)
        for g in range(1, cores + 1)
        for t in range(1, cores // g + 1)
    ]
    logger.debug(f"Enumerated {len(configs)} configurations for {cores} cores")
    return configs


def physical_core_count(include_hyperthreads: bool = False) -> int:
    count = psutil.cpu_count(logical=include_hyperthreads)
    return count or 1
