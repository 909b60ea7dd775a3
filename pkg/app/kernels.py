import logging
from abc import ABC, abstractmethod
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel

from .core import Configuration, KernelId, Workload, is_perfect_square
from .errors import InvalidInputError
from .fft import as_signal, dft2d_naive, pffttg, random_signal, transpose_block
from .gemm import gemm_naive, pmmtg, random_matrix
from .measure import SimulatedClock

logger = logging.getLogger(__name__)


class Kernel(ABC):
    """A workload bound to its input data, runnable under any configuration"""

    def __init__(self, workload: Workload):
        self.workload = workload

    def prepare(self) -> None:
        """Restore pristine inputs before a timed run"""

    @abstractmethod
    def run(self, config: Configuration) -> None:
        ...


class GemmKernel(Kernel):
    def __init__(self, workload: Workload, seed: int = 0):
        super().__init__(workload)
        rng = np.random.default_rng(seed)
        n = workload.n
        self.A = random_matrix(n, rng)
        self.B = random_matrix(n, rng)
        self.C = random_matrix(n, rng)
        self.result: Optional[np.ndarray] = None

    def run(self, config: Configuration) -> None:
        self.result = pmmtg(
            self.A,
            self.B,
            self.C,
            self.workload.scalar_alpha,
            self.workload.scalar_beta,
            self.workload.kernel_id.variant,
            config,
            copy_bands=self.workload.copy_bands,
        )


class FftKernel(Kernel):
    def __init__(self, workload: Workload, seed: int = 0):
        super().__init__(workload)
        rng = np.random.default_rng(seed)
        self.pristine = random_signal(workload.n, rng)
        self.work = as_signal(self.pristine)

    def prepare(self) -> None:
        np.copyto(self.work, self.pristine)

    def run(self, config: Configuration) -> None:
        pffttg(
            self.work,
            self.workload.fft_sign,
            self.workload.kernel_id.variant,
            config,
            self.workload.transpose_block,
        )


def stub_time(config: Configuration) -> float:
    return 1.0 / (config.groups * config.threads_per_group)


class StubKernel(Kernel):
    """Takes ``time_fn(config)`` seconds of simulated time and does nothing else"""

    def __init__(
        self,
        workload: Workload,
        clock: SimulatedClock,
        time_fn: Callable[[Configuration], float] = stub_time,
    ):
        super().__init__(workload)
        self.clock = clock
        self.time_fn = time_fn

    def run(self, config: Configuration) -> None:
        self.clock.advance(self.time_fn(config))


def build_kernel(workload: Workload, seed: int = 0, clock: Optional[SimulatedClock] = None) -> Kernel:
    if workload.kernel_id is KernelId.STUB:
        return StubKernel(workload, clock or SimulatedClock())
    if workload.kernel_id.is_gemm:
        return GemmKernel(workload, seed)
    if workload.kernel_id.is_fft:
        return FftKernel(workload, seed)
    raise InvalidInputError(f"no kernel for {workload.kernel_id}")


class SelftestResult(BaseModel):
    check: str
    config: Optional[Configuration] = None
    error: float
    tolerance: float
    passed: bool


def selftest(n_gemm: int = 16, n_fft: int = 8, seed: int = 0) -> List[SelftestResult]:
    """Compare every parallel kernel against its naive oracle"""
    rng = np.random.default_rng(seed)
    results: List[SelftestResult] = []
    configs = [Configuration.of(g, t) for g in (1, 2, 4) for t in (1, 2)]

    A, B, C = (random_matrix(n_gemm, rng) for _ in range(3))
    reference = gemm_naive(A, B, C, 1.5, -0.5)
    scale = max(float(np.abs(reference).max()), 1e-300)
    for variant in ("H", "V", "S"):
        for config in configs:
            if config.groups > n_gemm or (variant == "S" and not is_perfect_square(config.groups)):
                continue
            got = pmmtg(A, B, C, 1.5, -0.5, variant, config)
            error = float(np.abs(got - reference).max()) / scale
            results.append(
                SelftestResult(
                    check=f"pmmtg-{variant}", config=config, error=error, tolerance=1e-9,
                    passed=error <= 1e-9,
                )
            )

    signal = random_signal(n_fft, rng)
    expected = dft2d_naive(signal)
    for variant in ("H", "V"):
        for config in configs:
            if config.groups > n_fft:
                continue
            work = as_signal(signal)
            pffttg(work, "forward", variant, config, block=max(1, n_fft // 2))
            error = float(np.abs(work - expected).max())
            results.append(
                SelftestResult(
                    check=f"pffttg-{variant}", config=config, error=error, tolerance=1e-9,
                    passed=error <= 1e-9,
                )
            )

    work = as_signal(signal)
    transpose_block(work, block=3)
    exact = bool(np.array_equal(work, signal.T))
    results.append(
        SelftestResult(check="transpose_block", error=0.0 if exact else 1.0, tolerance=0.0, passed=exact)
    )

    failed = [r for r in results if not r.passed]
    if failed:
        logger.error(f"Kernel self-test: {len(failed)} of {len(results)} checks failed")
    else:
        logger.info(f"Kernel self-test: all {len(results)} checks passed")
    return results
