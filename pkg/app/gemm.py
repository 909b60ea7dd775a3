"""Threadgroup-parallel dense matrix-matrix multiplication, C = alpha*A*B + beta*C.

Three decompositions of the work between ``g`` threadgroups:

* ``H`` - horizontal bands of rows of A and C,
* ``V`` - vertical bands of columns of B and C,
* ``S`` - a sqrt(g) x sqrt(g) grid of square blocks, each computing
  ``C_st = alpha * sum_k A_sk B_kt + beta * C_st``.

All variants accumulate the k-sum in ascending k, the same order as
``gemm_naive``, so results agree with the oracle to the last bit.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from .core import Configuration
from .errors import InvalidInputError
from .partition import Band, GridPlan, PartitionPlan, run_groups

logger = logging.getLogger(__name__)

VARIANTS = ("H", "V", "S")


def _as_square(name: str, matrix) -> np.ndarray:
    array = np.asarray(matrix, dtype=np.float64)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise InvalidInputError(f"{name} must be a square matrix, got shape {array.shape}")
    return array


def _check_operands(A, B, C) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    A = _as_square("A", A)
    B = _as_square("B", B)
    C = _as_square("C", C)
    if not (A.shape == B.shape == C.shape):
        raise InvalidInputError(
            f"dimension mismatch: A{A.shape}, B{B.shape}, C{C.shape}"
        )
    return A, B, C


def random_matrix(n: int, rng: np.random.Generator, integer: bool = False) -> np.ndarray:
    if integer:
        return rng.integers(-9, 10, size=(n, n)).astype(np.float64)
    return rng.uniform(-1.0, 1.0, size=(n, n))


def gemm_naive(A, B, C, alpha: float, beta: float) -> np.ndarray:
    """Textbook triple loop, single thread"""
    A, B, C = _check_operands(A, B, C)
    n = A.shape[0]
    a, b, c = A.tolist(), B.tolist(), C.tolist()
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        a_row = a[i]
        for j in range(n):
            s = 0.0
            for k in range(n):
                s += a_row[k] * b[k][j]
            out[i][j] = alpha * s + beta * c[i][j]
    return np.array(out, dtype=np.float64)


def _row_product(
    A: np.ndarray,
    B: np.ndarray,
    out: np.ndarray,
    row: int,
    cols: Band,
    alpha: float,
    beta: float,
) -> None:
    """out[row, cols] = alpha * A[row, :] @ B[:, cols] + beta * out[row, cols]"""
    lo, hi = cols
    acc = np.zeros(hi - lo)
    a_row = A[row]
    for k in range(A.shape[1]):
        acc += a_row[k] * B[k, lo:hi]
    out[row, lo:hi] = alpha * acc + beta * out[row, lo:hi]


def _horizontal(A, B, out, alpha, beta, config: Configuration) -> PartitionPlan:
    n = A.shape[0]
    plan = PartitionPlan.split(n, config.groups)
    group_rows = [list(plan.indices(g)) for g in range(plan.groups)]
    run_groups(
        group_rows,
        config.threads_per_group,
        lambda row: _row_product(A, B, out, row, (0, n), alpha, beta),
    )
    return plan


def _vertical(A, B, out, alpha, beta, config: Configuration, copy_bands: bool) -> PartitionPlan:
    n = A.shape[0]
    plan = PartitionPlan.split(n, config.groups)

    if not copy_bands:
        group_work = [[(row, band) for row in range(n)] for band in plan.bands]
        run_groups(
            group_work,
            config.threads_per_group,
            lambda item: _row_product(A, B, out, item[0], item[1], alpha, beta),
        )
        return plan

    # Per-group contiguous buffers for the column bands of B and C
    buffers = [
        (np.ascontiguousarray(B[:, lo:hi]), np.ascontiguousarray(out[:, lo:hi]))
        for lo, hi in plan.bands
    ]
    group_work = [
        [(row, g) for row in range(n)] for g in range(plan.groups)
    ]

    def work(item):
        row, g = item
        b_band, c_band = buffers[g]
        _row_product(A, b_band, c_band, row, (0, b_band.shape[1]), alpha, beta)

    run_groups(group_work, config.threads_per_group, work)
    for (lo, hi), (_, c_band) in zip(plan.bands, buffers):
        out[:, lo:hi] = c_band
    return plan


def _square(A, B, out, alpha, beta, config: Configuration) -> GridPlan:
    n = A.shape[0]
    grid = GridPlan.split(n, config.groups)
    # rows of every block sum over all k-blocks in order, i.e. the full k range
    group_work = [
        [(row, cols) for row in range(rows[0], rows[1])] for rows, cols in grid.cells()
    ]
    run_groups(
        group_work,
        config.threads_per_group,
        lambda item: _row_product(A, B, out, item[0], item[1], alpha, beta),
    )
    return grid


def pmmtg(
    A,
    B,
    C,
    alpha: float,
    beta: float,
    variant: str,
    config: Configuration,
    copy_bands: bool = False,
    plan_out: Optional[List] = None,
) -> np.ndarray:
    """Threadgroup-parallel GEMM; returns alpha*A*B + beta*C without touching C.

    ``plan_out``, when given, receives the partition plan that was executed.
    """
    A, B, C = _check_operands(A, B, C)
    variant = variant.upper()
    if variant not in VARIANTS:
        raise InvalidInputError(f"unknown PMMTG variant '{variant}', expected one of {VARIANTS}")

    n = A.shape[0]
    if config.groups > n:
        raise InvalidInputError(f"{config.groups} groups exceed matrix dimension {n}")

    out = np.array(C, dtype=np.float64, copy=True)

    if variant == "H":
        plan = _horizontal(A, B, out, alpha, beta, config)
    elif variant == "V":
        plan = _vertical(A, B, out, alpha, beta, config, copy_bands)
    else:
        plan = _square(A, B, out, alpha, beta, config)

    if plan_out is not None:
        plan_out.append(plan)

    logger.debug(f"PMMTG-{variant} n={n} config={config} done")
    return out
