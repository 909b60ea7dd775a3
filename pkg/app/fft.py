"""Threadgroup-parallel in-place 2D FFT by row-column decomposition.

Signals are C-contiguous ``complex128`` arrays of shape (n, n).  The forward
transform is unnormalized; the inverse divides by n**2.
"""

import logging
from functools import lru_cache
from typing import Iterable, Union

import numpy as np

from .core import Configuration, FftSign, is_power_of_two
from .errors import InvalidInputError
from .partition import PartitionPlan, run_flat, run_groups

logger = logging.getLogger(__name__)

VARIANTS = ("H", "V")
DEFAULT_TRANSPOSE_BLOCK = 64

SignLike = Union[FftSign, str]


def _sign(sign: SignLike) -> FftSign:
    try:
        return FftSign(sign)
    except ValueError:
        raise InvalidInputError(f"unknown FFT sign '{sign}', expected forward or inverse")


def _exponent_sign(sign: SignLike) -> float:
    return -1.0 if _sign(sign) is FftSign.FORWARD else 1.0


def as_signal(data) -> np.ndarray:
    """Copy ``data`` into a fresh C-contiguous complex128 square matrix"""
    signal = np.array(data, dtype=np.complex128, order="C", copy=True)
    if signal.ndim != 2 or signal.shape[0] != signal.shape[1]:
        raise InvalidInputError(f"signal must be a square matrix, got shape {signal.shape}")
    return signal


def random_signal(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(n, n)) + 1j * rng.uniform(-1.0, 1.0, size=(n, n))


def _check_inplace(M) -> int:
    if not isinstance(M, np.ndarray) or M.dtype != np.complex128:
        raise InvalidInputError("in-place transforms need a complex128 numpy array")
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"signal must be a square matrix, got shape {M.shape}")
    if not M.flags.c_contiguous:
        raise InvalidInputError("signal must be C-contiguous")
    return M.shape[0]


def _twiddles(n: int, sign: SignLike) -> np.ndarray:
    """w[u, i] = exp(sign * 2*pi*i * u*i / n), exponent reduced mod n"""
    idx = np.arange(n)
    exponent = np.outer(idx, idx) % n
    return np.exp(_exponent_sign(sign) * 2j * np.pi * exponent / n)


def dft1d_naive(row, sign: SignLike = FftSign.FORWARD) -> np.ndarray:
    """Direct O(n^2) sum, unnormalized in both directions"""
    row = np.asarray(row, dtype=np.complex128)
    return _twiddles(row.shape[0], sign) @ row


def dft2d_naive(M, sign: SignLike = FftSign.FORWARD) -> np.ndarray:
    """Direct double-sum 2D DFT for any n; the inverse divides by n**2"""
    signal = as_signal(M)
    n = signal.shape[0]
    w = _twiddles(n, sign)
    out = np.einsum("ui,vj,ij->uv", w, w, signal, optimize=False)
    if _sign(sign) is FftSign.INVERSE:
        out /= n * n
    return out


@lru_cache(maxsize=64)
def bit_reversal_permutation(n: int) -> np.ndarray:
    if not is_power_of_two(n):
        raise InvalidInputError(f"bit reversal needs a power of two, got {n}")
    bits = n.bit_length() - 1
    perm = np.zeros(n, dtype=np.intp)
    for i in range(n):
        perm[i] = int(format(i, f"0{bits}b")[::-1], 2) if bits else 0
    perm.setflags(write=False)
    return perm


@lru_cache(maxsize=256)
def _stage_twiddles(m: int, exponent_sign: float) -> np.ndarray:
    w = np.exp(exponent_sign * 2j * np.pi * np.arange(m // 2) / m)
    w.setflags(write=False)
    return w


def _fft_row(row: np.ndarray, exponent_sign: float) -> None:
    """Iterative radix-2 decimation-in-time FFT of one contiguous row, in place"""
    n = row.shape[0]
    row[:] = row[bit_reversal_permutation(n)]
    m = 2
    while m <= n:
        half = m // 2
        blocks = row.reshape(n // m, m)
        top = blocks[:, :half].copy()
        bottom = blocks[:, half:] * _stage_twiddles(m, exponent_sign)
        blocks[:, :half] = top + bottom
        blocks[:, half:] = top - bottom
        m *= 2


def fft1d_rows(M: np.ndarray, row_range: Union[range, Iterable[int]], sign: SignLike) -> None:
    """Replace each row of ``M`` in ``row_range`` by its (unnormalized) 1D FFT"""
    n = _check_inplace(M)
    if not is_power_of_two(n):
        raise InvalidInputError(f"FFT rows need a power-of-two length, got {n}")
    rows = list(row_range)
    if any(r < 0 or r >= n for r in rows):
        raise InvalidInputError(f"row range {row_range} outside [0, {n})")
    exponent_sign = _exponent_sign(sign)
    for r in rows:
        _fft_row(M[r], exponent_sign)


def _transpose_scalar_block(X: np.ndarray, i: int, j: int, n: int, block: int) -> None:
    """Swap the (i, j) block with its mirror where index1 < index2.

    For element (i+p, j+q), index1 = (i+p)*n + (j+q) and its mirror
    index2 = (j+q)*n + (i+p).  Rows decide the comparison, so blocks below the
    diagonal never swap, blocks above swap entirely, and diagonal blocks swap
    their strictly upper triangle.
    """
    if i > j:
        return
    h = min(n - i, block)
    w = min(n - j, block)
    if i < j:
        upper = X[i:i + h, j:j + w].copy()
        X[i:i + h, j:j + w] = X[j:j + w, i:i + h].T
        X[j:j + w, i:i + h] = upper.T
        return
    sub = X[i:i + h, i:i + h]
    rows, cols = np.triu_indices(h, 1)
    upper = sub[rows, cols].copy()
    sub[rows, cols] = sub[cols, rows]
    sub[cols, rows] = upper


def transpose_block(M: np.ndarray, block: int = DEFAULT_TRANSPOSE_BLOCK, workers: int = 1) -> None:
    """Blocked in-place transpose; block rows run as a flat parallel-for"""
    if block < 1:
        raise InvalidInputError(f"transpose block must be positive, got {block}")
    if not isinstance(M, np.ndarray) or M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError("transpose needs a square numpy array")
    n = M.shape[0]
    starts = list(range(0, n, block))

    # block row i only touches (i, j>=i) and its mirror, so rows are disjoint
    def block_row(i: int) -> None:
        for j in starts:
            _transpose_scalar_block(M, i, j, n, block)

    run_flat(starts, workers, block_row)


def pffttg(
    M: np.ndarray,
    sign: SignLike,
    variant: str,
    config: Configuration,
    block: int = DEFAULT_TRANSPOSE_BLOCK,
) -> None:
    """In-place 2D FFT of ``M`` with ``config.groups`` threadgroups.

    H: row FFTs -> transpose -> row FFTs -> transpose.
    V: transpose -> row FFTs -> transpose -> row FFTs (column FFTs first,
    realized on transposed rows so access stays contiguous).
    """
    n = _check_inplace(M)
    if not is_power_of_two(n):
        raise InvalidInputError(f"PFFTTG needs n to be a power of two, got {n}")
    variant = variant.upper()
    if variant not in VARIANTS:
        raise InvalidInputError(f"unknown PFFTTG variant '{variant}', expected one of {VARIANTS}")
    if config.groups > n:
        raise InvalidInputError(f"{config.groups} groups exceed signal dimension {n}")

    plan = PartitionPlan.split(n, config.groups)
    group_rows = [list(plan.indices(g)) for g in range(plan.groups)]
    exponent_sign = _exponent_sign(sign)

    def row_ffts() -> None:
        run_groups(group_rows, config.threads_per_group, lambda r: _fft_row(M[r], exponent_sign))

    def transpose() -> None:
        transpose_block(M, block, workers=config.total_threads)

    if variant == "H":
        steps = (row_ffts, transpose, row_ffts, transpose)
    else:
        steps = (transpose, row_ffts, transpose, row_ffts)
    for step in steps:
        step()

    if _sign(sign) is FftSign.INVERSE:
        M /= n * n

    logger.debug(f"PFFTTG-{variant} n={n} config={config} block={block} done")


def energy_of(M: np.ndarray) -> float:
    """Sum of squared magnitudes"""
    return float(np.sum(np.abs(M) ** 2))
