import numpy as np
import pytest

from app.core import Configuration, FftSign
from app.errors import InvalidInputError
from app.fft import (
    as_signal,
    bit_reversal_permutation,
    dft1d_naive,
    dft2d_naive,
    energy_of,
    fft1d_rows,
    pffttg,
    random_signal,
    transpose_block,
)

CONFIGS = [Configuration.of(g, t) for g, t in [(1, 1), (1, 3), (2, 2), (4, 1), (8, 2)]]


@pytest.mark.parametrize("variant", ["H", "V"])
def test_impulse_transforms_to_ones(variant):
    M = np.zeros((4, 4), dtype=np.complex128)
    M[0, 0] = 1.0
    pffttg(M, FftSign.FORWARD, variant, Configuration.of(2, 1))
    assert np.allclose(M, np.ones((4, 4)), atol=1e-12)


@pytest.mark.parametrize("variant", ["H", "V"])
def test_constant_transforms_to_scaled_impulse(variant):
    M = as_signal(np.ones((8, 8)))
    pffttg(M, "forward", variant, Configuration.of(4, 2))
    expected = np.zeros((8, 8))
    expected[0, 0] = 64.0
    assert np.allclose(M, expected, atol=1e-10)


@pytest.mark.parametrize("variant", ["H", "V"])
@pytest.mark.parametrize("config", CONFIGS, ids=str)
def test_matches_direct_dft(rng, variant, config):
    signal = random_signal(8, rng)
    M = as_signal(signal)
    pffttg(M, FftSign.FORWARD, variant, config, block=3)
    assert np.max(np.abs(M - dft2d_naive(signal))) <= 1e-9


def test_matches_numpy_fft2(rng):
    signal = random_signal(32, rng)
    M = as_signal(signal)
    pffttg(M, FftSign.FORWARD, "H", Configuration.of(4, 2), block=8)
    assert np.allclose(M, np.fft.fft2(signal), atol=1e-9)


GRID = [Configuration.of(g, t) for g in (1, 2, 4) for t in (1, 2)]


@pytest.mark.parametrize("variant", ["H", "V"])
@pytest.mark.parametrize("config", GRID, ids=str)
def test_round_trip_restores_signal(rng, variant, config):
    signal = random_signal(16, rng)
    M = as_signal(signal)
    pffttg(M, FftSign.FORWARD, variant, config)
    pffttg(M, FftSign.INVERSE, variant, config)
    assert np.max(np.abs(M - signal)) <= 1e-10


@pytest.mark.parametrize("variant", ["H", "V"])
def test_result_is_independent_of_configuration(rng, variant):
    signal = random_signal(16, rng)
    reference = as_signal(signal)
    pffttg(reference, FftSign.FORWARD, variant, Configuration.of(1, 1))
    for config in GRID[1:]:
        M = as_signal(signal)
        pffttg(M, FftSign.FORWARD, variant, config)
        assert np.max(np.abs(M - reference)) <= 1e-10, str(config)


def test_parseval(rng):
    signal = random_signal(16, rng)
    M = as_signal(signal)
    pffttg(M, FftSign.FORWARD, "V", Configuration.of(4, 1))
    assert np.isclose(energy_of(M), 16 * 16 * energy_of(signal), rtol=1e-10)


def test_fft1d_rows_only_touches_range(rng):
    signal = random_signal(8, rng)
    M = as_signal(signal)
    fft1d_rows(M, range(2, 5), FftSign.FORWARD)
    for r in range(8):
        expected = dft1d_naive(signal[r]) if 2 <= r < 5 else signal[r]
        assert np.allclose(M[r], expected, atol=1e-10)


def test_dft2d_naive_inverse_normalized(rng):
    signal = random_signal(6, rng)
    back = dft2d_naive(dft2d_naive(signal), FftSign.INVERSE)
    assert np.allclose(back, signal, atol=1e-10)


@pytest.mark.parametrize("n,block", [(1, 1), (5, 2), (8, 3), (16, 4), (7, 64)])
def test_transpose_block_exact(rng, n, block):
    M = rng.standard_normal((n, n))
    original = M.copy()
    transpose_block(M, block=block, workers=2)
    assert np.array_equal(M, original.T)


def test_bit_reversal():
    assert bit_reversal_permutation(8).tolist() == [0, 4, 2, 6, 1, 5, 3, 7]
    assert bit_reversal_permutation(1).tolist() == [0]
    with pytest.raises(InvalidInputError):
        bit_reversal_permutation(6)


def test_rejects_bad_signals():
    with pytest.raises(InvalidInputError):
        pffttg(as_signal(np.ones((6, 6))), "forward", "H", Configuration.of(1, 1))
    with pytest.raises(InvalidInputError):
        pffttg(np.ones((4, 4)), "forward", "H", Configuration.of(1, 1))
    with pytest.raises(InvalidInputError):
        pffttg(as_signal(np.ones((4, 4))), "forward", "H", Configuration.of(8, 1))
    with pytest.raises(InvalidInputError):
        transpose_block(np.ones((4, 4)), block=0)


@pytest.mark.parametrize("n", [1, 2, 64, 129])
@pytest.mark.parametrize("block", [1, 64])
def test_transpose_reference_and_involution(n, block):
    rng = np.random.default_rng(n * block)
    M = as_signal(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    reference = M.T.copy()
    original = M.copy()
    transpose_block(M, block=block)
    assert np.array_equal(M, reference)
    transpose_block(M, block=block)
    assert np.array_equal(M, original)


def test_parseval_n32(rng):
    signal = random_signal(32, rng)
    M = as_signal(signal)
    pffttg(M, FftSign.FORWARD, "H", Configuration.of(2, 2))
    assert energy_of(M) == pytest.approx(32 * 32 * energy_of(signal), rel=1e-9)
