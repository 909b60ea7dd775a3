import numpy as np
import pytest

from app.core import Configuration
from app.errors import InvalidInputError
from app.gemm import gemm_naive, pmmtg, random_matrix
from app.partition import GridPlan, PartitionPlan, round_robin, run_groups

CONFIGS = [Configuration.of(g, t) for g, t in [(1, 1), (1, 4), (2, 1), (2, 3), (3, 2), (4, 1), (4, 2), (5, 1)]]


def test_identity_times_b():
    n = 4
    A = np.eye(n)
    B = np.arange(16, dtype=float).reshape(n, n)
    out = pmmtg(A, B, np.zeros((n, n)), 1.0, 0.0, "H", Configuration.of(2, 2))
    assert np.array_equal(out, B)


def test_beta_only_scales_c(rng):
    n = 6
    C = random_matrix(n, rng)
    out = pmmtg(random_matrix(n, rng), random_matrix(n, rng), C, 0.0, 2.0, "V", Configuration.of(3, 1))
    assert np.array_equal(out, 2.0 * C)


@pytest.mark.parametrize("variant", ["H", "V"])
@pytest.mark.parametrize("config", CONFIGS, ids=str)
def test_band_variants_match_naive_exactly(rng, variant, config):
    n = 10
    A, B, C = (random_matrix(n, rng) for _ in range(3))
    expected = gemm_naive(A, B, C, 1.25, -0.75)
    assert np.array_equal(pmmtg(A, B, C, 1.25, -0.75, variant, config), expected)


@pytest.mark.parametrize("config", [Configuration.of(g, t) for g in (1, 4, 9) for t in (1, 2)], ids=str)
def test_square_variant_matches_naive_exactly(rng, config):
    n = 9
    A, B, C = (random_matrix(n, rng) for _ in range(3))
    expected = gemm_naive(A, B, C, 0.5, 1.5)
    assert np.array_equal(pmmtg(A, B, C, 0.5, 1.5, "S", config), expected)


def test_copy_bands_matches_in_place(rng):
    n = 12
    A, B, C = (random_matrix(n, rng) for _ in range(3))
    config = Configuration.of(5, 2)
    assert np.array_equal(
        pmmtg(A, B, C, 1.0, 1.0, "V", config, copy_bands=True),
        pmmtg(A, B, C, 1.0, 1.0, "V", config),
    )


def test_integer_matrices_exact(rng):
    n = 8
    A, B, C = (random_matrix(n, rng, integer=True) for _ in range(3))
    expected = A @ B + 3.0 * C
    for variant in ("H", "V"):
        assert np.array_equal(pmmtg(A, B, C, 1.0, 3.0, variant, Configuration.of(4, 2)), expected)


def test_c_is_not_modified(rng):
    n = 5
    A, B, C = (random_matrix(n, rng) for _ in range(3))
    before = C.copy()
    pmmtg(A, B, C, 1.0, 1.0, "H", Configuration.of(2, 2))
    assert np.array_equal(C, before)


def test_plan_out_records_partition(rng):
    n = 7
    A, B, C = (random_matrix(n, rng) for _ in range(3))
    plans = []
    pmmtg(A, B, C, 1.0, 0.0, "H", Configuration.of(3, 1), plan_out=plans)
    assert plans[0].bands == ((0, 2), (2, 4), (4, 7))


def test_rejects_mismatch_and_bad_configs(rng):
    with pytest.raises(InvalidInputError):
        gemm_naive(np.eye(3), np.eye(4), np.eye(3), 1.0, 0.0)
    with pytest.raises(InvalidInputError):
        pmmtg(np.eye(3), np.eye(3), np.eye(3), 1.0, 0.0, "H", Configuration.of(4, 1))
    with pytest.raises(InvalidInputError):
        pmmtg(np.eye(4), np.eye(4), np.eye(4), 1.0, 0.0, "S", Configuration.of(2, 1))
    with pytest.raises(InvalidInputError):
        pmmtg(np.eye(4), np.eye(4), np.eye(4), 1.0, 0.0, "Z", Configuration.of(1, 1))


@pytest.mark.parametrize("n,groups", [(10, 3), (16, 4), (7, 7), (100, 9)])
def test_partition_covers_and_is_disjoint(n, groups):
    plan = PartitionPlan.split(n, groups)
    assert plan.groups == groups
    assert plan.covers() and plan.disjoint()
    assert sum(len(plan.indices(g)) for g in range(groups)) == n


def test_partition_last_band_takes_remainder():
    assert PartitionPlan.split(10, 3).bands == ((0, 3), (3, 6), (6, 10))
    with pytest.raises(InvalidInputError):
        PartitionPlan.split(2, 3)


def test_grid_plan():
    grid = GridPlan.split(10, 4)
    assert grid.side == 2
    assert grid.covers() and grid.disjoint()
    assert grid.cells()[1] == ((0, 5), (5, 10))
    with pytest.raises(InvalidInputError):
        GridPlan.split(10, 3)


def test_round_robin_deals_in_turn():
    assert round_robin(list(range(7)), 3) == [[0, 3, 6], [1, 4], [2, 5]]


def test_run_groups_visits_everything_once_and_reraises():
    seen = []
    run_groups([[1, 2, 3], [4, 5], [6]], 2, seen.append)
    assert sorted(seen) == [1, 2, 3, 4, 5, 6]

    def boom(item):
        if item == 5:
            raise RuntimeError("worker failed")

    with pytest.raises(RuntimeError, match="worker failed"):
        run_groups([[1, 2], [4, 5]], 2, boom)


@pytest.mark.parametrize("n", [6, 64, 65])
def test_all_variants_against_naive(n):
    rng = np.random.default_rng(n)
    A, B, C = (random_matrix(n, rng) for _ in range(3))
    expected = gemm_naive(A, B, C, 1.0, 1.0)
    scale = np.abs(expected).max()
    for variant in ("H", "V", "S"):
        for g in (1, 2, 4):
            if variant == "S" and g == 2:
                continue
            for t in (1, 2):
                got = pmmtg(A, B, C, 1.0, 1.0, variant, Configuration.of(g, t))
                assert np.abs(got - expected).max() <= 1e-9 * scale, (variant, g, t)
