import itertools

import numpy as np
import pytest
from scipy import stats

from app.core import Precision
from app.errors import InvalidInputError, MeasurementError, ObservationError
from app.measure import SimulatedClock
from app.stats import (
    STOP_MAX_ELAPSED,
    STOP_MAX_REPS,
    STOP_PRECISION,
    mean_using_ttest,
    normality_check,
    t_quantile,
)


@pytest.mark.parametrize(
    "cl,df,expected",
    [(0.95, 14, 1.7613), (0.975, 1, 12.7062), (0.975, 30, 2.0423), (0.5, 7, 0.0)],
)
def test_t_quantile_table_values(cl, df, expected):
    assert t_quantile(cl, df) == pytest.approx(expected, abs=5e-4)


def test_t_quantile_decreases_with_df():
    values = [t_quantile(0.975, df) for df in range(1, 60)]
    assert all(a > b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("cl,df", [(0.0, 3), (1.0, 3), (0.9, 0), (0.9, 2.5)])
def test_t_quantile_rejects_bad_input(cl, df):
    with pytest.raises(InvalidInputError):
        t_quantile(cl, df)


def test_constant_observations_converge_after_min_reps():
    result = mean_using_ttest(lambda: 5.0, Precision())
    assert result.mean == 5.0
    assert result.converged
    assert result.reps_out == 16
    assert result.stop_reason == STOP_PRECISION
    assert result.achieved_rel_error == 0.0


def test_extreme_variance_hits_rep_cap():
    values = itertools.cycle([1.0, 1e6])
    result = mean_using_ttest(lambda: next(values), Precision(min_reps=15, max_reps=20))
    assert not result.converged
    assert result.reps_out == 20
    assert result.stop_reason == STOP_MAX_REPS


def test_time_cap():
    clock = SimulatedClock()
    values = itertools.cycle([1.0, 3.0])

    def observe():
        clock.advance(0.001)
        return next(values)

    result = mean_using_ttest(observe, Precision(max_elapsed_s=0.0), clock=clock)
    assert not result.converged
    assert result.stop_reason == STOP_MAX_ELAPSED
    assert result.reps_out == 16
    assert result.elapsed_s == pytest.approx(0.016, rel=1e-3)


def test_observe_error_aborts_with_partial_statistics():
    clock = SimulatedClock()
    values = [2.0, 4.0]

    def observe():
        clock.advance(0.5)
        if not values:
            raise RuntimeError("meter unplugged")
        return values.pop(0)

    with pytest.raises(ObservationError, match="meter unplugged") as info:
        mean_using_ttest(observe, Precision(), clock=clock, label="DENERGY (1,2)")
    assert info.value.partial["reps"] == 2
    assert info.value.partial["elapsed_s"] == 1.0
    assert info.value.partial["mean"] == 3.0
    assert info.value.partial["half_width"] is None
    assert "observation 3" in str(info.value)
    assert isinstance(info.value, MeasurementError)
    assert isinstance(info.value.__cause__, RuntimeError)


def test_observe_error_after_min_reps_keeps_half_width():
    calls = []

    def observe():
        calls.append(1)
        if len(calls) == 18:
            raise RuntimeError("sampler died")
        return float(len(calls) % 2)

    with pytest.raises(ObservationError) as info:
        mean_using_ttest(observe, Precision(min_reps=15, max_reps=100))
    partial = info.value.partial
    assert partial["reps"] == 17
    assert partial["mean"] == pytest.approx(9 / 17)
    assert partial["half_width"] > 0


def test_nonpositive_sum_leaves_relative_error_undefined():
    values = itertools.cycle([-1.0, 0.5])
    result = mean_using_ttest(lambda: next(values), Precision(min_reps=2, max_reps=10))
    assert not result.converged
    assert result.achieved_rel_error is None
    assert result.achieved_half_width > 0


def test_confidence_interval_covers_true_mean():
    rng = np.random.default_rng(1234)
    covered = converged = 0
    for _ in range(1000):
        result = mean_using_ttest(lambda: float(rng.normal(10.0, 0.1)), Precision())
        if result.converged:
            converged += 1
            covered += abs(result.mean - 10.0) <= 3 * result.achieved_half_width
    assert converged == 1000
    assert covered >= 990


def test_normality_attached_for_long_runs():
    values = itertools.cycle([1.0, 1e3])
    result = mean_using_ttest(lambda: next(values), Precision(min_reps=15, max_reps=40))
    assert result.normality is not None
    assert not result.normality.normal

    # exact normal quantiles fill equiprobable bins evenly
    report = normality_check(stats.norm.ppf((np.arange(500) + 0.5) / 500))
    assert report.normal
    assert report.dof == report.bins - 3


def test_normality_needs_enough_data():
    with pytest.raises(InvalidInputError):
        normality_check([1.0, 2.0])
