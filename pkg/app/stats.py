"""Sample means to statistical confidence with Student's t-test.

``mean_using_ttest`` repeats an observation until the confidence-interval
half-width relative to the mean drops below the target precision, or the
repetition or elapsed-time caps are reached.
"""

import math
import time
import logging
from typing import Callable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field
from scipy import stats

from .core import Precision
from .errors import InvalidInputError, ObservationError

logger = logging.getLogger(__name__)

STOP_PRECISION = "precision"
STOP_MAX_REPS = "max_reps"
STOP_MAX_ELAPSED = "max_elapsed"

NORMALITY_MIN_OBSERVATIONS = 20


class NormalityReport(BaseModel):
    """Pearson chi-squared goodness of fit against a fitted normal"""

    statistic: float
    p_value: float
    dof: int
    bins: int
    normal: bool


class TtestResult(BaseModel):
    reps_out: int = Field(ge=1)
    achieved_half_width: Optional[float] = None
    achieved_rel_error: Optional[float] = None
    elapsed_s: float
    mean: float
    sd: float
    converged: bool
    stop_reason: str
    normality: Optional[NormalityReport] = None


def t_quantile(cl: float, df: int) -> float:
    """|inverse CDF of Student's t at ``cl``| with ``df`` degrees of freedom"""
    if not (0 < cl < 1):
        raise InvalidInputError(f"confidence level must lie in (0, 1), got {cl}")
    if isinstance(df, bool) or int(df) != df or df < 1:
        raise InvalidInputError(f"degrees of freedom must be a positive integer, got {df}")
    return abs(float(stats.t.ppf(cl, int(df))))


def normality_check(observations: Sequence[float], bins: Optional[int] = None) -> NormalityReport:
    """Chi-squared test over equiprobable bins of the fitted normal"""
    data = np.asarray(observations, dtype=np.float64)
    if data.size < 8:
        raise InvalidInputError(f"need at least 8 observations, got {data.size}")
    if bins is None:
        bins = max(4, min(20, int(math.ceil(2 * data.size ** 0.4))))

    mu = float(data.mean())
    sigma = float(data.std(ddof=1))
    if sigma == 0.0:
        # a degenerate sample sits in one bin; treat as trivially normal
        return NormalityReport(statistic=0.0, p_value=1.0, dof=bins - 3, bins=bins, normal=True)

    edges = stats.norm.ppf(np.linspace(0.0, 1.0, bins + 1)[1:-1], loc=mu, scale=sigma)
    observed = np.bincount(np.searchsorted(edges, data), minlength=bins)
    expected = np.full(bins, data.size / bins)
    # mean and sd were estimated from the data
    statistic, p_value = stats.chisquare(observed, expected, ddof=2)
    return NormalityReport(
        statistic=float(statistic),
        p_value=float(p_value),
        dof=bins - 3,
        bins=bins,
        normal=bool(p_value >= 0.05),
    )


def mean_using_ttest(
    observe: Callable[[], float],
    precision: Precision,
    clock: Callable[[], float] = time.perf_counter,
    label: str = "observation",
) -> TtestResult:
    """Repeat ``observe`` until the sample mean is within the target precision"""
    observations: List[float] = []
    total = 0.0
    elapsed = 0.0
    half_width: Optional[float] = None
    rel_error: Optional[float] = None
    stop_reason = STOP_MAX_REPS
    converged = False

    while len(observations) < precision.max_reps:
        st = clock()
        try:
            value = float(observe())
        except Exception as e:
            reps = len(observations)
            partial = {
                "reps": reps,
                "elapsed_s": elapsed,
                "mean": total / reps if reps else None,
                "half_width": half_width,
                "rel_error": rel_error,
            }
            logger.error(
                f"{label}: observation {reps + 1} failed after "
                f"{reps} reps, {elapsed:.3f} s elapsed: {e}"
            )
            raise ObservationError(f"{label}: observation {reps + 1} failed: {e}", partial) from e
        et = clock()
        elapsed += et - st
        observations.append(value)
        total += value
        reps = len(observations)

        if reps > precision.min_reps:
            sd = float(np.std(observations, ddof=1))
            half_width = t_quantile(precision.confidence_level, reps - 1) * sd / math.sqrt(reps)
            rel_error = _relative(half_width, reps, total)
            if rel_error is not None and rel_error < precision.target_rel_error:
                stop_reason = STOP_PRECISION
                converged = True
                break
            if elapsed > precision.max_elapsed_s:
                stop_reason = STOP_MAX_ELAPSED
                break

    reps = len(observations)
    sd = float(np.std(observations, ddof=1)) if reps > 1 else 0.0
    normality = None
    if reps >= NORMALITY_MIN_OBSERVATIONS:
        normality = normality_check(observations)

    result = TtestResult(
        reps_out=reps,
        achieved_half_width=half_width,
        achieved_rel_error=rel_error,
        elapsed_s=elapsed,
        mean=total / reps,
        sd=sd,
        converged=converged,
        stop_reason=stop_reason,
        normality=normality,
    )
    if not converged:
        logger.warning(
            f"{label}: stopped on {stop_reason} after {reps} reps "
            f"(relative error {rel_error}, target {precision.target_rel_error})"
        )
    return result


def _relative(half_width: float, reps: int, total: float) -> Optional[float]:
    """clOut * reps / sum; undefined when the sum is not positive"""
    if half_width == 0.0:
        return 0.0
    if total <= 0.0:
        return None
    return half_width * reps / total
