"""Dominance predicates and Pareto-optimal front construction.

All objectives are minimized.  Objective vectors that are bit-equal share a
single front entry carrying every configuration that produced them; no
tolerance is applied anywhere, which keeps dominance transitive.
"""

import math
import logging
from typing import Iterable, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .core import Configuration, ObjectiveSample
from .errors import InvalidInputError

logger = logging.getLogger(__name__)

Objective = Tuple[float, ...]


def _check(a: Sequence[float], b: Sequence[float]) -> None:
    if len(a) != len(b) or len(a) < 1:
        raise InvalidInputError(f"objective vectors differ in length: {len(a)} vs {len(b)}")
    for value in (*a, *b):
        if not math.isfinite(value):
            raise InvalidInputError(f"objective components must be finite, got {value}")


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """a is no worse than b everywhere and strictly better somewhere"""
    _check(a, b)
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def weakly_dominates_strictly(a: Sequence[float], b: Sequence[float]) -> bool:
    """a is strictly better than b in every objective"""
    _check(a, b)
    return all(x < y for x, y in zip(a, b))


class FrontEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    objective: Tuple[float, float]
    configs: Tuple[Configuration, ...] = Field(min_length=1)


class ParetoFront(BaseModel):
    """Nondominated set of objective vectors, in insertion order"""

    model_config = ConfigDict(frozen=True)

    entries: Tuple[FrontEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def objectives(self) -> List[Tuple[float, float]]:
        return [entry.objective for entry in self.entries]

    def configs(self) -> List[Configuration]:
        return [config for entry in self.entries for config in entry.configs]

    def sorted_by_time(self) -> List[FrontEntry]:
        return sorted(self.entries, key=lambda entry: entry.objective)


def front_update(front: ParetoFront, sample: ObjectiveSample) -> ParetoFront:
    """Insert ``sample`` into ``front``, dropping the entries it dominates"""
    candidate = sample.objective
    kept: List[FrontEntry] = []
    for entry in front.entries:
        if entry.objective == candidate:
            if sample.config in entry.configs:
                return front
            merged = entry.model_copy(update={"configs": entry.configs + (sample.config,)})
            return front.model_copy(
                update={
                    "entries": tuple(merged if e is entry else e for e in front.entries)
                }
            )
        if dominates(entry.objective, candidate):
            return front
        if not dominates(candidate, entry.objective):
            kept.append(entry)

    added = FrontEntry(objective=candidate, configs=(sample.config,))
    return front.model_copy(update={"entries": tuple(kept) + (added,)})


def front_build(samples: Iterable[ObjectiveSample]) -> ParetoFront:
    front = ParetoFront()
    for sample in samples:
        front = front_update(front, sample)
    return front


def nondominated_filter(samples: Sequence[ObjectiveSample]) -> ParetoFront:
    """All-pairs O(n^2) reference filter with the same tie merging"""
    members: List[ObjectiveSample] = [
        s
        for s in samples
        if not any(dominates(other.objective, s.objective) for other in samples)
    ]
    grouped: dict = {}
    for s in members:
        configs = grouped.setdefault(s.objective, [])
        if s.config not in configs:
            configs.append(s.config)
    return ParetoFront(
        entries=tuple(
            FrontEntry(objective=objective, configs=tuple(configs))
            for objective, configs in grouped.items()
        )
    )


def same_front(a: ParetoFront, b: ParetoFront) -> bool:
    """Order-insensitive equality of objectives and their configuration sets"""
    def canonical(front: ParetoFront):
        return {
            entry.objective: frozenset(c.as_tuple() for c in entry.configs)
            for entry in front.entries
        }

    return len(a) == len(b) and canonical(a) == canonical(b)


def is_valid_front(front: ParetoFront) -> bool:
    """No member dominates another and objectives are unique"""
    objectives = front.objectives()
    if len(set(objectives)) != len(objectives):
        return False
    return not any(
        dominates(a, b) for i, a in enumerate(objectives) for j, b in enumerate(objectives) if i != j
    )


class BaseComparison(BaseModel):
    """Best front objectives against the best single-threadgroup (1, t) runs"""

    fastest_base: Configuration
    fastest_base_time_s: float
    time_improvement_pct: float
    leanest_base: Configuration
    leanest_base_energy_j: float
    energy_saving_pct: Optional[float] = None


class TradeoffSummary(BaseModel):
    """What each single-objective optimum costs in the other objective"""

    front_size: int
    samples_count: int
    performance_optimal: FrontEntry
    energy_optimal: FrontEntry
    # energy-optimal time over performance-optimal time
    performance_degradation_pct: float
    # performance-optimal energy over energy-optimal energy; undefined at zero
    energy_increase_pct: Optional[float] = None
    base: Optional[BaseComparison] = None


class TradeoffAggregate(BaseModel):
    """Average and maximum trade-offs over several fronts"""

    fronts: int
    mean_front_size: float
    max_front_size: int
    mean_performance_degradation_pct: float
    max_performance_degradation_pct: float
    mean_energy_increase_pct: Optional[float] = None
    max_energy_increase_pct: Optional[float] = None


def _pct_over(value: float, reference: float) -> Optional[float]:
    if reference <= 0.0:
        return None
    return 100.0 * (value - reference) / reference


def _base_comparison(
    front: ParetoFront, samples: Sequence[ObjectiveSample]
) -> Optional[BaseComparison]:
    base = [s for s in samples if s.config.groups == 1]
    if not base:
        return None
    fastest = min(base, key=lambda s: s.objective)
    leanest = min(base, key=lambda s: (s.dynamic_energy_j, s.time_s))
    best_time = min(time_s for time_s, _ in front.objectives())
    best_energy = min(energy_j for _, energy_j in front.objectives())
    saving = None
    if leanest.dynamic_energy_j > 0.0:
        saving = 100.0 * (leanest.dynamic_energy_j - best_energy) / leanest.dynamic_energy_j
    return BaseComparison(
        fastest_base=fastest.config,
        fastest_base_time_s=fastest.time_s,
        time_improvement_pct=100.0 * (fastest.time_s - best_time) / fastest.time_s,
        leanest_base=leanest.config,
        leanest_base_energy_j=leanest.dynamic_energy_j,
        energy_saving_pct=saving,
    )


def tradeoff_summary(front: ParetoFront, samples: Sequence[ObjectiveSample]) -> TradeoffSummary:
    """Front endpoints, their mutual costs, and the gain over (1, t) configurations"""
    if not front.entries:
        raise InvalidInputError("cannot summarize an empty front")

    ordered = front.sorted_by_time()
    fastest, leanest = ordered[0], ordered[-1]
    fast_time, fast_energy = fastest.objective
    lean_time, lean_energy = leanest.objective

    summary = TradeoffSummary(
        front_size=len(front),
        samples_count=len(samples),
        performance_optimal=fastest,
        energy_optimal=leanest,
        performance_degradation_pct=_pct_over(lean_time, fast_time),
        energy_increase_pct=_pct_over(fast_energy, lean_energy),
        base=_base_comparison(front, samples),
    )
    logger.debug(
        f"Front of {summary.front_size}: energy-only costs "
        f"{summary.performance_degradation_pct:.3g}% time, performance-only costs "
        f"{summary.energy_increase_pct}% energy"
    )
    return summary


def aggregate_tradeoffs(summaries: Sequence[TradeoffSummary]) -> TradeoffAggregate:
    if not summaries:
        raise InvalidInputError("no trade-off summaries to aggregate")
    sizes = [s.front_size for s in summaries]
    degradations = [s.performance_degradation_pct for s in summaries]
    increases = [s.energy_increase_pct for s in summaries if s.energy_increase_pct is not None]
    return TradeoffAggregate(
        fronts=len(summaries),
        mean_front_size=sum(sizes) / len(sizes),
        max_front_size=max(sizes),
        mean_performance_degradation_pct=sum(degradations) / len(degradations),
        max_performance_degradation_pct=max(degradations),
        mean_energy_increase_pct=sum(increases) / len(increases) if increases else None,
        max_energy_increase_pct=max(increases) if increases else None,
    )
