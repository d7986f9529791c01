"""Synthetic stand-ins for tunable inference models.

A profile maps each quality level to a latency distribution and an accuracy.
Sampling is inverse-CDF on a single uniform draw, so a model's quantile
function and its samples agree exactly; that is what makes delivery-time
estimates calibrated by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from random import Random
from statistics import NormalDist
from typing import Mapping, Union

from .domain import (
    ObjectClass,
    ScenarioKind,
    Taxonomy,
    DEFAULT_TAXONOMY,
    ladder_size,
)

_NORMAL = NormalDist()


@dataclass(frozen=True)
class Constant:
    value_ms: float

    def __post_init__(self) -> None:
        if self.value_ms <= 0:
            raise ValueError("latency support must be strictly positive")

    def quantile(self, q: float) -> float:
        return self.value_ms


@dataclass(frozen=True)
class Triangular:
    low_ms: float
    mode_ms: float
    high_ms: float

    def __post_init__(self) -> None:
        if not 0 < self.low_ms <= self.mode_ms <= self.high_ms:
            raise ValueError(
                f"need 0 < low <= mode <= high, got "
                f"({self.low_ms}, {self.mode_ms}, {self.high_ms})"
            )

    def quantile(self, q: float) -> float:
        span = self.high_ms - self.low_ms
        if span == 0:
            return self.low_ms
        pivot = (self.mode_ms - self.low_ms) / span
        if q <= pivot:
            return self.low_ms + math.sqrt(q * span * (self.mode_ms - self.low_ms))
        return self.high_ms - math.sqrt((1 - q) * span * (self.high_ms - self.mode_ms))


@dataclass(frozen=True)
class LogNormalLike:
    """Heavy-ish tail around a median: quantile(q) = median * spread^z(q)."""

    median_ms: float
    spread: float

    def __post_init__(self) -> None:
        if self.median_ms <= 0:
            raise ValueError("latency support must be strictly positive")
        if self.spread < 1:
            raise ValueError("spread must be >= 1 so quantiles are non-decreasing")

    def quantile(self, q: float) -> float:
        return self.median_ms * self.spread ** _NORMAL.inv_cdf(q)


LatencyModel = Union[Constant, Triangular, LogNormalLike]


def latency_quantile(model: LatencyModel, q: float) -> float:
    if not 0 < q < 1:
        raise ValueError(f"quantile order must be in (0, 1), got {q}")
    return model.quantile(q)


def sample_latency(model: LatencyModel, rng: Random) -> float:
    u = rng.random()
    # rng.random() can return exactly 0.0, outside the open quantile domain.
    return model.quantile(max(u, 1e-12))


@dataclass(frozen=True)
class LevelProfile:
    latency: LatencyModel
    accuracy: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy must be in [0, 1], got {self.accuracy}")


@dataclass(frozen=True)
class AnytimeProfile:
    """Per-level latency/accuracy table for one scenario kind.

    Needs exactly one entry per ladder level and a median latency that never
    decreases with the level index (richer output costs more time).
    """

    scenario: ScenarioKind
    levels: Mapping[int, LevelProfile]
    n_levels: int | None = None

    def __post_init__(self) -> None:
        expected = self.n_levels if self.n_levels is not None else ladder_size(self.scenario)
        object.__setattr__(self, "n_levels", expected)
        if sorted(self.levels) != list(range(1, expected + 1)):
            raise ValueError(
                f"profile must define levels 1..{expected}, got {sorted(self.levels)}"
            )
        prev = 0.0
        for i in range(1, expected + 1):
            median = self.levels[i].latency.quantile(0.5)
            if median < prev:
                raise ValueError(
                    "profile monotonicity: "
                    f"L{i} median {median:g} ms < L{i - 1} median {prev:g} ms"
                )
            prev = median

    @property
    def top_level(self) -> int:
        return self.n_levels  # type: ignore[return-value]

    def latency_model(self, level: int) -> LatencyModel:
        return self.levels[level].latency

    def accuracy(self, level: int) -> float:
        return self.levels[level].accuracy


@dataclass(frozen=True)
class ModelConfig:
    """A tuning choice for one inference run."""

    level: int
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.level < 1:
            raise ValueError("level starts at 1")


@dataclass(frozen=True)
class InferenceResult:
    """What one tuned inference produced and how long it took.

    ``observed`` is a taxonomy node for obstacle scenarios, or the claimed
    cooperative-sensing level for cooperative scenarios. ``correct`` holds iff
    the observation equals the ground truth's ancestor at the run level.
    """

    level: int
    observed: ObjectClass | int
    correct: bool
    elapsed_ms: int


def infer(
    profile: AnytimeProfile,
    config: ModelConfig,
    truth: ObjectClass,
    rng: Random,
    coop_cap: int | None = None,
    taxonomy: Taxonomy = DEFAULT_TAXONOMY,
) -> InferenceResult:
    """Run one simulated inference at the configured level.

    Draw order is fixed (latency, correctness, then the error class if any),
    so identical (profile, config, truth, rng state) give identical results.
    When no wrong answer is representable at the level, the result is correct
    regardless of the accuracy roll.
    """
    if config.level not in profile.levels:
        raise ValueError(f"level {config.level} not in profile")
    entry = profile.levels[config.level]
    elapsed = math.ceil(sample_latency(entry.latency, rng))
    hit = rng.random() < entry.accuracy

    if profile.scenario.cooperative:
        cap = coop_cap if coop_cap is not None else profile.top_level
        expected: ObjectClass | int = min(config.level, cap)
        candidates: list[ObjectClass | int] = [
            lvl for lvl in range(1, profile.top_level + 1) if lvl != expected
        ]
    else:
        expected = taxonomy.classify(truth, config.level)
        candidates = [
            node
            for node in taxonomy.nodes_at_depth(config.level)
            if node is not expected
        ]

    if hit or not candidates:
        return InferenceResult(config.level, expected, True, elapsed)
    observed = candidates[rng.randrange(len(candidates))]
    return InferenceResult(config.level, observed, False, elapsed)


def default_profile(kind: ScenarioKind) -> AnytimeProfile:
    """Bundled per-kind profile: plausible shape, invented numbers.

    The spread between the lowest and highest levels is wide on purpose so
    tight windows genuinely cannot fit the richest output.
    """
    return AnytimeProfile(kind, dict(_DEFAULT_TABLES[kind]))


def _tri(low: float, mode: float, high: float, acc: float) -> LevelProfile:
    return LevelProfile(Triangular(low, mode, high), acc)


_DEFAULT_TABLES: dict[ScenarioKind, dict[int, LevelProfile]] = {
    ScenarioKind.OBSTACLE_AVOIDANCE: {
        1: _tri(20, 40, 80, 0.99),
        2: _tri(35, 70, 140, 0.98),
        3: _tri(60, 110, 220, 0.97),
        4: _tri(100, 180, 340, 0.95),
        5: _tri(160, 280, 520, 0.93),
        6: _tri(260, 440, 800, 0.89),
        7: _tri(400, 700, 1200, 0.85),
    },
    ScenarioKind.INTERSECTION_CROSSING: {
        1: _tri(10, 20, 40, 0.99),
        2: _tri(40, 80, 160, 0.97),
        3: _tri(90, 160, 300, 0.95),
        4: _tri(200, 350, 700, 0.90),
    },
    ScenarioKind.OVERTAKING: {
        1: _tri(10, 20, 40, 0.99),
        2: _tri(40, 80, 160, 0.97),
        3: _tri(90, 160, 300, 0.95),
        4: _tri(200, 350, 700, 0.90),
    },
    ScenarioKind.CRASH_AVOIDANCE: {
        1: _tri(10, 20, 40, 0.99),
        2: _tri(40, 80, 160, 0.97),
        3: _tri(90, 160, 300, 0.95),
        4: _tri(160, 280, 560, 0.92),
        5: _tri(280, 480, 900, 0.88),
    },
}
