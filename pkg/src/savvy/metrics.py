"""Aggregation of run outcomes into comparable statistics.

Run facts are recovered from the trace (the run's externally visible record)
plus the verdict. A run counts as a fallback when its final command did not
come from the tuned chain inside the opportunistic window: fallback actions,
guard firings, post-window deliveries, and silent runs all count, so the rate
is comparable across architectures that have different machinery.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .trace import TraceLog
from .world import Outcome, Verdict


@dataclass(frozen=True)
class RunRecord:
    scenario: str
    architecture: str
    seed: int
    outcome: Outcome
    achieved_level: int | None
    fallback: bool
    decision_latency_ms: int | None
    faults: int
    had_event: bool


def run_record(
    scenario: str, architecture: str, seed: int, trace: TraceLog, verdict: Verdict
) -> RunRecord:
    faults = len(trace.of_kind("fault"))
    events = trace.of_kind("event")
    had_event = bool(events)

    origin = None
    tte = None
    zero_budget = False
    for rec in trace.of_kind("bounds"):
        if rec.get("zero_budget") == "true":
            zero_budget = True
        else:
            origin = int(rec.get("origin", "0") or 0)
            tte = int(rec.get("tte", "0") or 0)

    command = None
    for rec in trace.of_kind("command"):
        command = rec
        break

    fallback = False
    latency = None
    if had_event:
        if command is None:
            fallback = True
        else:
            issued = int(command.get("at") or command.ts)
            if events:
                latency = issued - events[0].ts
            source = command.get("source", "")
            from_chain = source is not None and source.startswith("dmod")
            in_window = (
                not zero_budget
                and origin is not None
                and tte is not None
                and issued <= origin + tte
            )
            fallback = not (from_chain and in_window)

    return RunRecord(
        scenario=scenario,
        architecture=architecture,
        seed=seed,
        outcome=verdict.outcome,
        achieved_level=verdict.achieved_level,
        fallback=fallback,
        decision_latency_ms=latency,
        faults=faults,
        had_event=had_event,
    )


@dataclass
class ArchStats:
    runs: int = 0
    events: int = 0
    fallbacks: int = 0
    collisions: int = 0
    faults: int = 0
    level_sum: float = 0.0
    latency_sum: int = 0
    latency_count: int = 0
    outcomes: Counter = field(default_factory=Counter)

    @property
    def fallback_rate(self) -> float:
        return self.fallbacks / self.events if self.events else 0.0

    @property
    def collision_rate(self) -> float:
        return self.collisions / self.runs if self.runs else 0.0

    @property
    def mean_achieved_level(self) -> float:
        return self.level_sum / self.runs if self.runs else 0.0

    @property
    def mean_decision_latency_ms(self) -> float:
        return self.latency_sum / self.latency_count if self.latency_count else 0.0


@dataclass
class MetricsSummary:
    per_arch: dict[str, ArchStats] = field(default_factory=dict)
    per_scenario: dict[tuple[str, str], Counter] = field(default_factory=dict)
    seeds: tuple[int, ...] = ()

    @property
    def total_runs(self) -> int:
        return sum(s.runs for s in self.per_arch.values())

    def savvy_faults(self) -> int:
        stats = self.per_arch.get("savvy")
        return stats.faults if stats else 0


def summarize(records: list[RunRecord]) -> MetricsSummary:
    summary = MetricsSummary()
    seeds: set[int] = set()
    for rec in records:
        seeds.add(rec.seed)
        stats = summary.per_arch.setdefault(rec.architecture, ArchStats())
        stats.runs += 1
        stats.events += 1 if rec.had_event else 0
        stats.fallbacks += 1 if (rec.had_event and rec.fallback) else 0
        stats.collisions += 1 if rec.outcome is Outcome.COLLISION else 0
        stats.faults += rec.faults
        stats.level_sum += rec.achieved_level or 0
        if rec.decision_latency_ms is not None:
            stats.latency_sum += rec.decision_latency_ms
            stats.latency_count += 1
        stats.outcomes[rec.outcome.value] += 1
        cell = summary.per_scenario.setdefault(
            (rec.scenario, rec.architecture), Counter()
        )
        cell[rec.outcome.value] += 1
    summary.seeds = tuple(sorted(seeds))
    return summary
