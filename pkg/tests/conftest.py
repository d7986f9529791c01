"""Shared fixtures: a world-free pipeline harness and random generators."""

from __future__ import annotations

from dataclasses import dataclass
from random import Random

from savvy.bus import EventBus, TOPIC_ACTUATORS
from savvy.domain import (
    ActionCommand,
    ActionSpec,
    CoopSensing,
    DrivingEvent,
    ObjectClass,
    ScenarioKind,
    TimeBounds,
    ladder_size,
)
from savvy.models import AnytimeProfile, LevelProfile, Triangular
from savvy.supervisor import (
    Architecture,
    HazardEstimator,
    SafetySupervisor,
    SchedulingPolicy,
)
from savvy.trace import TraceLog
from savvy.tsim import FallbackRule, PipelineStage, StageWorker


@dataclass
class StubVehicle:
    speed_mps: float = 10.0
    max_decel_mps2: float = 5.0


def random_triangular_profile(
    rng: Random,
    kind: ScenarioKind = ScenarioKind.OBSTACLE_AVOIDANCE,
    n_levels: int | None = None,
) -> AnytimeProfile:
    """Random profile with per-level parameters that scale monotonically,
    so every quantile (not just the median) is non-decreasing in level."""
    n = n_levels if n_levels is not None else ladder_size(kind)
    low = rng.uniform(5.0, 50.0)
    mode = low * rng.uniform(1.2, 2.0)
    high = mode * rng.uniform(1.2, 2.5)
    levels = {}
    for i in range(1, n + 1):
        levels[i] = LevelProfile(
            Triangular(low, mode, high), rng.uniform(0.5, 1.0)
        )
        factor = rng.uniform(1.2, 2.2)
        low, mode, high = low * factor, mode * factor, high * factor
    return AnytimeProfile(kind, levels, n_levels=n)


def run_pipeline(
    bounds: TimeBounds,
    profiles,
    seed: int = 0,
    architecture: Architecture = Architecture.SAVVY,
    policy: SchedulingPolicy | None = None,
    truth: ObjectClass = ObjectClass.HUMAN,
    kind: ScenarioKind = ScenarioKind.OBSTACLE_AVOIDANCE,
    cooperative: CoopSensing = CoopSensing.NONE,
    guard_enabled: bool = True,
    smod_wcet_ms: int | None = None,
    planning_quantile: float = 0.95,
    trace_level: int = 2,
):
    """Drive one supervised pipeline to completion with injected bounds.

    No world: the harness collects the actuator commands directly. Returns
    (trace, supervisor, commands).
    """
    if isinstance(profiles, AnytimeProfile):
        profiles = [profiles] * 3
    trace = TraceLog(level=trace_level)
    bus = EventBus(trace)
    rng = Random(seed)
    commands = []
    bus.subscribe(TOPIC_ACTUATORS, lambda d: commands.append(d))
    wcet = (
        smod_wcet_ms
        if smod_wcet_ms is not None
        else getattr(bounds, "smod_wcet_ms", 300)
    )
    stages = [
        PipelineStage(
            name,
            profile,
            FallbackRule(ActionSpec((ActionCommand.BRAKE, ActionCommand.BEEP)), wcet),
        )
        for name, profile in zip(("sense", "plan", "act"), profiles)
    ]
    workers = [StageWorker(bus, s, rng, q=planning_quantile) for s in stages]
    supervisor = SafetySupervisor(
        bus,
        stages,
        policy or SchedulingPolicy(),
        HazardEstimator(smod_wcet_ms=wcet),
        vehicle=StubVehicle(),
        architecture=architecture,
        guard_enabled=guard_enabled,
    )
    event = DrivingEvent(
        id="e1",
        kind=kind,
        detected_at=getattr(bounds, "origin", 0),
        object_truth=truth,
        object_distance_m=60.0,
        cooperative=cooperative,
    )
    supervisor.start_driving_task(event, bounds=bounds)
    while True:
        nxt = bus.next_event_at()
        if nxt is None:
            break
        bus.advance_until(nxt)
    return trace, supervisor, commands
