"""One-dimensional corridor world and the scenario runner.

The vehicle drives down a corridor toward scripted objects. Kinematics are
closed-form between command changes (anchored integration, so no per-tick
float drift): braking decelerates at the vehicle's limit and clamps at
standstill, slowing decelerates to a fraction of the commanded speed,
everything else holds speed.

Static obstructions collide on position contact. Crossing hazards and
cooperative conflict points are judged at the moment the hazard materializes:
a vehicle still in motion there without genuinely cleared information has
failed to yield and counts as a collision.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from random import Random

from .bus import Delivery, EventBus, TimerFired, TimerKind, TOPIC_ACTUATORS, TOPIC_PRELIMINARY, TOPIC_TIMERS
from .domain import (
    ActionCommand,
    ActionSpec,
    ActuatorCommand,
    DrivingEvent,
    coop_level_cap,
)
from .scenario import STAGE_NAMES, ObjectSpec, ScenarioSpec
from .supervisor import (
    Architecture,
    HazardEstimator,
    SafetySupervisor,
)
from .trace import TraceLog
from .tsim import FallbackRule, PipelineStage, StageWorker


@dataclass
class VehicleState:
    """Ego vehicle pose plus the actuation mode currently applied."""

    position_m: float
    speed_mps: float
    max_decel_mps2: float
    commanded: ActionSpec | None = None
    slow_target_mps: float | None = None


def step_world(state: VehicleState, commands: ActionSpec | None, dt_ms: int) -> VehicleState:
    """Advance the vehicle ``dt_ms`` under ``commands``; pure closed form.

    Braking clamps at standstill; slowing clamps at the stored target speed;
    anything else (or no command) holds speed.
    """
    if dt_ms <= 0:
        raise ValueError("dt_ms must be > 0")
    dt = dt_ms / 1000.0
    v = state.speed_mps
    a = state.max_decel_mps2
    target = 0.0 if commands is not None and commands.stopping else None
    if target is None and commands is not None and commands.slowing:
        target = state.slow_target_mps if state.slow_target_mps is not None else 0.0

    if target is None or v <= target:
        dx = v * dt
        new_v = v
    else:
        t_reach = (v - target) / a
        if t_reach >= dt:
            dx = v * dt - 0.5 * a * dt * dt
            new_v = v - a * dt
        else:
            dx = (v * v - target * target) / (2.0 * a) + target * (dt - t_reach)
            new_v = target
    return replace(state, position_m=state.position_m + dx, speed_mps=new_v,
                   commanded=commands)


class Outcome(Enum):
    SAFE_STOP = "safe_stop"
    SAFE_PASS = "safe_pass"
    COLLISION = "collision"
    SAFETY_VIOLATION_FAULT = "safety_violation_fault"


@dataclass(frozen=True)
class Verdict:
    """How a scenario run ended.

    ``margin_m`` is the distance held short of the hazard (stops/passes);
    ``margin_ms`` is how much more time the vehicle would have needed
    (collisions) or had spare (crossings cleared early). ``achieved_level``
    is the quality level behind the final command, None when the fallback
    (or nothing) acted.
    """

    outcome: Outcome
    margin_m: float | None = None
    margin_ms: int | None = None
    achieved_level: int | None = None


@dataclass
class WorldObject:
    """Runtime state of one scripted object."""

    spec: ObjectSpec
    detected: bool = False
    avoided: bool = False
    judged: bool = False
    impact_at: int | None = None

    def position_at(self, t_ms: int) -> float:
        return self.spec.position_m + self.spec.speed_mps * (t_ms / 1000.0)


class World:
    """Steps the corridor, raises sensing triggers, applies actuator
    commands, and judges the outcome."""

    def __init__(self, bus: EventBus, spec: ScenarioSpec):
        self.bus = bus
        self.spec = spec
        self.taxonomy = spec.taxonomy
        self.constants = spec.constants
        self.objects = [WorldObject(o) for o in spec.objects]
        self._anchor = VehicleState(
            position_m=spec.vehicle.position_m,
            speed_mps=spec.vehicle.speed_mps,
            max_decel_mps2=spec.vehicle.max_decel_mps2,
        )
        self._anchor_t = 0
        self.effective_horizon = spec.constants.horizon_ms
        self.verdict: Verdict | None = None
        self.done = False
        self.last_command: ActuatorCommand | None = None
        bus.subscribe(TOPIC_ACTUATORS, self._on_command)
        bus.subscribe(TOPIC_TIMERS, self._on_timer)

    # -- kinematics ---------------------------------------------------------

    def vehicle_at(self, t_ms: int) -> VehicleState:
        if t_ms == self._anchor_t:
            return self._anchor
        return step_world(self._anchor, self._anchor.commanded, t_ms - self._anchor_t)

    @property
    def speed_mps(self) -> float:
        return self.vehicle_at(self.bus.now).speed_mps

    @property
    def max_decel_mps2(self) -> float:
        return self._anchor.max_decel_mps2

    def _re_anchor(self, t_ms: int) -> None:
        self._anchor = self.vehicle_at(t_ms)
        self._anchor_t = t_ms

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        self.bus.set_timer(self.bus.now, TimerKind.CUSTOM, tag="tick")

    def _on_timer(self, delivery: Delivery) -> None:
        fired = delivery.payload
        if not isinstance(fired, TimerFired) or self.done:
            return
        tag = fired.handle.tag
        if tag == "tick":
            self._tick()
            if not self.done and self.bus.now + self.constants.dt_ms <= self.effective_horizon:
                self.bus.set_timer(
                    self.bus.now + self.constants.dt_ms, TimerKind.CUSTOM, tag="tick"
                )
        elif tag.startswith("impact:"):
            self._judge_impact(tag.split(":", 1)[1])

    def _tick(self) -> None:
        now = self.bus.now
        vehicle = self.vehicle_at(now)
        self.bus.trace.emit(
            now, "world", "tick",
            position=round(vehicle.position_m, 6), speed=round(vehicle.speed_mps, 6),
        )
        self._detect(now, vehicle)
        self._check_static_contact(now, vehicle)
        if self.done:
            return
        self._check_quiescence(now, vehicle)

    # -- sensing ------------------------------------------------------------

    def _detect(self, now: int, vehicle: VehicleState) -> None:
        for obj in self.objects:
            if obj.detected:
                continue
            distance = obj.position_at(now) - vehicle.position_m
            if not 0 < distance <= self.spec.detection_distance_m:
                continue
            obj.detected = True
            event = DrivingEvent(
                id=obj.spec.name,
                kind=self.spec.kind,
                detected_at=now,
                object_truth=obj.spec.truth,
                object_distance_m=distance,
                cooperative=self.spec.cooperative,
            )
            self.bus.trace.emit(
                now, "world", "event",
                id=event.id, kind=event.kind.value, truth=obj.spec.truth.value,
                distance=round(distance, 6),
            )
            closing = vehicle.speed_mps - obj.spec.speed_mps
            hazardous = self.taxonomy.is_obstructive(obj.spec.truth)
            timed = obj.spec.crossing or self.spec.kind.cooperative
            if timed and hazardous and closing > 0:
                obj.impact_at = now + round(1000.0 * distance / closing)
                self.effective_horizon = max(
                    self.effective_horizon, obj.impact_at + self.constants.dt_ms
                )
                self.bus.set_timer(
                    obj.impact_at, TimerKind.CUSTOM, tag=f"impact:{obj.spec.name}"
                )
            self.bus.publish(TOPIC_PRELIMINARY, event)

    # -- actuation ----------------------------------------------------------

    def _on_command(self, delivery: Delivery) -> None:
        command = delivery.payload
        if not isinstance(command, ActuatorCommand) or self.done:
            return
        now = self.bus.now
        self._re_anchor(now)
        self.last_command = command
        state = self._anchor
        slow_target = state.slow_target_mps
        if command.action.slowing and not command.action.stopping:
            slow_target = state.speed_mps * self.constants.slow_factor
        self._anchor = replace(
            state, commanded=command.action, slow_target_mps=slow_target
        )
        if any(
            c in (ActionCommand.STEER_AWAY, ActionCommand.MANEUVER)
            for c in command.action.commands
        ):
            for obj in self.objects:
                if not obj.judged and self.taxonomy.is_avoidable(obj.spec.truth):
                    obj.avoided = True

    # -- judging ------------------------------------------------------------

    def _check_static_contact(self, now: int, vehicle: VehicleState) -> None:
        for obj in self.objects:
            if obj.judged or obj.impact_at is not None or obj.avoided:
                continue
            if not self.taxonomy.is_obstructive(obj.spec.truth):
                continue
            if vehicle.position_m >= obj.position_at(now):
                obj.judged = True
                self._conclude(
                    Outcome.COLLISION,
                    margin_ms=self._stop_shortfall_ms(vehicle),
                )
                return

    def _judge_impact(self, name: str) -> None:
        obj = next(o for o in self.objects if o.spec.name == name)
        if obj.judged or self.done:
            return
        obj.judged = True
        now = self.bus.now
        vehicle = self.vehicle_at(now)
        obj_pos = obj.position_at(now)
        if obj.avoided or vehicle.position_m > obj_pos:
            self._maybe_conclude_pass(now, vehicle)
            return
        if vehicle.speed_mps <= 0.0:
            self._conclude(Outcome.SAFE_STOP, margin_m=obj_pos - vehicle.position_m)
            return
        if self._cleared_by_information():
            self._conclude(Outcome.SAFE_PASS)
            return
        self._conclude(Outcome.COLLISION, margin_ms=self._stop_shortfall_ms(vehicle))

    def _cleared_by_information(self) -> bool:
        """A still-moving vehicle is safe at a conflict point only when its
        permissive action rested on genuinely available cooperation."""
        if not self.spec.kind.cooperative:
            return False
        command = self.last_command
        if command is None or command.action.stopping:
            return False
        if command.source.kind == "smod":
            return True  # design-time rule: vetted safe by construction
        cap = coop_level_cap(self.spec.kind, self.spec.cooperative)
        return command.basis_level is not None and command.basis_level <= cap

    def _check_quiescence(self, now: int, vehicle: VehicleState) -> None:
        if self.verdict is not None:
            return
        pending_impacts = any(
            o.impact_at is not None and not o.judged for o in self.objects
        )
        if vehicle.speed_mps <= 0.0 and vehicle.commanded is not None:
            if pending_impacts:
                return  # hold the verdict until the hazard materializes
            margin = self._nearest_obstruction_gap(now, vehicle)
            self._conclude(Outcome.SAFE_STOP, margin_m=margin)
            return
        if not pending_impacts and self.objects and all(
            o.judged
            or o.avoided
            or not self.taxonomy.is_obstructive(o.spec.truth)
            for o in self.objects
        ):
            if all(vehicle.position_m > o.position_at(now) for o in self.objects):
                last = max(o.position_at(now) for o in self.objects)
                self._conclude(Outcome.SAFE_PASS, margin_m=vehicle.position_m - last)

    def _maybe_conclude_pass(self, now: int, vehicle: VehicleState) -> None:
        if all(o.judged or o.avoided for o in self.objects):
            self._conclude(Outcome.SAFE_PASS)

    def finalize(self) -> None:
        """Horizon reached without a conclusive hazard: settle the verdict."""
        if self.verdict is not None:
            return
        now = self.bus.now
        vehicle = self.vehicle_at(now)
        if vehicle.speed_mps <= 0.0 and vehicle.commanded is not None:
            self._conclude(
                Outcome.SAFE_STOP, margin_m=self._nearest_obstruction_gap(now, vehicle)
            )
        else:
            self._conclude(Outcome.SAFE_PASS)

    def _nearest_obstruction_gap(self, now: int, vehicle: VehicleState) -> float | None:
        gaps = [
            o.position_at(now) - vehicle.position_m
            for o in self.objects
            if self.taxonomy.is_obstructive(o.spec.truth)
            and not o.avoided
            and o.position_at(now) >= vehicle.position_m
        ]
        return min(gaps) if gaps else None

    def _stop_shortfall_ms(self, vehicle: VehicleState) -> int:
        return round(1000.0 * vehicle.speed_mps / vehicle.max_decel_mps2)

    def _conclude(self, outcome: Outcome, margin_m: float | None = None,
                  margin_ms: int | None = None) -> None:
        self.verdict = Verdict(outcome, margin_m=margin_m, margin_ms=margin_ms)
        self.done = True
        self.bus.trace.emit(
            self.bus.now, "world", "verdict",
            outcome=outcome.value,
            margin_m="" if margin_m is None else round(margin_m, 6),
            margin_ms="" if margin_ms is None else margin_ms,
        )


def run_scenario(
    spec: ScenarioSpec,
    seed: int = 0,
    architecture: Architecture | None = None,
    trace_level: int = 2,
) -> tuple[TraceLog, Verdict]:
    """Wire bus, supervisor, stages, and world; run to a verdict.

    Deterministic: identical (spec, seed, architecture) give byte-identical
    traces and equal verdicts.
    """
    arch = architecture if architecture is not None else spec.architecture
    trace = TraceLog(level=trace_level)
    trace.emit(
        0, "run", "header",
        scenario=spec.name, kind=spec.kind.value, arch=arch.value, seed=seed,
    )
    bus = EventBus(trace)
    rng = Random(seed)
    constants = spec.constants

    world = World(bus, spec)
    stages = [
        PipelineStage(
            name,
            spec.profiles[name],
            FallbackRule(spec.fallback_action, spec.fallback_wcet_ms),
        )
        for name in STAGE_NAMES
    ]
    workers = [
        StageWorker(bus, stage, rng, q=constants.planning_quantile)
        for stage in stages
    ]
    estimator = HazardEstimator(
        smod_wcet_ms=spec.fallback_wcet_ms,
        safety_margin_ms=constants.safety_margin_ms,
        horizon_ms=constants.horizon_ms,
    )
    supervisor = SafetySupervisor(
        bus,
        stages,
        spec.policy,
        estimator,
        vehicle=world,  # duck-typed view: live speed and deceleration limit
        architecture=arch,
        guard_enabled=constants.guard_enabled,
        ladder=spec.ladder,
        taxonomy=spec.taxonomy,
    )

    world.start()
    while not world.done:
        nxt = bus.next_event_at()
        if nxt is None or nxt > world.effective_horizon:
            break
        bus.advance_until(nxt)
    world.finalize()

    verdict = world.verdict
    assert verdict is not None
    if supervisor.fault_count > 0:
        verdict = replace(verdict, outcome=Outcome.SAFETY_VIOLATION_FAULT)
    process = supervisor.process
    if (
        process is not None
        and process.final_command is not None
        and process.final_command.source.kind == "dmod"
    ):
        verdict = replace(
            verdict, achieved_level=process.final_command.source.level
        )
    trace.emit(
        bus.now, "run", "verdict",
        outcome=verdict.outcome.value,
        achieved="smod" if verdict.achieved_level is None else verdict.achieved_level,
    )
    return trace, verdict


def run_baseline_all_or_nothing(
    spec: ScenarioSpec, seed: int = 0, trace_level: int = 2
) -> tuple[TraceLog, Verdict]:
    """Same wiring, but inference always targets the richest level and only
    the optional emergency guard bounds it."""
    return run_scenario(
        spec, seed, architecture=Architecture.ALL_OR_NOTHING, trace_level=trace_level
    )
