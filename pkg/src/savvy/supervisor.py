"""Safety-critical supervision of driving tasks.

The supervisor is the only writer to the actuators topic. For each sensing
trigger it computes the task's time bounds, splits the opportunistic window
across the pipeline stages, arms the expiry and hazard-guard timers, and
chains the stages. A stage that misses its window is taken over (never handed
over): its design-time fallback action goes out instead, early enough to
complete before the hazard deadline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable, Sequence

from .bus import (
    Delivery,
    EventBus,
    TimerFired,
    TimerKind,
    TOPIC_ACTUATORS,
    TOPIC_DETAIL,
    TOPIC_PRELIMINARY,
    TOPIC_RESULTS,
    TOPIC_TIMERS,
)
from .domain import (
    ActionSpec,
    ActuatorCommand,
    CommandSource,
    DrivingEvent,
    QualityLevel,
    Taxonomy,
    TimeBounds,
    DEFAULT_TAXONOMY,
    coop_level_cap,
    load_level_ladder,
)
from .models import InferenceResult
from .tsim import (
    PipelineStage,
    StageDelivered,
    StageNoFeasible,
    StageStart,
    StageTask,
    TaskStatus,
    TuningMode,
    fire_smod,
)

if TYPE_CHECKING:
    from .world import VehicleState


class Architecture(Enum):
    SAVVY = "savvy"
    ALL_OR_NOTHING = "aon"
    SIMPLEX_LIKE = "simplex"


class PolicyKind(Enum):
    STATIC_EVEN = "static_even"
    DYNAMIC_WEIGHTED = "dynamic_weighted"


@dataclass(frozen=True)
class SchedulingPolicy:
    kind: PolicyKind = PolicyKind.STATIC_EVEN
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind is PolicyKind.DYNAMIC_WEIGHTED:
            if not self.weights:
                raise ValueError("dynamic_weighted policy needs weights")
            if any(not math.isfinite(w) or w <= 0 for w in self.weights):
                raise ValueError("weights must be strictly positive and finite")
        elif self.weights is not None:
            raise ValueError("static_even policy takes no weights")


def allocate_budgets(
    bounds: TimeBounds, stages: Sequence[object], policy: SchedulingPolicy
) -> list[int]:
    """Split the opportunistic window across stages; shares sum to it exactly.

    Every stage but the last gets the floor of its proportional share and the
    last absorbs the remainder, in integer milliseconds.
    """
    n = len(stages)
    if n == 0:
        raise ValueError("need at least one stage")
    tte = bounds.tte_ms
    if policy.kind is PolicyKind.STATIC_EVEN:
        weights: Sequence[float] = [1.0] * n
    else:
        if len(policy.weights or ()) != n:
            raise ValueError(
                f"policy has {len(policy.weights or ())} weights for {n} stages"
            )
        weights = policy.weights  # type: ignore[assignment]
    total = sum(weights)
    budgets = [math.floor(tte * w / total) for w in weights[:-1]]
    budgets.append(tte - sum(budgets))
    return budgets


@dataclass(frozen=True)
class ZeroBudget:
    """No opportunistic window exists: the safe chain must run immediately."""

    tth_ms: int  # clamped hazard margin that was left


@dataclass
class HazardEstimator:
    """Design-time hazard timing for the scheduler (the control stage).

    The closed-form rule is deliberately conservative: time to contact minus
    the full-stop time minus a safety margin. ``refine`` may tighten (never
    loosen) the hazard deadline.
    """

    smod_wcet_ms: int = 300
    safety_margin_ms: int = 500
    horizon_ms: int = 30_000
    refine: Callable[[DrivingEvent, "VehicleState"], int] | None = None

    def compute_time_bounds(
        self, event: DrivingEvent, vehicle: "VehicleState"
    ) -> TimeBounds | ZeroBudget:
        speed = vehicle.speed_mps
        if speed <= 0:
            tth = self.horizon_ms  # nothing is closing; plan at leisure
        else:
            ttc_ms = round(1000.0 * event.object_distance_m / speed)
            braking_ms = round(1000.0 * speed / vehicle.max_decel_mps2)
            tth = ttc_ms - braking_ms - self.safety_margin_ms
        if self.refine is not None:
            tth = min(tth, self.refine(event, vehicle))
        tth = max(tth, 0)
        if tth < self.smod_wcet_ms:
            return ZeroBudget(tth_ms=tth)
        return TimeBounds(
            origin=event.detected_at,
            tte_ms=tth - self.smod_wcet_ms,
            tth_ms=tth,
            smod_wcet_ms=self.smod_wcet_ms,
        )


class Phase(Enum):
    SCHEDULED = "scheduled"
    OPPORTUNISTIC = "opportunistic"
    SAFE_FALLBACK = "safe_fallback"
    COMPLETED = "completed"


@dataclass
class DrivingTaskProcess:
    event: DrivingEvent
    bounds: TimeBounds | None
    architecture: Architecture
    tasks: list[StageTask] = field(default_factory=list)
    budgets: list[int] = field(default_factory=list)
    phase: Phase = Phase.SCHEDULED
    final_command: ActuatorCommand | None = None
    deciding_result: InferenceResult | None = None
    fault_count: int = 0
    zero_budget: bool = False


def decide_action(
    result: InferenceResult,
    ladder: Sequence[QualityLevel],
    taxonomy: Taxonomy = DEFAULT_TAXONOMY,
) -> ActionSpec:
    """Ladder action for what was observed (not for the ground truth)."""
    row = observation_row(result, taxonomy)
    if not 1 <= row <= len(ladder):
        raise ValueError(f"observation maps to row {row}, ladder has {len(ladder)}")
    return ladder[row - 1].action


def observation_row(result: InferenceResult, taxonomy: Taxonomy = DEFAULT_TAXONOMY) -> int:
    if isinstance(result.observed, int):
        return result.observed
    return taxonomy.depth_of(result.observed)


class SafetySupervisor:
    """Owns the driving-task lifecycle and all actuator authority."""

    def __init__(
        self,
        bus: EventBus,
        stages: Sequence[PipelineStage],
        policy: SchedulingPolicy,
        estimator: HazardEstimator,
        vehicle: "VehicleState",
        architecture: Architecture = Architecture.SAVVY,
        guard_enabled: bool = True,
        ladder: Sequence[QualityLevel] | None = None,
        taxonomy: Taxonomy = DEFAULT_TAXONOMY,
    ):
        if not stages:
            raise ValueError("need at least one pipeline stage")
        self.bus = bus
        self.stages = list(stages)
        self.policy = policy
        self.estimator = estimator
        self.vehicle = vehicle
        self.architecture = architecture
        self.guard_enabled = guard_enabled
        kind = self.stages[0].profile.scenario
        self.ladder = list(ladder) if ladder is not None else load_level_ladder(kind)
        self.taxonomy = taxonomy
        self.process: DrivingTaskProcess | None = None
        self.fault_count = 0
        self._stage_timers: list = [None] * len(self.stages)
        self._guard = None
        self._emergency = None
        self._task_seq = 0
        bus.subscribe(TOPIC_PRELIMINARY, self._on_preliminary)
        bus.subscribe(TOPIC_RESULTS, self._on_stage_result)
        bus.subscribe(TOPIC_TIMERS, self._on_timer)

    # -- lifecycle ---------------------------------------------------------

    def start_driving_task(
        self, event: DrivingEvent, bounds: TimeBounds | ZeroBudget | None = None
    ) -> DrivingTaskProcess:
        """Activate a new driving task for a fresh sensing trigger."""
        if self.process is not None:
            raise ValueError("a driving task is already active")
        if bounds is None:
            bounds = self.estimator.compute_time_bounds(event, self.vehicle)

        if isinstance(bounds, ZeroBudget):
            process = DrivingTaskProcess(event, None, self.architecture, zero_budget=True)
            self.process = process
            self.bus.trace.emit(
                self.bus.now, "supervisor", "bounds",
                event=event.id, zero_budget=True, tth=bounds.tth_ms,
            )
            if (
                self.architecture is Architecture.ALL_OR_NOTHING
                and not self.guard_enabled
            ):
                # No safety machinery to invoke: run the pipeline unbudgeted.
                self._build_tasks(process, budgets=None)
                self._set_phase(process, Phase.OPPORTUNISTIC)
                self._start_stage(process, 0)
            else:
                self._set_phase(process, Phase.SAFE_FALLBACK)
                self._issue_fallback(process, 0)
            return process

        process = DrivingTaskProcess(event, bounds, self.architecture)
        self.process = process
        self.bus.trace.emit(
            self.bus.now, "supervisor", "bounds",
            event=event.id, origin=bounds.origin, tte=bounds.tte_ms,
            tth=bounds.tth_ms, smod_wcet=bounds.smod_wcet_ms,
        )

        budgeted = self.architecture is not Architecture.ALL_OR_NOTHING
        budgets = allocate_budgets(bounds, self.stages, self.policy)
        process.budgets = budgets
        self.bus.trace.emit(
            self.bus.now, "supervisor", "allocation",
            policy=self.policy.kind.value,
            budgets=",".join(str(b) for b in budgets),
        )
        self._build_tasks(process, budgets if budgeted else None)

        if budgeted:
            deadline = bounds.origin
            for i, task in enumerate(process.tasks):
                deadline += budgets[i]
                task.deadline_at = deadline
                self._stage_timers[i] = self.bus.set_timer(
                    deadline, TimerKind.TTE_EXPIRY, tag=f"stage:{i}"
                )
            self._guard = self.bus.set_timer(
                bounds.tth_at, TimerKind.TTH_GUARD, tag="guard"
            )
        elif self.guard_enabled:
            # Emergency short circuit: one window for the whole pipeline,
            # placed so the fallback still completes before the deadline.
            self._emergency = self.bus.set_timer(
                bounds.tte_at, TimerKind.TTE_EXPIRY, tag="emergency"
            )
            self._guard = self.bus.set_timer(
                bounds.tth_at, TimerKind.TTH_GUARD, tag="guard"
            )

        self._set_phase(process, Phase.OPPORTUNISTIC)
        self._start_stage(process, 0)
        return process

    def _build_tasks(
        self, process: DrivingTaskProcess, budgets: list[int] | None
    ) -> None:
        for i, stage in enumerate(self.stages):
            self._task_seq += 1
            process.tasks.append(
                StageTask(
                    id=f"t{self._task_seq}",
                    event_id=process.event.id,
                    stage_name=stage.name,
                    budget_ms=None if budgets is None else budgets[i],
                    deadline_at=None,
                )
            )

    def _start_stage(self, process: DrivingTaskProcess, idx: int) -> None:
        task = process.tasks[idx]
        now = self.bus.now
        if task.budget_ms is not None:
            # Chained deadline: the stage keeps only its own budget. An early
            # predecessor tightens the armed expiry; slack is not reused.
            deadline = now + task.budget_ms
            timer = self._stage_timers[idx]
            if timer is not None and deadline < timer.fire_at:
                self.bus.cancel_timer(timer)
                self._stage_timers[idx] = self.bus.set_timer(
                    deadline, TimerKind.TTE_EXPIRY, tag=f"stage:{idx}"
                )
            task.deadline_at = min(deadline, task.deadline_at or deadline)
        mode = {
            Architecture.SAVVY: TuningMode.TUNED,
            Architecture.SIMPLEX_LIKE: TuningMode.TOP_ONLY,
            Architecture.ALL_OR_NOTHING: TuningMode.UNBOUNDED,
        }[self.architecture]
        event = process.event
        cap = (
            coop_level_cap(event.kind, event.cooperative)
            if event.kind.cooperative
            else None
        )
        self.bus.publish(
            TOPIC_DETAIL, StageStart(task, event.object_truth, cap, mode)
        )

    # -- bus callbacks -----------------------------------------------------

    def _on_preliminary(self, delivery: Delivery) -> None:
        event = delivery.payload
        if not isinstance(event, DrivingEvent):
            return
        if self.process is not None:
            self.bus.trace.emit(
                self.bus.now, "supervisor", "transition",
                event=event.id, to="ignored", reason="task_active",
            )
            return
        self.start_driving_task(event)

    def _on_stage_result(self, delivery: Delivery) -> None:
        process = self.process
        if process is None:
            return
        msg = delivery.payload
        if isinstance(msg, StageNoFeasible):
            idx = self._stage_index(msg.task)
            self._fall_back(process, idx)
            return
        if not isinstance(msg, StageDelivered):
            return
        if process.final_command is not None:
            self.bus.trace.emit(
                self.bus.now, "supervisor", "discard",
                task=msg.task.id, reason="process_already_completed",
            )
            return
        idx = self._stage_index(msg.task)
        msg.task.transition(TaskStatus.DELIVERED)
        self.bus.trace.emit(
            self.bus.now, f"tsim.{msg.task.stage_name}", "transition",
            task=msg.task.id, to="delivered", level=msg.result.level,
            observed=_obs(msg.result), correct=msg.result.correct,
            elapsed=msg.result.elapsed_ms,
        )
        timer = self._stage_timers[idx]
        if timer is not None:
            self.bus.cancel_timer(timer)
            self._stage_timers[idx] = None
        if idx + 1 < len(process.tasks):
            self._start_stage(process, idx + 1)
        else:
            self._complete_from_chain(process)

    def _on_timer(self, delivery: Delivery) -> None:
        process = self.process
        fired = delivery.payload
        if process is None or not isinstance(fired, TimerFired):
            return
        handle = fired.handle
        if handle.kind is TimerKind.TTH_GUARD:
            if process.final_command is None:
                # Must be unreachable when bounds were honoured. Record the
                # fault loudly, then still push the safest thing we have.
                self._record_fault(process, "tth_guard_without_command")
                self._fall_back(process, self._first_open_stage(process))
            return
        if handle.kind is not TimerKind.TTE_EXPIRY:
            return
        if handle.tag == "emergency":
            if process.final_command is None:
                self._fall_back(process, self._first_open_stage(process))
            return
        idx = int(handle.tag.split(":", 1)[1])
        task = process.tasks[idx]
        if task.status is TaskStatus.DELIVERED:
            return
        if task.will_deliver_at is not None and task.will_deliver_at <= handle.fire_at:
            return  # result lands on the deadline tick; it counts as delivered
        self._fall_back(process, idx)

    # -- completion paths --------------------------------------------------

    def _complete_from_chain(self, process: DrivingTaskProcess) -> None:
        results = [t.result for t in process.tasks if t.result is not None]
        # The chain is only as good as its weakest stage: the decision is
        # keyed to the lowest delivered level (earliest stage on ties).
        deciding = min(results, key=lambda r: r.level)
        process.deciding_result = deciding
        action = decide_action(deciding, self.ladder, self.taxonomy)
        row = observation_row(deciding, self.taxonomy)
        command = ActuatorCommand(
            action=action,
            issued_at=self.bus.now,
            source=CommandSource("dmod", deciding.level),
            basis_level=row,
        )
        process.final_command = command
        self.bus.publish(TOPIC_ACTUATORS, command)
        self.bus.trace.emit(
            self.bus.now, "supervisor", "command",
            action=str(action), at=command.issued_at,
            source=str(command.source), basis_row=row,
        )
        self._disarm(process)
        self._set_phase(process, Phase.COMPLETED)

    def _fall_back(self, process: DrivingTaskProcess, idx: int) -> None:
        if process.final_command is not None:
            return
        self._set_phase(process, Phase.SAFE_FALLBACK)
        self._issue_fallback(process, idx)

    def _issue_fallback(self, process: DrivingTaskProcess, idx: int) -> None:
        stage = self.stages[idx]
        task = process.tasks[idx] if idx < len(process.tasks) else None
        command, fault = fire_smod(stage, task, self.bus, process.bounds)
        process.final_command = command
        if fault:
            self._record_fault(process, "fallback_breached_deadline")
        self._disarm(process)
        self._set_phase(process, Phase.COMPLETED)

    def _disarm(self, process: DrivingTaskProcess) -> None:
        for i, timer in enumerate(self._stage_timers):
            if timer is not None:
                self.bus.cancel_timer(timer)
                self._stage_timers[i] = None
        for handle in (self._guard, self._emergency):
            if handle is not None:
                self.bus.cancel_timer(handle)
        self._guard = None
        self._emergency = None

    # -- helpers -----------------------------------------------------------

    def _set_phase(self, process: DrivingTaskProcess, phase: Phase) -> None:
        process.phase = phase
        self.bus.trace.emit(
            self.bus.now, "supervisor", "transition",
            event=process.event.id, to=phase.value,
        )

    def _record_fault(self, process: DrivingTaskProcess, reason: str) -> None:
        process.fault_count += 1
        self.fault_count += 1
        self.bus.trace.emit(self.bus.now, "supervisor", "fault", reason=reason)

    def _stage_index(self, task: StageTask) -> int:
        for i, t in enumerate(self.process.tasks):  # type: ignore[union-attr]
            if t.id == task.id:
                return i
        raise ValueError(f"task {task.id} does not belong to the active process")

    def _first_open_stage(self, process: DrivingTaskProcess) -> int:
        for i, task in enumerate(process.tasks):
            if task.status is not TaskStatus.DELIVERED:
                return i
        return len(process.tasks) - 1


def _obs(result: InferenceResult) -> str:
    if isinstance(result.observed, int):
        return f"coop_level_{result.observed}"
    return result.observed.value
