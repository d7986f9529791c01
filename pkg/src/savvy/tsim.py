"""Budgeted pipeline stages.

Each stage pairs a tunable inference model with a design-time fallback rule.
Tuning picks the richest quality level whose estimated delivery time fits the
stage budget; a stage that cannot or does not deliver inside its budget never
publishes a result, and the supervisor's expiry timer hands the task to the
fallback instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from random import Random

from .bus import Delivery, EventBus, TOPIC_ACTUATORS, TOPIC_DETAIL, TOPIC_RESULTS
from .domain import ActionSpec, ActuatorCommand, CommandSource, ObjectClass, TimeBounds
from .models import AnytimeProfile, InferenceResult, ModelConfig, infer, latency_quantile


@dataclass(frozen=True)
class FallbackRule:
    """Design-time safe action and its worst-case execution time."""

    action: ActionSpec
    wcet_ms: int

    def __post_init__(self) -> None:
        if self.wcet_ms < 0:
            raise ValueError("wcet_ms must be >= 0")


@dataclass
class PipelineStage:
    """One time-sensitive module: a tunable model plus its fallback rule."""

    name: str  # "sense", "plan", "act", or custom
    profile: AnytimeProfile
    fallback: FallbackRule


class TaskStatus(Enum):
    PENDING = "pending"
    RUNNING = "running"
    DELIVERED = "delivered"
    TIMED_OUT = "timed_out"


_TERMINAL = {TaskStatus.DELIVERED, TaskStatus.TIMED_OUT}


class TuningMode(Enum):
    TUNED = "tuned"          # richest level that fits the budget
    TOP_ONLY = "top_only"    # richest level or nothing (conservative baseline)
    UNBOUNDED = "unbounded"  # richest level, budget ignored


@dataclass
class StageTask:
    """A budgeted unit of work bound to one stage of one driving task."""

    id: str
    event_id: str
    stage_name: str
    budget_ms: int | None  # None = unbudgeted
    deadline_at: int | None
    status: TaskStatus = TaskStatus.PENDING
    tuned_level: int | None = None
    will_deliver_at: int | None = None
    result: InferenceResult | None = None

    def transition(self, status: TaskStatus) -> None:
        if self.status in _TERMINAL:
            raise ValueError(f"task {self.id} already {self.status.value}")
        if status is TaskStatus.RUNNING and self.status is not TaskStatus.PENDING:
            raise ValueError(f"task {self.id} cannot start from {self.status.value}")
        self.status = status


class DeliveryTimeEstimator:
    """Quantile-based delivery-time estimate for each quality level.

    ``estimate(level)`` is the level's latency quantile at the planning order
    ``q`` (default 0.95), rounded up to whole milliseconds. With inverse-CDF
    sampling the probability of overrunning the estimate is at most 1 - q.
    """

    def __init__(self, profile: AnytimeProfile, q: float = 0.95):
        if not 0 < q < 1:
            raise ValueError(f"planning quantile must be in (0, 1), got {q}")
        self.profile = profile
        self.q = q
        self._cache: dict[int, int] = {}

    def estimate(self, level: int) -> int:
        if level not in self._cache:
            self._cache[level] = math.ceil(
                latency_quantile(self.profile.latency_model(level), self.q)
            )
        return self._cache[level]


def tune(
    profile: AnytimeProfile, ted: DeliveryTimeEstimator, budget_ms: int
) -> ModelConfig | None:
    """Richest level whose estimated delivery fits the budget.

    Returns None when even the coarsest level does not fit; that is a normal
    outcome (the caller goes straight to the fallback), not an error.
    """
    if budget_ms < 0:
        raise ValueError("budget_ms must be >= 0")
    for level in range(profile.top_level, 0, -1):
        if ted.estimate(level) <= budget_ms:
            return ModelConfig(level)
    return None


@dataclass(frozen=True)
class StageStart:
    """Supervisor -> stage kickoff message (sensors.detail)."""

    task: StageTask
    truth: ObjectClass
    coop_cap: int | None
    mode: TuningMode

    @property
    def task_id(self) -> str:
        return self.task.id


@dataclass(frozen=True)
class StageDelivered:
    """Stage -> supervisor result message (tsim.results)."""

    task: StageTask
    result: InferenceResult

    @property
    def task_id(self) -> str:
        return self.task.id


@dataclass(frozen=True)
class StageNoFeasible:
    """Stage -> supervisor: no level fits the budget; fall back now."""

    task: StageTask

    @property
    def task_id(self) -> str:
        return self.task.id


def execute_task(
    stage: PipelineStage,
    task: StageTask,
    truth: ObjectClass,
    bus: EventBus,
    rng: Random,
    ted: DeliveryTimeEstimator,
    coop_cap: int | None = None,
    mode: TuningMode = TuningMode.TUNED,
) -> None:
    """Run one stage task starting now.

    The inference's elapsed time is drawn up front (virtual time): a draw
    within budget schedules the result on ``tsim.results`` at completion
    time; an overrun is discarded without publishing anything, leaving the
    expiry timer to take the task over; an infeasible budget reports the
    takeover immediately.
    """
    task.transition(TaskStatus.RUNNING)
    start = bus.now
    bus.trace.emit(
        start, f"tsim.{stage.name}", "transition",
        task=task.id, to="running",
        budget="unbounded" if task.budget_ms is None else task.budget_ms,
    )

    top = stage.profile.top_level
    if mode is TuningMode.UNBOUNDED or task.budget_ms is None:
        config: ModelConfig | None = ModelConfig(top)
    elif mode is TuningMode.TOP_ONLY:
        config = ModelConfig(top) if ted.estimate(top) <= task.budget_ms else None
    else:
        config = tune(stage.profile, ted, task.budget_ms)

    if config is None:
        task.transition(TaskStatus.TIMED_OUT)
        bus.trace.emit(
            start, f"tsim.{stage.name}", "transition",
            task=task.id, to="timed_out", reason="no_feasible_level",
        )
        bus.publish(TOPIC_RESULTS, StageNoFeasible(task))
        return

    task.tuned_level = config.level
    result = infer(stage.profile, config, truth, rng, coop_cap=coop_cap)
    done = start + result.elapsed_ms

    if task.budget_ms is None or mode is TuningMode.UNBOUNDED or result.elapsed_ms <= task.budget_ms:
        task.will_deliver_at = done
        task.result = result
        bus.publish(TOPIC_RESULTS, StageDelivered(task, result), at=done)
    else:
        # Overrun: the result must never influence actuation. Log and drop.
        bus.trace.emit(
            start, f"tsim.{stage.name}", "discard",
            task=task.id, level=config.level,
            would_complete_at=done, budget=task.budget_ms,
        )


class StageWorker:
    """Bus-facing wrapper running one stage's tasks as kickoffs arrive."""

    def __init__(self, bus: EventBus, stage: PipelineStage, rng: Random, q: float = 0.95):
        self.bus = bus
        self.stage = stage
        self.rng = rng
        self.ted = DeliveryTimeEstimator(stage.profile, q)
        bus.subscribe(TOPIC_DETAIL, self._on_detail)

    def _on_detail(self, delivery: Delivery) -> None:
        msg = delivery.payload
        if not isinstance(msg, StageStart) or msg.task.stage_name != self.stage.name:
            return
        if msg.task.status is not TaskStatus.PENDING:
            # A zero-width window lets the expiry timer take the task over
            # in the same tick its kickoff was published; the stale kickoff
            # must not restart it.
            return
        execute_task(
            self.stage, msg.task, msg.truth, self.bus, self.rng, self.ted,
            coop_cap=msg.coop_cap, mode=msg.mode,
        )


def fire_smod(
    stage: PipelineStage,
    task: StageTask | None,
    bus: EventBus,
    bounds: TimeBounds | None,
) -> tuple[ActuatorCommand, bool]:
    """Publish the stage's design-time safe action, honouring its WCET.

    Returns the command and whether issuing it breached the hazard deadline
    (a safety-violation fault; unreachable when bounds were respected).
    """
    issued_at = bus.now + stage.fallback.wcet_ms
    command = ActuatorCommand(
        action=stage.fallback.action,
        issued_at=issued_at,
        source=CommandSource("smod"),
    )
    fault = bounds is not None and issued_at > bounds.tth_at
    if task is not None and task.status not in _TERMINAL:
        task.transition(TaskStatus.TIMED_OUT)
    bus.publish(TOPIC_ACTUATORS, command, at=issued_at)
    bus.trace.emit(
        bus.now, f"tsim.{stage.name}", "command",
        action=str(stage.fallback.action), at=issued_at, source="smod",
    )
    return command, fault
