"""Deterministic virtual-time pub/sub with timers.

The broker owns the simulation clock. Messages and timers sit in one priority
queue keyed by (fire time, insertion order), so runs with identical call
sequences deliver identical sequences. Everything happens on one logical
execution stream; handlers may publish and arm timers while a delivery is in
progress.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .trace import TraceLog

TOPIC_PRELIMINARY = "sensors.preliminary"
TOPIC_DETAIL = "sensors.detail"
TOPIC_RESULTS = "tsim.results"
TOPIC_ACTUATORS = "actuators"
TOPIC_TIMERS = "supervisor.timers"

TOPICS = frozenset(
    {TOPIC_PRELIMINARY, TOPIC_DETAIL, TOPIC_RESULTS, TOPIC_ACTUATORS, TOPIC_TIMERS}
)


class TimerKind(Enum):
    TTE_EXPIRY = "tte_expiry"
    TTH_GUARD = "tth_guard"
    CUSTOM = "custom"


@dataclass
class TimerHandle:
    id: int
    fire_at: int
    kind: TimerKind
    tag: str = ""
    cancelled: bool = False
    delivered: bool = False

    def cancel(self) -> None:
        # A timer that already fired stays fired.
        if not self.delivered:
            self.cancelled = True


@dataclass(frozen=True)
class TimerFired:
    handle: TimerHandle


@dataclass(frozen=True)
class Delivery:
    at: int
    seq: int
    topic: str
    payload: Any


@dataclass(order=True)
class _Entry:
    fire_at: int
    seq: int
    topic: str = field(compare=False)
    payload: Any = field(compare=False)
    handle: TimerHandle | None = field(compare=False, default=None)


class EventBus:
    """Single-stream virtual-time broker; ties break in insertion order."""

    def __init__(self, trace: TraceLog | None = None, start: int = 0):
        self._now = start
        self._seq = 0
        self._queue: list[_Entry] = []
        self._subscribers: dict[str, list[Callable[[Delivery], None]]] = {
            t: [] for t in TOPICS
        }
        self.trace = trace if trace is not None else TraceLog(level=0)

    @property
    def now(self) -> int:
        return self._now

    def subscribe(self, topic: str, handler: Callable[[Delivery], None]) -> None:
        self._check_topic(topic)
        self._subscribers[topic].append(handler)

    def publish(self, topic: str, payload: Any, at: int | None = None) -> int:
        self._check_topic(topic)
        fire_at = self._now if at is None else at
        if fire_at < self._now:
            raise ValueError(f"cannot publish at {fire_at} < now {self._now}")
        entry = _Entry(fire_at, self._next_seq(), topic, payload)
        heapq.heappush(self._queue, entry)
        self.trace.emit(
            self._now, "bus", "publish",
            topic=topic, at=fire_at, payload=_summary(payload),
        )
        return entry.seq

    def set_timer(
        self, fire_at: int, kind: TimerKind = TimerKind.CUSTOM, tag: str = ""
    ) -> TimerHandle:
        if fire_at < self._now:
            raise ValueError(f"cannot arm timer at {fire_at} < now {self._now}")
        handle = TimerHandle(self._next_seq(), fire_at, kind, tag)
        heapq.heappush(
            self._queue, _Entry(fire_at, handle.id, TOPIC_TIMERS, None, handle)
        )
        self.trace.emit(
            self._now, "bus", "timer_set",
            timer=handle.id, at=fire_at, kind=kind.value, tag=tag,
        )
        return handle

    def cancel_timer(self, handle: TimerHandle) -> None:
        if not handle.delivered and not handle.cancelled:
            handle.cancel()
            self.trace.emit(
                self._now, "bus", "timer_cancel", timer=handle.id, tag=handle.tag
            )

    def next_event_at(self) -> int | None:
        """Fire time of the earliest pending non-cancelled item."""
        while self._queue:
            head = self._queue[0]
            if head.handle is not None and head.handle.cancelled:
                heapq.heappop(self._queue)
                continue
            return head.fire_at
        return None

    def advance_until(self, t: int) -> list[Delivery]:
        """Deliver everything due at or before ``t``; clock ends at ``t``.

        Items enqueued by handlers during the advance are delivered too when
        they fall inside the window.
        """
        if t < self._now:
            raise ValueError(f"cannot advance to {t} < now {self._now}")
        delivered: list[Delivery] = []
        while self._queue and self._queue[0].fire_at <= t:
            entry = heapq.heappop(self._queue)
            if entry.handle is not None:
                if entry.handle.cancelled:
                    continue
                entry.handle.delivered = True
                payload: Any = TimerFired(entry.handle)
                kind = "timer_fire"
            else:
                payload = entry.payload
                kind = "deliver"
            self._now = entry.fire_at
            delivery = Delivery(entry.fire_at, entry.seq, entry.topic, payload)
            self.trace.emit(
                entry.fire_at, "bus", kind,
                topic=entry.topic, seq=entry.seq, payload=_summary(payload),
            )
            delivered.append(delivery)
            for handler in list(self._subscribers[entry.topic]):
                handler(delivery)
        self._now = max(self._now, t)
        return delivered

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    @staticmethod
    def _check_topic(topic: str) -> None:
        if topic not in TOPICS:
            raise ValueError(f"unknown topic {topic!r}")


def _summary(payload: Any) -> str:
    if isinstance(payload, TimerFired):
        h = payload.handle
        return f"timer:{h.kind.value}:{h.tag or h.id}"
    name = type(payload).__name__
    for attr in ("id", "task_id", "name"):
        ident = getattr(payload, attr, None)
        if ident is not None:
            return f"{name}:{ident}"
    return name
