"""Broker ordering, timer semantics, and determinism."""

from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from savvy.bus import EventBus, TimerKind, TOPIC_ACTUATORS, TOPIC_PRELIMINARY


def collect(bus, topic):
    got = []
    bus.subscribe(topic, lambda d: got.append(d))
    return got


def test_same_tick_delivery():
    bus = EventBus()
    got = collect(bus, TOPIC_ACTUATORS)
    bus.publish(TOPIC_ACTUATORS, "brake", at=bus.now)
    bus.advance_until(bus.now)
    assert [d.payload for d in got] == ["brake"]


def test_boundary_not_yet_due():
    bus = EventBus()
    got = collect(bus, TOPIC_PRELIMINARY)
    bus.publish(TOPIC_PRELIMINARY, "event", at=50)
    bus.advance_until(49)
    assert got == []
    assert bus.now == 49
    bus.advance_until(50)
    assert [d.payload for d in got] == ["event"]


def test_equal_fire_time_is_fifo():
    # Oracle: enumerate both publish orders of two same-time messages; the
    # delivery order must equal the publish order each time.
    for first, second in itertools.permutations(["a", "b"]):
        bus = EventBus()
        got = collect(bus, TOPIC_ACTUATORS)
        bus.publish(TOPIC_ACTUATORS, first, at=10)
        bus.publish(TOPIC_ACTUATORS, second, at=10)
        bus.advance_until(10)
        assert [d.payload for d in got] == [first, second]


def test_delivery_order_matches_sorted_oracle():
    # Items at 10, 10, 5 inserted in that order: stable sort on (fire, seq).
    bus = EventBus()
    got = collect(bus, TOPIC_ACTUATORS)
    entries = [("m1", 10), ("m2", 10), ("m3", 5)]
    seqs = {}
    for payload, at in entries:
        seqs[payload] = bus.publish(TOPIC_ACTUATORS, payload, at=at)
    bus.advance_until(20)
    oracle = [p for p, at in sorted(entries, key=lambda e: (e[1], seqs[e[0]]))]
    assert [d.payload for d in got] == oracle == ["m3", "m1", "m2"]


def test_timer_and_message_share_global_fifo():
    bus = EventBus()
    deliveries = []
    bus.subscribe(TOPIC_ACTUATORS, lambda d: deliveries.append(("msg", d.payload)))
    bus.subscribe(
        "supervisor.timers", lambda d: deliveries.append(("timer", d.payload.handle.tag))
    )
    bus.set_timer(10, TimerKind.CUSTOM, tag="t1")
    bus.publish(TOPIC_ACTUATORS, "m1", at=10)
    bus.advance_until(10)
    assert deliveries == [("timer", "t1"), ("msg", "m1")]


def test_timer_fires_exactly_once():
    bus = EventBus()
    fired = []
    bus.subscribe("supervisor.timers", lambda d: fired.append(d.payload.handle.id))
    handle = bus.set_timer(5, TimerKind.TTE_EXPIRY)
    bus.advance_until(100)
    bus.advance_until(200)
    assert fired == [handle.id]
    assert handle.delivered


def test_timer_at_now_fires_on_next_advance():
    bus = EventBus()
    fired = []
    bus.subscribe("supervisor.timers", lambda d: fired.append(d.at))
    bus.set_timer(bus.now)
    bus.advance_until(bus.now)
    assert fired == [0]


def test_cancelled_timer_never_fires():
    bus = EventBus()
    fired = []
    bus.subscribe("supervisor.timers", lambda d: fired.append(d))
    handle = bus.set_timer(5, TimerKind.TTE_EXPIRY)
    handle.cancel()
    bus.advance_until(100)
    assert fired == []


def test_fired_timer_cannot_be_uncancelled():
    bus = EventBus()
    handle = bus.set_timer(5, TimerKind.TTE_EXPIRY)
    bus.advance_until(5)
    handle.cancel()
    assert handle.delivered and not handle.cancelled


def test_empty_advance_moves_clock():
    bus = EventBus()
    assert bus.advance_until(100) == []
    assert bus.now == 100


def test_rejects_scheduling_in_past():
    bus = EventBus()
    bus.advance_until(100)
    with pytest.raises(ValueError):
        bus.publish(TOPIC_ACTUATORS, "x", at=99)
    with pytest.raises(ValueError):
        bus.set_timer(99)
    with pytest.raises(ValueError):
        bus.advance_until(99)


def test_rejects_unknown_topic():
    bus = EventBus()
    with pytest.raises(ValueError):
        bus.publish("nope", "x")


def test_handler_publishing_same_tick_is_delivered_in_same_advance():
    bus = EventBus()
    got = []

    def reflect(delivery):
        if delivery.payload == "ping":
            bus.publish(TOPIC_ACTUATORS, "pong", at=bus.now)
        got.append(delivery.payload)

    bus.subscribe(TOPIC_ACTUATORS, reflect)
    bus.publish(TOPIC_ACTUATORS, "ping", at=7)
    bus.advance_until(7)
    assert got == ["ping", "pong"]


ops_strategy = st.lists(
    st.tuples(st.sampled_from(["msg", "timer"]), st.integers(0, 50)),
    min_size=1,
    max_size=30,
)


@settings(max_examples=200, deadline=None)
@given(ops=ops_strategy)
def test_determinism_and_no_time_travel(ops):
    def run():
        bus = EventBus()
        seen = []
        bus.subscribe(TOPIC_ACTUATORS, lambda d: seen.append(("m", d.at, d.seq)))
        bus.subscribe(
            "supervisor.timers",
            lambda d: seen.append(("t", d.at, d.seq)),
        )
        for i, (kind, at) in enumerate(ops):
            if kind == "msg":
                bus.publish(TOPIC_ACTUATORS, i, at=at)
            else:
                bus.set_timer(at, TimerKind.CUSTOM, tag=str(i))
        bus.advance_until(60)
        return seen

    first, second = run(), run()
    assert first == second  # identical call sequences, identical deliveries
    times = [at for _, at, _ in first]
    assert times == sorted(times)  # no delivery goes back in time
    assert len(first) == len(ops)  # exactly-once
