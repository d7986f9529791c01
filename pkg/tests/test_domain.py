"""Ladders, taxonomy, and time-bound invariants."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from savvy.domain import (
    ActionCommand,
    ActionSpec,
    CoopSensing,
    DrivingEvent,
    ObjectClass,
    ScenarioKind,
    Taxonomy,
    TimeBounds,
    DEFAULT_TAXONOMY,
    classify_at_depth,
    coop_level_cap,
    ladder_size,
    load_level_ladder,
)

A = ActionCommand


LADDER_SIZES = {
    ScenarioKind.OBSTACLE_AVOIDANCE: 7,
    ScenarioKind.INTERSECTION_CROSSING: 4,
    ScenarioKind.OVERTAKING: 4,
    ScenarioKind.CRASH_AVOIDANCE: 5,
}


@pytest.mark.parametrize("kind,size", LADDER_SIZES.items())
def test_ladder_sizes(kind, size):
    ladder = load_level_ladder(kind)
    assert len(ladder) == size
    assert [row.index for row in ladder] == list(range(1, size + 1))


def test_obstacle_ladder_first_row():
    ladder = load_level_ladder(ScenarioKind.OBSTACLE_AVOIDANCE)
    assert ladder[0].sensing_label == "An object detected at safety distance"
    assert ladder[0].action.commands == (A.BRAKE, A.BEEP)


def test_overtaking_first_row_continues():
    ladder = load_level_ladder(ScenarioKind.OVERTAKING)
    assert ladder[0].sensing_label == "No cooperative sensing"
    assert ladder[0].action.commands == (A.CONTINUE,)


def test_crash_avoidance_top_row_is_agreement():
    ladder = load_level_ladder(ScenarioKind.CRASH_AVOIDANCE)
    assert ladder[4].action.commands == (A.AGREEMENT,)


def test_obstacle_ladder_actions():
    ladder = load_level_ladder(ScenarioKind.OBSTACLE_AVOIDANCE)
    assert ladder[1].action.commands == (A.CONTINUE,)
    assert ladder[3].action.commands == (A.BEEP, A.STEER_AWAY)
    assert ladder[6].action.commands == (A.BRAKE, A.STOP, A.CONTINUE_LATER)


def test_classify_examples():
    assert classify_at_depth(ObjectClass.HUMAN, 1) is ObjectClass.UNKNOWN_OBJECT
    assert classify_at_depth(ObjectClass.ANIMAL, 6) is ObjectClass.OBSTRUCTIVE_MOBILE
    assert classify_at_depth(ObjectClass.HUMAN, 7) is ObjectClass.OBSTRUCTIVE_RATIONAL


def test_classify_saturates_at_leaf_depth():
    assert classify_at_depth(ObjectClass.DEBRIS, 2) is ObjectClass.NON_OBSTRUCTIVE_SHAPED
    assert classify_at_depth(ObjectClass.DEBRIS, 7) is ObjectClass.NON_OBSTRUCTIVE_SHAPED


def test_classify_depth_out_of_range():
    with pytest.raises(ValueError):
        classify_at_depth(ObjectClass.HUMAN, 0)
    with pytest.raises(ValueError):
        classify_at_depth(ObjectClass.HUMAN, 8)


def test_classify_rejects_category_nodes():
    with pytest.raises(ValueError):
        classify_at_depth(ObjectClass.OBSTRUCTIVE_MOBILE, 3)


def test_taxonomy_consistency_full_enumeration():
    # classify(x, d1) must be an ancestor of classify(x, d2) whenever d1 <= d2.
    tax = DEFAULT_TAXONOMY
    for leaf in tax.leaves:
        for d1 in range(1, tax.max_depth + 1):
            for d2 in range(d1, tax.max_depth + 1):
                shallow = tax.classify(leaf, d1)
                deep = tax.classify(leaf, d2)
                assert tax.is_ancestor(shallow, deep), (leaf, d1, d2)


def test_every_leaf_has_node_at_every_depth():
    tax = DEFAULT_TAXONOMY
    for leaf in tax.leaves:
        for depth in range(1, tax.max_depth + 1):
            node = tax.classify(leaf, depth)
            assert node in ObjectClass
            assert tax.depth_of(node) <= depth


def test_taxonomy_rejects_conflicting_depths():
    with pytest.raises(ValueError):
        Taxonomy(
            {
                ObjectClass.HUMAN: (
                    (ObjectClass.UNKNOWN_OBJECT, 1),
                    (ObjectClass.OBSTRUCTIVE_MOBILE, 6),
                ),
                ObjectClass.ANIMAL: (
                    (ObjectClass.UNKNOWN_OBJECT, 1),
                    (ObjectClass.OBSTRUCTIVE_MOBILE, 5),
                ),
            }
        )


def test_time_bounds_examples():
    bounds = TimeBounds(origin=0, tte_ms=3200, tth_ms=3500, smod_wcet_ms=300)
    assert bounds.tte_at == 3200
    assert bounds.tth_at == 3500


@given(
    tte=st.integers(min_value=-100, max_value=5000),
    slack=st.integers(min_value=-400, max_value=2000),
    wcet=st.integers(min_value=0, max_value=500),
)
def test_time_bounds_constructor_rejects_all_violations(tte, slack, wcet):
    tth = tte + wcet + slack
    valid = 0 <= tte <= tth and tte + wcet <= tth
    if valid:
        TimeBounds(origin=0, tte_ms=tte, tth_ms=tth, smod_wcet_ms=wcet)
    else:
        with pytest.raises(ValueError):
            TimeBounds(origin=0, tte_ms=tte, tth_ms=tth, smod_wcet_ms=wcet)


def test_action_spec_requires_commands():
    with pytest.raises(ValueError):
        ActionSpec(())


def test_event_rejects_coop_flags_for_obstacle_kind():
    with pytest.raises(ValueError):
        DrivingEvent(
            id="e",
            kind=ScenarioKind.OBSTACLE_AVOIDANCE,
            detected_at=0,
            object_truth=ObjectClass.HUMAN,
            object_distance_m=10.0,
            cooperative=CoopSensing.ACTIVE,
        )


def test_event_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        DrivingEvent(
            id="e",
            kind=ScenarioKind.OBSTACLE_AVOIDANCE,
            detected_at=0,
            object_truth=ObjectClass.HUMAN,
            object_distance_m=0.0,
        )


def test_coop_caps_cover_ladder():
    for kind in (
        ScenarioKind.INTERSECTION_CROSSING,
        ScenarioKind.OVERTAKING,
        ScenarioKind.CRASH_AVOIDANCE,
    ):
        assert coop_level_cap(kind, CoopSensing.NONE) == 1
        assert coop_level_cap(kind, CoopSensing.ACTIVE) == ladder_size(kind)
    with pytest.raises(ValueError):
        coop_level_cap(ScenarioKind.OBSTACLE_AVOIDANCE, CoopSensing.NONE)
