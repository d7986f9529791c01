"""Scenario file parsing, validation reporting, and round-tripping."""

from __future__ import annotations

from pathlib import Path
from random import Random

import pytest

from savvy.domain import ActionCommand, CoopSensing, ObjectClass, ScenarioKind
from savvy.incidents import INCIDENT_IDS, incident_fixture
from savvy.models import LogNormalLike, Triangular
from savvy.scenario import (
    ScenarioFormatError,
    ScenarioSpec,
    emit_scenario_file,
    normalize_scenario_file,
    parse_scenario_file,
)
from savvy.supervisor import Architecture, PolicyKind

from conftest import random_triangular_profile


def test_empty_text_gives_full_defaults():
    spec = parse_scenario_file("")
    assert spec.kind is ScenarioKind.OBSTACLE_AVOIDANCE
    assert spec.architecture is Architecture.SAVVY
    assert spec.vehicle.speed_mps == 10.0
    assert set(spec.profiles) == {"sense", "plan", "act"}
    assert len(spec.ladder) == 7
    assert spec.constants.smod_wcet_ms == 300


def test_minimal_file_fills_defaults():
    spec = parse_scenario_file(
        """
        # a pedestrian ahead
        [scenario]
        name = demo
        kind = obstacle_avoidance

        [object pedestrian]
        class = human
        position_m = 60
        crossing = true
        """
    )
    assert spec.name == "demo"
    assert spec.objects[0].truth is ObjectClass.HUMAN
    assert spec.objects[0].crossing
    assert spec.policy.kind is PolicyKind.STATIC_EVEN


def test_profile_monotonicity_violation_is_named_with_line():
    text = """
[profile sense]
l1 = constant:100 @ 0.9
l2 = constant:50 @ 0.9
l3 = constant:200 @ 0.9
l4 = constant:300 @ 0.9
l5 = constant:400 @ 0.9
l6 = constant:500 @ 0.9
l7 = constant:600 @ 0.9
"""
    with pytest.raises(ScenarioFormatError) as err:
        parse_scenario_file(text)
    assert any("monotonicity" in msg for _, msg in err.value.errors)
    lines = [line for line, _ in err.value.errors]
    assert all(line > 0 for line in lines)


def test_all_errors_reported_with_line_numbers():
    text = """[vehicle]
speed_mps = fast
bogus_key = 1

[object thing]
class = spaceship
position_m = 10
"""
    with pytest.raises(ScenarioFormatError) as err:
        parse_scenario_file(text)
    found = err.value.errors
    assert any(line == 2 and "number" in msg for line, msg in found)
    assert any(line == 3 and "unknown key" in msg for line, msg in found)
    assert any(line == 6 and "spaceship" in msg for line, msg in found)


def test_accuracy_out_of_range_rejected():
    text = """
[profile]
l1 = constant:10 @ 1.5
l2 = constant:20 @ 0.9
l3 = constant:30 @ 0.9
l4 = constant:40 @ 0.9
l5 = constant:50 @ 0.9
l6 = constant:60 @ 0.9
l7 = constant:70 @ 0.9
"""
    with pytest.raises(ScenarioFormatError) as err:
        parse_scenario_file(text)
    assert any("accuracy" in msg for _, msg in err.value.errors)


def test_ladder_override_and_profile_resize():
    text = """
[scenario]
kind = obstacle_avoidance

[ladder]
l1 = brake | anything seen
l2 = continue | all clear
"""
    spec = parse_scenario_file(text)
    assert len(spec.ladder) == 2
    assert spec.ladder[0].action.commands == (ActionCommand.BRAKE,)
    assert spec.ladder[1].sensing_label == "all clear"
    for profile in spec.profiles.values():
        assert profile.top_level == 2


def test_bare_profile_with_per_stage_override():
    lines = "\n".join(f"l{i} = constant:{10 * i} @ 0.9" for i in range(1, 8))
    text = f"[profile]\n{lines}\n\n[profile sense]\nl7 = constant:999 @ 0.5\n"
    spec = parse_scenario_file(text)
    assert spec.profiles["sense"].levels[7].latency.value_ms == 999
    assert spec.profiles["sense"].levels[7].accuracy == 0.5
    assert spec.profiles["plan"].levels[7].latency.value_ms == 70
    assert spec.profiles["sense"].levels[1].latency.value_ms == 10


def test_ladder_deeper_than_taxonomy_rejected():
    rows = "\n".join(f"l{i} = brake | row {i}" for i in range(1, 9))
    with pytest.raises(ScenarioFormatError, match="taxonomy"):
        parse_scenario_file(f"[ladder]\n{rows}\n")


def test_taxonomy_override():
    text = """
[taxonomy]
human = unknown_object:1, obstructive_rational:7
debris = unknown_object:1, non_obstructive_shaped:2
"""
    spec = parse_scenario_file(text)
    assert set(spec.taxonomy.leaves) == {ObjectClass.HUMAN, ObjectClass.DEBRIS}
    assert spec.taxonomy.classify(ObjectClass.HUMAN, 6) is ObjectClass.UNKNOWN_OBJECT


def test_smod_override():
    text = """
[smod]
action = brake, stop
wcet_ms = 150
"""
    spec = parse_scenario_file(text)
    assert spec.fallback_action.commands == (ActionCommand.BRAKE, ActionCommand.STOP)
    assert spec.fallback_wcet_ms == 150


def test_cooperative_flag_requires_cooperative_kind():
    text = """
[scenario]
kind = obstacle_avoidance

[detection]
cooperative = active
"""
    with pytest.raises(ScenarioFormatError) as err:
        parse_scenario_file(text)
    assert any("cooperative" in msg for _, msg in err.value.errors)


def test_round_trip_fixture_files():
    for incident in INCIDENT_IDS:
        spec = incident_fixture(incident)
        text = emit_scenario_file(spec)
        assert parse_scenario_file(text) == spec


def test_shipped_scenario_files_match_fixtures():
    # The annotated files under scenarios/ are the documented examples; they
    # must stay exactly equivalent to the programmatic fixtures.
    root = Path(__file__).resolve().parent.parent / "scenarios"
    for incident in INCIDENT_IDS:
        path = root / f"{incident.lower()}.svy"
        assert path.exists(), path
        assert parse_scenario_file(path.read_text()) == incident_fixture(incident)


def test_round_trip_randomized_specs():
    rng = Random(99)
    for i in range(30):
        kind = rng.choice(list(ScenarioKind))
        coop = (
            rng.choice(list(CoopSensing)) if kind.cooperative else CoopSensing.NONE
        )
        profiles = {
            s: random_triangular_profile(rng, kind) for s in ("sense", "plan", "act")
        }
        spec = ScenarioSpec(
            name=f"random-{i}",
            kind=kind,
            cooperative=coop,
            profiles=profiles,
        )
        text = emit_scenario_file(spec)
        assert parse_scenario_file(text) == spec


def test_spec_rejects_mismatched_profiles():
    from savvy.models import AnytimeProfile, Constant, LevelProfile, default_profile

    with pytest.raises(ValueError, match="is for"):
        ScenarioSpec(
            kind=ScenarioKind.OBSTACLE_AVOIDANCE,
            profiles={
                s: default_profile(ScenarioKind.OVERTAKING)
                for s in ("sense", "plan", "act")
            },
        )
    short = AnytimeProfile(
        ScenarioKind.OBSTACLE_AVOIDANCE,
        {i: LevelProfile(Constant(10 * i), 0.9) for i in range(1, 5)},
        n_levels=4,
    )
    with pytest.raises(ValueError, match="levels"):
        ScenarioSpec(
            kind=ScenarioKind.OBSTACLE_AVOIDANCE,
            profiles={s: short for s in ("sense", "plan", "act")},
        )
    with pytest.raises(ValueError, match="stages"):
        ScenarioSpec(
            profiles={"sense": default_profile(ScenarioKind.OBSTACLE_AVOIDANCE)}
        )


def test_normalize_is_idempotent():
    text = """
# noise and reordering
[vehicle]
speed_mps = 12.5

[scenario]
name = x
"""
    once = normalize_scenario_file(text)
    assert normalize_scenario_file(once) == once


def test_overrides_emit_and_round_trip():
    text = """
[scenario]
kind = obstacle_avoidance

[ladder]
l1 = brake | anything seen
l2 = continue | all clear

[smod]
action = brake, stop
wcet_ms = 150

[taxonomy]
human = unknown_object:1, obstructive_rational:7
debris = unknown_object:1, non_obstructive_shaped:2
"""
    spec = parse_scenario_file(text)
    emitted = emit_scenario_file(spec)
    assert "[ladder]" in emitted
    assert "[smod]" in emitted
    assert "[taxonomy]" in emitted
    assert parse_scenario_file(emitted) == spec


def test_lognormal_latency_round_trip():
    text = """
[profile sense]
l1 = lognorm:50:1.3 @ 0.9
l2 = tri:60:80:100 @ 0.9
l3 = constant:120 @ 0.9
l4 = constant:140 @ 0.9
l5 = constant:160 @ 0.9
l6 = constant:180 @ 0.9
l7 = constant:200 @ 0.9
"""
    spec = parse_scenario_file(text)
    sense = spec.profiles["sense"]
    assert isinstance(sense.levels[1].latency, LogNormalLike)
    assert isinstance(sense.levels[2].latency, Triangular)
    assert parse_scenario_file(emit_scenario_file(spec)) == spec
