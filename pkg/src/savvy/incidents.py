"""Replayable reconstructions of seven investigated vehicle incidents.

Each fixture is a scenario calibrated to the public investigation record of a
real incident. Only the numbers the reports actually state are treated as
ground truth (for the 2018 Tempe pedestrian case: detection 6.0 s before
impact, braking decision 4.7 s after first detection, 1.3 s before impact);
every other constant is a labelled reconstruction choice. Run one fixture
under different architectures to compare how the same situation ends.
"""

from __future__ import annotations

from .domain import CoopSensing, ObjectClass, ScenarioKind
from .models import AnytimeProfile, Constant, LevelProfile, Triangular, default_profile
from .scenario import ObjectSpec, ScenarioSpec, SimConstants, VehicleSpec

INCIDENT_IDS = ("I1", "I2", "I3", "I4", "I5", "I6", "I7")


def incident_fixture(incident_id: str) -> ScenarioSpec:
    """Calibrated scenario for one of the bundled incident reconstructions."""
    try:
        builder = _BUILDERS[incident_id.upper()]
    except KeyError:
        raise ValueError(
            f"unknown incident {incident_id!r}; known: {', '.join(INCIDENT_IDS)}"
        ) from None
    return builder()


def _const_profile(kind: ScenarioKind, values_ms: list[float], accuracy: float) -> AnytimeProfile:
    return AnytimeProfile(
        kind,
        {
            i: LevelProfile(Constant(v), accuracy)
            for i, v in enumerate(values_ms, start=1)
        },
    )


def _accuracies(kind: ScenarioKind, accuracies: list[float]) -> AnytimeProfile:
    base = default_profile(kind)
    return AnytimeProfile(
        kind,
        {
            i: LevelProfile(base.levels[i].latency, accuracies[i - 1])
            for i in range(1, base.top_level + 1)
        },
    )


# Shared constant-latency tables (ms per level) for the exactly-reconstructed
# incidents. The per-stage richest levels sum to 4.7 s, the decision delay the
# Tempe investigation reports.
_SENSE_MS = [80, 200, 420, 800, 1500, 2400, 3500]
_PLAN_MS = [40, 90, 180, 360, 600, 820, 1000]
_ACT_MS = [20, 40, 60, 90, 120, 160, 200]


def _i1() -> ScenarioSpec:
    """Pedestrian crossing at night, struck by a car whose software needed
    4.7 s after first detection to decide on braking; emergency braking was
    disabled. Detection-to-impact 6.0 s (60 m at 10 m/s here)."""
    oa = ScenarioKind.OBSTACLE_AVOIDANCE
    return ScenarioSpec(
        name="i1-pedestrian-crossing",
        kind=oa,
        vehicle=VehicleSpec(position_m=0.0, speed_mps=10.0, max_decel_mps2=5.0),
        objects=(
            ObjectSpec("pedestrian", ObjectClass.HUMAN, position_m=60.0, crossing=True),
        ),
        detection_distance_m=60.0,
        constants=SimConstants(horizon_ms=12_000, guard_enabled=False),
        profiles={
            "sense": _const_profile(oa, _SENSE_MS, 1.0),
            "plan": _const_profile(oa, _PLAN_MS, 1.0),
            "act": _const_profile(oa, _ACT_MS, 1.0),
        },
    )


def _i2() -> ScenarioSpec:
    """Lane-keep assist veering toward oncoming traffic after a windshield
    swap left the camera uncalibrated. Modelled as a degraded-accuracy
    profile: outputs arrive on time but are often wrong."""
    oa = ScenarioKind.OBSTACLE_AVOIDANCE
    degraded = _accuracies(oa, [0.90, 0.75, 0.75, 0.75, 0.75, 0.75, 0.75])
    return ScenarioSpec(
        name="i2-miscalibrated-camera",
        kind=oa,
        vehicle=VehicleSpec(speed_mps=12.0),
        objects=(
            ObjectSpec("oncoming", ObjectClass.VEHICLE, position_m=45.0, crossing=True),
        ),
        detection_distance_m=45.0,
        constants=SimConstants(horizon_ms=6_000, guard_enabled=True),
        profiles={s: degraded for s in ("sense", "plan", "act")},
    )


def _i3() -> ScenarioSpec:
    """Crash attenuator impact under cruise + lane-keep: the barrier was
    never classified before contact and no safety short circuit slowed the
    car. Reconstruction: rich classification far slower than time-to-contact,
    emergency guard off."""
    oa = ScenarioKind.OBSTACLE_AVOIDANCE
    sense = list(_SENSE_MS)
    sense[6] = 4000.0  # the attenuator stayed unclassified until too late
    return ScenarioSpec(
        name="i3-crash-attenuator",
        kind=oa,
        vehicle=VehicleSpec(speed_mps=15.0),
        objects=(
            ObjectSpec("attenuator", ObjectClass.ATTENUATOR, position_m=80.0),
        ),
        detection_distance_m=80.0,
        constants=SimConstants(horizon_ms=9_000, guard_enabled=False),
        profiles={
            "sense": _const_profile(oa, sense, 1.0),
            "plan": _const_profile(oa, _PLAN_MS, 1.0),
            "act": _const_profile(oa, _ACT_MS, 1.0),
        },
    )


def _i4() -> ScenarioSpec:
    """Stationary fire truck revealed only when the lead vehicle swerved
    away. Modelled as a short preliminary-detection range: by reveal time
    even an immediate full stop no longer fits the hazard interval, so the
    supervisor's only play is the immediate fallback."""
    oa = ScenarioKind.OBSTACLE_AVOIDANCE
    return ScenarioSpec(
        name="i4-stopped-firetruck",
        kind=oa,
        vehicle=VehicleSpec(speed_mps=15.0),
        objects=(
            ObjectSpec("firetruck", ObjectClass.TRUCK, position_m=90.0),
        ),
        detection_distance_m=35.0,
        constants=SimConstants(horizon_ms=10_000, guard_enabled=False),
        profiles={
            "sense": _const_profile(oa, _SENSE_MS, 1.0),
            "plan": _const_profile(oa, _PLAN_MS, 1.0),
            "act": _const_profile(oa, _ACT_MS, 1.0),
        },
    )


def _i5() -> ScenarioSpec:
    """Tractor trailer crossing the highway, missed by the camera (white
    against a bright sky) and filtered by radar. Modelled as rich levels
    that are both slow and unreliable, while coarse object detection stays
    sound; opportunistic braking must come from the shallow levels."""
    oa = ScenarioKind.OBSTACLE_AVOIDANCE
    base = default_profile(oa)
    sense = AnytimeProfile(
        oa,
        {
            1: LevelProfile(base.levels[1].latency, 0.97),
            2: LevelProfile(base.levels[2].latency, 0.97),
            3: LevelProfile(base.levels[3].latency, 0.95),
            4: LevelProfile(Triangular(400, 700, 1300), 0.35),
            5: LevelProfile(Triangular(700, 1200, 2200), 0.32),
            6: LevelProfile(Triangular(1100, 1900, 3300), 0.30),
            7: LevelProfile(Triangular(1500, 2600, 4200), 0.30),
        },
    )
    support = _accuracies(oa, [0.97] * 7)
    return ScenarioSpec(
        name="i5-crossing-trailer",
        kind=oa,
        vehicle=VehicleSpec(speed_mps=17.0),
        objects=(
            ObjectSpec("trailer", ObjectClass.TRUCK, position_m=90.0, crossing=True),
        ),
        detection_distance_m=90.0,
        constants=SimConstants(horizon_ms=9_000, guard_enabled=False),
        profiles={"sense": sense, "plan": support, "act": support},
    )


def _i6() -> ScenarioSpec:
    """Slow street sweeper struck without any braking attempt. The system
    required camera and radar to agree before acting; modelled as a flat
    accuracy penalty on every level of an otherwise nominal profile."""
    oa = ScenarioKind.OBSTACLE_AVOIDANCE
    base = default_profile(oa)
    penalized = AnytimeProfile(
        oa,
        {
            i: LevelProfile(base.levels[i].latency, round(base.levels[i].accuracy * 0.6, 3))
            for i in range(1, 8)
        },
    )
    return ScenarioSpec(
        name="i6-street-sweeper",
        kind=oa,
        vehicle=VehicleSpec(speed_mps=13.0),
        objects=(
            ObjectSpec("sweeper", ObjectClass.VEHICLE, position_m=70.0, speed_mps=1.0),
        ),
        detection_distance_m=70.0,
        constants=SimConstants(horizon_ms=9_000, guard_enabled=False),
        profiles={s: penalized for s in ("sense", "plan", "act")},
    )


def _i7() -> ScenarioSpec:
    """Unprotected left turn in front of an oncoming car: the planner had to
    choose between two risk pictures and reacted too slowly to the sudden
    path change. Without cooperation the ladder caps at its coarsest rung,
    whose action is a conservative brake; the race is purely about deciding
    in time."""
    ca = ScenarioKind.CRASH_AVOIDANCE
    nominal = _accuracies(ca, [1.0] * 5)
    return ScenarioSpec(
        name="i7-unprotected-left",
        kind=ca,
        vehicle=VehicleSpec(speed_mps=12.0),
        objects=(
            ObjectSpec("oncoming", ObjectClass.VEHICLE, position_m=40.0, crossing=True),
        ),
        detection_distance_m=40.0,
        cooperative=CoopSensing.NONE,
        constants=SimConstants(horizon_ms=6_000, guard_enabled=False),
        profiles={s: nominal for s in ("sense", "plan", "act")},
    )


_BUILDERS = {
    "I1": _i1,
    "I2": _i2,
    "I3": _i3,
    "I4": _i4,
    "I5": _i5,
    "I6": _i6,
    "I7": _i7,
}
