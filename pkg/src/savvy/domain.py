"""Shared driving-domain vocabulary.

Scenario kinds, their quality-degradation ladders, the obstacle taxonomy used
by graded classification, and the time-bound contract every driving task runs
under. Pure value types; all timestamps and durations are integer virtual
milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping


class ScenarioKind(Enum):
    OBSTACLE_AVOIDANCE = "obstacle_avoidance"
    INTERSECTION_CROSSING = "intersection_crossing"
    OVERTAKING = "overtaking"
    CRASH_AVOIDANCE = "crash_avoidance"

    @property
    def cooperative(self) -> bool:
        """Kinds whose ladder levels describe cooperative-sensing richness."""
        return self is not ScenarioKind.OBSTACLE_AVOIDANCE


class ActionCommand(Enum):
    BRAKE = "brake"
    BEEP = "beep"
    CONTINUE = "continue"
    CONTINUE_SLOWLY = "continue_slowly"
    STEER_AWAY = "steer_away"
    GIVE_WAY = "give_way"
    STOP = "stop"
    SLOW_DOWN = "slow_down"
    MANEUVER = "maneuver"
    AGREEMENT = "agreement"
    CONTINUE_LATER = "continue_later"


# Commands that bring the vehicle to a full stop / reduce speed.
STOPPING_COMMANDS = frozenset(
    {ActionCommand.BRAKE, ActionCommand.STOP, ActionCommand.GIVE_WAY}
)
SLOWING_COMMANDS = frozenset(
    {ActionCommand.CONTINUE_SLOWLY, ActionCommand.SLOW_DOWN}
)


@dataclass(frozen=True)
class ActionSpec:
    """An ordered, non-empty set of actuator commands issued together."""

    commands: tuple[ActionCommand, ...]

    def __post_init__(self) -> None:
        if not self.commands:
            raise ValueError("ActionSpec requires at least one command")
        for cmd in self.commands:
            if not isinstance(cmd, ActionCommand):
                raise ValueError(f"unknown action command: {cmd!r}")

    @property
    def stopping(self) -> bool:
        return any(c in STOPPING_COMMANDS for c in self.commands)

    @property
    def slowing(self) -> bool:
        return any(c in SLOWING_COMMANDS for c in self.commands)

    def __str__(self) -> str:
        return "+".join(c.value for c in self.commands)


def action(*commands: ActionCommand) -> ActionSpec:
    return ActionSpec(tuple(commands))


class ObjectClass(Enum):
    """Obstacle-taxonomy nodes plus ground-truth leaf kinds.

    Category nodes are what a graded classifier can report; leaf kinds are
    what the world actually contains. Each leaf resolves to exactly one
    category node per classification depth.
    """

    UNKNOWN_OBJECT = "unknown_object"
    NON_OBSTRUCTIVE_SHAPED = "non_obstructive_shaped"
    NON_OBSTRUCTIVE_MATERIAL = "non_obstructive_material"
    OBSTRUCTIVE_AVOIDABLE = "obstructive_avoidable"
    OBSTRUCTIVE_UNAVOIDABLE = "obstructive_unavoidable"
    OBSTRUCTIVE_MOBILE = "obstructive_mobile"
    OBSTRUCTIVE_RATIONAL = "obstructive_rational"

    HUMAN = "human"
    ANIMAL = "animal"
    VEHICLE = "vehicle"
    TRUCK = "truck"
    DEBRIS = "debris"
    HERB_PLANT = "herb_plant"
    SNOW = "snow"
    ROAD_SIGN = "road_sign"
    ATTENUATOR = "attenuator"


_U = ObjectClass.UNKNOWN_OBJECT
_SHAPED = ObjectClass.NON_OBSTRUCTIVE_SHAPED
_MATERIAL = ObjectClass.NON_OBSTRUCTIVE_MATERIAL
_AVOIDABLE = ObjectClass.OBSTRUCTIVE_AVOIDABLE
_UNAVOIDABLE = ObjectClass.OBSTRUCTIVE_UNAVOIDABLE
_MOBILE = ObjectClass.OBSTRUCTIVE_MOBILE
_RATIONAL = ObjectClass.OBSTRUCTIVE_RATIONAL

OBSTRUCTIVE_CATEGORIES = frozenset(
    {_AVOIDABLE, _UNAVOIDABLE, _MOBILE, _RATIONAL}
)


@dataclass(frozen=True)
class Taxonomy:
    """Per-leaf classification paths through the category tree.

    ``paths[leaf]`` lists (node, depth) pairs in root-to-leaf order, always
    starting at (UNKNOWN_OBJECT, 1). A depth-d classifier reports the deepest
    node on the path whose depth does not exceed d, so classifications only
    refine (never contradict) as depth grows.
    """

    paths: Mapping[ObjectClass, tuple[tuple[ObjectClass, int], ...]]
    max_depth: int = 7

    def __post_init__(self) -> None:
        node_depth: dict[ObjectClass, int] = {}
        node_parent: dict[ObjectClass, ObjectClass | None] = {}
        for leaf, path in self.paths.items():
            if not path or path[0] != (_U, 1):
                raise ValueError(f"path for {leaf.value} must start at the root")
            prev: ObjectClass | None = None
            prev_depth = 0
            for node, depth in path:
                if depth <= prev_depth:
                    raise ValueError(f"path depths for {leaf.value} must increase")
                if depth > self.max_depth:
                    raise ValueError(f"depth {depth} exceeds max depth {self.max_depth}")
                if node_depth.setdefault(node, depth) != depth:
                    raise ValueError(f"{node.value} appears at two different depths")
                if node_parent.setdefault(node, prev) != prev:
                    raise ValueError(f"{node.value} has two different parents")
                prev, prev_depth = node, depth

    @property
    def leaves(self) -> tuple[ObjectClass, ...]:
        return tuple(self.paths)

    def classify(self, truth: ObjectClass, depth: int) -> ObjectClass:
        """Category a depth-``depth`` classifier reports for ``truth``.

        Saturates once the leaf's own category depth is reached.
        """
        if truth not in self.paths:
            raise ValueError(f"{truth.value} is not a ground-truth leaf kind")
        if not 1 <= depth <= self.max_depth:
            raise ValueError(f"depth {depth} outside [1, {self.max_depth}]")
        result = _U
        for node, node_depth in self.paths[truth]:
            if node_depth <= depth:
                result = node
        return result

    def nodes_at_depth(self, depth: int) -> tuple[ObjectClass, ...]:
        """All categories a depth-``depth`` classifier can report."""
        seen = {self.classify(leaf, depth) for leaf in self.paths}
        return tuple(n for n in ObjectClass if n in seen)

    def category_of(self, truth: ObjectClass) -> ObjectClass:
        """The leaf's own (deepest) category."""
        return self.paths[truth][-1][0]

    def depth_of(self, node: ObjectClass) -> int:
        """Classification depth at which ``node`` becomes reportable."""
        for path in self.paths.values():
            for candidate, depth in path:
                if candidate is node:
                    return depth
        raise ValueError(f"{node.value} is not a taxonomy node")

    def is_ancestor(self, ancestor: ObjectClass, node: ObjectClass) -> bool:
        """Reflexive ancestor relation over the category tree."""
        if ancestor is node:
            return True
        for path in self.paths.values():
            nodes = [n for n, _ in path]
            if node in nodes:
                return ancestor in nodes[: nodes.index(node)]
        return False

    def is_obstructive(self, truth: ObjectClass) -> bool:
        return self.category_of(truth) in OBSTRUCTIVE_CATEGORIES

    def is_avoidable(self, truth: ObjectClass) -> bool:
        return self.category_of(truth) is _AVOIDABLE


DEFAULT_TAXONOMY = Taxonomy(
    {
        ObjectClass.HUMAN: ((_U, 1), (_MOBILE, 6), (_RATIONAL, 7)),
        ObjectClass.ANIMAL: ((_U, 1), (_MOBILE, 6)),
        ObjectClass.VEHICLE: ((_U, 1), (_MOBILE, 6)),
        ObjectClass.TRUCK: ((_U, 1), (_MOBILE, 6)),
        ObjectClass.DEBRIS: ((_U, 1), (_SHAPED, 2)),
        ObjectClass.HERB_PLANT: ((_U, 1), (_SHAPED, 2), (_MATERIAL, 3)),
        ObjectClass.SNOW: ((_U, 1), (_SHAPED, 2), (_MATERIAL, 3)),
        ObjectClass.ROAD_SIGN: ((_U, 1), (_AVOIDABLE, 4)),
        ObjectClass.ATTENUATOR: ((_U, 1), (_UNAVOIDABLE, 5)),
    }
)


def classify_at_depth(
    truth: ObjectClass, depth: int, taxonomy: Taxonomy = DEFAULT_TAXONOMY
) -> ObjectClass:
    """Ancestor of ``truth`` at classification depth ``depth``."""
    return taxonomy.classify(truth, depth)


@dataclass(frozen=True)
class QualityLevel:
    """One rung of a scenario's degradation ladder.

    Lower indices are coarse and fast; higher indices are richer and slower.
    ``action`` is the default decision mapped to an observation at this rung.
    """

    scenario: ScenarioKind
    index: int
    sensing_label: str
    action: ActionSpec

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError("level index starts at 1")


_A = ActionCommand

_LADDERS: dict[ScenarioKind, tuple[tuple[str, tuple[ActionCommand, ...]], ...]] = {
    ScenarioKind.OBSTACLE_AVOIDANCE: (
        ("An object detected at safety distance", (_A.BRAKE, _A.BEEP)),
        ("Non obstructive shaped (flat, small, short) object detected", (_A.CONTINUE,)),
        ("Non obstructive material object detected (rubber, herb plant, snow)", (_A.CONTINUE_SLOWLY,)),
        ("Obstructive avoidable object detected", (_A.BEEP, _A.STEER_AWAY)),
        ("Obstructive unavoidable material object detected", (_A.BRAKE, _A.BEEP)),
        ("Obstructive mobile object detected (auto, animal)", (_A.BRAKE, _A.GIVE_WAY, _A.CONTINUE_LATER)),
        ("Obstructive rational object (human) detected", (_A.BRAKE, _A.STOP, _A.CONTINUE_LATER)),
    ),
    ScenarioKind.INTERSECTION_CROSSING: (
        ("No cooperative sensing", (_A.BRAKE,)),
        ("Cooperative sensing (e.g, RSU) short distance", (_A.BRAKE,)),
        ("Cooperative sensing (e.g, RSU) long distance", (_A.CONTINUE,)),
        ("Cooperative active sensing", (_A.AGREEMENT,)),
    ),
    ScenarioKind.OVERTAKING: (
        ("No cooperative sensing", (_A.CONTINUE,)),
        ("Cooperative sensing (e.g, RSU) short distance", (_A.SLOW_DOWN,)),
        ("Cooperative sensing (e.g, RSU) long distance", (_A.MANEUVER,)),
        ("Cooperative active sensing", (_A.AGREEMENT,)),
    ),
    ScenarioKind.CRASH_AVOIDANCE: (
        ("No cooperative sensing", (_A.BRAKE,)),
        ("Cooperative sensing (e.g, RSU) short front distance", (_A.STOP,)),
        ("Cooperative sensing (e.g, RSU) long front distance", (_A.SLOW_DOWN,)),
        ("Cooperative sensing (e.g, RSU) short front and back distance", (_A.MANEUVER,)),
        ("Cooperative active sensing", (_A.AGREEMENT,)),
    ),
}


def load_level_ladder(kind: ScenarioKind) -> list[QualityLevel]:
    """Default degradation ladder for a scenario kind, in level order."""
    return [
        QualityLevel(kind, i, label, ActionSpec(cmds))
        for i, (label, cmds) in enumerate(_LADDERS[kind], start=1)
    ]


def ladder_size(kind: ScenarioKind) -> int:
    return len(_LADDERS[kind])


class CoopSensing(Enum):
    """Cooperative-sensing availability around the vehicle."""

    NONE = "none"
    RSU_SHORT = "rsu_short"
    RSU_LONG = "rsu_long"
    ACTIVE = "active"


# Highest ladder level each availability grade can genuinely support.
_COOP_CAPS: dict[ScenarioKind, dict[CoopSensing, int]] = {
    ScenarioKind.INTERSECTION_CROSSING: {
        CoopSensing.NONE: 1, CoopSensing.RSU_SHORT: 2,
        CoopSensing.RSU_LONG: 3, CoopSensing.ACTIVE: 4,
    },
    ScenarioKind.OVERTAKING: {
        CoopSensing.NONE: 1, CoopSensing.RSU_SHORT: 2,
        CoopSensing.RSU_LONG: 3, CoopSensing.ACTIVE: 4,
    },
    ScenarioKind.CRASH_AVOIDANCE: {
        CoopSensing.NONE: 1, CoopSensing.RSU_SHORT: 2,
        CoopSensing.RSU_LONG: 3, CoopSensing.ACTIVE: 5,
    },
}


def coop_level_cap(kind: ScenarioKind, coop: CoopSensing) -> int:
    """Highest ladder level reachable given the available cooperation."""
    if not kind.cooperative:
        raise ValueError(f"{kind.value} has no cooperative-sensing levels")
    return _COOP_CAPS[kind][coop]


@dataclass(frozen=True)
class TimeBounds:
    """The time interval a driving task must respect.

    ``tte_ms`` is the opportunistic window in which tunable inference may
    deliver; ``tth_ms`` is the hard hazard deadline by which the whole task,
    including the safe-operational fallback, must complete. ``smod_wcet_ms``
    is the execution time reserved for that fallback chain.
    """

    origin: int
    tte_ms: int
    tth_ms: int
    smod_wcet_ms: int

    def __post_init__(self) -> None:
        if self.origin < 0:
            raise ValueError("origin must be >= 0")
        if self.smod_wcet_ms < 0:
            raise ValueError("smod_wcet_ms must be >= 0")
        if not 0 <= self.tte_ms <= self.tth_ms:
            raise ValueError(
                f"need 0 <= tte <= tth, got tte={self.tte_ms} tth={self.tth_ms}"
            )
        if self.tte_ms + self.smod_wcet_ms > self.tth_ms:
            raise ValueError(
                "safe-operational chain does not fit: "
                f"tte={self.tte_ms} + smod_wcet={self.smod_wcet_ms} > tth={self.tth_ms}"
            )

    @property
    def tte_at(self) -> int:
        return self.origin + self.tte_ms

    @property
    def tth_at(self) -> int:
        return self.origin + self.tth_ms


@dataclass(frozen=True)
class DrivingEvent:
    """A preliminary-sensing trigger: something needs a decision."""

    id: str
    kind: ScenarioKind
    detected_at: int
    object_truth: ObjectClass
    object_distance_m: float
    cooperative: CoopSensing = CoopSensing.NONE

    def __post_init__(self) -> None:
        if self.object_distance_m <= 0:
            raise ValueError("object_distance_m must be > 0")
        if not self.kind.cooperative and self.cooperative is not CoopSensing.NONE:
            raise ValueError(
                f"cooperative sensing is not meaningful for {self.kind.value}"
            )


@dataclass(frozen=True)
class CommandSource:
    """Who produced an actuator command: the tuned chain or a fallback rule."""

    kind: str  # "dmod" | "smod"
    level: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("dmod", "smod"):
            raise ValueError(f"unknown command source {self.kind!r}")
        if self.kind == "smod" and self.level is not None:
            raise ValueError("fallback commands carry no level")

    def __str__(self) -> str:
        return f"dmod(L{self.level})" if self.kind == "dmod" else "smod"


@dataclass(frozen=True)
class ActuatorCommand:
    """An action released to the actuators at a point in virtual time.

    ``basis_level`` is the ladder level the deciding observation claimed,
    recorded so downstream consumers can judge whether a permissive action
    rested on genuinely available information.
    """

    action: ActionSpec
    issued_at: int
    source: CommandSource
    basis_level: int | None = None
