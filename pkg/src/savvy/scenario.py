"""Scenario configuration and its file format.

A scenario file is line-oriented ``key = value`` text under ``[section]``
headers. Everything has a default, so a minimal file can be empty; parsing
collects every problem it finds (with line numbers) instead of stopping at
the first. ``emit_scenario_file`` writes the canonical form, so
``parse(emit(parse(text)))`` equals ``parse(text)``.

Sections: ``[scenario]``, ``[vehicle]``, ``[detection]``, ``[constants]``,
``[policy]``, ``[object NAME]``, ``[profile STAGE]`` (or ``[profile]`` for
all stages), ``[ladder]``, ``[smod]``, ``[taxonomy]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .domain import (
    ActionCommand,
    ActionSpec,
    CoopSensing,
    ObjectClass,
    QualityLevel,
    ScenarioKind,
    Taxonomy,
    DEFAULT_TAXONOMY,
    ladder_size,
    load_level_ladder,
)
from .models import (
    AnytimeProfile,
    Constant,
    LatencyModel,
    LevelProfile,
    LogNormalLike,
    Triangular,
    default_profile,
)
from .supervisor import Architecture, PolicyKind, SchedulingPolicy

STAGE_NAMES = ("sense", "plan", "act")


@dataclass(frozen=True)
class VehicleSpec:
    position_m: float = 0.0
    speed_mps: float = 10.0
    max_decel_mps2: float = 5.0

    def __post_init__(self) -> None:
        if self.speed_mps < 0:
            raise ValueError("speed_mps must be >= 0")
        if self.max_decel_mps2 <= 0:
            raise ValueError("max_decel_mps2 must be > 0")


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    truth: ObjectClass
    position_m: float
    speed_mps: float = 0.0
    crossing: bool = False


@dataclass(frozen=True)
class SimConstants:
    smod_wcet_ms: int = 300
    safety_margin_ms: int = 500
    planning_quantile: float = 0.95
    dt_ms: int = 10
    horizon_ms: int = 30_000
    slow_factor: float = 0.5
    guard_enabled: bool = True

    def __post_init__(self) -> None:
        if self.dt_ms <= 0:
            raise ValueError("dt_ms must be > 0")
        if not 0 < self.planning_quantile < 1:
            raise ValueError("planning_quantile must be in (0, 1)")
        if not 0 < self.slow_factor < 1:
            raise ValueError("slow_factor must be in (0, 1)")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "scenario"
    kind: ScenarioKind = ScenarioKind.OBSTACLE_AVOIDANCE
    architecture: Architecture = Architecture.SAVVY
    vehicle: VehicleSpec = VehicleSpec()
    objects: tuple[ObjectSpec, ...] = ()
    detection_distance_m: float = 60.0
    cooperative: CoopSensing = CoopSensing.NONE
    constants: SimConstants = SimConstants()
    policy: SchedulingPolicy = SchedulingPolicy()
    profiles: Mapping[str, AnytimeProfile] = field(default_factory=dict)
    ladder: tuple[QualityLevel, ...] = ()
    taxonomy: Taxonomy = DEFAULT_TAXONOMY
    smod_action: ActionSpec | None = None
    smod_wcet_ms: int | None = None

    def __post_init__(self) -> None:
        if not self.ladder:
            object.__setattr__(self, "ladder", tuple(load_level_ladder(self.kind)))
        if not self.profiles:
            object.__setattr__(
                self,
                "profiles",
                {s: default_profile(self.kind) for s in STAGE_NAMES},
            )
        if self.detection_distance_m <= 0:
            raise ValueError("detection_distance_m must be > 0")
        if set(self.profiles) != set(STAGE_NAMES):
            raise ValueError(f"profiles must cover stages {', '.join(STAGE_NAMES)}")
        if not self.kind.cooperative and len(self.ladder) > self.taxonomy.max_depth:
            raise ValueError(
                f"ladder has {len(self.ladder)} rows but the taxonomy only "
                f"distinguishes {self.taxonomy.max_depth} depths"
            )
        for stage, profile in self.profiles.items():
            if profile.scenario is not self.kind:
                raise ValueError(
                    f"profile {stage} is for {profile.scenario.value}, "
                    f"scenario kind is {self.kind.value}"
                )
            if profile.top_level != len(self.ladder):
                raise ValueError(
                    f"profile {stage} has {profile.top_level} levels, "
                    f"ladder has {len(self.ladder)}"
                )

    @property
    def fallback_action(self) -> ActionSpec:
        """Design-time safe action: explicit override or the coarsest rung's."""
        return self.smod_action if self.smod_action is not None else self.ladder[0].action

    @property
    def fallback_wcet_ms(self) -> int:
        return (
            self.smod_wcet_ms
            if self.smod_wcet_ms is not None
            else self.constants.smod_wcet_ms
        )


class ScenarioFormatError(ValueError):
    """One or more problems in a scenario file, each tagged with its line."""

    def __init__(self, errors: list[tuple[int, str]]):
        self.errors = errors
        super().__init__(
            "; ".join(f"line {line}: {msg}" for line, msg in errors)
        )


class _Collector:
    def __init__(self) -> None:
        self.errors: list[tuple[int, str]] = []

    def add(self, line: int, message: str) -> None:
        self.errors.append((line, message))


def parse_scenario_file(text: str) -> ScenarioSpec:
    """Parse scenario text into a fully validated spec.

    Raises ScenarioFormatError carrying every syntax or invariant violation
    found, each with the line number it was detected on.
    """
    errors = _Collector()
    sections = _split_sections(text, errors)

    kind = ScenarioKind.OBSTACLE_AVOIDANCE
    name = "scenario"
    architecture = Architecture.SAVVY
    for line_no, key, value in sections.get(("scenario", ""), []):
        if key == "name":
            name = value
        elif key == "kind":
            kind = _parse_enum(ScenarioKind, value, line_no, errors) or kind
        elif key == "architecture":
            architecture = (
                _parse_enum(Architecture, value, line_no, errors) or architecture
            )
        else:
            errors.add(line_no, f"unknown key {key!r} in [scenario]")

    ladder = _parse_ladder(sections.get(("ladder", "")), kind, errors)
    n_levels = len(ladder) if ladder else ladder_size(kind)
    taxonomy = _parse_taxonomy(sections.get(("taxonomy", "")), errors)
    vehicle = _parse_vehicle(sections.get(("vehicle", "")), errors)
    detection_m, coop = _parse_detection(sections.get(("detection", "")), kind, errors)
    constants = _parse_constants(sections.get(("constants", "")), errors)
    policy = _parse_policy(sections.get(("policy", "")), errors)
    objects = _parse_objects(sections, taxonomy, errors)
    profiles = _parse_profiles(sections, kind, n_levels, errors)
    smod_action, smod_wcet = _parse_smod(sections.get(("smod", "")), errors)

    for (header, label), entries in sections.items():
        if header not in (
            "scenario", "vehicle", "detection", "constants", "policy",
            "object", "profile", "ladder", "smod", "taxonomy",
        ):
            line = entries[0][0] if entries else 0
            errors.add(line, f"unknown section [{header}]")

    if errors.errors:
        raise ScenarioFormatError(sorted(errors.errors))

    try:
        return ScenarioSpec(
            name=name,
            kind=kind,
            architecture=architecture,
            vehicle=vehicle,
            objects=objects,
            detection_distance_m=detection_m,
            cooperative=coop,
            constants=constants,
            policy=policy,
            profiles=profiles,
            ladder=tuple(ladder),
            taxonomy=taxonomy,
            smod_action=smod_action,
            smod_wcet_ms=smod_wcet,
        )
    except ValueError as exc:
        raise ScenarioFormatError([(0, str(exc))]) from exc


def _split_sections(text, errors):
    """Group ``key = value`` lines under their [section] headers."""
    sections: dict[tuple[str, str], list[tuple[int, str, str]]] = {}
    current: tuple[str, str] | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            inner = line[1:-1].strip()
            parts = inner.split(None, 1)
            header = parts[0].lower() if parts else ""
            label = parts[1].strip() if len(parts) > 1 else ""
            current = (header, label)
            sections.setdefault(current, [])
            # register header line for unknown-section reporting
            if not sections[current]:
                sections[current] = []
                sections[current].append((line_no, "__header__", ""))
            continue
        if "=" not in line:
            errors.add(line_no, f"expected 'key = value', got {line!r}")
            continue
        key, _, value = line.partition("=")
        if current is None:
            errors.add(line_no, "key/value before any [section] header")
            continue
        sections[current].append((line_no, key.strip().lower(), value.strip()))
    return {
        section: [e for e in entries if e[1] != "__header__"] or entries
        for section, entries in sections.items()
    }


def _entries(section):
    return [e for e in (section or []) if e[1] != "__header__"]


def _parse_enum(enum_cls, value, line_no, errors):
    try:
        return enum_cls(value.strip().lower())
    except ValueError:
        choices = ", ".join(e.value for e in enum_cls)
        errors.add(line_no, f"{value!r} is not one of: {choices}")
        return None


def _parse_float(value, line_no, errors, key):
    try:
        return float(value)
    except ValueError:
        errors.add(line_no, f"{key}: expected a number, got {value!r}")
        return None


def _parse_int(value, line_no, errors, key):
    try:
        return int(value)
    except ValueError:
        errors.add(line_no, f"{key}: expected an integer, got {value!r}")
        return None


def _parse_bool(value, line_no, errors, key):
    low = value.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    errors.add(line_no, f"{key}: expected true/false, got {value!r}")
    return None


def _parse_vehicle(section, errors):
    values = {}
    for line_no, key, value in _entries(section):
        if key in ("position_m", "speed_mps", "max_decel_mps2"):
            parsed = _parse_float(value, line_no, errors, key)
            if parsed is not None:
                values[key] = parsed
        else:
            errors.add(line_no, f"unknown key {key!r} in [vehicle]")
    try:
        return VehicleSpec(**values)
    except ValueError as exc:
        line = _entries(section)[0][0] if _entries(section) else 0
        errors.add(line, f"vehicle: {exc}")
        return VehicleSpec()


def _parse_detection(section, kind, errors):
    distance = 60.0
    coop = CoopSensing.NONE
    for line_no, key, value in _entries(section):
        if key == "distance_m":
            parsed = _parse_float(value, line_no, errors, key)
            if parsed is not None:
                if parsed <= 0:
                    errors.add(line_no, "distance_m must be > 0")
                else:
                    distance = parsed
        elif key == "cooperative":
            parsed = _parse_enum(CoopSensing, value, line_no, errors)
            if parsed is not None:
                if parsed is not CoopSensing.NONE and not kind.cooperative:
                    errors.add(
                        line_no,
                        "cooperative sensing is only meaningful for "
                        "cooperative scenario kinds",
                    )
                else:
                    coop = parsed
        else:
            errors.add(line_no, f"unknown key {key!r} in [detection]")
    return distance, coop


_CONSTANT_KEYS = {
    "smod_wcet_ms": int,
    "safety_margin_ms": int,
    "planning_quantile": float,
    "dt_ms": int,
    "horizon_ms": int,
    "slow_factor": float,
    "guard_enabled": bool,
}


def _parse_constants(section, errors):
    values = {}
    for line_no, key, value in _entries(section):
        if key not in _CONSTANT_KEYS:
            errors.add(line_no, f"unknown key {key!r} in [constants]")
            continue
        typ = _CONSTANT_KEYS[key]
        if typ is int:
            parsed = _parse_int(value, line_no, errors, key)
        elif typ is float:
            parsed = _parse_float(value, line_no, errors, key)
        else:
            parsed = _parse_bool(value, line_no, errors, key)
        if parsed is not None:
            values[key] = parsed
    try:
        return SimConstants(**values)
    except ValueError as exc:
        line = _entries(section)[0][0] if _entries(section) else 0
        errors.add(line, f"constants: {exc}")
        return SimConstants()


def _parse_policy(section, errors):
    kind = PolicyKind.STATIC_EVEN
    weights = None
    for line_no, key, value in _entries(section):
        if key == "kind":
            parsed = _parse_enum(PolicyKind, value, line_no, errors)
            if parsed is not None:
                kind = parsed
        elif key == "weights":
            try:
                weights = tuple(float(w) for w in value.split(","))
            except ValueError:
                errors.add(line_no, f"weights: expected numbers, got {value!r}")
        else:
            errors.add(line_no, f"unknown key {key!r} in [policy]")
    try:
        return SchedulingPolicy(kind, weights)
    except ValueError as exc:
        line = _entries(section)[0][0] if _entries(section) else 0
        errors.add(line, f"policy: {exc}")
        return SchedulingPolicy()


def _parse_objects(sections, taxonomy, errors):
    objects = []
    for (header, label), section in sorted(sections.items()):
        if header != "object":
            continue
        if not label:
            line = section[0][0] if section else 0
            errors.add(line, "object sections need a name: [object NAME]")
            continue
        truth = None
        values: dict[str, object] = {}
        for line_no, key, value in _entries(section):
            if key == "class":
                parsed = _parse_enum(ObjectClass, value, line_no, errors)
                if parsed is not None:
                    if parsed not in taxonomy.leaves:
                        errors.add(
                            line_no,
                            f"{parsed.value} is not a ground-truth leaf kind",
                        )
                    else:
                        truth = parsed
            elif key in ("position_m", "speed_mps"):
                parsed = _parse_float(value, line_no, errors, key)
                if parsed is not None:
                    values[key] = parsed
            elif key == "crossing":
                parsed = _parse_bool(value, line_no, errors, key)
                if parsed is not None:
                    values[key] = parsed
            else:
                errors.add(line_no, f"unknown key {key!r} in [object {label}]")
        if truth is None:
            line = _entries(section)[0][0] if _entries(section) else 0
            errors.add(line, f"object {label!r} needs a class")
            continue
        if "position_m" not in values:
            line = _entries(section)[0][0] if _entries(section) else 0
            errors.add(line, f"object {label!r} needs position_m")
            continue
        objects.append(ObjectSpec(name=label, truth=truth, **values))  # type: ignore[arg-type]
    return tuple(objects)


def _parse_latency(value, line_no, errors) -> LatencyModel | None:
    parts = value.split(":")
    try:
        if parts[0] == "constant" and len(parts) == 2:
            return Constant(float(parts[1]))
        if parts[0] == "tri" and len(parts) == 4:
            return Triangular(float(parts[1]), float(parts[2]), float(parts[3]))
        if parts[0] == "lognorm" and len(parts) == 3:
            return LogNormalLike(float(parts[1]), float(parts[2]))
    except ValueError as exc:
        errors.add(line_no, f"latency model: {exc}")
        return None
    errors.add(
        line_no,
        f"latency model must be constant:V, tri:LO:MODE:HI or "
        f"lognorm:MEDIAN:SPREAD, got {value!r}",
    )
    return None


def _parse_level_key(key, line_no, errors):
    if key.startswith("l") and key[1:].isdigit():
        return int(key[1:])
    errors.add(line_no, f"expected a level key like 'l1', got {key!r}")
    return None


def _parse_profiles(sections, kind, n_levels, errors):
    tables: dict[str, dict[int, LevelProfile]] = {}
    lines: dict[str, int] = {}
    for (header, label), section in sorted(sections.items()):
        if header != "profile":
            continue
        stage_names = STAGE_NAMES if not label else (label,)
        for stage in stage_names:
            if stage not in STAGE_NAMES:
                line = section[0][0] if section else 0
                errors.add(
                    line,
                    f"unknown stage {stage!r}; stages are {', '.join(STAGE_NAMES)}",
                )
                continue
            table = tables.setdefault(stage, {})
            for line_no, key, value in _entries(section):
                lines.setdefault(stage, line_no)
                level = _parse_level_key(key, line_no, errors)
                if level is None:
                    continue
                if "@" not in value:
                    errors.add(
                        line_no, f"expected 'LATENCY @ ACCURACY', got {value!r}"
                    )
                    continue
                lat_text, _, acc_text = value.partition("@")
                latency = _parse_latency(lat_text.strip(), line_no, errors)
                accuracy = _parse_float(acc_text.strip(), line_no, errors, "accuracy")
                if latency is None or accuracy is None:
                    continue
                try:
                    table[level] = LevelProfile(latency, accuracy)
                except ValueError as exc:
                    errors.add(line_no, str(exc))

    profiles: dict[str, AnytimeProfile] = {}
    for stage in STAGE_NAMES:
        if stage not in tables:
            profiles[stage] = _default_sized(kind, n_levels)
            continue
        try:
            profiles[stage] = AnytimeProfile(kind, tables[stage], n_levels=n_levels)
        except ValueError as exc:
            errors.add(lines.get(stage, 0), f"profile {stage}: {exc}")
            profiles[stage] = _default_sized(kind, n_levels)
    return profiles


def _default_sized(kind, n_levels):
    base = default_profile(kind)
    if base.top_level == n_levels:
        return base
    # Ladder override changed the level count; stretch or trim the default.
    levels = {
        i: base.levels[min(i, base.top_level)] for i in range(1, n_levels + 1)
    }
    return AnytimeProfile(kind, levels, n_levels=n_levels)


def _parse_actions(value, line_no, errors) -> ActionSpec | None:
    commands = []
    for token in value.split(","):
        token = token.strip().lower()
        if not token:
            continue
        try:
            commands.append(ActionCommand(token))
        except ValueError:
            choices = ", ".join(c.value for c in ActionCommand)
            errors.add(line_no, f"unknown action {token!r}; actions are: {choices}")
            return None
    if not commands:
        errors.add(line_no, "need at least one action command")
        return None
    return ActionSpec(tuple(commands))


def _parse_ladder(section, kind, errors):
    if not _entries(section or []):
        return list(load_level_ladder(kind))
    rows: dict[int, QualityLevel] = {}
    first_line = 0
    for line_no, key, value in _entries(section):
        first_line = first_line or line_no
        level = _parse_level_key(key, line_no, errors)
        if level is None:
            continue
        actions_text, _, label = value.partition("|")
        spec = _parse_actions(actions_text.strip(), line_no, errors)
        if spec is None:
            continue
        rows[level] = QualityLevel(kind, level, label.strip() or f"level {level}", spec)
    if sorted(rows) != list(range(1, len(rows) + 1)) or not rows:
        errors.add(
            first_line,
            "ladder levels must be contiguous from l1",
        )
        return list(load_level_ladder(kind))
    return [rows[i] for i in range(1, len(rows) + 1)]


def _parse_taxonomy(section, errors):
    if not _entries(section or []):
        return DEFAULT_TAXONOMY
    paths: dict[ObjectClass, tuple[tuple[ObjectClass, int], ...]] = {}
    first_line = 0
    for line_no, key, value in _entries(section):
        first_line = first_line or line_no
        leaf = _parse_enum(ObjectClass, key, line_no, errors)
        if leaf is None:
            continue
        path = []
        ok = True
        for token in value.split(","):
            token = token.strip()
            if ":" not in token:
                errors.add(line_no, f"expected NODE:DEPTH, got {token!r}")
                ok = False
                break
            node_text, _, depth_text = token.partition(":")
            node = _parse_enum(ObjectClass, node_text.strip(), line_no, errors)
            depth = _parse_int(depth_text.strip(), line_no, errors, "depth")
            if node is None or depth is None:
                ok = False
                break
            path.append((node, depth))
        if ok and path:
            paths[leaf] = tuple(path)
    try:
        return Taxonomy(paths)
    except ValueError as exc:
        errors.add(first_line, f"taxonomy: {exc}")
        return DEFAULT_TAXONOMY


def _parse_smod(section, errors):
    action = None
    wcet = None
    for line_no, key, value in _entries(section or []):
        if key == "action":
            action = _parse_actions(value, line_no, errors)
        elif key == "wcet_ms":
            wcet = _parse_int(value, line_no, errors, key)
            if wcet is not None and wcet < 0:
                errors.add(line_no, "wcet_ms must be >= 0")
                wcet = None
        else:
            errors.add(line_no, f"unknown key {key!r} in [smod]")
    return action, wcet


# -- emission ---------------------------------------------------------------


def _num(value: float) -> str:
    """Canonical numeric rendering: always the float repr."""
    return repr(float(value))


def emit_scenario_file(spec: ScenarioSpec) -> str:
    """Canonical text form of a spec; stable across runs."""
    out: list[str] = []

    out.append("[scenario]")
    out.append(f"name = {spec.name}")
    out.append(f"kind = {spec.kind.value}")
    out.append(f"architecture = {spec.architecture.value}")
    out.append("")

    out.append("[vehicle]")
    out.append(f"position_m = {_num(spec.vehicle.position_m)}")
    out.append(f"speed_mps = {_num(spec.vehicle.speed_mps)}")
    out.append(f"max_decel_mps2 = {_num(spec.vehicle.max_decel_mps2)}")
    out.append("")

    out.append("[detection]")
    out.append(f"distance_m = {_num(spec.detection_distance_m)}")
    out.append(f"cooperative = {spec.cooperative.value}")
    out.append("")

    c = spec.constants
    out.append("[constants]")
    out.append(f"smod_wcet_ms = {c.smod_wcet_ms}")
    out.append(f"safety_margin_ms = {c.safety_margin_ms}")
    out.append(f"planning_quantile = {_num(c.planning_quantile)}")
    out.append(f"dt_ms = {c.dt_ms}")
    out.append(f"horizon_ms = {c.horizon_ms}")
    out.append(f"slow_factor = {_num(c.slow_factor)}")
    out.append(f"guard_enabled = {'true' if c.guard_enabled else 'false'}")
    out.append("")

    out.append("[policy]")
    out.append(f"kind = {spec.policy.kind.value}")
    if spec.policy.weights:
        out.append(f"weights = {','.join(_num(w) for w in spec.policy.weights)}")
    out.append("")

    for obj in sorted(spec.objects, key=lambda o: o.name):
        out.append(f"[object {obj.name}]")
        out.append(f"class = {obj.truth.value}")
        out.append(f"position_m = {_num(obj.position_m)}")
        out.append(f"speed_mps = {_num(obj.speed_mps)}")
        out.append(f"crossing = {'true' if obj.crossing else 'false'}")
        out.append("")

    for stage in STAGE_NAMES:
        profile = spec.profiles[stage]
        out.append(f"[profile {stage}]")
        for level in range(1, profile.top_level + 1):
            entry = profile.levels[level]
            out.append(
                f"l{level} = {_emit_latency(entry.latency)} @ {_num(entry.accuracy)}"
            )
        out.append("")

    if spec.ladder != tuple(load_level_ladder(spec.kind)):
        out.append("[ladder]")
        for row in spec.ladder:
            actions = ",".join(cmd.value for cmd in row.action.commands)
            out.append(f"l{row.index} = {actions} | {row.sensing_label}")
        out.append("")

    if spec.smod_action is not None or spec.smod_wcet_ms is not None:
        out.append("[smod]")
        if spec.smod_action is not None:
            out.append(
                f"action = {','.join(cmd.value for cmd in spec.smod_action.commands)}"
            )
        if spec.smod_wcet_ms is not None:
            out.append(f"wcet_ms = {spec.smod_wcet_ms}")
        out.append("")

    if spec.taxonomy != DEFAULT_TAXONOMY:
        out.append("[taxonomy]")
        for leaf in spec.taxonomy.leaves:
            path = ",".join(
                f"{node.value}:{depth}" for node, depth in spec.taxonomy.paths[leaf]
            )
            out.append(f"{leaf.value} = {path}")
        out.append("")

    return "\n".join(out)


def _emit_latency(model: LatencyModel) -> str:
    if isinstance(model, Constant):
        return f"constant:{_num(model.value_ms)}"
    if isinstance(model, Triangular):
        return f"tri:{_num(model.low_ms)}:{_num(model.mode_ms)}:{_num(model.high_ms)}"
    return f"lognorm:{_num(model.median_ms)}:{_num(model.spread)}"


def normalize_scenario_file(text: str) -> str:
    """The canonical form of ``text`` (parse + emit)."""
    return emit_scenario_file(parse_scenario_file(text))
