"""Self-verification: the acceptance criteria as runnable checks.

Each check returns (ok, detail) and pins its own tolerances. Expected values
come from independent oracles computed inside the check (closed-form
kinematics, CDF bisection, floor/remainder arithmetic, Monte-Carlo counts),
never from the code paths under test. ``savvy verify`` runs them all; the
test suite asserts them one by one.
"""

from __future__ import annotations

import hashlib
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from random import Random
from typing import Callable

from .bus import EventBus, TOPIC_ACTUATORS
from .domain import (
    ActionCommand,
    ActionSpec,
    DrivingEvent,
    ObjectClass,
    ScenarioKind,
    TimeBounds,
)
from .incidents import incident_fixture
from .metrics import run_record
from .models import (
    AnytimeProfile,
    Constant,
    LevelProfile,
    ModelConfig,
    Triangular,
    default_profile,
    infer,
    sample_latency,
)
from .scenario import ObjectSpec, ScenarioSpec, SimConstants
from .supervisor import (
    Architecture,
    HazardEstimator,
    PolicyKind,
    SafetySupervisor,
    SchedulingPolicy,
    allocate_budgets,
)
from .trace import TraceLog
from .tsim import DeliveryTimeEstimator, FallbackRule, PipelineStage, StageWorker, tune
from .world import Outcome, run_baseline_all_or_nothing, run_scenario


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"ACCEPTANCE {self.number} {self.name}: {status}  ({self.detail})"


# -- shared harness ------------------------------------------------------------


@dataclass
class _FixedVehicle:
    speed_mps: float = 10.0
    max_decel_mps2: float = 5.0


def _run_supervised(bounds, profile, seed, policy, truth):
    """One world-free supervised pipeline run; returns (fault_count, commands)."""
    bus = EventBus(TraceLog(level=0))
    rng = Random(seed)
    commands = []
    bus.subscribe(TOPIC_ACTUATORS, lambda d: commands.append(d.payload))
    fallback = FallbackRule(
        ActionSpec((ActionCommand.BRAKE, ActionCommand.BEEP)), bounds.smod_wcet_ms
    )
    stages = [
        PipelineStage(name, profile, fallback) for name in ("sense", "plan", "act")
    ]
    for stage in stages:
        StageWorker(bus, stage, rng)
    supervisor = SafetySupervisor(
        bus, stages, policy, HazardEstimator(), vehicle=_FixedVehicle()
    )
    event = DrivingEvent(
        id="e1",
        kind=ScenarioKind.OBSTACLE_AVOIDANCE,
        detected_at=bounds.origin,
        object_truth=truth,
        object_distance_m=60.0,
    )
    supervisor.start_driving_task(event, bounds=bounds)
    while True:
        nxt = bus.next_event_at()
        if nxt is None:
            break
        bus.advance_until(nxt)
    return supervisor.fault_count, commands


def _random_monotone_profile(rng: Random) -> AnytimeProfile:
    low = rng.uniform(5.0, 50.0)
    mode = low * rng.uniform(1.2, 2.0)
    high = mode * rng.uniform(1.2, 2.5)
    levels = {}
    for i in range(1, 8):
        levels[i] = LevelProfile(Triangular(low, mode, high), rng.uniform(0.5, 1.0))
        factor = rng.uniform(1.2, 2.2)
        low, mode, high = low * factor, mode * factor, high * factor
    return AnytimeProfile(ScenarioKind.OBSTACLE_AVOIDANCE, levels)


# -- criteria ------------------------------------------------------------------


def check_safety_invariant(runs: int = 10_000) -> CriterionResult:
    """Randomized (profile, bounds, seed): no faults, no late commands."""
    rng = Random(20_240_601)
    faults = late = missing = 0
    for i in range(runs):
        smod = rng.randrange(50, 400)
        tte = rng.randrange(0, 4000)
        tth = tte + smod + rng.randrange(0, 1000)
        bounds = TimeBounds(origin=0, tte_ms=tte, tth_ms=tth, smod_wcet_ms=smod)
        profile = _random_monotone_profile(rng)
        if rng.random() < 0.5:
            policy = SchedulingPolicy()
        else:
            policy = SchedulingPolicy(
                PolicyKind.DYNAMIC_WEIGHTED,
                tuple(rng.uniform(0.2, 5.0) for _ in range(3)),
            )
        truth = rng.choice(
            [ObjectClass.HUMAN, ObjectClass.ANIMAL, ObjectClass.DEBRIS,
             ObjectClass.ATTENUATOR, ObjectClass.SNOW]
        )
        run_faults, commands = _run_supervised(bounds, profile, i, policy, truth)
        faults += run_faults
        if len(commands) != 1:
            missing += 1
        elif commands[0].issued_at > bounds.tth_at:
            late += 1
    ok = faults == 0 and late == 0 and missing == 0
    return CriterionResult(
        1, "safety-invariant", ok,
        f"{runs} runs: {faults} faults, {late} late commands, "
        f"{missing} malformed runs",
    )


def i1_closed_form_oracle() -> dict:
    """Independent kinematics for the pedestrian reconstruction."""
    sense = [80, 200, 420, 800, 1500, 2400, 3500]
    plan = [40, 90, 180, 360, 600, 820, 1000]
    act = [20, 40, 60, 90, 120, 160, 200]
    speed, decel, distance = 10.0, 5.0, 60.0
    impact_ms = round(1000 * distance / speed)
    braking_ms = round(1000 * speed / decel)
    tth = impact_ms - braking_ms - 500
    tte = tth - 300
    budgets = [tte // 3, tte // 3, tte - 2 * (tte // 3)]
    levels = [
        max(i for i, v in enumerate(table, 1) if v <= budget)
        for table, budget in zip((sense, plan, act), budgets)
    ]
    onset_savvy = sum(
        table[level - 1] for table, level in zip((sense, plan, act), levels)
    )
    stop_pos = speed * onset_savvy / 1000.0 + speed * speed / (2 * decel)
    return {
        "tth": tth,
        "tte": tte,
        "levels": levels,
        "onset_savvy": onset_savvy,
        "savvy_margin_m": distance - stop_pos,
        "onset_aon": sense[-1] + plan[-1] + act[-1],
        "aon_late_ms": sense[-1] + plan[-1] + act[-1] + braking_ms - impact_ms,
    }


def check_i1_reconstruction() -> CriterionResult:
    """Exact replay of the stated incident numbers, both architectures."""
    oracle = i1_closed_form_oracle()
    spec = incident_fixture("I1")
    problems = []

    trace, savvy = run_scenario(spec, seed=0)
    bounds = trace.of_kind("bounds")[0]
    command = trace.of_kind("command")[0]
    if int(bounds.get("tth")) != oracle["tth"] or int(bounds.get("tte")) != oracle["tte"]:
        problems.append("bounds mismatch")
    if int(command.get("at")) != oracle["onset_savvy"]:
        problems.append("savvy onset mismatch")
    if savvy.outcome is not Outcome.SAFE_STOP or savvy.margin_m != oracle["savvy_margin_m"]:
        problems.append("savvy verdict mismatch")
    if not (savvy.margin_m or 0) > 0:
        problems.append("savvy margin not positive")

    trace, aon = run_baseline_all_or_nothing(spec, seed=0)
    command = trace.of_kind("command")[0]
    if int(command.get("at")) != oracle["onset_aon"]:
        problems.append("baseline onset mismatch")
    if aon.outcome is not Outcome.COLLISION or aon.margin_ms != oracle["aon_late_ms"]:
        problems.append("baseline verdict mismatch")

    detail = (
        f"savvy SafeStop margin {savvy.margin_m:.1f} m at +{oracle['onset_savvy']} ms; "
        f"baseline Collision {aon.margin_ms} ms short of stopping"
        if not problems
        else "; ".join(problems)
    )
    return CriterionResult(2, "i1-reconstruction", not problems, detail)


def dominance_sweep_spec() -> ScenarioSpec:
    """Crossing hazard whose per-stage budget (300 ms) falls strictly between
    the coarsest and richest q95 latencies of the default profile."""
    return ScenarioSpec(
        name="dominance-sweep",
        objects=(
            ObjectSpec("ped", ObjectClass.HUMAN, position_m=37.0, crossing=True),
        ),
        detection_distance_m=37.0,
        constants=SimConstants(horizon_ms=8_000, dt_ms=20, guard_enabled=False),
    )


def check_degradation_dominance(n: int = 1000) -> CriterionResult:
    """Paired seeds: lower window-miss rate and no more collisions."""
    spec = dominance_sweep_spec()
    profile = default_profile(ScenarioKind.OBSTACLE_AVOIDANCE)
    ted = DeliveryTimeEstimator(profile, q=0.95)
    per_stage_budget = (3700 - 2000 - 500 - 300) // 3
    if not ted.estimate(1) < per_stage_budget < ted.estimate(profile.top_level):
        return CriterionResult(
            3, "degradation-dominance", False, "budget geometry precondition broken"
        )
    savvy_fb = aon_fb = savvy_coll = aon_coll = faults = 0
    for seed in range(n):
        trace, verdict = run_scenario(spec, seed=seed, trace_level=1)
        savvy_fb += run_record(spec.name, "savvy", seed, trace, verdict).fallback
        savvy_coll += verdict.outcome is Outcome.COLLISION
        faults += verdict.outcome is Outcome.SAFETY_VIOLATION_FAULT
        trace, verdict = run_scenario(
            spec, seed=seed, architecture=Architecture.ALL_OR_NOTHING, trace_level=1
        )
        aon_fb += run_record(spec.name, "aon", seed, trace, verdict).fallback
        aon_coll += verdict.outcome is Outcome.COLLISION
    p_savvy, p_aon = savvy_fb / n, aon_fb / n
    sigma = math.sqrt(p_savvy * (1 - p_savvy) / n + p_aon * (1 - p_aon) / n)
    ok = (
        faults == 0
        and p_savvy + 3 * max(sigma, 1e-9) < p_aon
        and savvy_coll <= aon_coll
    )
    return CriterionResult(
        3, "degradation-dominance", ok,
        f"fallback {p_savvy:.3f} vs {p_aon:.3f}; collisions {savvy_coll} vs "
        f"{aon_coll} over {n} paired seeds",
    )


def _triangular_cdf(low: float, mode: float, high: float, x: float) -> float:
    if x <= low:
        return 0.0
    if x >= high:
        return 1.0
    span = high - low
    if x <= mode:
        return (x - low) ** 2 / (span * (mode - low))
    return 1.0 - (high - x) ** 2 / (span * (high - mode))


def _oracle_estimate(model: Triangular, q: float) -> int:
    lo, hi = model.low_ms, model.high_ms
    for _ in range(200):
        mid = (lo + hi) / 2
        if _triangular_cdf(model.low_ms, model.mode_ms, model.high_ms, mid) < q:
            lo = mid
        else:
            hi = mid
    return math.ceil((lo + hi) / 2)


def check_tune_correctness(n: int = 1000) -> CriterionResult:
    """Tuning equals an upward scan with bisection estimates; monotone."""
    rng = Random(777)
    mismatches = order_breaks = 0
    for _ in range(n):
        profile = _random_monotone_profile(rng)
        ted = DeliveryTimeEstimator(profile, q=0.95)
        b1, b2 = sorted((rng.randrange(0, 3000), rng.randrange(0, 3000)))
        picked = []
        for budget in (b1, b2):
            best = None
            for level in range(1, profile.top_level + 1):
                if _oracle_estimate(profile.latency_model(level), 0.95) <= budget:
                    best = level
            config = tune(profile, ted, budget)
            got = config.level if config is not None else None
            if got != best:
                mismatches += 1
            picked.append(got or 0)
        if picked[0] > picked[1]:
            order_breaks += 1
    ok = mismatches == 0 and order_breaks == 0
    return CriterionResult(
        4, "tune-correctness", ok,
        f"{n} profiles: {mismatches} oracle mismatches, "
        f"{order_breaks} monotonicity breaks",
    )


def check_estimate_calibration(n: int = 10_000) -> CriterionResult:
    """Timeout rate at budget = estimate(tuned level) within the allowance."""
    profile = default_profile(ScenarioKind.OBSTACLE_AVOIDANCE)
    ted = DeliveryTimeEstimator(profile, q=0.95)
    rng = Random(5150)
    timeouts = 0
    for i in range(n):
        level = (i % profile.top_level) + 1
        budget = ted.estimate(level)
        config = tune(profile, ted, budget)
        if config is None or config.level != level:
            return CriterionResult(
                5, "delivery-estimate-calibration", False, "tuning precondition broken"
            )
        elapsed = math.ceil(sample_latency(profile.latency_model(level), rng))
        timeouts += elapsed > budget
    bound = 0.05 + 3 * math.sqrt(0.05 * 0.95 / n)
    rate = timeouts / n
    return CriterionResult(
        5, "delivery-estimate-calibration", rate <= bound,
        f"timeout rate {rate:.4f} <= {bound:.4f} over {n} tasks",
    )


def check_allocation_oracle(n: int = 1000) -> CriterionResult:
    """Floor/remainder and proportional splits, conserving every time."""
    rng = Random(4242)
    bad = 0
    for _ in range(n):
        stages = list(range(rng.randrange(1, 8)))
        tte = rng.randrange(0, 30_000)
        bounds = TimeBounds(origin=0, tte_ms=tte, tth_ms=tte + 500, smod_wcet_ms=500)
        even = allocate_budgets(bounds, stages, SchedulingPolicy())
        expected = [tte // len(stages)] * (len(stages) - 1)
        expected.append(tte - sum(expected))
        if even != expected or sum(even) != tte:
            bad += 1
        weights = tuple(rng.uniform(0.05, 20.0) for _ in stages)
        got = allocate_budgets(
            bounds, stages, SchedulingPolicy(PolicyKind.DYNAMIC_WEIGHTED, weights)
        )
        total = sum(weights)
        expected = [math.floor(tte * w / total) for w in weights[:-1]]
        expected.append(tte - sum(expected))
        if got != expected or sum(got) != tte or any(b < 0 for b in got):
            bad += 1
    return CriterionResult(
        6, "allocation-oracle", bad == 0, f"{n} triples, {bad} mismatches"
    )


def check_accuracy_contrast(n: int = 10_000) -> CriterionResult:
    """95% shallow obstructing-object reads vs 60% leaf classification."""
    profile = AnytimeProfile(
        ScenarioKind.OBSTACLE_AVOIDANCE,
        {
            **{i: LevelProfile(Constant(40 + i), 0.9) for i in range(1, 8)},
            2: LevelProfile(Constant(42), 0.95),
            7: LevelProfile(Constant(47), 0.60),
        },
    )
    rng = Random(314159)
    shallow = sum(
        infer(profile, ModelConfig(2), ObjectClass.ANIMAL, rng).correct
        for _ in range(n)
    ) / n
    leaf = sum(
        infer(profile, ModelConfig(7), ObjectClass.ANIMAL, rng).correct
        for _ in range(n)
    ) / n
    ok = abs(shallow - 0.95) <= 0.01 and abs(leaf - 0.60) <= 0.01
    return CriterionResult(
        7, "accuracy-contrast", ok,
        f"shallow {shallow:.4f} ~ 0.95, leaf {leaf:.4f} ~ 0.60 (+-0.01)",
    )


def check_batch_determinism(out_root: Path | None = None) -> CriterionResult:
    """Two identical batches produce byte-identical artifacts."""
    from .cli import RunConfig, run_batch  # local import: cli depends on this module's peers

    def tree(root: Path) -> dict[str, str]:
        return {
            str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*"))
            if p.is_file()
        }

    specs = [incident_fixture(i) for i in ("I1", "I5", "I7")]
    with tempfile.TemporaryDirectory(dir=out_root) as tmp:
        hashes = []
        for name in ("first", "second"):
            out = Path(tmp) / name
            config = RunConfig(
                specs=specs,
                seeds=[0, 1],
                architectures=[Architecture.SAVVY, Architecture.ALL_OR_NOTHING],
                out_dir=out,
                trace_level=2,
            )
            run_batch(config)
            hashes.append(tree(out))
    ok = hashes[0] == hashes[1] and len(hashes[0]) > 0
    return CriterionResult(
        8, "determinism", ok, f"{len(hashes[0])} artifacts byte-identical"
    )


ALL_CHECKS: tuple[Callable[[], CriterionResult], ...] = (
    check_safety_invariant,
    check_i1_reconstruction,
    check_degradation_dominance,
    check_tune_correctness,
    check_estimate_calibration,
    check_allocation_oracle,
    check_accuracy_contrast,
    check_batch_determinism,
)


def run_all() -> list[CriterionResult]:
    return [check() for check in ALL_CHECKS]
