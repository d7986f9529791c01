"""Deterministic virtual-time simulator of a safety-supervised driving
pipeline with deadline-aware quality degradation."""

from .bus import EventBus, TimerKind
from .domain import (
    ActionCommand,
    ActionSpec,
    ActuatorCommand,
    CoopSensing,
    DrivingEvent,
    ObjectClass,
    QualityLevel,
    ScenarioKind,
    TimeBounds,
    classify_at_depth,
    load_level_ladder,
)
from .incidents import INCIDENT_IDS, incident_fixture
from .models import (
    AnytimeProfile,
    Constant,
    InferenceResult,
    LogNormalLike,
    ModelConfig,
    Triangular,
    default_profile,
    infer,
    latency_quantile,
)
from .scenario import (
    ScenarioFormatError,
    ScenarioSpec,
    emit_scenario_file,
    parse_scenario_file,
)
from .supervisor import (
    Architecture,
    HazardEstimator,
    SafetySupervisor,
    SchedulingPolicy,
    allocate_budgets,
    decide_action,
)
from .tsim import DeliveryTimeEstimator, PipelineStage, StageTask, execute_task, tune
from .world import Outcome, Verdict, run_baseline_all_or_nothing, run_scenario, step_world

__version__ = "0.1.0"
