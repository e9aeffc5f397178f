"""Digital-twin compliance monitoring for food factories."""

__version__ = "0.1.0"

from .twin import (  # noqa: F401
    FormatKind,
    MealPlan,
    ModelOverlay,
    Priority,
    SpaceKind,
    TwinModel,
    ViolationType,
    derive_model,
    load_model,
    map_event,
    policy_for,
    reassign_person,
    validate_model,
)
from .events import AnomalyEvent, IngestOutcome, IngestStatus, ViolationRecord  # noqa: F401
from .pipeline import BatchSchedule, CredentialStore, DedupConfig, Pipeline, similarity  # noqa: F401
from .status import Rag, StatusConfig, StatusEngine  # noqa: F401
from .tracing import (  # noqa: F401
    InfectionReport,
    PositionPing,
    TraceConfig,
    Tracer,
    TraceResult,
    VisitInterval,
    detect_proximity_violations,
    segment_visits,
    trace,
)
