from .scenario import (  # noqa: F401
    EpisodeSettings,
    GroundTruthInstance,
    InfectionPlanEntry,
    MovementSegment,
    OpportunitySettings,
    Scenario,
    ScenarioConfig,
    build_scenario,
)
from .detectors import DetectorProfile, TypeProfile, simulate_detectors  # noqa: F401
from .metrics import (  # noqa: F401
    CategoryMetrics,
    MatchingParams,
    MetricsReport,
    activity_completion,
    compute_metrics,
    person_classifications,
)
from .presets import preset, preset_names  # noqa: F401
from .runner import RunResult, SystemSettings, run_end_to_end  # noqa: F401
