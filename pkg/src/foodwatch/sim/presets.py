"""Reference scenario configurations.

``pilot-jigani``
    The 21-day reference replay: 16 areas, 180 badges, a low violation
    rate tuned so the horizon yields on the order of 130 ground-truth
    violations (band 110-150), and one staged infection episode.

``pilot-jigani-metrics``
    Same floor and roster, but a dense opportunity grid (>= 10,000
    checks) and a high violation share so measured sensitivity and
    specificity estimate the detector profile tightly, plus six staged
    infection episodes giving >= 1,000 person-level risk classifications
    with indirect over-capture at 12 of 150 negatives per episode
    (specificity 0.92).
"""

from __future__ import annotations

from ..errors import ConfigError
from .scenario import EpisodeSettings, OpportunitySettings, ScenarioConfig

DEFAULT_SEED = 20210417


def _pilot_volume() -> ScenarioConfig:
    return ScenarioConfig(
        name="pilot-jigani",
        area_count=16,
        badge_count=180,
        horizon_days=21,
        opportunities=OpportunitySettings(
            slot_period_seconds=9000.0,
            edge_margin_seconds=300.0,
            slot_jitter_seconds=300.0,
            violation_probability=0.011,
        ),
        episode_count=1,
        episode=EpisodeSettings(),
        target_violation_band=(110, 150),
    )


def _pilot_metrics() -> ScenarioConfig:
    return ScenarioConfig(
        name="pilot-jigani-metrics",
        area_count=16,
        badge_count=180,
        horizon_days=21,
        opportunities=OpportunitySettings(
            slot_period_seconds=5400.0,
            edge_margin_seconds=300.0,
            slot_jitter_seconds=300.0,
            violation_probability=0.30,
        ),
        episode_count=6,
        episode=EpisodeSettings(),
        target_violation_band=None,
    )


_PRESETS = {
    "pilot-jigani": _pilot_volume,
    "pilot-jigani-metrics": _pilot_metrics,
}


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def preset(name: str) -> ScenarioConfig:
    try:
        return _PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown scenario preset {name!r}; known: {preset_names()}") from None
