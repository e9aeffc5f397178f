"""Detector simulation: noisy anomaly events and badge position pings.

For every violating ground-truth instance an event is emitted with the
profile's sensitivity; for every compliant instance a false event is
emitted with 1 - specificity. Locations get Gaussian jitter clipped
into the area frame; confidences come from a clipped normal. Pings run
at 0.5 Hz along each movement segment's waypoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..events import AnomalyEvent
from ..tracing import PositionPing
from ..twin import ViolationType
from .scenario import MovementSegment, Scenario

VISION_SOURCE = "sim-vision"
PING_INTERVAL_SECONDS = 2.0  # 0.5 Hz


@dataclass(frozen=True)
class TypeProfile:
    sensitivity: float = 1.0
    specificity: float = 1.0
    location_noise_sigma: float = 0.0
    confidence_mean: float = 0.9
    confidence_spread: float = 0.05

    def __post_init__(self):
        assert 0.0 <= self.sensitivity <= 1.0
        assert 0.0 <= self.specificity <= 1.0


@dataclass(frozen=True)
class DetectorProfile:
    default: TypeProfile = field(default_factory=TypeProfile)
    per_type: dict[ViolationType, TypeProfile] = field(default_factory=dict)

    def for_type(self, vtype: ViolationType) -> TypeProfile:
        return self.per_type.get(vtype, self.default)

    @classmethod
    def uniform(
        cls,
        sensitivity: float,
        specificity: float,
        location_noise_sigma: float = 0.5,
        confidence_mean: float = 0.85,
        confidence_spread: float = 0.08,
    ) -> "DetectorProfile":
        return cls(
            default=TypeProfile(
                sensitivity=sensitivity,
                specificity=specificity,
                location_noise_sigma=location_noise_sigma,
                confidence_mean=confidence_mean,
                confidence_spread=confidence_spread,
            )
        )


def perfect_profile() -> DetectorProfile:
    return DetectorProfile(default=TypeProfile(sensitivity=1.0, specificity=1.0))


def pilot_profile() -> DetectorProfile:
    """Operating point matching the pilot deployment's hygiene detectors."""
    return DetectorProfile.uniform(sensitivity=0.97, specificity=0.99)


def _segment_position(segment: MovementSegment, t: float) -> tuple[float, float]:
    points = segment.waypoints
    if len(points) == 1:
        return points[0]
    span = segment.exit - segment.enter
    if span <= 0:
        return points[0]
    # equal time per leg, linear interpolation within a leg
    legs = len(points) - 1
    progress = min(max((t - segment.enter) / span, 0.0), 1.0) * legs
    leg = min(int(progress), legs - 1)
    frac = progress - leg
    (x0, y0), (x1, y1) = points[leg], points[leg + 1]
    return (x0 + (x1 - x0) * frac, y0 + (y1 - y0) * frac)


def simulate_detectors(
    scenario: Scenario, profile: DetectorProfile, seed: int
) -> tuple[list[AnomalyEvent], list[PositionPing]]:
    """Produce the event and ping streams for a scenario; all randomness
    derives from ``seed``, so identical inputs give identical streams."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))

    events: list[AnomalyEvent] = []
    geometry = {a.space_id: a.geometry for a in scenario.model.areas()}
    for instance in scenario.opportunities:
        tp = profile.for_type(instance.vtype)
        emit_probability = tp.sensitivity if not instance.compliant else 1.0 - tp.specificity
        if float(rng.random()) >= emit_probability:
            continue
        geo = geometry[instance.space_id]
        x, y = instance.x, instance.y
        if tp.location_noise_sigma > 0:
            x += float(rng.normal(0.0, tp.location_noise_sigma))
            y += float(rng.normal(0.0, tp.location_noise_sigma))
        x = min(max(x, 0.0), geo.width)
        y = min(max(y, 0.0), geo.height)
        confidence = float(np.clip(rng.normal(tp.confidence_mean, tp.confidence_spread), 0.0, 1.0))
        events.append(
            AnomalyEvent(
                event_id=f"e-{instance.instance_id}",
                source_id=VISION_SOURCE,
                vtype=instance.vtype,
                space_id=instance.space_id,
                timestamp=instance.time,
                location=(x, y),
                confidence=confidence,
            )
        )
    events.sort(key=lambda e: (e.timestamp, e.event_id))

    pings: list[PositionPing] = []
    for badge in sorted(scenario.movement_scripts):
        for segment in scenario.movement_scripts[badge]:
            t = segment.enter
            while t <= segment.exit + 1e-9:
                x, y = _segment_position(segment, t)
                pings.append(PositionPing(badge, segment.space_id, x, y, t))
                t += PING_INTERVAL_SECONDS
    pings.sort(key=lambda p: (p.timestamp, p.badge_id))
    return events, pings
