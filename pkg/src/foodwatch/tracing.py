"""Indoor location: visit segmentation, proximity alerts, contact tracing.

Pings are pseudonymous badge positions in a per-area local frame. Visits
are contiguous per-space presence intervals; proximity violations come
from pairwise distance runs; a trace turns one infection report into
at-risk space intervals plus direct (measured proximity) and indirect
(at-risk space overlap) contact sets.

Privacy rule: anomaly events produced here never carry badge ids. Pair
identities are reduced to a short salted digest before they leave the
module.
"""

from __future__ import annotations

import bisect
import hashlib
import math
from dataclasses import dataclass
from itertools import combinations

from .errors import UnknownBadge, UnknownSpace, ValidationError
from .events import AnomalyEvent
from .twin import SpaceKind, TwinModel, ViolationType


@dataclass(frozen=True)
class TraceConfig:
    distance_threshold_meters: float = 2.0
    live_min_duration_seconds: float = 10.0  # run length before a live alert fires
    contact_min_seconds: float = 30.0  # cumulative proximity that makes a direct contact
    visit_gap_tolerance_seconds: float = 60.0
    min_visit_seconds: float = 5.0
    linger_seconds: float = 3600.0  # how long a space stays at risk after the infected leaves
    pairing_tolerance_seconds: float = 1.0  # nearest-in-time ping pairing

    def __post_init__(self):
        for name in (
            "distance_threshold_meters",
            "live_min_duration_seconds",
            "contact_min_seconds",
            "visit_gap_tolerance_seconds",
            "min_visit_seconds",
            "linger_seconds",
            "pairing_tolerance_seconds",
        ):
            assert getattr(self, name) > 0, f"{name} must be positive"


@dataclass(frozen=True)
class PositionPing:
    badge_id: str
    space_id: str
    x: float
    y: float
    timestamp: float

    def to_json(self) -> dict:
        return {
            "badge_id": self.badge_id,
            "space_id": self.space_id,
            "x": self.x,
            "y": self.y,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class VisitInterval:
    badge_id: str
    space_id: str
    start: float
    end: float

    def to_json(self) -> dict:
        return {"badge_id": self.badge_id, "space_id": self.space_id, "start": self.start, "end": self.end}


@dataclass(frozen=True)
class ProximityViolation:
    badge_a: str  # lexicographically smaller badge of the pair
    badge_b: str
    space_id: str
    start: float
    end: float
    min_distance: float
    last_midpoint: tuple[float, float]


@dataclass(frozen=True)
class InfectionReport:
    report_id: str
    badge_id: str
    reported_at: float
    lookback_seconds: float = 172800.0  # 48 h

    def __post_init__(self):
        assert self.lookback_seconds > 0


@dataclass
class TraceResult:
    report_id: str
    at_risk_spaces: list[tuple[str, list[tuple[float, float]]]]
    direct_contacts: list[str]
    indirect_contacts: list[str]

    def to_json(self) -> dict:
        return {
            "report_id": self.report_id,
            "at_risk_spaces": [
                {"space_id": sid, "intervals": [[s, e] for s, e in intervals]}
                for sid, intervals in self.at_risk_spaces
            ],
            "direct_contacts": list(self.direct_contacts),
            "indirect_contacts": list(self.indirect_contacts),
        }


# ---------------------------------------------------------------------------
# Visit segmentation


def segment_visits(pings: list[PositionPing], cfg: TraceConfig) -> list[VisitInterval]:
    """Turn one badge's pings into contiguous per-space visits.

    Consecutive same-space pings merge while the inter-ping gap stays
    within the tolerance; a space change always splits. Fragments shorter
    than min_visit are discarded.
    """
    if not pings:
        return []
    ordered = sorted(pings, key=lambda p: (p.timestamp, p.space_id))
    visits: list[VisitInterval] = []
    badge = ordered[0].badge_id
    start = ordered[0]
    last = ordered[0]
    for ping in ordered[1:]:
        gap = ping.timestamp - last.timestamp
        if ping.space_id != last.space_id or gap > cfg.visit_gap_tolerance_seconds:
            if last.timestamp - start.timestamp >= cfg.min_visit_seconds:
                visits.append(VisitInterval(badge, start.space_id, start.timestamp, last.timestamp))
            start = ping
        last = ping
    if last.timestamp - start.timestamp >= cfg.min_visit_seconds:
        visits.append(VisitInterval(badge, start.space_id, start.timestamp, last.timestamp))
    return visits


# ---------------------------------------------------------------------------
# Proximity


@dataclass(frozen=True)
class _Sample:
    t: float
    distance: float
    midpoint: tuple[float, float]


def _pair_samples(
    pings_a: list[PositionPing], pings_b: list[PositionPing], cfg: TraceConfig
) -> list[_Sample]:
    """Distance samples at the first badge's ping instants, pairing each with
    the nearest-in-time ping of the second badge in the same space."""
    samples: list[_Sample] = []
    b_sorted = sorted(pings_b, key=lambda p: p.timestamp)
    times_b = [p.timestamp for p in b_sorted]
    for pa in sorted(pings_a, key=lambda p: p.timestamp):
        idx = bisect.bisect_left(times_b, pa.timestamp)
        best = None
        for j in (idx - 1, idx):
            if 0 <= j < len(b_sorted):
                pb = b_sorted[j]
                if pb.space_id != pa.space_id:
                    continue
                dt = abs(pb.timestamp - pa.timestamp)
                if dt <= cfg.pairing_tolerance_seconds and (best is None or dt < abs(best.timestamp - pa.timestamp)):
                    best = pb
        if best is None:
            continue
        dist = math.hypot(pa.x - best.x, pa.y - best.y)
        samples.append(
            _Sample(pa.timestamp, dist, ((pa.x + best.x) / 2.0, (pa.y + best.y) / 2.0))
        )
    return samples


def _proximity_runs(samples: list[_Sample], cfg: TraceConfig) -> list[list[_Sample]]:
    """Maximal below-threshold runs; a gap beyond the visit tolerance splits a run."""
    runs: list[list[_Sample]] = []
    current: list[_Sample] = []
    for sample in samples:
        below = sample.distance < cfg.distance_threshold_meters
        if below and current and sample.t - current[-1].t <= cfg.visit_gap_tolerance_seconds:
            current.append(sample)
        elif below:
            if current:
                runs.append(current)
            current = [sample]
        else:
            if current:
                runs.append(current)
            current = []
    if current:
        runs.append(current)
    return runs


def detect_proximity_violations(
    pings: list[PositionPing], cfg: TraceConfig
) -> list[ProximityViolation]:
    """Pairwise social-distancing scan over one area's pings.

    Returns one violation per maximal close-distance run lasting at least
    the live alert duration. Output is invariant under badge relabeling:
    pairs are anchored on the lexicographically smaller badge.
    """
    by_badge: dict[str, list[PositionPing]] = {}
    for ping in pings:
        by_badge.setdefault(ping.badge_id, []).append(ping)
    violations: list[ProximityViolation] = []
    for badge_a, badge_b in combinations(sorted(by_badge), 2):
        samples = _pair_samples(by_badge[badge_a], by_badge[badge_b], cfg)
        for run in _proximity_runs(samples, cfg):
            duration = run[-1].t - run[0].t
            if duration >= cfg.live_min_duration_seconds:
                violations.append(
                    ProximityViolation(
                        badge_a=badge_a,
                        badge_b=badge_b,
                        space_id=pings[0].space_id,
                        start=run[0].t,
                        end=run[-1].t,
                        min_distance=min(s.distance for s in run),
                        last_midpoint=run[-1].midpoint,
                    )
                )
    violations.sort(key=lambda v: (v.start, v.badge_a, v.badge_b))
    return violations


def _pair_token(badge_a: str, badge_b: str) -> str:
    # short salted digest: stable for dedup, carries no badge identity
    return hashlib.blake2b(f"{badge_a}|{badge_b}".encode(), digest_size=5, key=b"pair").hexdigest()


def proximity_event(violation: ProximityViolation, source_id: str = "tracing") -> AnomalyEvent:
    """Anonymized anomaly event for a proximity violation (no badge ids)."""
    token = _pair_token(violation.badge_a, violation.badge_b)
    return AnomalyEvent(
        event_id=f"sd-{violation.space_id}-{token}-{violation.start:.0f}-{violation.end:.0f}",
        source_id=source_id,
        vtype=ViolationType.SOCIAL_DISTANCING,
        space_id=violation.space_id,
        timestamp=violation.end,
        location=violation.last_midpoint,
        confidence=1.0,
    )


def cumulative_contact_seconds(
    pings_a: list[PositionPing],
    pings_b: list[PositionPing],
    window: tuple[float, float],
    cfg: TraceConfig,
) -> float:
    """Total below-threshold proximity time between two badges within a window."""
    lo, hi = window
    fa = [p for p in pings_a if lo <= p.timestamp <= hi]
    fb = [p for p in pings_b if lo <= p.timestamp <= hi]
    if not fa or not fb:
        return 0.0
    total = 0.0
    for run in _proximity_runs(_pair_samples(fa, fb, cfg), cfg):
        total += run[-1].t - run[0].t
    return total


# ---------------------------------------------------------------------------
# Tracing


def merge_intervals(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    merged: list[tuple[float, float]] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def trace(
    report: InfectionReport,
    visits: list[VisitInterval],
    pings_by_badge: dict[str, list[PositionPing]],
    cfg: TraceConfig,
) -> TraceResult:
    """Compute at-risk spaces and contact sets for one infection report.

    At-risk intervals extend each infected visit by the linger time and are
    merged per space. Direct contacts accumulate measured proximity within
    the lookback window; indirect contacts merely overlap an at-risk
    interval. Direct wins: the two sets are disjoint, and the infected
    badge appears in neither.
    """
    window = (report.reported_at - report.lookback_seconds, report.reported_at)
    infected_visits = [
        v
        for v in visits
        if v.badge_id == report.badge_id and v.end >= window[0] and v.start <= window[1]
    ]

    per_space: dict[str, list[tuple[float, float]]] = {}
    for visit in infected_visits:
        per_space.setdefault(visit.space_id, []).append((visit.start, visit.end + cfg.linger_seconds))
    at_risk = [(sid, merge_intervals(ivals)) for sid, ivals in sorted(per_space.items())]

    infected_pings = pings_by_badge.get(report.badge_id, [])
    direct: set[str] = set()
    for badge, pings in pings_by_badge.items():
        if badge == report.badge_id:
            continue
        if cumulative_contact_seconds(infected_pings, pings, window, cfg) >= cfg.contact_min_seconds:
            direct.add(badge)

    risk_index = dict(at_risk)
    indirect: set[str] = set()
    for visit in visits:
        if visit.badge_id == report.badge_id or visit.badge_id in direct:
            continue
        for start, end in risk_index.get(visit.space_id, ()):
            if visit.start <= end and visit.end >= start:
                indirect.add(visit.badge_id)
                break

    return TraceResult(
        report_id=report.report_id,
        at_risk_spaces=at_risk,
        direct_contacts=sorted(direct),
        indirect_contacts=sorted(indirect),
    )


def mark_at_risk(result: TraceResult, status_engine, submit_event, now: float) -> list[AnomalyEvent]:
    """Apply a trace result: flag each at-risk space in the status engine and
    inject one contact-tracing anomaly event per space (immediate priority).

    ``submit_event`` is the pipeline's internal submission callable; the
    injected events carry no badge ids. Flags stay set until an explicit
    sanitized action clears them.
    """
    injected: list[AnomalyEvent] = []
    for space_id, _intervals in result.at_risk_spaces:
        status_engine.set_at_risk(space_id, True)
        event = AnomalyEvent(
            event_id=f"ct-{result.report_id}-{space_id}",
            source_id="tracing",
            vtype=ViolationType.CONTACT_TRACING,
            space_id=space_id,
            timestamp=now,
            confidence=1.0,
        )
        submit_event(event)
        injected.append(event)
    return injected


# ---------------------------------------------------------------------------
# Stateful wrapper used by the service and the simulation harness


class Tracer:
    """Holds ping history, incremental visits, and completed trace results."""

    def __init__(self, model: TwinModel, config: TraceConfig | None = None):
        self._model = model
        self.config = config or TraceConfig()
        self._pings: dict[str, list[PositionPing]] = {}
        self._pings_by_space: dict[str, list[PositionPing]] = {}
        self._detection_watermark: dict[str, float] = {}
        self._results: dict[str, TraceResult] = {}

    @property
    def model(self) -> TwinModel:
        return self._model

    def set_model(self, model: TwinModel) -> None:
        self._model = model

    def validate_ping(self, ping: PositionPing) -> None:
        if not self._model.has_badge(ping.badge_id):
            raise UnknownBadge(f"unknown badge: {ping.badge_id}")
        space = self._model.space(ping.space_id)  # raises UnknownSpace
        if space.kind is not SpaceKind.AREA or space.geometry is None:
            raise UnknownSpace(f"{ping.space_id} is not an area")
        if not space.geometry.contains(ping.x, ping.y):
            raise ValidationError(
                f"ping location ({ping.x}, {ping.y}) outside {ping.space_id} geometry",
                path=f"pings/{ping.space_id}",
            )

    def add_pings(self, pings: list[PositionPing], detect: bool = True) -> list[ProximityViolation]:
        """Ingest a ping batch; returns proximity runs newly completing in it.

        Detection re-scans each touched space and emits runs whose end
        moved past the space's watermark; repeated detections of a still
        growing run are absorbed downstream by event dedup.
        """
        touched: set[str] = set()
        for ping in pings:
            self.validate_ping(ping)
            self._pings.setdefault(ping.badge_id, []).append(ping)
            self._pings_by_space.setdefault(ping.space_id, []).append(ping)
            touched.add(ping.space_id)
        if not detect:
            return []
        fresh: list[ProximityViolation] = []
        for space_id in sorted(touched):
            space_pings = self._pings_by_space[space_id]
            watermark = self._detection_watermark.get(space_id, float("-inf"))
            newest = max(p.timestamp for p in space_pings)
            for violation in detect_proximity_violations(space_pings, self.config):
                if violation.end > watermark:
                    fresh.append(violation)
            self._detection_watermark[space_id] = newest
        return fresh

    def pings_for(self, badge_id: str) -> list[PositionPing]:
        return sorted(self._pings.get(badge_id, []), key=lambda p: p.timestamp)

    def visits_for(self, badge_id: str) -> list[VisitInterval]:
        return segment_visits(self._pings.get(badge_id, []), self.config)

    def all_visits(self) -> list[VisitInterval]:
        visits: list[VisitInterval] = []
        for badge in sorted(self._pings):
            visits.extend(self.visits_for(badge))
        return visits

    def trace(self, report: InfectionReport) -> TraceResult:
        if not self._model.has_badge(report.badge_id):
            raise UnknownBadge(f"unknown badge: {report.badge_id}")
        pings_sorted = {b: self.pings_for(b) for b in self._pings}
        result = trace(report, self.all_visits(), pings_sorted, self.config)
        self._results[report.report_id] = result
        return result

    def result(self, report_id: str) -> TraceResult | None:
        return self._results.get(report_id)

    def results(self) -> list[TraceResult]:
        return [self._results[rid] for rid in sorted(self._results)]
