"""Sensitivity/specificity evaluation against scenario ground truth.

Hygiene records are matched one-to-one to violating instances by a greedy
closest-time-first sweep constrained to the same space, same violation
type and a time tolerance. Matched instances are true positives,
unmatched instances false negatives, unmatched records false positives;
a compliant instance counts as a true negative unless one of the leftover
records lands on it. Tracking-and-tracing metrics are person-level: the
traced contact set against the scenario's true at-risk set.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field

from ..errors import InvalidDuration
from ..events import ViolationRecord
from ..tracing import TraceResult
from ..twin import HYGIENE_TYPES
from .scenario import GroundTruthInstance, InfectionPlanEntry

HYGIENE_CATEGORY = "hygiene_safety"
TRACING_CATEGORY = "tracking_tracing"


@dataclass(frozen=True)
class MatchingParams:
    time_tolerance_seconds: float = 30.0

    def to_json(self) -> dict:
        return {
            "time_tolerance_seconds": self.time_tolerance_seconds,
            "same_space": True,
            "same_vtype": True,
        }


@dataclass
class CategoryMetrics:
    tp: int = 0
    fn: int = 0
    tn: int = 0
    fp: int = 0

    @property
    def sensitivity(self) -> float | None:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) > 0 else None

    @property
    def specificity(self) -> float | None:
        return self.tn / (self.tn + self.fp) if (self.tn + self.fp) > 0 else None

    def to_json(self) -> dict:
        return {
            "tp": self.tp,
            "fn": self.fn,
            "tn": self.tn,
            "fp": self.fp,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
        }


@dataclass
class MetricsReport:
    categories: dict[str, CategoryMetrics] = field(default_factory=dict)
    matching: MatchingParams = field(default_factory=MatchingParams)

    def to_json(self) -> dict:
        return {
            "categories": {name: m.to_json() for name, m in sorted(self.categories.items())},
            "matching": self.matching.to_json(),
        }

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def from_json(cls, doc: dict) -> "MetricsReport":
        report = cls(matching=MatchingParams(doc["matching"]["time_tolerance_seconds"]))
        for name, m in doc["categories"].items():
            report.categories[name] = CategoryMetrics(tp=m["tp"], fn=m["fn"], tn=m["tn"], fp=m["fp"])
        return report


def greedy_match(
    instances: list[GroundTruthInstance],
    records: list[ViolationRecord],
    params: MatchingParams,
) -> dict[str, str]:
    """One-to-one record -> instance matching, closest time first.

    Candidates must share space and violation type and differ by at most
    the time tolerance. Ties break on instance then record id, so the
    result is independent of input ordering.
    """
    by_stream: dict[tuple[str, str], list[GroundTruthInstance]] = {}
    for inst in instances:
        by_stream.setdefault((inst.space_id, inst.vtype.value), []).append(inst)
    for stream in by_stream.values():
        stream.sort(key=lambda g: (g.time, g.instance_id))

    candidates: list[tuple[float, str, str]] = []  # (|dt|, instance_id, violation_id)
    record_by_id: dict[str, ViolationRecord] = {}
    instance_by_id = {g.instance_id: g for g in instances}
    for record in records:
        record_by_id[record.violation_id] = record
        stream = by_stream.get((record.space_id, record.vtype.value))
        if not stream:
            continue
        times = [g.time for g in stream]
        t = record.canonical.timestamp
        lo = bisect.bisect_left(times, t - params.time_tolerance_seconds)
        hi = bisect.bisect_right(times, t + params.time_tolerance_seconds)
        for g in stream[lo:hi]:
            candidates.append((abs(g.time - t), g.instance_id, record.violation_id))

    candidates.sort()
    matched_instance: set[str] = set()
    matched_record: set[str] = set()
    pairs: dict[str, str] = {}
    for _, instance_id, violation_id in candidates:
        if instance_id in matched_instance or violation_id in matched_record:
            continue
        matched_instance.add(instance_id)
        matched_record.add(violation_id)
        pairs[violation_id] = instance_id
    return pairs


def compute_metrics(
    ground_truth: list[GroundTruthInstance],
    records: list[ViolationRecord],
    params: MatchingParams | None = None,
    classifications: list[tuple[bool, bool]] | None = None,
) -> MetricsReport:
    """Build the metrics report from ground truth and published records.

    ``classifications`` carries optional person-level (truth, predicted)
    pairs for the tracking-and-tracing category.
    """
    params = params or MatchingParams()
    report = MetricsReport(matching=params)

    hygiene_truth = [g for g in ground_truth if g.vtype in HYGIENE_TYPES]
    hygiene_records = [r for r in records if r.vtype in HYGIENE_TYPES]
    violating = [g for g in hygiene_truth if not g.compliant]
    compliant = [g for g in hygiene_truth if g.compliant]

    stage1 = greedy_match(violating, hygiene_records, params)
    leftovers = [r for r in hygiene_records if r.violation_id not in stage1]
    stage2 = greedy_match(compliant, leftovers, params)
    hit_compliant = set(stage2.values())

    hygiene = CategoryMetrics(
        tp=len(stage1),
        fn=len(violating) - len(stage1),
        fp=len(leftovers),
        tn=len(compliant) - len(hit_compliant),
    )
    report.categories[HYGIENE_CATEGORY] = hygiene

    if classifications is not None:
        tracing = CategoryMetrics()
        for truth, predicted in classifications:
            if truth and predicted:
                tracing.tp += 1
            elif truth and not predicted:
                tracing.fn += 1
            elif not truth and predicted:
                tracing.fp += 1
            else:
                tracing.tn += 1
        report.categories[TRACING_CATEGORY] = tracing
    return report


def person_classifications(
    plan: list[InfectionPlanEntry],
    results: dict[str, TraceResult],
    roster: list[str],
) -> list[tuple[bool, bool]]:
    """Person-level (truth, predicted) pairs, one per (report, badge)."""
    classifications: list[tuple[bool, bool]] = []
    for idx, entry in enumerate(plan):
        result = results[_plan_report_id(idx)]
        traced = set(result.direct_contacts) | set(result.indirect_contacts)
        truth = set(entry.at_risk_badges)
        for badge in roster:
            if badge == entry.badge_id:
                continue
            classifications.append((badge in truth, badge in traced))
    return classifications


def _plan_report_id(index: int) -> str:
    return f"r-{index:03d}"


def activity_completion(time_in_activity: float, nominal_duration: float) -> float:
    """Completion percentage proxy: time in activity over nominal, clamped to [0, 100]."""
    if nominal_duration <= 0:
        raise InvalidDuration(f"nominal_duration must be > 0, got {nominal_duration}")
    return max(0.0, min(100.0, 100.0 * time_in_activity / nominal_duration))
