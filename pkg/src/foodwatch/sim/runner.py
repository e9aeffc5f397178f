"""Deterministic in-process end-to-end harness.

Feeds simulated event and ping streams through the real ingest path in
timestamp order, fires batch ticks on schedule boundaries, executes the
infection plan, and evaluates the published output against ground truth.
Two runs with the same scenario, profile and seed produce byte-identical
reports.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from ..events import IngestOutcome, ViolationRecord
from ..pipeline import BatchSchedule, CredentialStore, DedupConfig, Pipeline, SourceCredential
from ..status import StatusConfig, StatusEngine
from ..tracing import (
    InfectionReport,
    TraceConfig,
    Tracer,
    TraceResult,
    detect_proximity_violations,
    mark_at_risk,
    proximity_event,
)
from .detectors import DetectorProfile, simulate_detectors
from .metrics import MatchingParams, MetricsReport, _plan_report_id, compute_metrics, person_classifications
from .scenario import Scenario

SIM_API_KEY = "sim-key"


@dataclass(frozen=True)
class SystemSettings:
    dedup: DedupConfig = field(default_factory=DedupConfig)
    status: StatusConfig = field(default_factory=StatusConfig)
    trace: TraceConfig = field(default_factory=TraceConfig)
    tick_interval_seconds: int = 900
    matching: MatchingParams = field(default_factory=MatchingParams)
    source_rate_limit: int = 100000


@dataclass
class RunResult:
    metrics: MetricsReport
    snapshot: dict
    trace_results: list[TraceResult]
    records: list[ViolationRecord]
    outcomes: list[IngestOutcome]
    rejected: int
    elapsed_seconds: float


def run_end_to_end(
    scenario: Scenario,
    profile: DetectorProfile,
    system: SystemSettings | None = None,
    seed: int = 0,
    event_log=None,
) -> RunResult:
    started = time.perf_counter()
    system = system or SystemSettings()
    events, pings = simulate_detectors(scenario, profile, seed)

    model = scenario.model
    credentials = CredentialStore(
        [SourceCredential("sim-vision", SIM_API_KEY, system.source_rate_limit)]
    )
    pipeline = Pipeline(
        model,
        credentials,
        dedup_config=system.dedup,
        schedule=BatchSchedule.from_model(model, system.tick_interval_seconds),
        event_log=event_log,
    )
    status = StatusEngine(model, system.status)
    tracer = Tracer(model, system.trace)
    pipeline.on_publish(lambda record, now: status.record_violation(record, now))

    # social-distancing detection over the full ping history per space;
    # the derived events join the main stream at their run-end times
    by_space: dict[str, list] = {}
    for ping in pings:
        by_space.setdefault(ping.space_id, []).append(ping)
    proximity_events = []
    for space_id in sorted(by_space):
        for violation in detect_proximity_violations(by_space[space_id], system.trace):
            proximity_events.append(proximity_event(violation))

    PING, EVENT, PROXIMITY, INFECTION = 0, 1, 2, 3
    stream: list[tuple[float, int, int, object]] = []
    for i, ping in enumerate(pings):
        stream.append((ping.timestamp, PING, i, ping))
    for i, event in enumerate(events):
        stream.append((event.timestamp, EVENT, i, event))
    for i, event in enumerate(proximity_events):
        stream.append((event.timestamp, PROXIMITY, i, event))
    for i, entry in enumerate(scenario.infection_plan):
        stream.append((entry.reported_at, INFECTION, i, entry))
    stream.sort(key=lambda item: item[:3])

    outcomes: list[IngestOutcome] = []
    rejected = 0
    interval = system.tick_interval_seconds
    next_tick = interval
    results: dict[str, TraceResult] = {}

    for at, kind, idx, item in stream:
        while next_tick <= at:
            pipeline.run_batch_tick(next_tick)
            next_tick += interval
        if kind == PING:
            tracer.add_pings([item], detect=False)
        elif kind == EVENT:
            outcome = pipeline.ingest(item.to_bytes(), SIM_API_KEY, now=at)
            outcomes.append(outcome)
            rejected += 0 if outcome.accepted else 1
        elif kind == PROXIMITY:
            outcomes.append(pipeline.submit(item.to_json(), now=at))
        else:
            report = InfectionReport(
                report_id=_plan_report_id(idx),
                badge_id=item.badge_id,
                reported_at=item.reported_at,
                lookback_seconds=item.lookback_seconds,
            )
            result = tracer.trace(report)
            results[report.report_id] = result
            mark_at_risk(
                result,
                status,
                lambda event: pipeline.submit(event.to_json(), now=at),
                at,
            )

    while next_tick <= scenario.horizon_seconds:
        pipeline.run_batch_tick(next_tick)
        next_tick += interval
    pipeline.run_batch_tick(scenario.horizon_seconds)

    published = pipeline.published_records()
    classifications = None
    if scenario.infection_plan:
        roster = [p.badge_id for p in model.people]
        classifications = person_classifications(list(scenario.infection_plan), results, roster)
    metrics = compute_metrics(
        list(scenario.opportunities), published, system.matching, classifications
    )
    snapshot = status.snapshot(scenario.horizon_seconds)
    return RunResult(
        metrics=metrics,
        snapshot=snapshot,
        trace_results=[results[rid] for rid in sorted(results)],
        records=pipeline.records(),
        outcomes=outcomes,
        rejected=rejected,
        elapsed_seconds=time.perf_counter() - started,
    )
