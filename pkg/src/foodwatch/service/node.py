"""One-process wiring of pipeline, status engine and tracer.

The node is the single writer: every mutating input flows through one of
its apply methods, is executed, and is then journaled. Recovery replays
the journal through the exact same methods, so state after a crash equals
state at the last complete record.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import TextIO

from ..events import IngestOutcome, ViolationRecord
from ..pipeline import BatchSchedule, CredentialStore, DedupConfig, Pipeline
from ..status import StatusConfig, StatusEngine
from ..tracing import (
    InfectionReport,
    PositionPing,
    TraceConfig,
    Tracer,
    TraceResult,
    mark_at_risk,
    proximity_event,
)
from ..twin import TwinModel, reassign_person
from .journal import JournalRecord, JournalWriter, RecoveryReport, read_journal


class ServiceNode:
    def __init__(
        self,
        model: TwinModel,
        credentials: CredentialStore,
        dedup: DedupConfig | None = None,
        status_config: StatusConfig | None = None,
        trace_config: TraceConfig | None = None,
        tick_interval_seconds: int = 900,
        journal: JournalWriter | None = None,
        event_log: TextIO | None = None,
    ):
        self.model = model
        self.pipeline = Pipeline(
            model,
            credentials,
            dedup_config=dedup,
            schedule=BatchSchedule.from_model(model, tick_interval_seconds),
            event_log=event_log,
        )
        self.status = StatusEngine(model, status_config)
        self.tracer = Tracer(model, trace_config)
        self.journal = journal
        self.published: list[ViolationRecord] = []
        self._next_report = 0
        self._last_tick: float | None = None
        self.pipeline.on_publish(self._handle_publish)

    # -- publish fan-out ------------------------------------------------

    def _handle_publish(self, record: ViolationRecord, now: float) -> None:
        self.status.record_violation(record, now)
        self.published.append(record)

    def published_since(self, since: float) -> list[ViolationRecord]:
        return [r for r in self.published if r.reported_at is not None and r.reported_at > since]

    # -- mutating inputs (journaled) ------------------------------------

    def ingest_event(self, raw: bytes | str, api_key: str, now: float) -> IngestOutcome:
        outcome = self.pipeline.ingest(raw, api_key, now)
        if outcome.accepted and self.journal is not None:
            self.journal.append(
                "ingest",
                now,
                {"received_at": now, "event": json.loads(raw), "outcome": outcome.to_json()},
            )
        return outcome

    def add_pings(self, pings: list[PositionPing], now: float) -> int:
        """Validate and store a ping batch, journal it, then run incremental
        social-distancing detection and inject the derived events."""
        for ping in pings:
            self.tracer.validate_ping(ping)
        if self.journal is not None:
            self.journal.append("ping", now, {"pings": [p.to_json() for p in pings]})
        return self._apply_pings(pings, now)

    def _apply_pings(self, pings: list[PositionPing], now: float) -> int:
        violations = self.tracer.add_pings(pings)
        for violation in violations:
            event = proximity_event(violation)
            self.pipeline.submit(event.to_json(), now=max(now, event.timestamp))
        return len(violations)

    def report_infection(
        self, badge_id: str, reported_at: float, lookback_seconds: float | None, now: float
    ) -> TraceResult:
        report_id = f"r-{self._next_report:03d}"
        body = {
            "report_id": report_id,
            "badge_id": badge_id,
            "reported_at": reported_at,
            "lookback_seconds": lookback_seconds,
        }
        result = self._apply_infection(body, now)
        if self.journal is not None:
            self.journal.append("infection", now, body)
        return result

    def _apply_infection(self, body: dict, now: float) -> TraceResult:
        report = InfectionReport(
            report_id=body["report_id"],
            badge_id=body["badge_id"],
            reported_at=float(body["reported_at"]),
            lookback_seconds=float(body["lookback_seconds"]) if body.get("lookback_seconds") else 172800.0,
        )
        self._next_report += 1
        result = self.tracer.trace(report)
        mark_at_risk(result, self.status, lambda ev: self.pipeline.submit(ev.to_json(), now=now), now)
        return result

    def sanitize_space(self, space_id: str, now: float) -> None:
        self.status.set_at_risk(space_id, False)  # raises UnknownSpace first
        if self.journal is not None:
            self.journal.append("action", now, {"action": "sanitized", "space_id": space_id})

    def reassign(self, badge_id: str, space_id: str, now: float) -> None:
        self._apply_reassign(badge_id, space_id)
        if self.journal is not None:
            self.journal.append(
                "action", now, {"action": "reassign", "badge_id": badge_id, "space_id": space_id}
            )

    def _apply_reassign(self, badge_id: str, space_id: str) -> None:
        model = reassign_person(self.model, badge_id, space_id)
        self.model = model
        self.pipeline.set_model(model)
        self.status.set_model(model)
        self.tracer.set_model(model)

    def tick(self, now: float) -> list[ViolationRecord]:
        published = self.pipeline.run_batch_tick(now)
        if published and self.journal is not None:
            self.journal.append(
                "publish", now, {"at": now, "violation_ids": [r.violation_id for r in published]}
            )
            self.journal.sync()  # batch boundary
        return published

    def maybe_tick(self, now: float) -> None:
        """Fire every schedule boundary crossed since the last call."""
        interval = self.pipeline.schedule.tick_interval_seconds
        if self._last_tick is None:
            self._last_tick = (int(now) // interval) * interval
            return
        boundary = self._last_tick + interval
        while boundary <= now:
            self.tick(boundary)
            self._last_tick = boundary
            boundary += interval

    # -- recovery --------------------------------------------------------

    def apply_record(self, record: JournalRecord) -> None:
        if record.kind == "ingest":
            self.pipeline.submit(record.body["event"], float(record.body["received_at"]))
        elif record.kind == "publish":
            self.pipeline.run_batch_tick(float(record.body["at"]))
        elif record.kind == "ping":
            pings = [PositionPing(**p) for p in record.body["pings"]]
            self._apply_pings(pings, record.at)
        elif record.kind == "infection":
            self._apply_infection(record.body, record.at)
        elif record.kind == "action":
            body = record.body
            if body["action"] == "sanitized":
                self.status.set_at_risk(body["space_id"], False)
            else:
                self._apply_reassign(body["badge_id"], body["space_id"])
        else:  # pragma: no cover - read_journal rejects unknown kinds
            raise ValueError(f"unknown journal kind {record.kind}")

    @classmethod
    def recover(
        cls,
        journal_path: str | Path,
        model: TwinModel,
        credentials: CredentialStore,
        **kwargs,
    ) -> tuple["ServiceNode", RecoveryReport]:
        """Rebuild in-memory state by replaying the journal.

        The node is constructed without sinks so replay cannot re-append;
        callers attach a live journal/event log afterwards.
        """
        node = cls(model, credentials, journal=None, event_log=None, **kwargs)
        records, report = read_journal(journal_path)
        for record in records:
            node.apply_record(record)
        if records:
            node._last_tick = None  # re-anchor on the next live input
        return node, report

    # -- state fingerprint -------------------------------------------------

    def state_digest(self) -> dict:
        """Canonical view of everything recovery must reproduce."""
        visits = {}
        for person in self.model.people:
            v = self.tracer.visits_for(person.badge_id)
            if v:
                visits[person.badge_id] = [[i.space_id, i.start, i.end] for i in v]
        violations = []
        for record in self.pipeline.records():
            violations.append(
                {
                    "violation_id": record.violation_id,
                    "vtype": record.vtype.value,
                    "space_id": record.space_id,
                    "detected_at": record.detected_at,
                    "reported_at": record.reported_at,
                    "duplicates": sorted(record.duplicate_event_ids),
                    "canonical": record.canonical.event_id,
                }
            )
        areas = [a.space_id for a in self.model.areas()]
        return {
            "violations": violations,
            "pending": self.pipeline.pending_count(),
            "at_risk": sorted(s for s in areas if self.status.is_at_risk(s)),
            "totals": {s: self.status.total_published(s) for s in areas if self.status.total_published(s)},
            "visits": visits,
            "traces": {r.report_id: r.to_json() for r in self.tracer.results()},
            "home_spaces": {p.badge_id: p.home_space for p in self.model.people},
        }

    def state_fingerprint(self) -> str:
        blob = json.dumps(self.state_digest(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()
