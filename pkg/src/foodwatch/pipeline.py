"""Gateway and orchestration for anomaly events.

Ingest composes authentication, rate limiting, validation, similarity
deduplication and priority classification. Immediate violations alert
synchronously inside the ingest call; delay-tolerant ones wait for the
next batch tick, which is synchronized with the factory schedule.

Everything takes ``now`` as an explicit argument: there are no hidden
wall-clock reads, so a replayed event log reproduces the exact same
violation ids, clusters and publish times.
"""

from __future__ import annotations

import hmac
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, TextIO

from .errors import AuthFailed
from .events import (
    EVENT_FIELDS,
    REQUIRED_EVENT_FIELDS,
    AnomalyEvent,
    FieldErrorDetail,
    IngestOutcome,
    IngestStatus,
    ViolationRecord,
)
from .twin import (
    Priority,
    SpaceKind,
    TwinModel,
    ViolationType,
    map_event,
    policy_for,
    seconds_of_day,
)

RATE_WINDOW_SECONDS = 60.0


@dataclass(frozen=True)
class SourceCredential:
    source_id: str
    api_key: str
    rate_limit: int  # max events per sliding 60 s window

    def __post_init__(self):
        if self.rate_limit < 1:
            raise ValueError("rate_limit must be >= 1")


@dataclass(frozen=True)
class SourceContext:
    source_id: str
    rate_limit: int


class CredentialStore:
    def __init__(self, credentials: Iterable[SourceCredential] = ()):
        self._by_source = {c.source_id: c for c in credentials}

    @classmethod
    def from_json(cls, document: bytes | str) -> "CredentialStore":
        doc = json.loads(document)
        return cls(
            SourceCredential(
                source_id=str(c["source_id"]),
                api_key=str(c["api_key"]),
                rate_limit=int(c.get("rate_limit", 600)),
            )
            for c in doc
        )

    def authenticate(self, source_id: str, api_key: str) -> SourceContext:
        """Constant-time key check; unknown source and bad key are indistinguishable."""
        cred = self._by_source.get(source_id)
        expected = cred.api_key if cred is not None else api_key + "\x00"
        ok = hmac.compare_digest(expected.encode(), api_key.encode())
        if cred is None or not ok:
            raise AuthFailed("authentication failed")
        return SourceContext(source_id=cred.source_id, rate_limit=cred.rate_limit)


class RateLimiter:
    """Sliding-window limiter: at most rate_limit admitted events per (now-60s, now]."""

    def __init__(self):
        self._admitted: dict[str, deque[float]] = {}

    def check(self, ctx: SourceContext, now: float) -> bool:
        window = self._admitted.setdefault(ctx.source_id, deque())
        while window and window[0] <= now - RATE_WINDOW_SECONDS:
            window.popleft()
        if len(window) >= ctx.rate_limit:
            return False
        window.append(now)
        return True


# ---------------------------------------------------------------------------
# Validation

CLOCK_SKEW_ALLOWANCE = 60.0


def validate_event(data: dict, model: TwinModel, now: float) -> tuple[AnomalyEvent | None, list[FieldErrorDetail]]:
    """Schema and semantic checks; returns the parsed event or field errors."""
    errors: list[FieldErrorDetail] = []
    if not isinstance(data, dict):
        return None, [FieldErrorDetail("body", "not_an_object")]
    for name in sorted(REQUIRED_EVENT_FIELDS):
        if name not in data or data[name] is None:
            errors.append(FieldErrorDetail(name, f"missing_field:{name}"))
    for name in sorted(data.keys() - EVENT_FIELDS):
        errors.append(FieldErrorDetail(name, f"unexpected_field:{name}"))
    if errors:
        return None, errors

    vtype: ViolationType | None = None
    try:
        vtype = ViolationType(data["vtype"])
    except ValueError:
        errors.append(FieldErrorDetail("vtype", "unknown_vtype"))

    space_id = str(data["space_id"])
    space = None
    if not model.has_space(space_id):
        errors.append(FieldErrorDetail("space_id", "unknown_space"))
    else:
        space = model.space(space_id)
        if space.kind is not SpaceKind.AREA:
            errors.append(FieldErrorDetail("space_id", "space_not_area"))

    try:
        timestamp = float(data["timestamp"])
    except (TypeError, ValueError):
        errors.append(FieldErrorDetail("timestamp", "not_a_number"))
        timestamp = None
    if timestamp is not None and timestamp > now + CLOCK_SKEW_ALLOWANCE:
        errors.append(FieldErrorDetail("timestamp", "timestamp_in_future"))

    try:
        confidence = float(data["confidence"])
    except (TypeError, ValueError):
        errors.append(FieldErrorDetail("confidence", "not_a_number"))
        confidence = None
    if confidence is not None and not (0.0 <= confidence <= 1.0):
        errors.append(FieldErrorDetail("confidence", "confidence_out_of_range"))

    location = None
    if data.get("location") is not None:
        loc = data["location"]
        if not (isinstance(loc, (list, tuple)) and len(loc) == 2):
            errors.append(FieldErrorDetail("location", "bad_location"))
        else:
            try:
                location = (float(loc[0]), float(loc[1]))
            except (TypeError, ValueError):
                errors.append(FieldErrorDetail("location", "bad_location"))
            if location is not None and space is not None and space.geometry is not None:
                if not space.geometry.contains(*location):
                    errors.append(FieldErrorDetail("location", "location_out_of_bounds"))

    payload = data.get("payload")
    if payload is not None and not isinstance(payload, dict):
        errors.append(FieldErrorDetail("payload", "bad_payload"))

    if errors:
        return None, errors
    event = AnomalyEvent(
        event_id=str(data["event_id"]),
        source_id=str(data["source_id"]),
        vtype=vtype,
        space_id=space_id,
        timestamp=timestamp,
        location=location,
        confidence=confidence,
        payload=payload,
    )
    return event, []


# ---------------------------------------------------------------------------
# Similarity dedup


@dataclass(frozen=True)
class DedupConfig:
    window_seconds: float = 300.0
    time_constant_seconds: float = 120.0
    distance_scale_meters: float = 3.0
    threshold: float = 0.6

    def __post_init__(self):
        assert self.window_seconds > 0 and self.time_constant_seconds > 0
        assert self.distance_scale_meters > 0 and 0 < self.threshold <= 1


def similarity(e1: AnomalyEvent, e2: AnomalyEvent, cfg: DedupConfig) -> float:
    """Similarity in [0, 1]: hard gates on type and space, then exponential
    time decay times a linear distance factor when both events carry one."""
    if e1.vtype is not e2.vtype or e1.space_id != e2.space_id:
        return 0.0
    time_factor = math.exp(-abs(e1.timestamp - e2.timestamp) / cfg.time_constant_seconds)
    if e1.location is not None and e2.location is not None:
        dist = math.hypot(e1.location[0] - e2.location[0], e1.location[1] - e2.location[1])
        space_factor = 1.0 - min(dist, cfg.distance_scale_meters) / cfg.distance_scale_meters
    else:
        space_factor = 1.0
    return time_factor * space_factor


class Deduplicator:
    """Incremental similarity clustering against canonical events.

    State is partitioned by (space_id, vtype); within a partition the
    newest event is compared to every canonical event whose timestamp is
    within the dedup window. Ties break on highest score, then earliest
    violation id.
    """

    def __init__(self, cfg: DedupConfig):
        self.cfg = cfg
        self._partitions: dict[tuple[str, ViolationType], list[tuple[str, AnomalyEvent]]] = {}

    def match(self, event: AnomalyEvent) -> str | None:
        partition = self._partitions.get((event.space_id, event.vtype), [])
        best_id: str | None = None
        best_score = 0.0
        for violation_id, canonical in partition:
            if abs(event.timestamp - canonical.timestamp) > self.cfg.window_seconds:
                continue
            score = similarity(event, canonical, self.cfg)
            if score >= self.cfg.threshold and (
                score > best_score or (score == best_score and (best_id is None or violation_id < best_id))
            ):
                best_id = violation_id
                best_score = score
        return best_id

    def register(self, violation_id: str, canonical: AnomalyEvent) -> None:
        self._partitions.setdefault((canonical.space_id, canonical.vtype), []).append(
            (violation_id, canonical)
        )


def classify_priority(event: AnomalyEvent, model: TwinModel) -> Priority:
    return policy_for(model, event.space_id, event.vtype).priority


# ---------------------------------------------------------------------------
# Batch schedule


def _merge_windows(windows: list[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    merged: list[tuple[int, int]] = []
    for start, end in sorted(windows):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return tuple(merged)


@dataclass(frozen=True)
class BatchSchedule:
    """Tick cadence plus per-space operational windows (seconds-of-day)."""

    tick_interval_seconds: int = 900
    space_windows: dict[str, tuple[tuple[int, int], ...]] = field(default_factory=dict)

    def __post_init__(self):
        assert self.tick_interval_seconds >= 1

    @classmethod
    def from_model(cls, model: TwinModel, tick_interval_seconds: int = 900) -> "BatchSchedule":
        per_space: dict[str, list[tuple[int, int]]] = {}
        for proc in model.processes:
            per_space.setdefault(proc.space, []).extend(proc.windows)
        return cls(
            tick_interval_seconds=tick_interval_seconds,
            space_windows={sid: _merge_windows(ws) for sid, ws in per_space.items()},
        )

    def in_schedule(self, space_id: str, timestamp: float) -> bool:
        tod = seconds_of_day(timestamp)
        return any(start <= tod < end for start, end in self.space_windows.get(space_id, ()))

    def next_tick(self, after: float) -> float:
        return (math.floor(after / self.tick_interval_seconds) + 1) * self.tick_interval_seconds


# ---------------------------------------------------------------------------
# Pipeline


class Pipeline:
    """Single ingest path from raw event bytes to routed violations."""

    def __init__(
        self,
        model: TwinModel,
        credentials: CredentialStore,
        dedup_config: DedupConfig | None = None,
        schedule: BatchSchedule | None = None,
        event_log: TextIO | None = None,
    ):
        self._model = model
        self._credentials = credentials
        self._dedup_config = dedup_config or DedupConfig()
        self._schedule = schedule or BatchSchedule.from_model(model)
        self._event_log = event_log
        self._limiter = RateLimiter()
        self._dedup = Deduplicator(self._dedup_config)
        self._records: dict[str, ViolationRecord] = {}
        self._order: list[str] = []
        self._event_index: dict[str, str] = {}  # event_id -> violation_id
        self._queue: list[str] = []  # delay-tolerant, awaiting a tick
        self._sequence = 0
        self._on_publish: list[Callable[[ViolationRecord, float], None]] = []
        self.alerts: list[tuple[float, str]] = []  # (reported_at, violation_id)

    # -- wiring --------------------------------------------------------

    @property
    def model(self) -> TwinModel:
        return self._model

    def set_model(self, model: TwinModel) -> None:
        self._model = model
        self._schedule = BatchSchedule.from_model(model, self._schedule.tick_interval_seconds)

    @property
    def schedule(self) -> BatchSchedule:
        return self._schedule

    def on_publish(self, callback: Callable[[ViolationRecord, float], None]) -> None:
        self._on_publish.append(callback)

    def set_event_log(self, sink: TextIO | None) -> None:
        self._event_log = sink

    def records(self) -> list[ViolationRecord]:
        return [self._records[vid] for vid in self._order]

    def record(self, violation_id: str) -> ViolationRecord:
        return self._records[violation_id]

    def published_records(self) -> list[ViolationRecord]:
        return [r for r in self.records() if r.published]

    def pending_count(self) -> int:
        return len(self._queue)

    # -- ingest --------------------------------------------------------

    def ingest(self, raw: bytes | str, api_key: str, now: float) -> IngestOutcome:
        """Full gateway path: auth, rate limit, parse, validate, dedup, route."""
        try:
            data = json.loads(raw)
        except json.JSONDecodeError:
            return IngestOutcome(IngestStatus.REJECTED, reject_reason="malformed")
        if not isinstance(data, dict) or not data.get("source_id"):
            return IngestOutcome(IngestStatus.REJECTED, reject_reason="malformed")
        try:
            ctx = self._credentials.authenticate(str(data["source_id"]), api_key)
        except AuthFailed:
            return IngestOutcome(IngestStatus.REJECTED, reject_reason="auth_failed")
        if not self._limiter.check(ctx, now):
            return IngestOutcome(IngestStatus.REJECTED, reject_reason="rate_limited")
        return self.submit(data, now)

    def submit(self, data: dict, now: float) -> IngestOutcome:
        """Post-gateway path, also used for internally generated events and replay."""
        event, field_errors = validate_event(data, self._model, now)
        if field_errors:
            if any(e.code == "unknown_space" for e in field_errors):
                reason = "unknown_space"
            else:
                reason = f"validation:{field_errors[0].field}"
            return IngestOutcome(IngestStatus.REJECTED, reject_reason=reason, field_errors=tuple(field_errors))

        # exact-id replay is idempotent and wins over similarity dedup
        known = self._event_index.get(event.event_id)
        if known is not None:
            self._records[known].duplicate_event_ids.append(event.event_id)
            outcome = IngestOutcome(IngestStatus.ACCEPTED_DUPLICATE, duplicate_of=known)
            self._log(event, outcome, now)
            return outcome

        matched = self._dedup.match(event)
        if matched is not None:
            self._records[matched].duplicate_event_ids.append(event.event_id)
            self._event_index[event.event_id] = matched
            outcome = IngestOutcome(IngestStatus.ACCEPTED_DUPLICATE, duplicate_of=matched)
            self._log(event, outcome, now)
            return outcome

        priority = classify_priority(event, self._model)
        if priority is Priority.DELAY_TOLERANT and not self._schedule.in_schedule(
            event.space_id, event.timestamp
        ):
            # Immediate types are never schedule-gated; a delay-tolerant
            # detection outside every operational window is noise.
            return IngestOutcome(IngestStatus.REJECTED, reject_reason="out_of_schedule")

        self._sequence += 1
        violation_id = f"v-{self._sequence:06d}"
        record = ViolationRecord(
            violation_id=violation_id,
            canonical=event,
            binding=map_event(self._model, event),
            priority=priority,
            detected_at=now,
        )
        self._records[violation_id] = record
        self._order.append(violation_id)
        self._event_index[event.event_id] = violation_id
        self._dedup.register(violation_id, event)

        outcome = IngestOutcome(IngestStatus.ACCEPTED_NEW, violation_id=violation_id)
        self._log(event, outcome, now)
        if priority is Priority.IMMEDIATE:
            self._publish(record, now)
        else:
            self._queue.append(violation_id)
        return outcome

    def run_batch_tick(self, now: float) -> list[ViolationRecord]:
        """Publish every enqueued delay-tolerant violation due by ``now``."""
        due = [vid for vid in self._queue if self._records[vid].detected_at <= now]
        due.sort(key=lambda vid: (self._records[vid].detected_at, vid))
        self._queue = [vid for vid in self._queue if self._records[vid].detected_at > now]
        published = []
        for vid in due:
            record = self._records[vid]
            self._publish(record, now)
            published.append(record)
        return published

    def _publish(self, record: ViolationRecord, now: float) -> None:
        record.reported_at = now
        self.alerts.append((now, record.violation_id))
        for callback in self._on_publish:
            callback(record, now)

    def _log(self, event: AnomalyEvent, outcome: IngestOutcome, now: float) -> None:
        # every accepted event (external or internally injected) hits the
        # durable log before the outcome is returned, so replaying the log
        # bytes through a fresh pipeline reproduces ids and clusters exactly
        if self._event_log is None:
            return
        line = json.dumps(
            {
                "received_at": now,
                "source_id": event.source_id,
                "event": event.to_json(),
                "outcome": outcome.to_json(),
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        self._event_log.write(line + "\n")
        self._event_log.flush()

    # -- replay --------------------------------------------------------

    def replay(self, lines: Iterable[str], end_time: float | None = None) -> list[IngestOutcome]:
        """Re-feed a recorded event log, firing schedule-aligned batch ticks.

        Auth and rate limiting are skipped: everything in the log was
        already admitted once. Outcomes, ids and publish times reproduce
        the original run exactly.
        """
        outcomes = []
        last_time: float | None = None
        for raw in lines:
            raw = raw.strip()
            if not raw:
                continue
            rec = json.loads(raw)
            received_at = float(rec["received_at"])
            self._fire_due_ticks(last_time, received_at)
            outcomes.append(self.submit(rec["event"], received_at))
            last_time = received_at
        if end_time is not None and last_time is not None:
            self._fire_due_ticks(last_time, end_time)
        return outcomes

    def _fire_due_ticks(self, last_time: float | None, up_to: float) -> None:
        if last_time is None:
            return
        tick = self._schedule.next_tick(last_time)
        while tick <= up_to:
            self.run_batch_tick(tick)
            tick += self._schedule.tick_interval_seconds
