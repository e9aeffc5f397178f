"""Anomaly events and violation records.

Events are the standardized, PII-free detections produced by any detector
source. The schema is closed: there is no field for a person identity or
image payload, and unexpected keys are rejected at validation time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .twin import Priority, TwinBinding, ViolationType

# The full set of keys an event document may carry. Anything else is
# rejected, which is what keeps the schema PII-free.
EVENT_FIELDS = frozenset(
    {"event_id", "source_id", "vtype", "space_id", "timestamp", "location", "confidence", "payload"}
)
REQUIRED_EVENT_FIELDS = frozenset({"event_id", "source_id", "vtype", "space_id", "timestamp", "confidence"})


@dataclass(frozen=True)
class AnomalyEvent:
    event_id: str
    source_id: str
    vtype: ViolationType
    space_id: str
    timestamp: float
    location: tuple[float, float] | None = None
    confidence: float = 1.0
    payload: dict | None = None

    def to_json(self) -> dict:
        doc: dict = {
            "event_id": self.event_id,
            "source_id": self.source_id,
            "vtype": self.vtype.value,
            "space_id": self.space_id,
            "timestamp": self.timestamp,
            "confidence": self.confidence,
        }
        if self.location is not None:
            doc["location"] = [self.location[0], self.location[1]]
        if self.payload is not None:
            doc["payload"] = self.payload
        return doc

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()


class IngestStatus(str, Enum):
    ACCEPTED_NEW = "accepted_new"
    ACCEPTED_DUPLICATE = "accepted_duplicate"
    REJECTED = "rejected"


@dataclass(frozen=True)
class FieldErrorDetail:
    field: str
    code: str

    def to_json(self) -> dict:
        return {"field": self.field, "code": self.code}


@dataclass(frozen=True)
class IngestOutcome:
    status: IngestStatus
    violation_id: str | None = None
    duplicate_of: str | None = None
    reject_reason: str | None = None
    field_errors: tuple[FieldErrorDetail, ...] = ()

    def __post_init__(self):
        if self.status is IngestStatus.ACCEPTED_NEW:
            assert self.violation_id, "accepted_new requires violation_id"
        elif self.status is IngestStatus.ACCEPTED_DUPLICATE:
            assert self.duplicate_of, "accepted_duplicate requires duplicate_of"
        else:
            assert self.reject_reason, "rejected requires reject_reason"

    @property
    def accepted(self) -> bool:
        return self.status is not IngestStatus.REJECTED

    def to_json(self) -> dict:
        doc: dict = {"status": self.status.value}
        if self.violation_id is not None:
            doc["violation_id"] = self.violation_id
        if self.duplicate_of is not None:
            doc["duplicate_of"] = self.duplicate_of
        if self.reject_reason is not None:
            doc["reject_reason"] = self.reject_reason
        if self.field_errors:
            doc["field_errors"] = [e.to_json() for e in self.field_errors]
        return doc


@dataclass
class ViolationRecord:
    """A deduplicated, twin-bound, prioritized violation.

    The canonical event is the first-seen member of the cluster; later
    detections of the same underlying violation land in duplicate_event_ids.
    """

    violation_id: str
    canonical: AnomalyEvent
    binding: TwinBinding
    priority: Priority
    detected_at: float
    duplicate_event_ids: list[str] = field(default_factory=list)
    reported_at: float | None = None

    @property
    def vtype(self) -> ViolationType:
        return self.canonical.vtype

    @property
    def space_id(self) -> str:
        return self.binding.space_id

    @property
    def published(self) -> bool:
        return self.reported_at is not None

    def to_json(self) -> dict:
        return {
            "violation_id": self.violation_id,
            "vtype": self.vtype.value,
            "space_id": self.space_id,
            "priority": self.priority.value,
            "detected_at": self.detected_at,
            "reported_at": self.reported_at,
            "canonical_event": self.canonical.to_json(),
            "duplicate_event_ids": list(self.duplicate_event_ids),
            "binding": self.binding.to_json(),
        }
