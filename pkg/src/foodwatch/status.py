"""Red/amber/green space status over a rolling window.

Counts deduplicated violation records, never raw detector events, so a
flood of duplicate detections of one violation moves a space's count by
exactly one. Expiry is computed lazily at query time against an explicit
``now``; nothing in here reads a clock.
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .errors import UnpublishedViolation
from .events import ViolationRecord
from .twin import SpaceKind, TwinModel, ViolationType, policy_for


class Rag(str, Enum):
    GREEN = "green"
    AMBER = "amber"
    RED = "red"


@dataclass(frozen=True)
class RagStatus:
    rag: Rag
    active_count: int


@dataclass(frozen=True)
class StatusConfig:
    window_seconds: float = 3600.0
    recent_limit: int = 50

    def __post_init__(self):
        assert self.window_seconds > 0 and self.recent_limit > 0


class StatusEngine:
    """Synthesizes published violations into per-space RAG status snapshots."""

    def __init__(self, model: TwinModel, config: StatusConfig | None = None):
        self._model = model
        self.config = config or StatusConfig()
        # per space: parallel sorted lists of reported_at and violation ids
        self._times: dict[str, list[float]] = {}
        self._vids: dict[str, list[str]] = {}
        self._counted: dict[str, list[bool]] = {}
        self._totals: dict[str, int] = {}
        self._last_violation: dict[str, float] = {}
        self._at_risk: set[str] = set()
        self._recent: deque[dict] = deque(maxlen=self.config.recent_limit)

    @property
    def model(self) -> TwinModel:
        return self._model

    def set_model(self, model: TwinModel) -> None:
        self._model = model

    # -- updates -------------------------------------------------------

    def record_violation(self, record: ViolationRecord, now: float) -> RagStatus:
        if not record.published:
            raise UnpublishedViolation(f"{record.violation_id} has no reported_at")
        space_id = record.space_id
        self._model.space(space_id)
        times = self._times.setdefault(space_id, [])
        idx = bisect.bisect_right(times, record.reported_at)
        times.insert(idx, record.reported_at)
        self._vids.setdefault(space_id, []).insert(idx, record.violation_id)
        counted = policy_for(self._model, space_id, record.vtype).enabled
        self._counted.setdefault(space_id, []).insert(idx, counted)
        self._totals[space_id] = self._totals.get(space_id, 0) + 1
        self._last_violation[space_id] = max(self._last_violation.get(space_id, 0.0), record.reported_at)
        self._recent.append(record.to_json())
        return self.rag_status(space_id, now)

    def set_at_risk(self, space_id: str, flag: bool) -> None:
        self._model.space(space_id)
        if flag:
            self._at_risk.add(space_id)
        else:
            self._at_risk.discard(space_id)

    def purge(self, now: float) -> int:
        """Drop violations that can no longer affect any window at or after ``now``."""
        cutoff = now - self.config.window_seconds
        dropped = 0
        for space_id, times in self._times.items():
            keep = bisect.bisect_right(times, cutoff)
            if keep:
                dropped += keep
                self._times[space_id] = times[keep:]
                self._vids[space_id] = self._vids[space_id][keep:]
                self._counted[space_id] = self._counted[space_id][keep:]
        return dropped

    # -- queries -------------------------------------------------------

    def thresholds_for(self, space_id: str) -> tuple[int, int]:
        """Strictest (lowest) amber/red thresholds among enabled types for the space."""
        ambers, reds = [], []
        for vtype in ViolationType:
            entry = policy_for(self._model, space_id, vtype)
            if entry.enabled:
                ambers.append(entry.rag_amber_min)
                reds.append(entry.rag_red_min)
        if not ambers:
            return (1, 4)
        return (min(ambers), min(reds))

    def window_count(self, space_id: str, now: float) -> int:
        times = self._times.get(space_id, [])
        if not times:
            return 0
        lo = bisect.bisect_right(times, now - self.config.window_seconds)
        hi = bisect.bisect_right(times, now)
        counted = self._counted[space_id]
        return sum(1 for i in range(lo, hi) if counted[i])

    def rag_status(self, space_id: str, now: float) -> RagStatus:
        self._model.space(space_id)
        count = self.window_count(space_id, now)
        amber_min, red_min = self.thresholds_for(space_id)
        if count >= red_min:
            rag = Rag.RED
        elif count >= amber_min:
            rag = Rag.AMBER
        else:
            rag = Rag.GREEN
        return RagStatus(rag=rag, active_count=count)

    def total_published(self, space_id: str) -> int:
        return self._totals.get(space_id, 0)

    def is_at_risk(self, space_id: str) -> bool:
        return space_id in self._at_risk

    def snapshot(self, now: float) -> dict:
        """Point-in-time dashboard view over every area; pure read."""
        spaces = []
        for node in self._model.walk_depth_first():
            if node.kind is not SpaceKind.AREA:
                continue
            status = self.rag_status(node.space_id, now)
            spaces.append(
                {
                    "space_id": node.space_id,
                    "name": node.name,
                    "rag": status.rag.value,
                    "count": status.active_count,
                    "total_count": self.total_published(node.space_id),
                    "last_violation_at": self._last_violation.get(node.space_id),
                    "at_risk": node.space_id in self._at_risk,
                }
            )
        return {
            "as_of": now,
            "spaces": spaces,
            "recent_violations": list(self._recent),
        }
