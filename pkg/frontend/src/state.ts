// Pure view-state derivation. Everything here is a function of server
// payloads so the parity tests can compare tiles to snapshot JSON
// field-for-field without a DOM.

import type { Snapshot, SpaceStatus, TraceResult, ViolationRecord } from "./types.js";

export interface Tile {
  spaceId: string;
  name: string;
  rag: SpaceStatus["rag"];
  count: number;
  totalCount: number;
  lastViolationAt: number | null;
  atRisk: boolean;
  traceHighlight: boolean;
}

export function tilesFromSnapshot(snapshot: Snapshot, highlights: Set<string> = new Set()): Tile[] {
  return snapshot.spaces.map((s) => ({
    spaceId: s.space_id,
    name: s.name,
    rag: s.rag,
    count: s.count,
    totalCount: s.total_count,
    lastViolationAt: s.last_violation_at,
    atRisk: s.at_risk,
    traceHighlight: highlights.has(s.space_id),
  }));
}

export function traceHighlights(result: TraceResult): Set<string> {
  return new Set(result.at_risk_spaces.map((s) => s.space_id));
}

export function recentForSpace(snapshot: Snapshot, spaceId: string): ViolationRecord[] {
  return snapshot.recent_violations.filter((v) => v.space_id === spaceId);
}

export interface FeedEntry {
  violationId: string;
  vtype: string;
  spaceId: string;
  priority: "immediate" | "delay_tolerant";
  reportedAt: number | null;
}

// Chronological alert feed with duplicate suppression; reconnect gap-fill
// pushes the same records again, so entry identity is the violation id.
export class AlertFeed {
  entries: FeedEntry[] = [];
  private seen = new Set<string>();

  lastReportedAt(): number {
    let latest = 0;
    for (const e of this.entries) {
      if (e.reportedAt !== null && e.reportedAt > latest) latest = e.reportedAt;
    }
    return latest;
  }

  push(record: ViolationRecord): boolean {
    if (this.seen.has(record.violation_id)) return false;
    this.seen.add(record.violation_id);
    this.entries.push({
      violationId: record.violation_id,
      vtype: record.vtype,
      spaceId: record.space_id,
      priority: record.priority,
      reportedAt: record.reported_at,
    });
    return true;
  }

  pushAll(records: ViolationRecord[]): number {
    let added = 0;
    for (const r of records) if (this.push(r)) added += 1;
    return added;
  }
}
