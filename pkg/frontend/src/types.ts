// Wire types mirroring the service JSON. The dashboard never recomputes
// policy: colors, counts and at-risk flags come from the server verbatim.

export type Rag = "green" | "amber" | "red";

export interface SpaceStatus {
  space_id: string;
  name: string;
  rag: Rag;
  count: number;
  total_count: number;
  last_violation_at: number | null;
  at_risk: boolean;
}

export interface ViolationRecord {
  violation_id: string;
  vtype: string;
  space_id: string;
  priority: "immediate" | "delay_tolerant";
  detected_at: number;
  reported_at: number | null;
  canonical_event: {
    event_id: string;
    source_id: string;
    vtype: string;
    space_id: string;
    timestamp: number;
    confidence: number;
    location?: [number, number];
  };
  duplicate_event_ids: string[];
}

export interface Snapshot {
  as_of: number;
  spaces: SpaceStatus[];
  recent_violations: ViolationRecord[];
}

export interface TraceResult {
  report_id: string;
  at_risk_spaces: { space_id: string; intervals: [number, number][] }[];
  direct_contacts: string[];
  indirect_contacts: string[];
}

export interface HealthInfo {
  status: string;
  model_id: string;
  area_count: number;
}
