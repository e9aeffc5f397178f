// Thin client over the service HTTP/SSE API. The dashboard consumes these
// endpoints and nothing else.

import type { HealthInfo, Snapshot, TraceResult, ViolationRecord } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}

async function getJson<T>(path: string): Promise<T> {
  const response = await fetch(path);
  if (!response.ok) await raise(response);
  return (await response.json()) as T;
}

async function postJson<T>(path: string, body: unknown): Promise<T> {
  const response = await fetch(path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!response.ok) await raise(response);
  return (await response.json()) as T;
}

async function raise(response: Response): Promise<never> {
  let code = "error";
  let message = `${response.status}`;
  try {
    const doc = await response.json();
    code = doc.code ?? code;
    message = doc.message ?? message;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, code, message);
}

export const api = {
  health: () => getJson<HealthInfo>("/healthz"),
  snapshot: () => getJson<Snapshot>("/snapshot"),
  violationsSince: (since: number) =>
    getJson<{ violations: ViolationRecord[] }>(`/violations?since=${since}`),
  reportInfection: (badgeId: string, reportedAt?: number) =>
    postJson<TraceResult>("/infections", {
      badge_id: badgeId,
      ...(reportedAt !== undefined ? { reported_at: reportedAt } : {}),
    }),
  markSanitized: (spaceId: string) =>
    postJson<{ space_id: string; at_risk: boolean }>(
      `/spaces/${encodeURIComponent(spaceId)}/sanitized`,
      {}
    ),
  reassign: (badgeId: string, spaceId: string) =>
    postJson<{ badge_id: string; home_space: string }>(
      `/people/${encodeURIComponent(badgeId)}/reassign`,
      { space_id: spaceId }
    ),
};

export interface AlertSubscription {
  close(): void;
}

// One SSE subscription with auto-reconnect; on each (re)connect the caller
// gap-fills from GET /violations?since= so dropped records are never lost.
export function subscribeAlerts(handlers: {
  onRecord: (record: ViolationRecord) => void;
  onConnect: () => void;
  onDisconnect: () => void;
  backoffMs?: number;
}): AlertSubscription {
  let source: EventSource | null = null;
  let closed = false;
  let backoff = handlers.backoffMs ?? 1000;

  const connect = () => {
    if (closed) return;
    source = new EventSource("/alerts");
    source.onopen = () => {
      backoff = handlers.backoffMs ?? 1000;
      handlers.onConnect();
    };
    source.onmessage = (event) => {
      handlers.onRecord(JSON.parse(event.data) as ViolationRecord);
    };
    source.onerror = () => {
      source?.close();
      handlers.onDisconnect();
      if (!closed) {
        setTimeout(connect, backoff);
        backoff = Math.min(backoff * 2, 15000);
      }
    };
  };
  connect();
  return {
    close() {
      closed = true;
      source?.close();
    },
  };
}
