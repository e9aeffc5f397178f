// DOM wiring: fetch state, subscribe to alerts, dispatch user actions.
// All policy decisions (colors, priorities, at-risk) come from the server.

import { api, ApiError, subscribeAlerts } from "./api.js";
import { AlertFeed, recentForSpace, tilesFromSnapshot, traceHighlights } from "./state.js";
import type { Snapshot, TraceResult } from "./types.js";
import { renderBanner, renderFeed, renderRecent, renderTiles, renderTracePanel } from "./view.js";

const el = (id: string): HTMLElement => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
};

let snapshot: Snapshot | null = null;
let selectedSpace: string | null = null;
let highlights = new Set<string>();
let lastTrace: TraceResult | null = null;
const feed = new AlertFeed();

function redraw(): void {
  if (snapshot !== null) {
    el("tiles").innerHTML = renderTiles(tilesFromSnapshot(snapshot, highlights), selectedSpace);
    el("as-of").textContent = `as of ${new Date(snapshot.as_of * 1000).toISOString()}`;
    el("recent").innerHTML = selectedSpace
      ? renderRecent(recentForSpace(snapshot, selectedSpace))
      : '<p class="empty">Select a space to see its recent violations.</p>';
  }
  el("feed").innerHTML = renderFeed(feed.entries);
  el("trace-panel").innerHTML = lastTrace ? renderTracePanel(lastTrace) : "";
}

function showBanner(message: string | null): void {
  el("banner-slot").innerHTML = renderBanner(message);
  const retry = document.getElementById("retry");
  if (retry) retry.addEventListener("click", () => void refreshSnapshot());
}

async function refreshSnapshot(): Promise<void> {
  try {
    snapshot = await api.snapshot();
    showBanner(null);
  } catch (err) {
    showBanner(`Connection lost: ${err instanceof Error ? err.message : String(err)}`);
  }
  redraw();
}

async function gapFill(): Promise<void> {
  // one-second overlap: records published at exactly the last-seen time
  // reappear and are absorbed by the feed's id-based dedupe
  const since = Math.max(0, feed.lastReportedAt() - 1);
  try {
    const { violations } = await api.violationsSince(since);
    if (feed.pushAll(violations) > 0) redraw();
  } catch {
    // the banner from the snapshot path covers connectivity reporting
  }
}

function wireActions(): void {
  el("tiles").addEventListener("click", (event) => {
    const tile = (event.target as HTMLElement).closest<HTMLElement>(".tile");
    if (!tile) return;
    selectedSpace = tile.dataset.space ?? null;
    redraw();
  });

  el("trace-panel").addEventListener("click", async (event) => {
    const button = (event.target as HTMLElement).closest<HTMLElement>("button.sanitize");
    if (!button || !button.dataset.space) return;
    try {
      await api.markSanitized(button.dataset.space);
      highlights.delete(button.dataset.space);
      await refreshSnapshot();
    } catch (err) {
      showBanner(err instanceof ApiError ? `${err.code}: ${err.message}` : String(err));
    }
  });

  (el("infection-form") as HTMLFormElement).addEventListener("submit", async (event) => {
    event.preventDefault();
    const badge = (el("badge-input") as HTMLInputElement).value.trim();
    if (!badge) return;
    try {
      lastTrace = await api.reportInfection(badge);
      highlights = traceHighlights(lastTrace);
      await refreshSnapshot();
    } catch (err) {
      showBanner(err instanceof ApiError ? `${err.code}: ${err.message}` : String(err));
    }
  });

  (el("reassign-form") as HTMLFormElement).addEventListener("submit", async (event) => {
    event.preventDefault();
    const badge = (el("reassign-badge") as HTMLInputElement).value.trim();
    const space = (el("reassign-space") as HTMLInputElement).value.trim();
    if (!badge || !space) return;
    try {
      await api.reassign(badge, space);
      showBanner(null);
      el("reassign-result").textContent = `${badge} -> ${space}`;
    } catch (err) {
      showBanner(err instanceof ApiError ? `${err.code}: ${err.message}` : String(err));
    }
  });
}

async function start(): Promise<void> {
  wireActions();
  await refreshSnapshot();
  subscribeAlerts({
    onRecord: (record) => {
      if (feed.push(record)) {
        void refreshSnapshot();
      }
    },
    onConnect: () => {
      showBanner(null);
      void gapFill();
    },
    onDisconnect: () => showBanner("Alert stream disconnected; reconnecting"),
  });
}

void start();
