// HTML string renderers, kept pure so tests can assert on markup without a
// browser. main.ts owns the only DOM writes.

import type { Tile, FeedEntry } from "./state.js";
import type { TraceResult, ViolationRecord } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderTiles(tiles: Tile[], selected: string | null): string {
  return tiles
    .map((t) => {
      const classes = ["tile", `rag-${t.rag}`];
      if (t.atRisk) classes.push("at-risk");
      if (t.traceHighlight) classes.push("trace-hit");
      if (t.spaceId === selected) classes.push("selected");
      const risk = t.atRisk ? '<span class="risk-badge">AT RISK</span>' : "";
      return (
        `<div class="${classes.join(" ")}" data-space="${escapeHtml(t.spaceId)}" data-rag="${t.rag}">` +
        `<h3>${escapeHtml(t.name)}</h3>${risk}` +
        `<div class="counts"><span class="window-count">${t.count}</span>` +
        `<span class="total-count">${t.totalCount} total</span></div>` +
        `</div>`
      );
    })
    .join("");
}

export function renderFeed(entries: FeedEntry[]): string {
  if (entries.length === 0) return '<p class="empty">No alerts yet.</p>';
  return entries
    .slice()
    .reverse()
    .map((e) => {
      const cls = e.priority === "immediate" ? "alert immediate" : "alert";
      const when = e.reportedAt === null ? "" : formatTime(e.reportedAt);
      return (
        `<div class="${cls}" data-violation="${escapeHtml(e.violationId)}">` +
        `<span class="vtype">${escapeHtml(e.vtype)}</span>` +
        `<span class="space">${escapeHtml(e.spaceId)}</span>` +
        `<span class="priority">${e.priority}</span>` +
        `<span class="when">${when}</span>` +
        `</div>`
      );
    })
    .join("");
}

export function renderRecent(records: ViolationRecord[]): string {
  if (records.length === 0) return '<p class="empty">No recent violations for this space.</p>';
  return (
    "<ul>" +
    records
      .map(
        (r) =>
          `<li><code>${escapeHtml(r.violation_id)}</code> ${escapeHtml(r.vtype)} ` +
          `(${r.duplicate_event_ids.length} duplicate detections)</li>`
      )
      .join("") +
    "</ul>"
  );
}

export function renderTracePanel(result: TraceResult): string {
  const spaces = result.at_risk_spaces
    .map(
      (s) =>
        `<li data-space="${escapeHtml(s.space_id)}">${escapeHtml(s.space_id)} ` +
        `<button class="sanitize" data-space="${escapeHtml(s.space_id)}">mark sanitized</button></li>`
    )
    .join("");
  const list = (badges: string[]) =>
    badges.length ? badges.map((b) => `<code>${escapeHtml(b)}</code>`).join(" ") : "(none)";
  const empty =
    result.at_risk_spaces.length === 0
      ? '<p class="empty">No at-risk areas for this report.</p>'
      : `<ul class="risk-spaces">${spaces}</ul>`;
  return (
    `<h3>Trace ${escapeHtml(result.report_id)}</h3>` +
    empty +
    `<p>Direct contacts: ${list(result.direct_contacts)}</p>` +
    `<p>Indirect contacts: ${list(result.indirect_contacts)}</p>`
  );
}

export function renderBanner(message: string | null): string {
  if (message === null) return "";
  return `<div class="banner">${escapeHtml(message)} <button id="retry">retry</button></div>`;
}

function formatTime(epochSeconds: number): string {
  const d = new Date(epochSeconds * 1000);
  return d.toISOString().replace("T", " ").slice(0, 19);
}
