// Progress and cost panels.  Zero-label panels show em-dash placeholders
// rather than dividing by zero.

import type { Conflict, CostView, Progress } from "./api.js";
import { escapeHtml } from "./spans.js";

const PLACEHOLDER = "—";

export function formatPrecision(positives: number, labeled: number): string {
  if (labeled === 0) {
    return PLACEHOLDER;
  }
  return (positives / labeled).toFixed(3);
}

export function renderQuotaTable(progress: Progress): string {
  const rows = progress.verbs
    .map((v) => {
      const status = v.closed ? "closed" : "open";
      return (
        `<tr><td>${escapeHtml(v.verb)}</td>` +
        `<td>${v.positive}/${v.cap}</td>` +
        `<td>${v.negative}/${v.cap}</td>` +
        `<td>${status}</td></tr>`
      );
    })
    .join("");
  return (
    "<table class=\"quota\"><thead>" +
    "<tr><th>verb</th><th>positive</th><th>negative</th><th>status</th></tr>" +
    `</thead><tbody>${rows}</tbody></table>`
  );
}

export function renderCostPanel(cost: CostView): string {
  const precision = cost.precision ?? PLACEHOLDER;
  const projected = cost.projected_cost_per_tp
    ? `$${cost.projected_cost_per_tp}`
    : PLACEHOLDER;
  return (
    `<dl class="cost">` +
    `<dt>labeled</dt><dd>${cost.labeled}</dd>` +
    `<dt>positives</dt><dd>${cost.positives}</dd>` +
    `<dt>precision</dt><dd>${precision}</dd>` +
    `<dt>cost per confirmed positive (at c_hr=$${escapeHtml(cost.c_hr)})</dt>` +
    `<dd>${projected}</dd>` +
    `</dl>`
  );
}

export function renderConflicts(conflicts: Conflict[]): string {
  if (conflicts.length === 0) {
    return "<p>No conflicting 4-tuples.</p>";
  }
  const items = conflicts
    .map(
      (c) =>
        `<li><code>${escapeHtml(c.quad.join(" / "))}</code> ` +
        `(+${c.positive_ids.length} / −${c.negative_ids.length})</li>`,
    )
    .join("");
  return `<ul class="conflicts">${items}</ul>`;
}

export function renderCompletion(progress: Progress): string {
  return (
    `<p class="done">Queue exhausted: ${progress.labeled} labeled ` +
    `(${progress.positives} positive, ${progress.negatives} negative).</p>` +
    renderQuotaTable(progress)
  );
}
