// DOM wiring for the single-page annotation UI.

import { ApiClient } from "./api.js";
import { renderCompletion, renderConflicts, renderCostPanel, renderQuotaTable } from "./dashboard.js";
import { keyToAction } from "./keys.js";
import { AnnotationSession, SessionState } from "./session.js";
import { renderSentence } from "./spans.js";

const client = new ApiClient();

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

async function refreshDashboards(): Promise<void> {
  try {
    const [progress, cost, conflicts] = await Promise.all([
      client.fetchProgress(),
      client.fetchCost(),
      client.fetchConflicts(),
    ]);
    el("quota").innerHTML = renderQuotaTable(progress);
    el("cost").innerHTML = renderCostPanel(cost);
    el("conflicts").innerHTML = renderConflicts(conflicts);
  } catch {
    // Dashboards are best-effort; the banner handles hard failures.
  }
}

function onStateChange(state: SessionState): void {
  const banner = el("banner");
  const sentence = el("sentence");
  const meta = el("meta");
  banner.hidden = true;
  switch (state.kind) {
    case "loading":
      sentence.textContent = "Loading…";
      break;
    case "annotating": {
      const view = state.view;
      sentence.innerHTML = renderSentence(view.text ?? "", view.spans ?? {});
      const quota = view.quota;
      meta.textContent = quota
        ? `verb "${quota.verb}" · ${quota.positive}/${quota.cap} positive, ` +
          `${quota.negative}/${quota.cap} negative` +
          (state.editing ? " · editing previous label" : "")
        : "";
      break;
    }
    case "exhausted":
      sentence.innerHTML = "";
      meta.textContent = "";
      el("completion").innerHTML = state.view.progress
        ? renderCompletion(state.view.progress)
        : "<p class=\"done\">Queue exhausted.</p>";
      break;
    case "error":
      banner.hidden = false;
      banner.textContent = `Service unreachable: ${state.message}`;
      break;
  }
  void refreshDashboards();
}

const session = new AnnotationSession(client, "annotator", onStateChange);

document.addEventListener("keydown", (event) => {
  const action = keyToAction(event.key);
  if (action) {
    event.preventDefault();
    void session.handleKey(action);
  }
});

for (const [id, action] of [
  ["btn-yes", "label-true"],
  ["btn-no", "label-false"],
  ["btn-skip", "skip"],
  ["btn-undo", "undo"],
] as const) {
  el(id).addEventListener("click", () => void session.handleKey(action));
}

el("btn-retry").addEventListener("click", () => void session.retry());

void session.start();
