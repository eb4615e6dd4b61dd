// End-to-end: the UI session logic (the same compiled modules the page
// loads) driven against a *real* annotation service over HTTP.
//
// Flow: build candidates from the demo corpus, start the service, submit
// 20 keyboard-driven labels, then simulate a page reload (fresh client)
// and a full service restart (event-log replay) and check persistence,
// the quota table, and the precision panel arithmetic.

import { execFileSync, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { formatPrecision, renderQuotaTable } from "../src/dashboard.js";
import { keyToAction } from "../src/keys.js";
import { AnnotationSession } from "../src/session.js";

const REPO_ROOT = resolve(__dirname, "..", "..");
const PYTHON = process.env.CXMINE_PYTHON ?? "python3";
const PORT = 8300 + Math.floor(Math.random() * 500);
const BASE = `http://127.0.0.1:${PORT}`;

let workdir: string;
let server: ChildProcess | null = null;

function startServer(candidates: string, events: string): ChildProcess {
  return spawn(
    PYTHON,
    [
      "-m", "cxmine.cli", "serve",
      "--candidates", candidates,
      "--events", events,
      "--port", String(PORT),
      "--host", "127.0.0.1",
    ],
    { cwd: REPO_ROOT, stdio: "ignore" },
  );
}

async function waitForService(timeoutMs = 20_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/api/progress`);
      if (res.ok) {
        return;
      }
    } catch {
      // Not up yet.
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("annotation service did not come up");
}

function stopServer(proc: ChildProcess | null): Promise<void> {
  if (!proc || proc.exitCode !== null) {
    return Promise.resolve();
  }
  return new Promise((resolve) => {
    proc.once("exit", () => resolve());
    proc.kill("SIGTERM");
    setTimeout(() => proc.kill("SIGKILL"), 3_000).unref();
  });
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "cxmine-e2e-"));
  const candidates = join(workdir, "candidates.jsonl");
  execFileSync(
    PYTHON,
    [
      "-m", "cxmine.cli", "match",
      "--pattern", "cmc",
      "--input", join(REPO_ROOT, "demo", "corpus.conllu"),
      "--out", candidates,
    ],
    { cwd: REPO_ROOT },
  );
  server = startServer(candidates, join(workdir, "events.jsonl"));
  await waitForService();
});

afterAll(async () => {
  await stopServer(server);
  rmSync(workdir, { recursive: true, force: true });
});

it("20 keyboard labels persist, survive reload and restart, and the panels agree", async () => {
  const client = new ApiClient(BASE);
  const session = new AnnotationSession(client, "e2e");
  await session.start();

  // 14 positives then 6 negatives, all through the keyboard path.
  const keys = [...Array(14).fill("y"), ...Array(6).fill("n")];
  for (const key of keys) {
    expect(session.state.kind).toBe("annotating");
    await session.handleKey(keyToAction(key));
  }
  expect(session.submitted.length).toBe(20);

  // "Page reload": a fresh client sees every label server-side.
  const reloaded = new ApiClient(BASE);
  const progress = await reloaded.fetchProgress();
  expect(progress.labeled).toBe(20);
  expect(progress.positives).toBe(14);
  expect(progress.negatives).toBe(6);

  // The rendered quota table reflects /api/progress exactly.
  const table = renderQuotaTable(progress);
  for (const row of progress.verbs) {
    expect(table).toContain(`<td>${row.verb}</td>`);
    expect(table).toContain(`<td>${row.positive}/${row.cap}</td>`);
  }

  // Precision panel matches hand arithmetic: 14/20 = 0.700.
  expect(formatPrecision(progress.positives, progress.labeled)).toBe("0.700");
  const cost = await reloaded.fetchCost();
  expect(cost.precision).toBe("0.7000");
  expect(cost.projected_cost_per_tp).toBe("0.285714"); // 0.2 * 20 / 14

  // Full service restart: the event log replays to identical state.
  await stopServer(server);
  server = startServer(
    join(workdir, "candidates.jsonl"),
    join(workdir, "events.jsonl"),
  );
  await waitForService();
  const afterRestart = await new ApiClient(BASE).fetchProgress();
  expect(afterRestart.labeled).toBe(20);
  expect(afterRestart.positives).toBe(14);
  expect(afterRestart.verbs).toEqual(progress.verbs);
});
