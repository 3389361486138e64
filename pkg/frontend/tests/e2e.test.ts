/** Scripted end-to-end session against a live service: draw one zone of each
 * kind, answer a full 20-query session through the view model, and verify that
 * everything the screen would display is exactly what the service sent. */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ServiceClient } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import { ZoneDraft, buildDocument, formatDuration } from "../src/model.js";

const PORT = 8700 + Math.floor(Math.random() * 800);
const BASE = `http://127.0.0.1:${PORT}`;

const FACILITY_GRID = [
  "########################",
  "#......................#",
  "#.####.####.####.####..#",
  "#.####.####.####.####..#",
  "#......................#",
  "#......................#",
  "#.####.########.#####..#",
  "#.####.########.#####..#",
  "#......................#",
  "#......................#",
  "#.####.####.####.####..#",
  "#.####.####.####.####..#",
  "#......................#",
  "########################",
];

const TASKS = [
  { label: "dock-to-charge", start: [1, 1] as [number, number], goal: [1, 22] as [number, number] },
  { label: "dock-to-storage", start: [1, 1] as [number, number], goal: [5, 16] as [number, number] },
  { label: "dock-to-south", start: [1, 1] as [number, number], goal: [12, 16] as [number, number] },
  { label: "charge-to-dock", start: [12, 22] as [number, number], goal: [8, 1] as [number, number] },
  { label: "charge-to-north", start: [12, 22] as [number, number], goal: [1, 11] as [number, number] },
  { label: "assembly-to-dock", start: [9, 15] as [number, number], goal: [4, 1] as [number, number] },
  { label: "assembly-to-charge", start: [9, 15] as [number, number], goal: [8, 22] as [number, number] },
  { label: "storage-to-south", start: [5, 11] as [number, number], goal: [12, 10] as [number, number] },
];

// one zone of each kind (road drawn twice: one-way and two-way)
const DRAFTS: ZoneDraft[] = [
  {
    kind: "avoid",
    polygon: [[1.0, 10.2], [9.5, 10.2], [9.5, 13.0], [1.0, 13.0]],
    twoWay: false,
  },
  {
    kind: "speed_limit",
    polygon: [[20.9, 1.0], [23.1, 1.0], [23.1, 13.0], [20.9, 13.0]],
    twoWay: false,
  },
  {
    kind: "road",
    polygon: [[1.0, 3.9], [23.0, 3.9], [23.0, 6.1], [1.0, 6.1]],
    direction: [1, 0],
    twoWay: false,
  },
  {
    kind: "road",
    polygon: [[1.0, 7.9], [23.0, 7.9], [23.0, 10.1], [1.0, 10.1]],
    direction: [1, 0],
    twoWay: true,
  },
];

let service: ChildProcess;

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 120; attempt++) {
    try {
      const response = await fetch(`${BASE}/sessions/none/state`);
      if (response.status === 404) return;
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  const logDir = mkdtempSync(join(tmpdir(), "routespec-ui-"));
  service = spawn(
    "python3",
    ["-m", "routespec.cli", "serve", "--log-dir", logDir],
    {
      env: { ...process.env, ROUTESPEC_BIND: `127.0.0.1:${PORT}` },
      stdio: "ignore",
    },
  );
  await waitForService();
}, 60_000);

afterAll(() => {
  service?.kill();
});

describe("scripted live session", () => {
  it("draws zones, answers 20 queries, and mirrors the service exactly", async () => {
    const client = new ServiceClient(BASE);
    const controller = new SessionController(client);

    const document = buildDocument(FACILITY_GRID, 1.0, [1.0, 0.5], DRAFTS, TASKS);
    await controller.createSession(document, { budget: 20, subset_size: 5, seed: 3 });
    expect(controller.screen).toBe("querying");
    expect(controller.state!.dimension).toBe(8); // avoid + speeding + 2 + 4

    let answered = 0;
    while (controller.screen === "querying") {
      const view = controller.view!;
      const raw = await client.getQuery(controller.sessionId!);

      // everything displayed equals the payload, no client-side rounding
      expect(view.queryId).toBe(raw.query_id);
      expect(view.current.durationSeconds).toBe(raw.path_current!.duration_s);
      expect(view.alternative.durationSeconds).toBe(raw.path_alternative!.duration_s);
      expect(view.current.violations).toEqual(raw.path_current!.violations);
      expect(view.alternative.violations).toEqual(raw.path_alternative!.violations);
      expect(view.current.cells).toEqual(raw.path_current!.cells);
      expect(view.alternative.cells).toEqual(raw.path_alternative!.cells);
      expect(view.current.durationLabel).toBe(formatDuration(raw.path_current!.duration_s));
      expect(view.iteration).toBe(answered);

      // exactly one path selectable at a time; selection highlights its
      // violated zones' perimeters
      controller.select("alternative");
      expect(controller.view!.selected).toBe("alternative");
      controller.select("current");
      expect(controller.view!.selected).toBe("current");
      const zones = controller.highlightedZones();
      for (const zone of zones) {
        expect(zone).toBeGreaterThanOrEqual(0);
        expect(zone).toBeLessThan(DRAFTS.length);
      }
      controller.setNote(`round ${answered}: keeping the rule-following path`);

      await controller.submitChoice();
      answered += 1;

      // round-trip: rendered iteration equals GET /state after the post
      if (controller.screen === "querying") {
        const state = await client.getState(controller.sessionId!);
        expect(controller.state!.iteration).toBe(state.iteration);
        expect(state.iteration).toBe(answered);
      }
      if (answered > 25) throw new Error("session failed to terminate");
    }

    expect(answered).toBe(20); // full budget completed
    expect(controller.notes).toHaveLength(20);
    expect(controller.screen).toBe("summary");

    // terminal summary equals GET /metrics
    const metrics = await client.getMetrics(controller.sessionId!);
    const summary = controller.summary!;
    expect(summary.initialTaskTimeRatio).toBe(metrics.initial.task_time_ratio);
    expect(summary.finalTaskTimeRatio).toBe(metrics.final.task_time_ratio);
    expect(summary.initialEntropyRatio).toBe(metrics.initial.entropy_ratio);
    expect(summary.finalEntropyRatio).toBe(metrics.final.entropy_ratio);
    expect(summary.alphaAll).toBe(metrics.alpha_all);
    expect(summary.status).toBe("budget_exhausted");
  }, 180_000);

  it("recovers silently from a stale-query conflict", async () => {
    const client = new ServiceClient(BASE);
    const controller = new SessionController(client);
    const document = buildDocument(FACILITY_GRID, 1.0, [1.0, 0.5], DRAFTS, TASKS);
    await controller.createSession(document, { budget: 4, subset_size: 3, seed: 9 });

    // answer the outstanding query behind the controller's back
    const view = controller.view!;
    await client.postChoice(controller.sessionId!, view.queryId, "current");

    // the controller's submit now conflicts; it must refetch, not crash
    controller.select("current");
    await controller.submitChoice();
    expect(controller.view === null || controller.view.queryId !== view.queryId).toBe(true);
    if (controller.view) {
      expect(controller.view.iteration).toBe(1);
    }
  }, 60_000);

  it("rejects an inconsistent zone before any network call", async () => {
    expect(() =>
      buildDocument(FACILITY_GRID, 1.0, [1.0, 0.5], [
        { kind: "avoid", polygon: [[0, 0], [2, 2], [2, 0], [0, 2]], twoWay: false },
      ], TASKS),
    ).toThrow(/cross/);
  });
});
