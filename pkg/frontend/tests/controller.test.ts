import { describe, expect, it } from "vitest";

import {
  ApiError,
  ChoiceOutcome,
  FinalizePayload,
  MetricsPayload,
  QueryPayload,
  StatePayload,
} from "../src/api.js";
import { SessionController } from "../src/controller.js";

function pathPayload(duration: number, violations: string[]) {
  return {
    edges: [0, 1],
    cells: [[0, 0], [0, 1], [0, 2]] as [number, number][],
    duration_s: duration,
    features: [1, 0],
    violations,
  };
}

function queryPayload(iteration: number): QueryPayload {
  return {
    status: "active",
    query_id: `q${iteration}`,
    iteration,
    budget: 2,
    task: { label: "t", start: [0, 0], goal: [0, 2] },
    path_current: pathPayload(4.0, []),
    path_alternative: pathPayload(3.0, ["z0-avoid", "z2-wrongway"]),
  };
}

/** In-memory stand-in for the service with a scriptable conflict. */
class FakeClient {
  iteration = 0;
  conflictOnce = false;
  finalized = false;

  async createSession(): Promise<StatePayload> {
    return {
      session_id: "s1",
      status: "active",
      iteration: 0,
      budget: 2,
      dimension: 3,
      rows: 0,
      policy: "minvertex",
      instances: [],
    };
  }

  async getQuery(): Promise<QueryPayload> {
    if (this.iteration >= 2) return { status: "budget_exhausted" };
    return queryPayload(this.iteration);
  }

  async postChoice(_id: string, queryId: string): Promise<ChoiceOutcome> {
    if (this.conflictOnce) {
      this.conflictOnce = false;
      throw new ApiError(409, "stale");
    }
    if (queryId !== `q${this.iteration}`) throw new ApiError(409, "stale");
    this.iteration += 1;
    return {
      status: this.iteration >= 2 ? "budget_exhausted" : "active",
      iteration: this.iteration,
      accepted: false,
      task_time_ratio: 1.2,
    };
  }

  async getState(): Promise<StatePayload> {
    return {
      session_id: "s1",
      status: this.iteration >= 2 ? "budget_exhausted" : "active",
      iteration: this.iteration,
      budget: 2,
      dimension: 3,
      rows: this.iteration,
      policy: "minvertex",
      instances: [],
    };
  }

  async finalize(): Promise<FinalizePayload> {
    this.finalized = true;
    return {
      status: "budget_exhausted",
      contradiction: false,
      final_paths: [],
      initial: { task_time_ratio: 1.5, entropy_ratio: 0.8 },
      final: { task_time_ratio: 1.2, entropy_ratio: 0.9 },
      alpha_all: 0.5,
      alpha_tasks: 0.6,
      w_final: [1, 2, 3],
    };
  }

  async getMetrics(): Promise<MetricsPayload> {
    return {
      initial: { task_time_ratio: 1.5, entropy_ratio: 0.8 },
      final: { task_time_ratio: 1.2, entropy_ratio: 0.9 },
      alpha_all: 0.5,
      alpha_tasks: 0.6,
      w_final: [1, 2, 3],
    };
  }
}

function controllerWith(fake: FakeClient): SessionController {
  return new SessionController(fake as never);
}

describe("session controller", () => {
  it("walks editing -> querying -> summary with passthrough numbers", async () => {
    const fake = new FakeClient();
    const controller = controllerWith(fake);
    expect(controller.screen).toBe("editing");

    await controller.createSession({}, {});
    expect(controller.screen).toBe("querying");
    expect(controller.view!.current.durationSeconds).toBe(4.0);
    expect(controller.view!.alternative.violations).toEqual(["z0-avoid", "z2-wrongway"]);
    expect(controller.view!.alternative.violatedZoneIndexes).toEqual([0, 2]);

    controller.select("alternative");
    expect(controller.highlightedZones()).toEqual([0, 2]);
    controller.select("current");
    expect(controller.highlightedZones()).toEqual([]);

    controller.setNote("first");
    await controller.submitChoice();
    expect(controller.notes).toEqual([{ queryId: "q0", choice: "current", note: "first" }]);
    expect(controller.view!.queryId).toBe("q1");

    controller.select("current");
    await controller.submitChoice();
    expect(controller.screen).toBe("summary");
    expect(fake.finalized).toBe(true);
    expect(controller.summary!.initialTaskTimeRatio).toBe(1.5);
    expect(controller.summary!.finalTaskTimeRatio).toBe(1.2);
  });

  it("requires a selection before submitting", async () => {
    const fake = new FakeClient();
    const controller = controllerWith(fake);
    await controller.createSession({}, {});
    await expect(controller.submitChoice()).rejects.toThrow(/select/);
  });

  it("refetches silently on a conflict", async () => {
    const fake = new FakeClient();
    const controller = controllerWith(fake);
    await controller.createSession({}, {});
    fake.conflictOnce = true;
    controller.select("current");
    await controller.submitChoice();
    // conflict consumed: still on the same query, nothing recorded
    expect(controller.view!.queryId).toBe("q0");
    expect(controller.notes).toHaveLength(0);
  });
});
