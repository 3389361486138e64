/** Typed client for the session service. The client never computes costs,
 * features, or paths — every number rendered in the UI comes from these
 * payloads. */

export interface PathPayload {
  edges: number[];
  cells: [number, number][];
  duration_s: number;
  features: number[];
  violations: string[];
}

export interface TaskPayload {
  label: string;
  start: [number, number];
  goal: [number, number];
}

export interface QueryPayload {
  status: string;
  query_id?: string;
  iteration?: number;
  budget?: number;
  task?: TaskPayload;
  path_current?: PathPayload;
  path_alternative?: PathPayload;
}

export interface InstancePayload {
  index: number;
  label: string;
  start: [number, number];
  goal: [number, number];
  best_path: PathPayload;
  weights_shown: number;
}

export interface StatePayload {
  session_id: string;
  status: string;
  iteration: number;
  budget: number;
  dimension: number;
  rows: number;
  policy: string;
  instances: InstancePayload[];
}

export interface StageMetrics {
  task_time_ratio: number;
  entropy_ratio: number | null;
  global_time_ratio?: number;
}

export interface MetricsPayload {
  initial: StageMetrics;
  final: StageMetrics;
  alpha_all: number | null;
  alpha_tasks: number | null;
  w_final: number[];
}

export interface FinalizePayload extends MetricsPayload {
  status: string;
  contradiction: boolean;
  final_paths: PathPayload[];
}

export interface ChoiceOutcome {
  status: string;
  iteration: number;
  accepted: boolean;
  task_time_ratio: number;
}

export interface SessionConfigBody {
  budget?: number;
  subset_size?: number;
  policy?: string;
  seed?: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

export class ServiceClient {
  constructor(private baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, payload.error ?? response.statusText);
    }
    return payload as T;
  }

  createSession(document: unknown, config: SessionConfigBody = {}): Promise<StatePayload> {
    return this.request<StatePayload>("POST", "/sessions", {
      environment: document,
      config,
    });
  }

  getQuery(sessionId: string): Promise<QueryPayload> {
    return this.request<QueryPayload>("GET", `/sessions/${sessionId}/query`);
  }

  postChoice(
    sessionId: string,
    queryId: string,
    choice: "current" | "alternative",
  ): Promise<ChoiceOutcome> {
    return this.request<ChoiceOutcome>("POST", `/sessions/${sessionId}/choice`, {
      query_id: queryId,
      choice,
    });
  }

  getState(sessionId: string): Promise<StatePayload> {
    return this.request<StatePayload>("GET", `/sessions/${sessionId}/state`);
  }

  finalize(sessionId: string): Promise<FinalizePayload> {
    return this.request<FinalizePayload>("POST", `/sessions/${sessionId}/finalize`);
  }

  getMetrics(sessionId: string, includeGlobal = false): Promise<MetricsPayload> {
    const suffix = includeGlobal ? "?global=1" : "";
    return this.request<MetricsPayload>("GET", `/sessions/${sessionId}/metrics${suffix}`);
  }
}
