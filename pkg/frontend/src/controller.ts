/** Session view-model: the state machine between the service and the screen.
 *
 * All decision-relevant numbers are passed through from service payloads
 * untouched; rendering code formats labels but never recomputes. Stale-query
 * conflicts trigger a silent refetch. */

import {
  ApiError,
  MetricsPayload,
  PathPayload,
  QueryPayload,
  ServiceClient,
  SessionConfigBody,
  StatePayload,
} from "./api.js";
import { formatDuration, zoneIndexFromConstraintId } from "./model.js";

export type Screen = "editing" | "querying" | "summary";
export type Side = "current" | "alternative";

export interface PathView {
  cells: [number, number][];
  /** exact payload duration; labels round, logic never does */
  durationSeconds: number;
  durationLabel: string;
  violations: string[];
  violatedZoneIndexes: number[];
}

export interface QueryView {
  queryId: string;
  iteration: number;
  budget: number;
  taskLabel: string;
  start: [number, number];
  goal: [number, number];
  current: PathView;
  alternative: PathView;
  selected: Side | null;
  note: string;
}

export interface SummaryView {
  status: string;
  contradiction: boolean;
  initialTaskTimeRatio: number;
  finalTaskTimeRatio: number;
  initialEntropyRatio: number | null;
  finalEntropyRatio: number | null;
  alphaAll: number | null;
  alphaTasks: number | null;
}

export interface ChoiceNote {
  queryId: string;
  choice: Side;
  note: string;
}

function pathView(payload: PathPayload): PathView {
  return {
    cells: payload.cells,
    durationSeconds: payload.duration_s,
    durationLabel: formatDuration(payload.duration_s),
    violations: payload.violations,
    violatedZoneIndexes: payload.violations
      .map(zoneIndexFromConstraintId)
      .filter((index): index is number => index !== null),
  };
}

export class SessionController {
  screen: Screen = "editing";
  sessionId: string | null = null;
  state: StatePayload | null = null;
  view: QueryView | null = null;
  summary: SummaryView | null = null;
  notes: ChoiceNote[] = [];

  constructor(private client: ServiceClient) {}

  async createSession(document: unknown, config: SessionConfigBody = {}): Promise<void> {
    this.state = await this.client.createSession(document, config);
    this.sessionId = this.state.session_id;
    this.screen = "querying";
    await this.fetchQuery();
  }

  /** Pull the outstanding query; a terminal status moves to the summary. */
  async fetchQuery(): Promise<void> {
    if (!this.sessionId) throw new Error("no session");
    const payload: QueryPayload = await this.client.getQuery(this.sessionId);
    if (payload.query_id === undefined) {
      await this.finish();
      return;
    }
    this.view = {
      queryId: payload.query_id,
      iteration: payload.iteration!,
      budget: payload.budget!,
      taskLabel: payload.task!.label,
      start: payload.task!.start,
      goal: payload.task!.goal,
      current: pathView(payload.path_current!),
      alternative: pathView(payload.path_alternative!),
      selected: null,
      note: "",
    };
  }

  /** Exactly one path selectable at a time. */
  select(side: Side): void {
    if (!this.view) throw new Error("no outstanding query");
    this.view.selected = side;
  }

  setNote(text: string): void {
    if (!this.view) throw new Error("no outstanding query");
    this.view.note = text;
  }

  /** Zone perimeters to highlight for the selected path. */
  highlightedZones(): number[] {
    if (!this.view || !this.view.selected) return [];
    const path = this.view.selected === "current" ? this.view.current : this.view.alternative;
    return path.violatedZoneIndexes;
  }

  /** Post the selection; conflicts refetch silently; otherwise advance. */
  async submitChoice(): Promise<void> {
    if (!this.sessionId || !this.view) throw new Error("no outstanding query");
    if (!this.view.selected) throw new Error("select a path first");
    const { queryId, selected, note } = this.view;
    try {
      await this.client.postChoice(this.sessionId, queryId, selected);
    } catch (error) {
      if (error instanceof ApiError && error.isConflict) {
        await this.fetchQuery();
        return;
      }
      throw error;
    }
    this.notes.push({ queryId, choice: selected, note });
    this.state = await this.client.getState(this.sessionId);
    this.view = null;
    await this.fetchQuery();
  }

  /** Finalize and show the before/after metric summary. */
  async finish(): Promise<void> {
    if (!this.sessionId) throw new Error("no session");
    const final = await this.client.finalize(this.sessionId);
    const metrics: MetricsPayload = await this.client.getMetrics(this.sessionId);
    this.summary = {
      status: final.status,
      contradiction: final.contradiction,
      initialTaskTimeRatio: metrics.initial.task_time_ratio,
      finalTaskTimeRatio: metrics.final.task_time_ratio,
      initialEntropyRatio: metrics.initial.entropy_ratio,
      finalEntropyRatio: metrics.final.entropy_ratio,
      alphaAll: metrics.alpha_all,
      alphaTasks: metrics.alpha_tasks,
    };
    this.view = null;
    this.screen = "summary";
  }
}
