/** Page wiring: specification editor, query answering, and the summary view.
 *
 * The default map is the bundled small-facility layout; zones drawn on the
 * canvas are compiled by the service at session creation. */

import { ServiceClient } from "./api.js";
import { SessionController, Side } from "./controller.js";
import {
  Point,
  TaskSpec,
  ZoneDraft,
  ZoneKind,
  buildDocument,
  formatRatio,
  validateDraft,
} from "./model.js";
import {
  MapGeometry,
  canvasSize,
  drawGrid,
  drawMarker,
  drawPath,
  drawZone,
} from "./render.js";

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

const FACILITY_TASKS: TaskSpec[] = [
  { label: "dock-to-charge", start: [1, 1], goal: [1, 22] },
  { label: "dock-to-storage", start: [1, 1], goal: [5, 16] },
  { label: "dock-to-south", start: [1, 1], goal: [12, 16] },
  { label: "charge-to-dock", start: [12, 22], goal: [8, 1] },
  { label: "charge-to-north", start: [12, 22], goal: [1, 11] },
  { label: "assembly-to-dock", start: [9, 15], goal: [4, 1] },
  { label: "assembly-to-charge", start: [9, 15], goal: [8, 22] },
  { label: "storage-to-south", start: [5, 11], goal: [12, 10] },
];

const HEADINGS: Record<string, Point> = {
  "E": [1, 0],
  "NE": [1, -1],
  "N": [0, -1],
  "NW": [-1, -1],
  "W": [-1, 0],
  "SW": [-1, 1],
  "S": [0, 1],
  "SE": [1, 1],
};

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

class App {
  geometry: MapGeometry = { grid: FACILITY_GRID, cellSizeM: 1.0, pixelsPerMeter: 24 };
  drafts: ZoneDraft[] = [];
  pending: Point[] = [];
  kind: ZoneKind = "avoid";
  controller: SessionController;
  canvas!: HTMLCanvasElement;
  ctx!: CanvasRenderingContext2D;

  constructor() {
    const base = (window as unknown as { ROUTESPEC_SERVICE?: string }).ROUTESPEC_SERVICE
      ?? "http://127.0.0.1:8571";
    this.controller = new SessionController(new ServiceClient(base));
  }

  boot(): void {
    this.canvas = element<HTMLCanvasElement>("map");
    const [width, height] = canvasSize(this.geometry);
    this.canvas.width = width;
    this.canvas.height = height;
    this.ctx = this.canvas.getContext("2d")!;

    element<HTMLSelectElement>("zone-kind").addEventListener("change", (event) => {
      this.kind = (event.target as HTMLSelectElement).value as ZoneKind;
      this.syncRoadControls();
    });
    this.canvas.addEventListener("click", (event) => this.onCanvasClick(event));
    element("close-zone").addEventListener("click", () => this.closeZone());
    element("undo-zone").addEventListener("click", () => {
      this.drafts.pop();
      this.redraw();
    });
    element("submit-spec").addEventListener("click", () => void this.submitSpecification());
    element("pick-current").addEventListener("click", () => this.pick("current"));
    element("pick-alternative").addEventListener("click", () => this.pick("alternative"));
    element("submit-choice").addEventListener("click", () => void this.submitChoice());
    this.syncRoadControls();
    this.redraw();
  }

  private syncRoadControls(): void {
    element("road-controls").style.display = this.kind === "road" ? "inline" : "none";
  }

  private onCanvasClick(event: MouseEvent): void {
    if (this.controller.screen !== "editing") return;
    const rect = this.canvas.getBoundingClientRect();
    const x = (event.clientX - rect.left) / this.geometry.pixelsPerMeter;
    const y = (event.clientY - rect.top) / this.geometry.pixelsPerMeter;
    this.pending.push([x, y]);
    this.redraw();
  }

  private closeZone(): void {
    const draft: ZoneDraft = {
      kind: this.kind,
      polygon: [...this.pending],
      twoWay: element<HTMLInputElement>("two-way").checked,
    };
    if (this.kind === "road") {
      const headingName = element<HTMLSelectElement>("road-heading").value;
      draft.direction = HEADINGS[headingName] ?? [1, 0];
    }
    const problem = validateDraft(draft);
    const message = element("editor-message");
    if (problem) {
      message.textContent = problem;
      return;
    }
    message.textContent = "";
    this.drafts.push(draft);
    this.pending = [];
    this.redraw();
  }

  private async submitSpecification(): Promise<void> {
    const message = element("editor-message");
    try {
      const documentBody = buildDocument(
        FACILITY_GRID,
        this.geometry.cellSizeM,
        [1.0, 0.5],
        this.drafts,
        FACILITY_TASKS,
      );
      await this.controller.createSession(documentBody, { budget: 20, subset_size: 5 });
    } catch (error) {
      message.textContent = String(error instanceof Error ? error.message : error);
      return;
    }
    this.showScreen();
    this.redraw();
  }

  private pick(side: Side): void {
    this.controller.select(side);
    this.redraw();
    this.renderQueryPanel();
  }

  private async submitChoice(): Promise<void> {
    if (!this.controller.view) return;
    this.controller.setNote(element<HTMLTextAreaElement>("note").value);
    try {
      await this.controller.submitChoice();
    } catch (error) {
      element("query-message").textContent = String(
        error instanceof Error ? error.message : error,
      );
      return;
    }
    element<HTMLTextAreaElement>("note").value = "";
    this.showScreen();
    this.redraw();
    this.renderQueryPanel();
    this.renderSummary();
  }

  private showScreen(): void {
    element("editor").style.display = this.controller.screen === "editing" ? "block" : "none";
    element("query").style.display = this.controller.screen === "querying" ? "block" : "none";
    element("summary").style.display = this.controller.screen === "summary" ? "block" : "none";
    if (this.controller.screen === "querying") {
      this.renderQueryPanel();
    }
    this.renderSummary();
  }

  private renderQueryPanel(): void {
    const view = this.controller.view;
    if (!view) return;
    element("progress").textContent = `query ${view.iteration + 1} of ${view.budget} — ${view.taskLabel}`;
    element("current-duration").textContent = view.current.durationLabel;
    element("alternative-duration").textContent = view.alternative.durationLabel;
    element("current-violations").textContent =
      view.current.violations.join(", ") || "follows every rule";
    element("alternative-violations").textContent =
      view.alternative.violations.join(", ") || "follows every rule";
    element("pick-current").classList.toggle("selected", view.selected === "current");
    element("pick-alternative").classList.toggle("selected", view.selected === "alternative");
  }

  private renderSummary(): void {
    const summary = this.controller.summary;
    if (!summary || this.controller.screen !== "summary") return;
    element("summary-status").textContent = summary.contradiction
      ? `${summary.status} (your answers contradicted each other; kept the last consistent state)`
      : summary.status;
    element("summary-time").textContent =
      `task time ratio: ${formatRatio(summary.initialTaskTimeRatio)} before, ` +
      `${formatRatio(summary.finalTaskTimeRatio)} after`;
    element("summary-entropy").textContent =
      `entropy ratio: ${formatRatio(summary.initialEntropyRatio)} before, ` +
      `${formatRatio(summary.finalEntropyRatio)} after`;
    element("summary-acceptance").textContent =
      summary.alphaAll === null
        ? ""
        : `you accepted ${(summary.alphaAll * 100).toFixed(0)}% of the alternatives`;
  }

  private redraw(): void {
    drawGrid(this.ctx, this.geometry);
    const highlighted = new Set(this.controller.highlightedZones());
    this.drafts.forEach((draft, index) => {
      drawZone(this.ctx, this.geometry, draft, highlighted.has(index));
    });
    if (this.pending.length >= 2) {
      drawZone(
        this.ctx,
        this.geometry,
        { kind: this.kind, polygon: this.pending, twoWay: false },
        false,
      );
    }
    const view = this.controller.view;
    if (view) {
      drawPath(this.ctx, this.geometry, view.current, "#1f77b4", view.selected === "current");
      drawPath(
        this.ctx,
        this.geometry,
        view.alternative,
        "#ff7f0e",
        view.selected === "alternative",
      );
      drawMarker(this.ctx, this.geometry, view.start[0], view.start[1], "#1f77b4", "circle");
      drawMarker(this.ctx, this.geometry, view.goal[0], view.goal[1], "#9467bd", "square");
    }
  }
}

document.addEventListener("DOMContentLoaded", () => {
  new App().boot();
});
