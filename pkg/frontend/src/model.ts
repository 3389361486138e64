/** Zone drafting and environment-document assembly.
 *
 * Drafts mirror the service's schema invariants before submission so a bad
 * polygon is caught inline instead of bouncing off the server. Zone colors
 * follow the interface palette: roads green, speed zones yellow, avoid zones
 * red. */

export type ZoneKind = "road" | "avoid" | "speed_limit";
export type Point = [number, number];

export interface ZoneDraft {
  kind: ZoneKind;
  polygon: Point[];
  /** unit heading; present iff kind === "road" */
  direction?: Point;
  twoWay: boolean;
}

export interface TaskSpec {
  label: string;
  start: [number, number];
  goal: [number, number];
}

export interface EnvironmentDocument {
  grid: string[];
  cell_size_m: number;
  speeds_mps: number[];
  zones: unknown[];
  tasks: TaskSpec[];
}

export const ZONE_COLORS: Record<ZoneKind, string> = {
  road: "#2ca02c",
  speed_limit: "#ffcf33",
  avoid: "#d62728",
};

function orientation(a: Point, b: Point, c: Point): number {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

function segmentsIntersect(p1: Point, p2: Point, q1: Point, q2: Point): boolean {
  const d1 = orientation(q1, q2, p1);
  const d2 = orientation(q1, q2, p2);
  const d3 = orientation(p1, p2, q1);
  const d4 = orientation(p1, p2, q2);
  return ((d1 > 0) !== (d2 > 0)) && ((d3 > 0) !== (d4 > 0));
}

/** Non-adjacent edges of the closed polygon must not cross. */
export function polygonIsSimple(points: Point[]): boolean {
  const n = points.length;
  for (let i = 0; i < n; i++) {
    const a1 = points[i]!;
    const a2 = points[(i + 1) % n]!;
    for (let j = i + 1; j < n; j++) {
      if (j === i || (j + 1) % n === i || (i + 1) % n === j) continue;
      const b1 = points[j]!;
      const b2 = points[(j + 1) % n]!;
      if (segmentsIntersect(a1, a2, b1, b2)) return false;
    }
  }
  return true;
}

/** Inline validation message for a draft, or null when it may be submitted. */
export function validateDraft(draft: ZoneDraft): string | null {
  if (draft.polygon.length < 3) {
    return "a zone needs at least 3 points";
  }
  if (!polygonIsSimple(draft.polygon)) {
    return "polygon edges cross each other; redraw the zone";
  }
  if (draft.kind === "road") {
    if (!draft.direction) {
      return "roads need a direction";
    }
    const [dx, dy] = draft.direction;
    if (Math.hypot(dx, dy) === 0) {
      return "road direction must be nonzero";
    }
  }
  return null;
}

/** Emit drafts in the environment-document schema. */
export function draftsToZones(drafts: ZoneDraft[]): unknown[] {
  return drafts.map((draft) => {
    const zone: Record<string, unknown> = {
      kind: draft.kind,
      polygon: draft.polygon.map(([x, y]) => [x, y]),
    };
    if (draft.kind === "road") {
      zone.direction = [draft.direction![0], draft.direction![1]];
      zone.two_way = draft.twoWay;
    }
    return zone;
  });
}

export function buildDocument(
  grid: string[],
  cellSizeM: number,
  speedsMps: number[],
  drafts: ZoneDraft[],
  tasks: TaskSpec[],
): EnvironmentDocument {
  for (const draft of drafts) {
    const problem = validateDraft(draft);
    if (problem) {
      throw new Error(problem);
    }
  }
  return {
    grid,
    cell_size_m: cellSizeM,
    speeds_mps: speedsMps,
    zones: draftsToZones(drafts),
    tasks,
  };
}

/** Compiled constraint ids are "z{index}-{role}"; recover the zone index so a
 * violated constraint can highlight its zone's perimeter. */
export function zoneIndexFromConstraintId(constraintId: string): number | null {
  const match = /^z(\d+)-/.exec(constraintId);
  return match ? Number(match[1]) : null;
}

/** Label-only rounding; the underlying seconds stay exact in the view model. */
export function formatDuration(seconds: number): string {
  return `${seconds.toFixed(1)} s`;
}

export function formatRatio(ratio: number | null): string {
  return ratio === null ? "n/a" : ratio.toFixed(3);
}
