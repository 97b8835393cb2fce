/** Stroke capture and rasterization.
 *
 * A stroke is a brush path (canvas-space points) with a label and a
 * radius; the server receives it as per-row pixel runs.  The buffer
 * keeps pending strokes (not yet acknowledged) separate from committed
 * ones; together they are exactly what the user drew, and undo pops
 * the most recent stroke regardless of which side it is on.
 */

import type { Run, StrokeLabel, WireStroke } from "./api.js";

export interface Point {
  x: number;
  y: number;
}

export interface Stroke {
  label: StrokeLabel;
  radius: number;
  path: Point[];
}

/** Pixels touched by a disc of the given radius at integer center. */
function stampDisc(
  rows: Map<number, Set<number>>,
  cx: number,
  cy: number,
  radius: number,
  width: number,
  height: number,
): void {
  const r = Math.max(0, Math.floor(radius));
  for (let dy = -r; dy <= r; dy++) {
    const y = cy + dy;
    if (y < 0 || y >= height) continue;
    const span = Math.floor(Math.sqrt(r * r - dy * dy));
    let row = rows.get(y);
    if (!row) {
      row = new Set<number>();
      rows.set(y, row);
    }
    const lo = Math.max(0, cx - span);
    const hi = Math.min(width - 1, cx + span);
    for (let x = lo; x <= hi; x++) row.add(x);
  }
}

/** Rasterize one stroke to sorted, merged per-row runs. */
export function strokeToRuns(stroke: Stroke, width: number, height: number): Run[] {
  const rows = new Map<number, Set<number>>();
  const pts = stroke.path;
  if (pts.length === 0) return [];
  for (let i = 0; i < pts.length; i++) {
    const a = pts[Math.max(0, i - 1)];
    const b = pts[i];
    const steps = Math.max(Math.abs(b.x - a.x), Math.abs(b.y - a.y), 1);
    for (let s = 0; s <= steps; s++) {
      const x = Math.round(a.x + ((b.x - a.x) * s) / steps);
      const y = Math.round(a.y + ((b.y - a.y) * s) / steps);
      stampDisc(rows, x, y, stroke.radius, width, height);
    }
  }
  const runs: Run[] = [];
  for (const y of [...rows.keys()].sort((p, q) => p - q)) {
    const xs = [...rows.get(y)!].sort((p, q) => p - q);
    let start = xs[0];
    let prev = xs[0];
    for (let i = 1; i <= xs.length; i++) {
      if (i < xs.length && xs[i] === prev + 1) {
        prev = xs[i];
        continue;
      }
      runs.push([y, start, prev + 1]);
      if (i < xs.length) {
        start = xs[i];
        prev = xs[i];
      }
    }
  }
  return runs;
}

export function toWire(strokes: Stroke[], width: number, height: number): WireStroke[] {
  return strokes
    .map((s) => ({ label: s.label, runs: strokeToRuns(s, width, height) }))
    .filter((s) => s.runs.length > 0);
}

export class StrokeBuffer {
  private pending: Stroke[] = [];
  private committed: Stroke[] = [];

  get pendingCount(): number {
    return this.pending.length;
  }

  get committedCount(): number {
    return this.committed.length;
  }

  /** Everything the user drew, in drawing order. */
  all(): Stroke[] {
    return [...this.committed, ...this.pending];
  }

  push(stroke: Stroke): void {
    this.pending.push(stroke);
  }

  /** Mark the first `count` pending strokes as acknowledged. */
  ack(count: number): void {
    this.committed.push(...this.pending.splice(0, count));
  }

  /** Server rejected or connection failed: strokes stay pending. */
  keepPending(): void {}

  /**
   * Remove the most recent stroke (pending first, else the last
   * committed one). Returns true if the committed set changed, which
   * means the full remaining set must be recommitted after a reset.
   */
  undo(): { removed: Stroke | null; committedChanged: boolean } {
    if (this.pending.length > 0) {
      return { removed: this.pending.pop() ?? null, committedChanged: false };
    }
    if (this.committed.length > 0) {
      const removed = this.committed.pop() ?? null;
      // everything previously committed becomes pending again
      this.pending = [...this.committed, ...this.pending];
      this.committed = [];
      return { removed, committedChanged: true };
    }
    return { removed: null, committedChanged: false };
  }

  clear(): void {
    this.pending = [];
    this.committed = [];
  }
}
