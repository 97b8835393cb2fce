import { describe, expect, it } from "vitest";
import { Stroke, StrokeBuffer, strokeToRuns, toWire } from "../src/strokes.js";

const dot = (x: number, y: number, label: "fg" | "bg" = "fg", radius = 0): Stroke => ({
  label,
  radius,
  path: [{ x, y }],
});

describe("stroke rasterization", () => {
  it("a zero-radius dot is a single pixel run", () => {
    expect(strokeToRuns(dot(3, 2), 10, 10)).toEqual([[2, 3, 4]]);
  });

  it("a horizontal drag becomes one merged run", () => {
    const s: Stroke = { label: "fg", radius: 0, path: [{ x: 2, y: 5 }, { x: 7, y: 5 }] };
    expect(strokeToRuns(s, 10, 10)).toEqual([[5, 2, 8]]);
  });

  it("the brush radius widens rows symmetrically", () => {
    const runs = strokeToRuns(dot(5, 5, "fg", 2), 20, 20);
    const rows = runs.map((r) => r[0]);
    expect(rows).toEqual([3, 4, 5, 6, 7]);
    const middle = runs.find((r) => r[0] === 5)!;
    expect(middle).toEqual([5, 3, 8]);
  });

  it("clips at the image borders", () => {
    const runs = strokeToRuns(dot(0, 0, "fg", 3), 8, 8);
    for (const [y, c0, c1] of runs) {
      expect(y).toBeGreaterThanOrEqual(0);
      expect(c0).toBeGreaterThanOrEqual(0);
      expect(c1).toBeLessThanOrEqual(8);
    }
  });

  it("drops strokes that rasterize to nothing", () => {
    const offscreen = dot(-50, -50);
    expect(toWire([offscreen], 8, 8)).toEqual([]);
  });
});

describe("stroke buffer", () => {
  it("pending plus committed is exactly what was drawn, in order", () => {
    const buf = new StrokeBuffer();
    const a = dot(1, 1);
    const b = dot(2, 2, "bg");
    const c = dot(3, 3);
    buf.push(a);
    buf.push(b);
    buf.ack(2);
    buf.push(c);
    expect(buf.all()).toEqual([a, b, c]);
    expect(buf.committedCount).toBe(2);
    expect(buf.pendingCount).toBe(1);
  });

  it("undo pops pending first", () => {
    const buf = new StrokeBuffer();
    buf.push(dot(1, 1));
    buf.ack(1);
    buf.push(dot(2, 2));
    const { removed, committedChanged } = buf.undo();
    expect(removed?.path[0]).toEqual({ x: 2, y: 2 });
    expect(committedChanged).toBe(false);
    expect(buf.all()).toHaveLength(1);
  });

  it("undo of a committed stroke flags a full recommit", () => {
    const buf = new StrokeBuffer();
    buf.push(dot(1, 1));
    buf.push(dot(2, 2));
    buf.ack(2);
    const { removed, committedChanged } = buf.undo();
    expect(removed?.path[0]).toEqual({ x: 2, y: 2 });
    expect(committedChanged).toBe(true);
    expect(buf.committedCount).toBe(0);
    expect(buf.all()).toHaveLength(1); // the earlier stroke survives
  });

  it("undo on an empty buffer is a no-op", () => {
    const buf = new StrokeBuffer();
    expect(buf.undo()).toEqual({ removed: null, committedChanged: false });
  });
});
