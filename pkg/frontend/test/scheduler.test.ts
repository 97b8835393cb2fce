import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import type { MaskResponse, WireStroke } from "../src/api.js";
import { CommitScheduler } from "../src/scheduler.js";
import type { Stroke } from "../src/strokes.js";

const dot = (x: number, y: number, label: "fg" | "bg" = "fg"): Stroke => ({
  label,
  radius: 0,
  path: [{ x, y }],
});

class FakeTransport {
  calls: WireStroke[][] = [];
  resets = 0;
  failNext = false;
  private resolvers: Array<(m: MaskResponse) => void> = [];
  autoResolve = true;

  async postScribbles(strokes: WireStroke[]): Promise<MaskResponse> {
    if (this.failNext) {
      this.failNext = false;
      throw new Error("boom");
    }
    this.calls.push(strokes);
    const mask: MaskResponse = {
      width: 8,
      height: 8,
      mask_rle: [64],
      inference_ms: 1,
    };
    if (this.autoResolve) return mask;
    return new Promise((resolve) => this.resolvers.push(() => resolve(mask)));
  }

  release(): void {
    const r = this.resolvers.shift();
    if (r) r({ width: 8, height: 8, mask_rle: [64], inference_ms: 1 });
  }

  async reset(): Promise<void> {
    this.resets += 1;
  }
}

describe("commit scheduler", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("debounces for 250 ms after the stroke ends", async () => {
    const t = new FakeTransport();
    const s = new CommitScheduler(t, 8, 8);
    s.strokeEnd(dot(1, 1));
    await vi.advanceTimersByTimeAsync(200);
    expect(t.calls).toHaveLength(0);
    s.strokeEnd(dot(2, 2)); // restarts the clock
    await vi.advanceTimersByTimeAsync(200);
    expect(t.calls).toHaveLength(0);
    await vi.advanceTimersByTimeAsync(60);
    expect(t.calls).toHaveLength(1);
    expect(t.calls[0]).toHaveLength(2);
    expect(s.buffer.committedCount).toBe(2);
  });

  it("keeps a single request in flight and queues the rest", async () => {
    const t = new FakeTransport();
    t.autoResolve = false;
    const s = new CommitScheduler(t, 8, 8);
    s.strokeEnd(dot(1, 1));
    await vi.advanceTimersByTimeAsync(260);
    expect(t.calls).toHaveLength(1);
    s.strokeEnd(dot(2, 2)); // lands while the first is in flight
    await vi.advanceTimersByTimeAsync(260);
    expect(t.calls).toHaveLength(1); // still only one request out
    t.release();
    await vi.advanceTimersByTimeAsync(1);
    t.release();
    await vi.advanceTimersByTimeAsync(1);
    expect(t.calls).toHaveLength(2);
    expect(t.calls[1].length).toBe(1); // only the queued stroke
  });

  it("failures keep strokes pending and raise a banner", async () => {
    const t = new FakeTransport();
    const errors: string[] = [];
    const s = new CommitScheduler(t, 8, 8, { onError: (m) => errors.push(m) });
    t.failNext = true;
    s.strokeEnd(dot(1, 1));
    await vi.advanceTimersByTimeAsync(260);
    expect(errors).toEqual(["boom"]);
    expect(s.buffer.pendingCount).toBe(1); // nothing lost
    await s.flush(); // retry succeeds
    expect(s.buffer.committedCount).toBe(1);
  });

  it("undo of a committed stroke resets and recommits the full set", async () => {
    const t = new FakeTransport();
    const s = new CommitScheduler(t, 8, 8);
    s.strokeEnd(dot(1, 1));
    s.strokeEnd(dot(2, 2));
    await vi.advanceTimersByTimeAsync(260);
    expect(s.buffer.committedCount).toBe(2);
    s.undo();
    await vi.advanceTimersByTimeAsync(260);
    expect(t.resets).toBe(1);
    expect(t.calls).toHaveLength(2);
    expect(t.calls[1]).toHaveLength(1); // the surviving stroke, recommitted
    expect(s.buffer.committedCount).toBe(1);
  });

  it("undo of a pending stroke never talks to the server", async () => {
    const t = new FakeTransport();
    const s = new CommitScheduler(t, 8, 8);
    s.strokeEnd(dot(1, 1));
    s.undo(); // still within the debounce window
    await vi.advanceTimersByTimeAsync(300);
    expect(t.calls).toHaveLength(0);
    expect(t.resets).toBe(0);
  });
});
