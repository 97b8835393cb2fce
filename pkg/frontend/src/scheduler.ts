/** Commit scheduling: debounce after stroke end, one in-flight request
 * per session, later strokes queue behind it, and the stroke buffer is
 * never lost on failure.
 *
 * The server merges scribbles monotonically, so ordinary commits send
 * only what the user drew; undo of an acknowledged stroke instead
 * resets the server state and recommits the full remaining set.
 */

import type { MaskResponse, WireStroke } from "./api.js";
import { StrokeBuffer, Stroke, toWire } from "./strokes.js";

export interface CommitTransport {
  postScribbles(strokes: WireStroke[]): Promise<MaskResponse>;
  reset(): Promise<void>;
}

export interface SchedulerEvents {
  onMask?(mask: MaskResponse): void;
  onError?(message: string): void;
}

export class CommitScheduler {
  readonly buffer = new StrokeBuffer();
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private queued = false;
  private needsFullRecommit = false;
  private flight: Promise<void> | null = null;
  lastMask: MaskResponse | null = null;

  constructor(
    private transport: CommitTransport,
    private width: number,
    private height: number,
    private events: SchedulerEvents = {},
    private debounceMs = 250,
  ) {}

  /** Stroke finished (pointer released): queue a debounced commit. */
  strokeEnd(stroke: Stroke): void {
    this.buffer.push(stroke);
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.flush();
    }, this.debounceMs);
  }

  undo(): void {
    const { removed, committedChanged } = this.buffer.undo();
    if (!removed) return;
    if (committedChanged) this.needsFullRecommit = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.flush();
    }, this.debounceMs);
  }

  get busy(): boolean {
    return this.inFlight;
  }

  /** Send the current state now; if a commit is already in flight,
   * queue behind it and return its completion. */
  flush(): Promise<void> {
    if (this.inFlight) {
      this.queued = true;
      return this.flight ?? Promise.resolve();
    }
    this.flight = this.runCommits();
    return this.flight;
  }

  private async runCommits(): Promise<void> {
    this.inFlight = true;
    try {
      do {
        this.queued = false;
        await this.commitOnce();
      } while (this.queued);
    } finally {
      this.inFlight = false;
      this.flight = null;
    }
  }

  /** Wait until no commit is pending, scheduled or in flight. */
  async settle(): Promise<void> {
    for (;;) {
      if (this.timer !== null) {
        clearTimeout(this.timer);
        this.timer = null;
        await this.flush();
        continue;
      }
      if (this.inFlight) {
        await this.flight;
        continue;
      }
      return;
    }
  }

  private async commitOnce(): Promise<void> {
    const full = this.needsFullRecommit;
    const strokes = full ? this.buffer.all() : this.pendingSnapshot();
    const wire = toWire(strokes, this.width, this.height);
    if (wire.length === 0 && !full) return;
    try {
      if (full) {
        await this.transport.reset();
        if (wire.length === 0) {
          // nothing left to draw; an empty stroke set cannot be
          // committed (the server requires at least one scribble)
          this.needsFullRecommit = false;
          this.lastMask = null;
          return;
        }
      }
      const mask = await this.transport.postScribbles(wire);
      if (full) {
        this.buffer.clear();
        for (const s of strokes) this.buffer.push(s);
        this.buffer.ack(strokes.length);
        this.needsFullRecommit = false;
      } else {
        this.buffer.ack(strokes.length);
      }
      this.lastMask = mask;
      this.events.onMask?.(mask);
    } catch (err) {
      // strokes stay pending; surface the failure non-destructively
      this.events.onError?.(err instanceof Error ? err.message : String(err));
    }
  }

  private pendingSnapshot(): Stroke[] {
    const all = this.buffer.all();
    return all.slice(this.buffer.committedCount);
  }
}
