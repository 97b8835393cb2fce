/** End-to-end test against a live backend: the exact traffic the
 * browser sends, driven through the UI's own client and scheduler.
 *
 * Spawns the Python service with the committed fixture model (see
 * ../../fixtures; rebuild with demos/make_service_fixture.py).
 */

import { spawn, ChildProcess } from "node:child_process";
import { readFileSync } from "node:fs";
import { resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SegmentationApi, WireStroke } from "../src/api.js";
import { rleDecode } from "../src/rle.js";
import { CommitScheduler } from "../src/scheduler.js";

const ROOT = resolve(__dirname, "..", "..");
const PORT = 8923;
const BASE = `http://127.0.0.1:${PORT}`;
const FIXTURE_PNG = resolve(ROOT, "fixtures", "photo_481x321.png");
const FIXTURE_MODEL = resolve(ROOT, "fixtures", "segmentation_model.txt");

let server: ChildProcess;
const api = new SegmentationApi(BASE);

beforeAll(async () => {
  server = spawn(
    "python3",
    ["-m", "sosflow.service", "--model", FIXTURE_MODEL, "--port", String(PORT)],
    { cwd: ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      await api.health();
      break;
    } catch {
      if (Date.now() > deadline) throw new Error("service did not come up");
      await new Promise((r) => setTimeout(r, 500));
    }
  }
}, 90_000);

afterAll(() => {
  server?.kill();
});

function fixturePng(): Uint8Array {
  return new Uint8Array(readFileSync(FIXTURE_PNG));
}

describe("interactive loop against the live service", () => {
  it("paints one fg and one bg stroke and gets a consistent mask", async () => {
    const info = await api.createSession(fixturePng());
    expect(info.width).toBe(481);
    expect(info.height).toBe(321);

    // stroke pixels chosen inside/outside the fixture object
    const fgRun: [number, number, number] = [160, 230, 280];
    const bgRun: [number, number, number] = [2, 0, 481];
    const strokes: WireStroke[] = [
      { label: "fg", runs: [fgRun] },
      { label: "bg", runs: [bgRun] },
    ];
    const mask = await api.postScribbles(info.session_id, strokes);
    const bits = rleDecode(mask.mask_rle, mask.width * mask.height);

    // the fg stroke is inside the mask, the bg stroke outside
    for (let x = fgRun[1]; x < fgRun[2]; x++) {
      expect(bits[fgRun[0] * mask.width + x]).toBe(1);
    }
    for (let x = bgRun[1]; x < bgRun[2]; x++) {
      expect(bits[bgRun[0] * mask.width + x]).toBe(0);
    }
    expect(mask.inference_ms).toBeGreaterThan(0);
  }, 120_000);

  it("identical reposts return byte-identical masks", async () => {
    const info = await api.createSession(fixturePng());
    const strokes: WireStroke[] = [
      { label: "fg", runs: [[160, 230, 260]] },
      { label: "bg", runs: [[2, 0, 400]] },
    ];
    const a = await api.postScribblesRaw(info.session_id, strokes);
    const b = await api.postScribblesRaw(info.session_id, strokes);
    expect(a.status).toBe(200);
    expect(b.status).toBe(200);
    expect(Buffer.from(a.bytes).equals(Buffer.from(b.bytes))).toBe(true);
  }, 120_000);

  it("stroke-to-mask p50 stays inside the soft 2 s budget", async () => {
    const info = await api.createSession(fixturePng());
    const latencies: number[] = [];
    for (let k = 0; k < 5; k++) {
      const strokes: WireStroke[] = [
        { label: "fg", runs: [[160, 230, 260 + k]] },
        { label: "bg", runs: [[2, 0, 481]] },
      ];
      const t0 = Date.now();
      await api.postScribbles(info.session_id, strokes);
      latencies.push(Date.now() - t0);
    }
    latencies.sort((a, b) => a - b);
    const p50 = latencies[2];
    // soft budget: report, and only fail on a gross regression
    console.log(`stroke-to-mask latencies ms: ${latencies.join(", ")} (p50 ${p50})`);
    expect(p50).toBeLessThan(10_000);
    if (p50 > 2_000) {
      console.warn(`p50 ${p50} ms exceeds the 2 s soft budget`);
    }
  }, 120_000);

  it("drives the scheduler end to end, including undo", async () => {
    const info = await api.createSession(fixturePng());
    const masks: number[] = [];
    const scheduler = new CommitScheduler(
      {
        postScribbles: (s) => api.postScribbles(info.session_id, s),
        reset: () => api.reset(info.session_id),
      },
      info.width,
      info.height,
      { onMask: (m) => masks.push(m.mask_rle.length) },
      10,
    );
    scheduler.strokeEnd({ label: "fg", radius: 3, path: [{ x: 240, y: 160 }, { x: 250, y: 160 }] });
    scheduler.strokeEnd({ label: "bg", radius: 3, path: [{ x: 20, y: 4 }, { x: 200, y: 4 }] });
    await scheduler.settle();
    expect(scheduler.buffer.committedCount).toBe(2);
    expect(masks.length).toBeGreaterThan(0);

    scheduler.strokeEnd({ label: "bg", radius: 2, path: [{ x: 20, y: 316 }] });
    await scheduler.settle();
    expect(scheduler.buffer.committedCount).toBe(3);

    scheduler.undo(); // committed stroke: reset + full recommit
    await scheduler.settle();
    expect(scheduler.buffer.committedCount).toBe(2);
    expect(scheduler.lastMask).not.toBeNull();
  }, 120_000);

  it("maps server rejections to recoverable errors", async () => {
    const info = await api.createSession(fixturePng());
    await expect(api.postScribbles(info.session_id, [])).rejects.toMatchObject({
      status: 422,
    });
    await expect(api.postScribbles("nope", [{ label: "fg", runs: [[1, 0, 5]] }])).rejects.toMatchObject({
      status: 404,
    });
  }, 60_000);
});
