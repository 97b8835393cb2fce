/** Browser wiring: load an image into a session, paint fg/bg strokes,
 * overlay the returned mask, undo, export. */

import { ApiError, SegmentationApi } from "./api.js";
import { CommitScheduler } from "./scheduler.js";
import { maskToImageData, maskToPngBlob } from "./mask.js";
import type { Stroke } from "./strokes.js";
import type { StrokeLabel } from "./api.js";

const BRUSH_RADIUS = 4;
const MASK_OPACITY = 0.45;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export class App {
  private api: SegmentationApi;
  private scheduler: CommitScheduler | null = null;
  private image: HTMLImageElement | null = null;
  private drawing: Stroke | null = null;
  private label: StrokeLabel = "fg";

  private canvas = el<HTMLCanvasElement>("canvas");
  private banner = el<HTMLDivElement>("banner");
  private status = el<HTMLDivElement>("status");

  constructor(baseUrl: string) {
    this.api = new SegmentationApi(baseUrl);
    el<HTMLInputElement>("file").addEventListener("change", (e) => {
      const input = e.target as HTMLInputElement;
      if (input.files?.length) void this.loadImage(input.files[0]);
    });
    el<HTMLButtonElement>("fg").addEventListener("click", () => (this.label = "fg"));
    el<HTMLButtonElement>("bg").addEventListener("click", () => (this.label = "bg"));
    el<HTMLButtonElement>("undo").addEventListener("click", () => this.undo());
    el<HTMLButtonElement>("export").addEventListener("click", () => void this.exportMask());
    this.canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    this.canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    this.canvas.addEventListener("pointerup", () => this.pointerUp());
  }

  showBanner(message: string): void {
    this.banner.textContent = message;
    this.banner.style.display = message ? "block" : "none";
  }

  async loadImage(file: File): Promise<void> {
    try {
      const bytes = await file.arrayBuffer();
      const info = await this.api.createSession(bytes);
      this.canvas.width = info.width;
      this.canvas.height = info.height;
      const img = new Image();
      img.src = URL.createObjectURL(file);
      await img.decode();
      this.image = img;
      this.scheduler = new CommitScheduler(
        {
          postScribbles: (s) => this.api.postScribbles(info.session_id, s),
          reset: () => this.api.reset(info.session_id),
        },
        info.width,
        info.height,
        {
          onMask: () => this.redraw(),
          onError: (m) => this.showBanner(m),
        },
      );
      this.showBanner("");
      this.redraw();
      this.status.textContent = `session ${info.session_id.slice(0, 8)} (${info.width}x${info.height})`;
    } catch (err) {
      this.showBanner(err instanceof ApiError ? `upload failed: ${err.message}` : String(err));
    }
  }

  private canvasPoint(e: PointerEvent): { x: number; y: number } {
    const rect = this.canvas.getBoundingClientRect();
    return {
      x: Math.round(((e.clientX - rect.left) / rect.width) * this.canvas.width),
      y: Math.round(((e.clientY - rect.top) / rect.height) * this.canvas.height),
    };
  }

  private pointerDown(e: PointerEvent): void {
    if (!this.scheduler) return;
    this.drawing = { label: this.label, radius: BRUSH_RADIUS, path: [this.canvasPoint(e)] };
  }

  private pointerMove(e: PointerEvent): void {
    if (this.drawing) {
      this.drawing.path.push(this.canvasPoint(e));
      this.redraw();
    }
  }

  private pointerUp(): void {
    if (this.drawing && this.scheduler) {
      this.scheduler.strokeEnd(this.drawing);
      this.drawing = null;
      this.redraw();
    }
  }

  private undo(): void {
    if (!this.scheduler) return;
    if (this.scheduler.buffer.all().length <= 1) {
      // removing the final stroke would leave nothing to commit, which
      // the server rejects; block instead of losing state
      this.showBanner("nothing left to undo into: at least one stroke is required");
      if (this.scheduler.buffer.all().length === 0) return;
    }
    this.scheduler.undo();
    this.redraw();
  }

  private async exportMask(): Promise<void> {
    const mask = this.scheduler?.lastMask;
    if (!mask) {
      this.showBanner("no mask yet");
      return;
    }
    const blob = await maskToPngBlob(mask);
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "mask.png";
    a.click();
  }

  private redraw(): void {
    const ctx = this.canvas.getContext("2d")!;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.image) ctx.drawImage(this.image, 0, 0);
    const mask = this.scheduler?.lastMask;
    if (mask) {
      const overlay = maskToImageData(mask, MASK_OPACITY);
      const tmp = document.createElement("canvas");
      tmp.width = mask.width;
      tmp.height = mask.height;
      tmp.getContext("2d")!.putImageData(overlay, 0, 0);
      ctx.drawImage(tmp, 0, 0);
    }
    const strokes = [...(this.scheduler?.buffer.all() ?? [])];
    if (this.drawing) strokes.push(this.drawing);
    for (const s of strokes) {
      ctx.strokeStyle = s.label === "fg" ? "rgba(255,64,64,0.9)" : "rgba(64,64,255,0.9)";
      ctx.lineWidth = s.radius * 2;
      ctx.lineCap = "round";
      ctx.beginPath();
      for (let i = 0; i < s.path.length; i++) {
        const p = s.path[i];
        if (i === 0) ctx.moveTo(p.x, p.y);
        else ctx.lineTo(p.x, p.y);
      }
      ctx.stroke();
    }
  }
}

if (typeof document !== "undefined" && document.getElementById("canvas")) {
  new App(localStorage.getItem("sosflow-url") ?? "http://127.0.0.1:8000");
}
