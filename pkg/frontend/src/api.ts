/** Typed client for the segmentation service (/api/v1). */

export type StrokeLabel = "fg" | "bg";

/** [row, colStart, colEnd) pixel run. */
export type Run = [number, number, number];

export interface WireStroke {
  label: StrokeLabel;
  runs: Run[];
}

export interface SessionInfo {
  session_id: string;
  width: number;
  height: number;
}

export interface MaskResponse {
  width: number;
  height: number;
  mask_rle: number[];
  inference_ms: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function orThrow(resp: Response): Promise<any> {
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, body.error ?? `HTTP ${resp.status}`);
  }
  return body;
}

export class SegmentationApi {
  constructor(private baseUrl: string) {}

  async health(): Promise<{ version: string; model_hash: string }> {
    return orThrow(await fetch(`${this.baseUrl}/api/v1/healthz`));
  }

  async createSession(png: Blob | ArrayBuffer | Uint8Array): Promise<SessionInfo> {
    const resp = await fetch(`${this.baseUrl}/api/v1/sessions`, {
      method: "POST",
      headers: { "Content-Type": "image/png" },
      body: png as BodyInit,
    });
    return orThrow(resp);
  }

  async postScribbles(sessionId: string, strokes: WireStroke[]): Promise<MaskResponse> {
    const resp = await fetch(`${this.baseUrl}/api/v1/sessions/${sessionId}/scribbles`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ strokes }),
    });
    return orThrow(resp);
  }

  /** Raw variant for byte-level comparisons (idempotency checks). */
  async postScribblesRaw(sessionId: string, strokes: WireStroke[]): Promise<{ status: number; bytes: Uint8Array }> {
    const resp = await fetch(`${this.baseUrl}/api/v1/sessions/${sessionId}/scribbles`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ strokes }),
    });
    const bytes = new Uint8Array(await resp.arrayBuffer());
    return { status: resp.status, bytes };
  }

  async reset(sessionId: string): Promise<void> {
    await orThrow(
      await fetch(`${this.baseUrl}/api/v1/sessions/${sessionId}/reset`, {
        method: "POST",
      }),
    );
  }
}
