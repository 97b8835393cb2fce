"""HTTP facade for interactive scribble segmentation.

One model is loaded at startup; clients create a session by uploading
an image, then post evolving scribble strokes and get back the current
mask, run-length encoded, fast enough for stroke-by-stroke refinement.
Scribble posts merge monotonically until an explicit reset, and a
repeated identical post returns a byte-identical mask (responses are
cached by scribble state).

Endpoints (JSON envelope, /api/v1 prefix):

    POST /api/v1/sessions                  image/png body -> {session_id}
    POST /api/v1/sessions/{id}/scribbles   {strokes: [...]} -> mask
    POST /api/v1/sessions/{id}/reset       -> cleared scribble state
    GET  /api/v1/healthz                   -> {version, model_hash}

Errors: 404 unknown session, 413 image too large, 422 malformed or
empty strokes, 409 model changed under a live session.
"""

from __future__ import annotations

import io
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .model_io import read_model
from .pipelines import (
    UNLABELED,
    ImageGrid,
    PatchClusterModel,
    ScribbleMask,
    TwoBlockInstance,
    _raw_pixel_features,
    grid_patches,
    patch_gradient_vectors,
    predict_segmentation,
)

__all__ = ["create_app", "rle_encode", "rle_decode"]

# column layout of the raw feature matrix: the two distance features
# sit right after the binned colors and depend on the scribbles
_DIST_FG_COL = 216
_DIST_BG_COL = 217


def rle_encode(bits: np.ndarray) -> list[int]:
    """Row-major run lengths, alternating zeros and ones, starting with
    the count of leading zeros (possibly 0)."""
    flat = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if flat.size == 0:
        return []
    edges = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], edges, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return [int(r) for r in runs]


def rle_decode(runs, size: int) -> np.ndarray:
    out = np.zeros(size, dtype=np.uint8)
    pos = 0
    val = 0
    for r in runs:
        if r:
            out[pos:pos + r] = val
        pos += r
        val = 1 - val
    if pos != size:
        raise ValueError(f"run lengths cover {pos} pixels, expected {size}")
    return out


@dataclass
class _Session:
    image: ImageGrid
    raw: np.ndarray                 # feature matrix, distance cols mutable
    members: list[np.ndarray]
    phi: list[np.ndarray]
    marks: np.ndarray               # scribble state
    model_hash: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_access: float = field(default_factory=time.monotonic)
    cache_key: bytes | None = None
    cache_response: dict | None = None


def _parse_strokes(payload, height, width) -> np.ndarray:
    """Strokes as {label: 'fg'|'bg', runs: [[row, col0, col1], ...]};
    returns a scribble overlay with 255 where untouched."""
    if not isinstance(payload, dict) or "strokes" not in payload:
        raise ValueError("body must be {strokes: [...]}")
    strokes = payload["strokes"]
    if not isinstance(strokes, list):
        raise ValueError("strokes must be a list")
    overlay = np.full((height, width), UNLABELED, dtype=np.uint8)
    for st in strokes:
        if not isinstance(st, dict):
            raise ValueError("stroke must be an object")
        label = st.get("label")
        if label not in ("fg", "bg"):
            raise ValueError(f"stroke label must be fg or bg, got {label!r}")
        val = 1 if label == "fg" else 0
        runs = st.get("runs")
        if not isinstance(runs, list):
            raise ValueError("stroke needs a runs list")
        for run in runs:
            if (not isinstance(run, (list, tuple)) or len(run) != 3
                    or not all(isinstance(v, int) for v in run)):
                raise ValueError("run must be [row, col_start, col_end]")
            row, c0, c1 = run
            if not (0 <= row < height and 0 <= c0 < c1 <= width):
                raise ValueError(f"run {run} out of bounds")
            overlay[row, c0:c1] = val
    return overlay


def create_app(model_path=None, model=None, max_pixels: int = 1 << 21,
               ttl_s: float = 1800.0, anchor: float = 1e3) -> FastAPI:
    """Build the service around one segmentation model.

    ``model`` may be a preloaded (schema, weights, meta) triple;
    otherwise ``model_path`` is read.  Sessions are kept in memory and
    evicted ``ttl_s`` seconds after their last use.
    """
    if model is None:
        if model_path is None:
            raise ValueError("need model or model_path")
        model = read_model(model_path)
    schema, weights, meta = model
    if meta.get("task") != "segment":
        raise ValueError(f"service needs a segmentation model, got task "
                         f"{meta.get('task')!r}")
    clusters = PatchClusterModel.from_meta(meta["clusters"])
    model_hash = str(meta.get("schema_hash", ""))

    app = FastAPI(title="sosflow scribble segmentation", version=__version__)
    sessions: dict[str, _Session] = {}
    registry_lock = threading.Lock()
    app.state.model_hash = model_hash

    def evict_stale():
        deadline = time.monotonic() - ttl_s
        with registry_lock:
            for sid in [s for s, sess in sessions.items()
                        if sess.last_access < deadline]:
                del sessions[sid]

    def get_session(sid: str) -> _Session | None:
        with registry_lock:
            sess = sessions.get(sid)
            if sess is not None:
                sess.last_access = time.monotonic()
            return sess

    @app.get("/api/v1/healthz")
    def healthz():
        return {"version": __version__, "model_hash": model_hash}

    @app.post("/api/v1/sessions", status_code=201)
    async def create_session(request: Request):
        evict_stale()
        body = await request.body()
        from PIL import Image, UnidentifiedImageError
        try:
            im = Image.open(io.BytesIO(body))
            width, height = im.size
        except UnidentifiedImageError:
            return JSONResponse({"error": "body is not a decodable image"},
                                status_code=422)
        if width * height > max_pixels:
            return JSONResponse(
                {"error": f"image has {width * height} pixels, "
                          f"limit {max_pixels}"},
                status_code=413)
        img = ImageGrid.from_8bit(np.asarray(im.convert("RGB")))
        marks = np.full((img.height, img.width), UNLABELED, dtype=np.uint8)
        raw = _raw_pixel_features(img, ScribbleMask(marks))
        mem = grid_patches(img.height, img.width)
        ids = clusters.assign(patch_gradient_vectors(img))
        members = [mem[ids == j] for j in range(clusters.k)]
        phi = [np.ones(len(m)) for m in members]
        sid = uuid.uuid4().hex
        with registry_lock:
            sessions[sid] = _Session(
                image=img, raw=raw, members=members, phi=phi,
                marks=marks, model_hash=model_hash)
        return {"session_id": sid, "width": img.width,
                "height": img.height}

    @app.post("/api/v1/sessions/{sid}/scribbles")
    def post_scribbles(sid: str, payload: dict):
        evict_stale()
        sess = get_session(sid)
        if sess is None:
            return JSONResponse({"error": "unknown session"},
                                status_code=404)
        if sess.model_hash != app.state.model_hash:
            return JSONResponse(
                {"error": "model changed since this session was created"},
                status_code=409)
        img = sess.image
        try:
            overlay = _parse_strokes(payload, img.height, img.width)
        except ValueError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        with sess.lock:
            merged = sess.marks.copy()
            touched = overlay != UNLABELED
            merged[touched] = overlay[touched]
            if not (merged != UNLABELED).any():
                return JSONResponse(
                    {"error": "no scribbled pixels; paint at least one "
                              "stroke"},
                    status_code=422)
            sess.marks = merged
            key = merged.tobytes()
            if sess.cache_key == key and sess.cache_response is not None:
                return sess.cache_response

            t0 = time.perf_counter()
            scribbles = ScribbleMask(merged)
            diag = float(np.hypot(img.height, img.width))
            from scipy.ndimage import distance_transform_edt
            for cls, col in ((1, _DIST_FG_COL), (0, _DIST_BG_COL)):
                present = merged == cls
                if present.any():
                    dist = distance_transform_edt(~present) / diag
                else:
                    dist = np.ones((img.height, img.width))
                sess.raw[:, col] = dist.reshape(-1)
            x = TwoBlockInstance(img.num_pixels, sess.members, sess.phi,
                                 sess.raw)
            bits = predict_segmentation(schema, weights, x, scribbles,
                                        anchor=anchor)
            ms = (time.perf_counter() - t0) * 1e3
            response = {
                "width": img.width,
                "height": img.height,
                "mask_rle": rle_encode(bits),
                "inference_ms": ms,
            }
            sess.cache_key = key
            sess.cache_response = response
            return response

    @app.post("/api/v1/sessions/{sid}/reset")
    def reset(sid: str):
        sess = get_session(sid)
        if sess is None:
            return JSONResponse({"error": "unknown session"},
                                status_code=404)
        with sess.lock:
            sess.marks = np.full_like(sess.marks, UNLABELED)
            sess.cache_key = None
            sess.cache_response = None
        return {"session_id": sid, "scribbles": 0}

    return app


def main(argv=None) -> int:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(
        prog="sosflow-serve",
        description="Serve interactive segmentation over HTTP.")
    parser.add_argument("--model", required=True)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--max-pixels", type=int, default=1 << 21)
    parser.add_argument("--ttl", type=float, default=1800.0)
    args = parser.parse_args(argv)
    app = create_app(model_path=args.model, max_pixels=args.max_pixels,
                     ttl_s=args.ttl)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    main()
