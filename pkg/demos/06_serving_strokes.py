"""The interactive loop over HTTP: create a session by uploading an
image, post strokes, decode the returned run-length mask.  Uses the
committed fixture model; run demos/make_service_fixture.py first if
fixtures/ is missing."""

import io
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient
from PIL import Image

from sosflow.service import create_app, rle_decode

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
if not (FIXTURES / "segmentation_model.txt").exists():
    raise SystemExit("run demos/make_service_fixture.py first")

app = create_app(model_path=FIXTURES / "segmentation_model.txt")
client = TestClient(app)

print(client.get("/api/v1/healthz").json())

png = (FIXTURES / "photo_481x321.png").read_bytes()
r = client.post("/api/v1/sessions", content=png)
sid = r.json()["session_id"]
W, H = r.json()["width"], r.json()["height"]
print(f"session {sid[:8]}… for a {W}x{H} image")

truth = np.asarray(Image.open(FIXTURES / "photo_481x321_truth.png")) > 127
ys, xs = np.nonzero(truth)
cy, cx = int(np.median(ys)), int(np.median(xs))
strokes = {"strokes": [
    {"label": "fg", "runs": [[cy, cx - 12, cx + 12]]},
    {"label": "bg", "runs": [[2, 0, W]]},
]}
r = client.post(f"/api/v1/sessions/{sid}/scribbles", json=strokes)
body = r.json()
mask = rle_decode(body["mask_rle"], W * H).reshape(H, W)
print(f"stroke-to-mask in {body['inference_ms']:.0f} ms; "
      f"foreground fraction {mask.mean():.3f}")
print(f"pixel agreement with ground truth: {(mask == truth).mean():.3f}")

# identical repost: byte-identical response, served from the cache
r2 = client.post(f"/api/v1/sessions/{sid}/scribbles", json=strokes)
print(f"idempotent repost identical: {r2.content == r.content}")

client.post(f"/api/v1/sessions/{sid}/reset")
print("session reset")
