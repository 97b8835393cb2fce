"""Build the interactive-segmentation fixture: a small trained model
plus a 481x321 synthetic photo, used by the HTTP service demos and the
frontend's end-to-end test.  Deterministic; rerunning overwrites the
same bytes.

    python3 demos/make_service_fixture.py [out_dir]
"""

import sys
import time
from pathlib import Path

import numpy as np

from sosflow.learn import TrainConfig
from sosflow.model_io import save_model, schema_hash
from sosflow.pipelines import (
    feature_meta,
    fit_segmentation,
    synth_segmentation_dataset,
)


def main(out_dir="fixtures"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    print("training fixture model on synthetic blobs ...")
    t0 = time.time()
    data = synth_segmentation_dataset(10, 48, seed=515)
    schema, result, meta = fit_segmentation(
        data, TrainConfig(c_reg=2.0, eps=0.02),
        num_clusters=8, cluster_seed=515)
    feats = feature_meta("segment", num_clusters=8)
    meta.update({
        "seed": 515,
        "c_reg": 2.0,
        "eps": 0.02,
        "features": feats,
        "schema_hash": schema_hash(schema, feats),
    })
    save_model(out / "segmentation_model.txt", schema, result.w, meta)
    print(f"  {result.iterations} iterations in {time.time() - t0:.0f}s")

    # a 481x321 synthetic photo from the same family as the training data
    img, truth, _ = synth_segmentation_dataset(1, (321, 481), seed=1234)[0]
    from PIL import Image
    Image.fromarray((img.pixels * 255).astype(np.uint8), mode="RGB").save(
        out / "photo_481x321.png")
    Image.fromarray((truth * 255).astype(np.uint8), mode="L").save(
        out / "photo_481x321_truth.png")
    print(f"fixture written to {out}/")


if __name__ == "__main__":
    main(*sys.argv[1:])
