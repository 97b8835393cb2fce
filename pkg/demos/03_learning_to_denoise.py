"""Large-margin learning of a denoising energy: one shared 2x2 patch
table plus a deviation weight, trained with the single-slack
cutting-plane loop, compared against the hand-tuned square-root prior.

Runs at reduced scale (~1 minute); raise SIZE/COUNT for the full
experiment.
"""

import numpy as np

from sosflow.flow import minimize
from sosflow.learn import TrainConfig, predict, train
from sosflow.pipelines import (
    baseline_energy,
    baseline_generic_cuts,
    denoise_examples,
    denoise_instance,
    denoise_schema,
    pixel_error,
    synth_denoise_dataset,
)

SIZE = 40
COUNT = 10

data = synth_denoise_dataset(COUNT, SIZE, sigma=0.5, seed=20240817)
train_set, test_set = data[:COUNT // 2], data[COUNT // 2:]
print(f"{len(train_set)} training / {len(test_set)} test images, "
      f"{SIZE}x{SIZE}, noise sigma 0.5")

schema = denoise_schema()
print(f"schema: {schema.dim} weights "
      f"(16 patch table entries + {schema.num_unary} unary)")


def show(rec):
    print(f"  iter {rec.iteration:3d}  objective {rec.objective:9.5f}  "
          f"slack {rec.xi:8.5f}  violation {rec.violation:8.5f}")


result = train(schema, denoise_examples(train_set),
               TrainConfig(c_reg=100.0, eps=0.005), callback=show)
print(f"converged after {result.iterations} cutting planes")
table = result.w[schema.block(0)]
print("learned patch table (relative to empty):")
print(np.round(table - table[0], 4).reshape(4, 4))

model_err = np.mean([
    pixel_error(predict(schema, result.w, denoise_instance(di.noisy)),
                di.truth) for di in test_set])
lam, _ = baseline_generic_cuts(np.linspace(0.0, 1.0, 11), train_set)
base_err = np.mean([
    pixel_error(minimize(baseline_energy(di.noisy, lam)).labeling, di.truth)
    for di in test_set])
thresh_err = np.mean([
    pixel_error((di.noisy.gray().reshape(-1) > 0.5).astype(int), di.truth)
    for di in test_set])
print(f"test pixel error: threshold {thresh_err:.4f} | "
      f"sqrt prior (lam={lam:g}) {base_err:.4f} | learned {model_err:.4f}")
