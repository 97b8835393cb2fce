"""Task pipelines: binary denoising and scribble-driven segmentation.

Images are row-major grids; pixel (r, c) has variable id r * width + c.
The neighborhood structure in both tasks is the set of all overlapping
2x2 patches, (width - 1) * (height - 1) of them, with member order
(top-left, top-right, bottom-left, bottom-right) fixing the subset bit
convention.

Denoising learns a single shared 16-entry patch table plus one weight
on the per-pixel deviation feature |label - intensity|.  Segmentation
learns one patch table per gradient-response cluster plus weights on a
few hundred per-pixel features (soft-binned local colors, distances to
the nearest scribble of each kind, normalized coordinates, raw
channels), with separate feature blocks for the two labels.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import distance_transform_edt

from . import flow
from .energy import CliqueFunction, SoSEnergy
from .learn import (
    CliqueType,
    FeatureSchema,
    Instance,
    TrainConfig,
    hamming_loss,
    materialize_energy,
    train,
)

__all__ = [
    "ImageGrid",
    "ScribbleMask",
    "DenoiseInstance",
    "PatchClusterModel",
    "SplitSpec",
    "MetricsRow",
    "grid_patches",
    "synth_denoise_dataset",
    "denoise_schema",
    "denoise_instance",
    "denoise_examples",
    "sqrt_edge_table",
    "baseline_energy",
    "baseline_generic_cuts",
    "pixel_error",
    "patch_gradient_vectors",
    "kmeans",
    "build_cluster_model",
    "segmentation_feature_names",
    "segmentation_schema",
    "segmentation_features",
    "synth_segmentation_dataset",
    "parse_split_spec",
    "evaluate_split",
    "metrics_csv",
    "parse_manifest",
]

UNLABELED = 255
COLOR_BINS = 8
WINDOW_OFFSETS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]


class DataError(ValueError):
    """Malformed or ill-posed task inputs (images, masks, manifests)."""


@dataclass
class ImageGrid:
    """Pixel grid with values in [0, 1]; grayscale (H, W) or color
    (H, W, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] != 3):
            raise DataError(f"bad image shape {px.shape}")
        if px.size and (px.min() < -1e-9 or px.max() > 1 + 1e-9):
            raise DataError("pixel values must lie in [0, 1]")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def num_pixels(self) -> int:
        return self.height * self.width

    def gray(self) -> np.ndarray:
        if self.pixels.ndim == 2:
            return self.pixels
        return self.pixels.mean(axis=2)

    @classmethod
    def from_8bit(cls, arr) -> "ImageGrid":
        return cls(np.asarray(arr, dtype=np.float64) / 255.0)


def grid_patches(height: int, width: int) -> np.ndarray:
    """Member ids of every overlapping 2x2 patch, shape (m, 4)."""
    if height < 2 or width < 2:
        return np.zeros((0, 4), dtype=np.int64)
    r, c = np.meshgrid(np.arange(height - 1), np.arange(width - 1),
                       indexing="ij")
    tl = (r * width + c).ravel()
    return np.stack([tl, tl + 1, tl + width, tl + width + 1], axis=1)


@dataclass
class ScribbleMask:
    """Per-pixel marks: 0 background, 1 foreground, 255 unlabeled."""

    marks: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.marks)
        if m.ndim != 2:
            raise DataError(f"bad scribble shape {m.shape}")
        bad = ~np.isin(m, (0, 1, UNLABELED))
        if bad.any():
            raise DataError("scribble values must be 0, 1 or 255")
        self.marks = m.astype(np.uint8)

    @property
    def num_fg(self) -> int:
        return int((self.marks == 1).sum())

    @property
    def num_bg(self) -> int:
        return int((self.marks == 0).sum())

    def require_well_posed(self, both_classes: bool = True) -> None:
        if both_classes:
            if self.num_fg == 0 or self.num_bg == 0:
                raise DataError(
                    "scribbles need at least one foreground and one "
                    "background pixel")
        elif self.num_fg + self.num_bg == 0:
            raise DataError("scribbles are empty")

    def merged_with(self, other: "ScribbleMask") -> "ScribbleMask":
        out = self.marks.copy()
        labeled = other.marks != UNLABELED
        out[labeled] = other.marks[labeled]
        return ScribbleMask(out)


# ----------------------------------------------------------------------
# Binary denoising
# ----------------------------------------------------------------------

@dataclass
class DenoiseInstance:
    noisy: ImageGrid
    truth: np.ndarray   # (H, W) uint8

    def __post_init__(self):
        self.truth = np.asarray(self.truth).astype(np.uint8)
        if self.truth.shape != (self.noisy.height, self.noisy.width):
            raise DataError("image and truth dimensions differ")


def _raster_line(canvas, r0, c0, r1, c1):
    """Draw a one-pixel line segment onto a binary canvas."""
    h, w = canvas.shape
    steps = int(max(abs(int(r1) - int(r0)), abs(int(c1) - int(c0)), 1)) * 2
    rr = np.linspace(r0, r1, steps)
    cc = np.linspace(c0, c1, steps)
    for r, c in zip(rr, cc):
        canvas[min(max(int(round(r)), 0), h - 1),
               min(max(int(round(c)), 0), w - 1)] = 1


def synth_denoise_dataset(count: int, size, sigma: float,
                          seed: int) -> list[DenoiseInstance]:
    """Sketch-like binary drawings with i.i.d. Gaussian noise added per
    pixel, clamped to [0, 1].  Deterministic per seed.

    Each image mixes hatch bundles (parallel one-pixel strokes, two to
    three pixels apart) with a few free strokes.  Fine periodic texture
    is where a single isotropic smoothing weight has to compromise,
    while a learned patch table can price stripe patterns and isolated
    specks separately.
    """
    if isinstance(size, int):
        h = w = size
    else:
        h, w = size
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        clean = np.zeros((h, w), dtype=np.uint8)
        for _ in range(int(rng.integers(2, 5))):
            horiz = bool(rng.integers(0, 2))
            spacing = int(rng.integers(2, 4))
            lo = int(rng.integers(0, max(h - 8, 1)))
            hi = lo + int(rng.integers(8, 24))
            a0 = int(rng.integers(0, w))
            a1 = int(rng.integers(0, w))
            for off in range(lo, min(hi, h), spacing):
                if horiz:
                    _raster_line(clean, off, min(a0, a1), off, max(a0, a1))
                else:
                    _raster_line(clean, min(a0, a1), off, max(a0, a1), off)
        for _ in range(int(rng.integers(2, 5))):
            r0, r1 = rng.integers(0, h, size=2)
            c0, c1 = rng.integers(0, w, size=2)
            _raster_line(clean, r0, c0, r1, c1)
        noisy = clean.astype(np.float64) \
            + sigma * rng.standard_normal((h, w))
        out.append(DenoiseInstance(ImageGrid(np.clip(noisy, 0.0, 1.0)),
                                   clean))
    return out


def denoise_schema() -> FeatureSchema:
    """One shared 2x2 patch table (16 weights) plus the deviation
    feature |label - intensity| with a single learnable weight."""
    return FeatureSchema([CliqueType("patch2x2", 4)], ["abs_diff"])


def denoise_instance(noisy: ImageGrid) -> Instance:
    g = noisy.gray()
    x = g.reshape(-1, 1)
    return Instance(
        num_vars=noisy.num_pixels,
        members=[grid_patches(noisy.height, noisy.width)],
        phi=[np.ones(max(0, (noisy.height - 1) * (noisy.width - 1)))],
        unary0=np.abs(0.0 - x),
        unary1=np.abs(1.0 - x),
    )


def denoise_examples(instances) -> list[tuple[Instance, np.ndarray]]:
    return [(denoise_instance(di.noisy), di.truth.reshape(-1))
            for di in instances]


def sqrt_edge_table() -> np.ndarray:
    """Square root of the count of label-disagreeing patch edges, the
    hand-tuned smoothing prior used by the grid-search baseline."""
    edges = [(0, 1), (2, 3), (0, 2), (1, 3)]
    table = np.zeros(16)
    for m in range(16):
        bits = [(m >> p) & 1 for p in range(4)]
        table[m] = sum(bits[a] != bits[b] for a, b in edges)
    return np.sqrt(table)


def baseline_energy(noisy: ImageGrid, lam: float) -> SoSEnergy:
    g = noisy.gray().reshape(-1)
    unary = np.stack([np.abs(0.0 - g), np.abs(1.0 - g)], axis=1)
    table = lam * sqrt_edge_table()
    cliques = [CliqueFunction(tuple(int(v) for v in mem), table)
               for mem in grid_patches(noisy.height, noisy.width)]
    return SoSEnergy(noisy.num_pixels, unary, cliques)


def pixel_error(pred, truth) -> float:
    pred = np.asarray(pred).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    return hamming_loss(pred, truth) / max(len(truth), 1)


def baseline_generic_cuts(lambdas, instances, **solver_kw):
    """Pick the smoothing weight with the lowest mean pixel error on
    the given instances.  Returns (best lambda, its mean error)."""
    if not len(list(lambdas)):
        raise DataError("empty grid")
    best_lam, best_err = None, np.inf
    for lam in lambdas:
        errs = []
        for di in instances:
            res = flow.minimize(baseline_energy(di.noisy, lam), **solver_kw)
            errs.append(pixel_error(res.labeling, di.truth))
        err = float(np.mean(errs))
        if err < best_err:
            best_lam, best_err = lam, err
    return best_lam, best_err


# ----------------------------------------------------------------------
# k-means patch clustering
# ----------------------------------------------------------------------

@dataclass
class PatchClusterModel:
    centroids: np.ndarray   # (k, d) in standardized space
    mean: np.ndarray
    std: np.ndarray

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def assign(self, vectors: np.ndarray) -> np.ndarray:
        z = (vectors - self.mean) / self.std
        d2 = ((z[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return d2.argmin(axis=1)

    def to_meta(self) -> dict:
        return {"centroids": self.centroids.tolist(),
                "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_meta(cls, meta: dict) -> "PatchClusterModel":
        return cls(np.array(meta["centroids"], dtype=np.float64),
                   np.array(meta["mean"], dtype=np.float64),
                   np.array(meta["std"], dtype=np.float64))


def kmeans(points: np.ndarray, k: int, seed: int,
           max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iterations with distance-squared-weighted seeding.

    Returns (centroids, assignment).  Empty clusters are re-seeded from
    the point farthest from its centroid.  Deterministic per seed; with
    fewer distinct points than k, duplicate centroids may remain and
    ties assign to the lowest centroid index.
    """
    points = np.asarray(points, dtype=np.float64)
    m = points.shape[0]
    if m == 0:
        raise DataError("no points to cluster")
    k = min(k, max(m, 1))
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[int(rng.integers(0, m))]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[j] = points[int(rng.integers(0, m))]
        else:
            centroids[j] = points[int(rng.choice(m, p=d2 / total))]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))

    assign = None
    for _ in range(max_iter):
        dist2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = dist2.argmin(axis=1)
        for j in range(k):
            sel = new_assign == j
            if sel.any():
                centroids[j] = points[sel].mean(axis=0)
            else:
                far = int(dist2[np.arange(m), new_assign].argmax())
                centroids[j] = points[far]
                new_assign[far] = j
        if assign is not None and np.array_equal(assign, new_assign):
            break
        assign = new_assign
    return centroids, assign


def patch_gradient_vectors(img: ImageGrid) -> np.ndarray:
    """Per-patch 8-vector of x and y finite differences at the four
    patch pixels (neighbors clamped at image borders)."""
    g = img.gray()
    h, w = g.shape
    dx = g[:, np.minimum(np.arange(w) + 1, w - 1)] - g
    dy = g[np.minimum(np.arange(h) + 1, h - 1), :] - g
    mem = grid_patches(h, w)
    return np.concatenate([dx.reshape(-1)[mem], dy.reshape(-1)[mem]],
                          axis=1)


def build_cluster_model(images, k: int = 50,
                        seed: int = 0) -> PatchClusterModel:
    vecs = np.concatenate([patch_gradient_vectors(img) for img in images])
    mean = vecs.mean(axis=0)
    std = vecs.std(axis=0)
    std[std < 1e-12] = 1.0
    centroids, _ = kmeans((vecs - mean) / std, k, seed)
    return PatchClusterModel(centroids, mean, std)


# ----------------------------------------------------------------------
# Scribble segmentation features
# ----------------------------------------------------------------------

def _soft_bins(values: np.ndarray, bins: int) -> np.ndarray:
    """Triangular soft binning of [0, 1] values onto `bins` channels."""
    centers = np.linspace(0.0, 1.0, bins)
    width = 1.0 / (bins - 1)
    return np.maximum(0.0, 1.0 - np.abs(values[..., None] - centers) / width)


def _raw_feature_names() -> list[str]:
    names = []
    for ch in range(3):
        for dy, dx in WINDOW_OFFSETS:
            for b in range(COLOR_BINS):
                names.append(f"c{ch}_dy{dy:+d}_dx{dx:+d}_b{b}")
    names += ["dist_fg", "dist_bg", "norm_y", "norm_x",
              "raw_r", "raw_g", "raw_b"]
    return names


def segmentation_feature_names() -> list[str]:
    """Per-label blocks: label-0 features prefixed off:, label-1 on:."""
    raw = _raw_feature_names()
    return [f"off:{n}" for n in raw] + [f"on:{n}" for n in raw]


def segmentation_schema(num_clusters: int) -> FeatureSchema:
    types = [CliqueType(f"cluster{j:02d}", 4) for j in range(num_clusters)]
    return FeatureSchema(types, segmentation_feature_names())


class TwoBlockInstance(Instance):
    """Instance whose unary features are one raw matrix placed in the
    label-0 block for label 0 and the label-1 block for label 1;
    avoids materializing the doubled feature matrix."""

    def __init__(self, num_vars, members, phi, raw):
        self.raw = np.asarray(raw, dtype=np.float64)
        super().__init__(num_vars=num_vars, members=members, phi=phi,
                         unary0=np.zeros((num_vars, 0)),
                         unary1=np.zeros((num_vars, 0)))

    def unary_psi(self, y):
        on = y.astype(bool)
        return np.concatenate([self.raw[~on].sum(axis=0),
                               self.raw[on].sum(axis=0)])

    def unary_costs(self, wu):
        d = self.raw.shape[1]
        return np.stack([self.raw @ wu[:d], self.raw @ wu[d:]], axis=1)


def _raw_pixel_features(img: ImageGrid,
                        scribbles: ScribbleMask) -> np.ndarray:
    px = img.pixels
    if px.ndim == 2:
        px = np.stack([px] * 3, axis=2)
    h, w = px.shape[:2]
    cols = []
    binned = _soft_bins(px, COLOR_BINS)          # (h, w, 3, bins)
    for ch in range(3):
        for dy, dx in WINDOW_OFFSETS:
            rows = np.clip(np.arange(h) + dy, 0, h - 1)
            colsx = np.clip(np.arange(w) + dx, 0, w - 1)
            cols.append(binned[rows][:, colsx, ch, :].reshape(h * w,
                                                              COLOR_BINS))
    diag = float(np.hypot(h, w))
    for cls in (1, 0):
        present = scribbles.marks == cls
        if present.any():
            dist = distance_transform_edt(~present) / diag
        else:
            dist = np.ones((h, w))
        cols.append(dist.reshape(-1, 1))
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    cols.append((ys / max(h - 1, 1)).reshape(-1, 1))
    cols.append((xs / max(w - 1, 1)).reshape(-1, 1))
    cols.append(px.reshape(h * w, 3))
    return np.concatenate(cols, axis=1)


def segmentation_features(img: ImageGrid, scribbles: ScribbleMask,
                          clusters: PatchClusterModel,
                          require_both_classes: bool = True
                          ) -> TwoBlockInstance:
    """Feature bundle for one segmentation problem: per-pixel raw
    features in a two-block layout, and every 2x2 patch assigned to the
    clique type of its gradient-response cluster (indicator data term).
    """
    if scribbles.marks.shape != (img.height, img.width):
        raise DataError("scribble and image dimensions differ")
    scribbles.require_well_posed(both_classes=require_both_classes)
    raw = _raw_pixel_features(img, scribbles)

    mem = grid_patches(img.height, img.width)
    ids = clusters.assign(patch_gradient_vectors(img))
    members = []
    phi = []
    for j in range(clusters.k):
        sel = ids == j
        members.append(mem[sel])
        phi.append(np.ones(int(sel.sum())))
    return TwoBlockInstance(img.num_pixels, members, phi, raw)


def predict_segmentation(schema, w, x, scribbles: ScribbleMask | None = None,
                         anchor: float = 1e3, **solver_kw) -> np.ndarray:
    """Minimize the materialized energy; scribbled pixels are clamped
    by a large unary penalty on the contradicting label, so the
    returned mask always honors the strokes."""
    e = materialize_energy(schema, w, x)
    if scribbles is not None:
        marks = scribbles.marks.reshape(-1)
        fg = marks == 1
        bg = marks == 0
        e.unary[fg, 0] += anchor
        e.unary[bg, 1] += anchor
    return flow.minimize(e, **solver_kw).labeling


def synth_segmentation_dataset(count: int, size, seed: int):
    """Colored-blob images with ground truth and auto-drawn scribbles:
    skeleton strokes inside the object and border strokes outside.

    Foreground colors are drawn warm and backgrounds cool, mimicking a
    photo collection with consistent appearance statistics, so color
    features generalize across images and scales.
    """
    if isinstance(size, int):
        h = w = size
    else:
        h, w = size
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        cy = rng.uniform(0.3, 0.7) * h
        cx = rng.uniform(0.3, 0.7) * w
        ry = rng.uniform(0.15, 0.3) * h
        rx = rng.uniform(0.15, 0.3) * w
        truth = (((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2 <= 1.0)
        fg_color = np.array([rng.uniform(0.55, 0.95),
                             rng.uniform(0.15, 0.55),
                             rng.uniform(0.05, 0.45)])
        bg_color = np.array([rng.uniform(0.05, 0.45),
                             rng.uniform(0.25, 0.65),
                             rng.uniform(0.55, 0.95)])
        px = np.where(truth[..., None], fg_color, bg_color)
        px = np.clip(px + rng.normal(0, 0.05, size=px.shape), 0, 1)
        marks = np.full((h, w), UNLABELED, dtype=np.uint8)
        marks[int(cy), max(0, int(cx - rx / 2)):min(w, int(cx + rx / 2))] = 1
        marks[max(0, int(cy - ry / 2)):min(h, int(cy + ry / 2)), int(cx)] = 1
        marks[1, :] = 0
        marks[h - 2, :] = 0
        marks[:, 1] = 0
        marks[:, w - 2] = 0
        out.append((ImageGrid(px), truth.astype(np.uint8),
                    ScribbleMask(marks)))
    return out


# ----------------------------------------------------------------------
# Splits, metrics, manifests
# ----------------------------------------------------------------------

@dataclass
class SplitSpec:
    train: int
    val: int
    test: int
    seed: int
    repeats: int = 5

    def format(self) -> str:
        return (f"split train={self.train} val={self.val} "
                f"test={self.test} seed={self.seed}")


def parse_split_spec(text: str, repeats: int = 5) -> SplitSpec:
    tok = text.split()
    if not tok or tok[0] != "split":
        raise DataError(f"bad split spec {text!r}")
    fields = {}
    for t in tok[1:]:
        key, _, val = t.partition("=")
        fields[key] = int(val)
    try:
        return SplitSpec(fields["train"], fields["val"], fields["test"],
                         fields.get("seed", 0), repeats)
    except KeyError as exc:
        raise DataError(f"split spec missing {exc}") from None


@dataclass
class MetricsRow:
    algorithm: str
    avg_error: float
    std_error: float
    train_s: float
    test_s_per_image: float


def metrics_csv(rows, include_timings: bool = False) -> str:
    """CSV with stable float formatting; timings are zeroed unless
    requested so that equal runs produce byte-identical files."""
    out = io.StringIO()
    out.write("algorithm,avg_error,std_error,train_s,test_s_per_image\n")
    for r in rows:
        ts = r.train_s if include_timings else 0.0
        ps = r.test_s_per_image if include_timings else 0.0
        out.write(f"{r.algorithm},{r.avg_error!r},{r.std_error!r},"
                  f"{ts!r},{ps!r}\n")
    return out.getvalue()


def evaluate_split(algorithm, dataset, spec: SplitSpec) -> MetricsRow:
    """Repeatedly resample train/val/test partitions, fit, and report
    mean and standard deviation of the test pixel error.

    ``algorithm`` must provide ``name``, ``fit(train, val) -> model``
    and ``errors(model, test) -> list of per-item pixel errors``.
    """
    total = spec.train + spec.val + spec.test
    if total > len(dataset):
        raise DataError(
            f"split needs {total} items, dataset has {len(dataset)}")
    rng = np.random.default_rng(spec.seed)
    errors = []
    train_s = []
    test_s = []
    for _ in range(spec.repeats):
        perm = rng.permutation(len(dataset))
        tr = [dataset[i] for i in perm[:spec.train]]
        va = [dataset[i] for i in perm[spec.train:spec.train + spec.val]]
        te = [dataset[i] for i in perm[spec.train + spec.val:total]]
        t0 = time.perf_counter()
        model = algorithm.fit(tr, va)
        t1 = time.perf_counter()
        errs = algorithm.errors(model, te)
        t2 = time.perf_counter()
        errors.append(float(np.mean(errs)))
        train_s.append(t1 - t0)
        test_s.append((t2 - t1) / max(len(te), 1))
    return MetricsRow(
        algorithm=algorithm.name,
        avg_error=float(np.mean(errors)),
        std_error=float(np.std(errors)),
        train_s=float(np.mean(train_s)),
        test_s_per_image=float(np.mean(test_s)),
    )


# ----------------------------------------------------------------------
# Image files
# ----------------------------------------------------------------------

def load_image(path) -> ImageGrid:
    from PIL import Image
    with Image.open(path) as im:
        if im.mode in ("RGB", "RGBA", "P"):
            arr = np.asarray(im.convert("RGB"))
        else:
            arr = np.asarray(im.convert("L"))
    return ImageGrid.from_8bit(arr)


def load_bits(path) -> np.ndarray:
    """Binary mask: nonzero pixels are foreground."""
    from PIL import Image
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return (arr > 127).astype(np.uint8)


def load_scribbles(path) -> ScribbleMask:
    from PIL import Image
    with Image.open(path) as im:
        if im.mode != "P" and im.mode != "L":
            im = im.convert("L")
        arr = np.asarray(im)
    return ScribbleMask(arr)


def save_bits(path, bits: np.ndarray) -> None:
    from PIL import Image
    Image.fromarray((np.asarray(bits) * 255).astype(np.uint8),
                    mode="L").save(path)


def save_gray(path, values: np.ndarray) -> None:
    from PIL import Image
    arr = np.clip(np.asarray(values) * 255.0, 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def save_scribbles(path, scribbles: ScribbleMask) -> None:
    from PIL import Image
    Image.fromarray(scribbles.marks, mode="L").save(path)


# ----------------------------------------------------------------------
# Task glue shared by the command line tool and the HTTP service
# ----------------------------------------------------------------------

def fit_denoise(items, cfg: TrainConfig):
    """items: (noisy ImageGrid, truth bits) pairs."""
    schema = denoise_schema()
    examples = [(denoise_instance(img), np.asarray(truth).reshape(-1))
                for img, truth in items]
    result = train(schema, examples, cfg)
    return schema, result, {"task": "denoise"}


def predict_denoise(schema, w, img: ImageGrid, **solver_kw) -> np.ndarray:
    from .learn import predict as learn_predict
    return learn_predict(schema, w, denoise_instance(img),
                         **solver_kw).reshape(img.height, img.width)


def fit_segmentation(items, cfg: TrainConfig, num_clusters: int = 50,
                     cluster_seed: int = 0):
    """items: (ImageGrid, truth bits, ScribbleMask) triples."""
    clusters = build_cluster_model([img for img, _, _ in items],
                                   k=num_clusters, seed=cluster_seed)
    schema = segmentation_schema(clusters.k)
    examples = []
    for img, truth, scribbles in items:
        x = segmentation_features(img, scribbles, clusters)
        examples.append((x, np.asarray(truth).reshape(-1)))
    result = train(schema, examples, cfg)
    meta = {"task": "segment", "clusters": clusters.to_meta()}
    return schema, result, meta


def predict_segment_mask(schema, w, meta, img: ImageGrid,
                         scribbles: ScribbleMask, **solver_kw) -> np.ndarray:
    clusters = PatchClusterModel.from_meta(meta["clusters"])
    x = segmentation_features(img, scribbles, clusters,
                              require_both_classes=False)
    bits = predict_segmentation(schema, w, x, scribbles, **solver_kw)
    return bits.reshape(img.height, img.width)


def feature_meta(task: str, num_clusters: int | None = None) -> dict:
    """The part of the configuration that determines the weight layout;
    hashed together with the schema into the model fingerprint."""
    meta = {"task": task, "color_bins": COLOR_BINS,
            "window": len(WINDOW_OFFSETS)}
    if num_clusters is not None:
        meta["num_clusters"] = num_clusters
    return meta


def parse_manifest(text: str, base: Path | None = None):
    """Lines of `image <path> truth <path> [scribbles <path>]`."""
    items = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        rec = {}
        if len(tok) % 2 != 0:
            raise DataError(f"manifest line {lineno}: odd token count")
        for key, val in zip(tok[::2], tok[1::2]):
            if key not in ("image", "truth", "scribbles"):
                raise DataError(
                    f"manifest line {lineno}: unknown field {key!r}")
            rec[key] = (base / val) if base is not None else Path(val)
        if "image" not in rec or "truth" not in rec:
            raise DataError(
                f"manifest line {lineno}: needs image and truth")
        items.append(rec)
    return items
