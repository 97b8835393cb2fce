"""Command line entry points: dataset synthesis, training, prediction
and evaluation.

Exit codes: 0 success, 1 internal failure, 2 usage error, 3 data
error.  Logs go to standard error; artifacts go to files.  Environment
variables: SOS_THREADS caps worker fan-out (overridden by --threads),
SOS_LOG=debug enables tracebacks.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .energy import FormatError
from .learn import TrainConfig, TrainingError
from .model_io import read_model, save_model, schema_hash
from .pipelines import (
    DataError,
    ImageGrid,
    MetricsRow,
    ScribbleMask,
    feature_meta,
    fit_denoise,
    fit_segmentation,
    load_bits,
    load_image,
    load_scribbles,
    metrics_csv,
    parse_manifest,
    parse_split_spec,
    pixel_error,
    predict_denoise,
    predict_segment_mask,
    save_bits,
    save_gray,
    save_scribbles,
    synth_denoise_dataset,
    synth_segmentation_dataset,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_DATA = 3


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("SOS_THREADS", "1"))


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        c_reg=args.c,
        eps=args.eps,
        loss="per_pixel" if args.loss_per_pixel else "unit",
        qp_tol=args.qp_tol,
        threads=_threads(args),
        current_arc=not args.no_current_arc,
    )


def _run_config(args, task_fields=()) -> dict:
    cfg = {
        "version": __version__,
        "task": args.task,
        "seed": getattr(args, "seed", None),
    }
    for name in task_fields:
        cfg[name] = getattr(args, name)
    return cfg


def _load_manifest_items(args, need_scribbles: bool):
    manifest_path = Path(args.manifest)
    if not manifest_path.exists():
        raise DataError(f"manifest not found: {manifest_path}")
    items = parse_manifest(manifest_path.read_text(),
                           base=manifest_path.parent)
    loaded = []
    for rec in items:
        img = load_image(rec["image"])
        truth = load_bits(rec["truth"])
        if truth.shape != (img.height, img.width):
            raise DataError(
                f"{rec['truth']}: truth dimensions {truth.shape} do not "
                f"match image {(img.height, img.width)}")
        if need_scribbles:
            if "scribbles" not in rec:
                raise DataError(
                    f"manifest entry {rec['image']} lacks scribbles")
            scr = load_scribbles(rec["scribbles"])
            if scr.marks.shape != (img.height, img.width):
                raise DataError(
                    f"{rec['scribbles']}: scribble dimensions mismatch")
            loaded.append((img, truth, scr))
        else:
            loaded.append((img, truth))
    if not loaded:
        raise DataError("manifest has no entries")
    return loaded


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    if args.task == "denoise":
        data = synth_denoise_dataset(args.count, args.size, args.sigma,
                                     args.seed)
        for i, di in enumerate(data):
            save_gray(out / f"noisy_{i:03d}.png", di.noisy.pixels)
            save_bits(out / f"truth_{i:03d}.png", di.truth)
            lines.append(f"image noisy_{i:03d}.png truth truth_{i:03d}.png")
    elif args.task == "segment":
        data = synth_segmentation_dataset(args.count, args.size, args.seed)
        for i, (img, truth, scr) in enumerate(data):
            from PIL import Image
            Image.fromarray((img.pixels * 255).astype(np.uint8),
                            mode="RGB").save(out / f"image_{i:03d}.png")
            save_bits(out / f"truth_{i:03d}.png", truth)
            save_scribbles(out / f"scribbles_{i:03d}.png", scr)
            lines.append(f"image image_{i:03d}.png truth truth_{i:03d}.png "
                         f"scribbles scribbles_{i:03d}.png")
    else:
        raise DataError(f"synth does not support task {args.task!r}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")
    cfg = _run_config(args, ("count", "size", "sigma"))
    (out / "config.json").write_text(
        json.dumps(cfg, sort_keys=True, separators=(",", ":")) + "\n")
    _log(f"wrote {len(lines)} instances to {out}")
    return EXIT_OK


class UsageError(ValueError):
    pass


def cmd_train(args) -> int:
    out = Path(args.out)
    if out.exists() and not args.force:
        raise UsageError(f"output {out} exists; pass --force to overwrite")
    cfg = _train_config(args)
    log_path = Path(str(out) + ".log.jsonl")
    records = []

    def on_iteration(rec):
        line = json.dumps(
            {"iteration": rec.iteration, "objective": rec.objective,
             "xi": rec.xi, "violation": rec.violation,
             "wall_s": rec.wall_s}, sort_keys=True)
        records.append(line)
        _log(f"iter {rec.iteration}: objective={rec.objective:.6g} "
             f"xi={rec.xi:.6g} violation={rec.violation:.6g}")

    if args.task == "denoise":
        items = _load_manifest_items(args, need_scribbles=False)
        items = [(img, truth) for img, truth in items]
        schema, result, meta = fit_denoise(items, cfg)
        feats = feature_meta("denoise")
    elif args.task == "segment":
        items = _load_manifest_items(args, need_scribbles=True)
        schema, result, meta = fit_segmentation(
            items, cfg, num_clusters=args.clusters, cluster_seed=args.seed)
        feats = feature_meta("segment", num_clusters=args.clusters)
    elif args.task == "multilabel-demo":
        return _train_multilabel_demo(args, cfg, out)
    else:
        raise DataError(f"unknown task {args.task!r}")

    # re-run bookkeeping through the callback list for the jsonl log
    for rec in result.history:
        on_iteration(rec)
    meta.update({
        "version": __version__,
        "seed": args.seed,
        "c_reg": cfg.c_reg,
        "eps": cfg.eps,
        "loss": cfg.loss,
        "qp_tol": cfg.qp_tol,
        "features": feats,
        "schema_hash": schema_hash(schema, feats),
        "approximate_separation": result.approximate_separation,
    })
    save_model(out, schema, result.w, meta)
    log_path.write_text("\n".join(records) + "\n")
    _log(f"model written to {out} ({result.iterations} iterations, "
         f"xi={result.xi:.6g})")
    return EXIT_OK


def _train_multilabel_demo(args, cfg, out) -> int:
    """Self-contained three-label demo on synthetic data: regions with
    one color prototype per label, unary features are per-label color
    distances, one learned uniformity table per label."""
    from .multilabel import MultiLabelInstance, multilabel_schema
    from .learn import train as learn_train
    from .pipelines import grid_patches

    rng = np.random.default_rng(args.seed)
    size = min(args.size, 16)
    protos = np.array([0.15, 0.5, 0.85])
    examples = []
    for _ in range(3):
        truth = np.zeros((size, size), dtype=np.int64)
        truth[:, size // 3:] = 1
        truth[size // 2:, 2 * size // 3:] = 2
        obs = protos[truth] + 0.18 * rng.standard_normal(truth.shape)
        feats = np.abs(obs.reshape(-1, 1) - protos)[..., None]
        mem = grid_patches(size, size)
        x = MultiLabelInstance(
            num_vars=size * size, num_labels=3,
            members=[mem], phi=[np.ones(len(mem))],
            unary_feats=feats)
        examples.append((x, truth.reshape(-1)))
    schema = multilabel_schema([("patch2x2", 4)], 3, ["color_dist"])
    result = learn_train(schema, examples, cfg)
    meta = {
        "task": "multilabel-demo", "version": __version__,
        "seed": args.seed, "c_reg": cfg.c_reg, "eps": cfg.eps,
        "labels": 3, "prototypes": protos.tolist(),
        "approximate_separation": result.approximate_separation,
    }
    save_model(out, schema, result.w, meta)
    errs = [
        float(np.mean(x.predict(schema, result.w) != y))
        for x, y in examples]
    _log(f"multilabel demo: training error {np.mean(errs):.4f} "
         f"(separation approximate: {result.approximate_separation})")
    return EXIT_OK


def _open_model(args):
    path = Path(args.model)
    if not path.exists():
        raise DataError(f"model not found: {path}")
    return read_model(path)


def cmd_predict(args) -> int:
    schema, w, meta = _open_model(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    task = meta.get("task")
    if not args.inputs:
        raise DataError("no inputs given")

    def one(spec: str):
        parts = spec.split(":")
        img = load_image(parts[0])
        t0 = time.perf_counter()
        if task == "denoise":
            mask = predict_denoise(schema, w, img)
        elif task == "segment":
            if len(parts) < 2:
                raise DataError(
                    f"{spec}: segmentation input must be "
                    f"image.png:scribbles.png")
            scribbles = load_scribbles(parts[1])
            mask = predict_segment_mask(schema, w, meta, img, scribbles)
        else:
            raise DataError(f"model task {task!r} not predictable")
        ms = (time.perf_counter() - t0) * 1e3
        dest = out / (Path(parts[0]).stem + "_mask.png")
        save_bits(dest, mask)
        return parts[0], ms, dest

    workers = max(1, _threads(args))
    if workers > 1 and len(args.inputs) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, args.inputs))
    else:
        results = [one(spec) for spec in args.inputs]
    for src, ms, dest in results:
        _log(f"{src}: {ms:.0f} ms -> {dest}")
    return EXIT_OK


def cmd_eval(args) -> int:
    schema, w, meta = _open_model(args)
    task = meta.get("task")
    feats = feature_meta(task, meta.get("features", {}).get("num_clusters")) \
        if task == "segment" else feature_meta(task)
    want = schema_hash(schema, feats)
    have = meta.get("schema_hash")
    if have != want:
        raise DataError(
            f"model schema hash {have} does not match the features this "
            f"build derives from the manifest ({want}); refusing to "
            f"evaluate")

    spec = parse_split_spec(args.split, repeats=args.repeats)
    items = _load_manifest_items(args, need_scribbles=(task == "segment"))
    rng = np.random.default_rng(spec.seed)
    errors = []
    test_s = []
    total = spec.train + spec.val + spec.test
    if total > len(items):
        raise DataError(
            f"split needs {total} items, manifest has {len(items)}")
    for _ in range(spec.repeats):
        perm = rng.permutation(len(items))
        test_items = [items[i] for i in perm[total - spec.test:total]]
        errs = []
        t0 = time.perf_counter()
        for item in test_items:
            if task == "denoise":
                img, truth = item
                mask = predict_denoise(schema, w, img)
            else:
                img, truth, scr = item
                mask = predict_segment_mask(schema, w, meta, img, scr)
            errs.append(pixel_error(mask, truth))
        test_s.append((time.perf_counter() - t0) / max(len(test_items), 1))
        errors.append(float(np.mean(errs)))
    row = MetricsRow(
        algorithm=f"s3svm-{task}",
        avg_error=float(np.mean(errors)),
        std_error=float(np.std(errors)),
        train_s=0.0,
        test_s_per_image=float(np.mean(test_s)),
    )
    text = metrics_csv([row], include_timings=args.timings)
    Path(args.out).write_text(text)
    _log(text.strip())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sosflow",
        description="Sum-of-submodular energies: exact minimization and "
                    "large-margin training.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=None,
                        help="worker fan-out (default: SOS_THREADS or 1)")

    sp = sub.add_parser("synth", help="write a synthetic dataset")
    add_common(sp)
    sp.add_argument("--task", choices=("denoise", "segment"),
                    default="denoise")
    sp.add_argument("--count", type=int, default=20)
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--sigma", type=float, default=0.5)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="train a model from a manifest")
    add_common(sp)
    sp.add_argument("--task",
                    choices=("denoise", "segment", "multilabel-demo"),
                    default="denoise")
    sp.add_argument("--manifest")
    sp.add_argument("--c", type=float, default=100.0,
                    help="regularization trade-off")
    sp.add_argument("--eps", type=float, default=0.001,
                    help="cutting-plane precision target")
    sp.add_argument("--qp-tol", type=float, default=1e-8)
    sp.add_argument("--clusters", type=int, default=50,
                    help="patch clusters (segment task)")
    sp.add_argument("--size", type=int, default=16,
                    help="image size (multilabel-demo)")
    sp.add_argument("--loss-per-pixel", action="store_true", default=True)
    sp.add_argument("--loss-unit", dest="loss_per_pixel",
                    action="store_false",
                    help="use raw Hamming loss instead of per-pixel")
    sp.add_argument("--no-current-arc", action="store_true",
                    help="disable the current-arc adoption heuristic")
    sp.add_argument("--out", required=True)
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="write masks for input images")
    add_common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("inputs", nargs="*",
                    help="image.png or image.png:scribbles.png")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("eval", help="evaluate a model over random splits")
    add_common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--split", required=True,
                    help='e.g. "split train=10 val=0 test=10 seed=1"')
    sp.add_argument("--repeats", type=int, default=5)
    sp.add_argument("--timings", action="store_true",
                    help="fill timing columns (breaks byte-determinism)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except (DataError, FormatError, FileNotFoundError) as exc:
        _log(f"error: {exc}")
        return EXIT_DATA
    except TrainingError as exc:
        _log(f"training aborted: {exc}")
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        _log(f"internal error: {exc}")
        if os.environ.get("SOS_LOG", "").lower() == "debug":
            import traceback
            traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
