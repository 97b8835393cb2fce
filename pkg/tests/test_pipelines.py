import numpy as np
import pytest

from sosflow.energy import CliqueFunction, is_submodular
from sosflow.learn import TrainConfig, predict, train
from sosflow.pipelines import (
    DataError,
    DenoiseInstance,
    ImageGrid,
    MetricsRow,
    ScribbleMask,
    SplitSpec,
    baseline_energy,
    baseline_generic_cuts,
    build_cluster_model,
    denoise_examples,
    denoise_instance,
    denoise_schema,
    evaluate_split,
    grid_patches,
    kmeans,
    metrics_csv,
    parse_manifest,
    parse_split_spec,
    patch_gradient_vectors,
    pixel_error,
    segmentation_feature_names,
    segmentation_features,
    segmentation_schema,
    sqrt_edge_table,
    synth_denoise_dataset,
    synth_segmentation_dataset,
)


class TestGrids:
    def test_patch_count(self):
        assert grid_patches(5, 7).shape == (24, 4)  # (H-1) * (W-1)
        assert grid_patches(1, 9).shape == (0, 4)

    def test_patch_members_order(self):
        mem = grid_patches(3, 4)
        np.testing.assert_array_equal(mem[0], [0, 1, 4, 5])

    def test_pixel_range_checked(self):
        with pytest.raises(DataError):
            ImageGrid(np.full((2, 2), 1.5))

    def test_scribble_values_checked(self):
        with pytest.raises(DataError):
            ScribbleMask(np.full((2, 2), 7))

    def test_scribble_well_posedness(self):
        m = np.full((3, 3), 255, dtype=np.uint8)
        with pytest.raises(DataError):
            ScribbleMask(m).require_well_posed()
        m[0, 0] = 1
        with pytest.raises(DataError):
            ScribbleMask(m).require_well_posed()
        ScribbleMask(m).require_well_posed(both_classes=False)
        m[1, 1] = 0
        ScribbleMask(m).require_well_posed()


class TestSynthDenoise:
    def test_zero_noise_equals_clean(self):
        data = synth_denoise_dataset(3, 16, sigma=0.0, seed=5)
        for di in data:
            np.testing.assert_array_equal(di.noisy.pixels, di.truth)

    def test_deterministic_per_seed(self):
        a = synth_denoise_dataset(2, 12, 0.5, seed=9)
        b = synth_denoise_dataset(2, 12, 0.5, seed=9)
        for da, db in zip(a, b):
            np.testing.assert_array_equal(da.noisy.pixels, db.noisy.pixels)
            np.testing.assert_array_equal(da.truth, db.truth)
        c = synth_denoise_dataset(2, 12, 0.5, seed=10)
        assert not np.array_equal(a[0].noisy.pixels, c[0].noisy.pixels)

    def test_values_clamped(self):
        data = synth_denoise_dataset(2, 16, sigma=2.0, seed=1)
        for di in data:
            assert di.noisy.pixels.min() >= 0.0
            assert di.noisy.pixels.max() <= 1.0


class TestDenoiseSchema:
    def test_dimension(self):
        schema = denoise_schema()
        assert schema.dim == 16 + 1

    def test_materialized_structure(self, rng):
        data = synth_denoise_dataset(1, 8, 0.3, seed=2)
        x = denoise_instance(data[0].noisy)
        schema = denoise_schema()
        w = np.zeros(schema.dim)
        w[schema.unary_block] = 2.0
        from sosflow.learn import materialize_energy
        from sosflow.energy import evaluate
        e = materialize_energy(schema, w, x)
        y = rng.integers(0, 2, size=x.num_vars)
        g = data[0].noisy.gray().reshape(-1)
        want = 2.0 * np.abs(y - g).sum()
        assert evaluate(e, y) == pytest.approx(want, rel=1e-12)

    def test_sqrt_prior_is_submodular(self):
        for lam in (0.5, 1.0, 3.0):
            ok, violations = is_submodular(
                CliqueFunction((0, 1, 2, 3), lam * sqrt_edge_table()))
            assert ok, violations


class TestBaseline:
    def test_lambda_zero_is_thresholding(self):
        data = synth_denoise_dataset(1, 12, 0.4, seed=3)
        from sosflow.flow import minimize
        res = minimize(baseline_energy(data[0].noisy, 0.0))
        g = data[0].noisy.gray().reshape(-1)
        np.testing.assert_array_equal(res.labeling, (g > 0.5).astype(int))

    def test_singleton_grid(self):
        data = synth_denoise_dataset(2, 10, 0.4, seed=4)
        lam, err = baseline_generic_cuts([0.0], data)
        assert lam == 0.0 and 0.0 <= err <= 1.0

    def test_empty_grid_rejected(self):
        with pytest.raises(DataError):
            baseline_generic_cuts([], [])


class TestDenoiseEndToEnd:
    def test_training_pipeline_small_fixture(self):
        """Miniature end-to-end denoising run.  At this scale (three
        24x24 training images) the learned model only has to stay in
        the baseline's league; the full-scale directional comparison
        lives in the acceptance suite."""
        data = synth_denoise_dataset(6, 24, sigma=0.5, seed=11)
        train_set, test_set = data[:3], data[3:]
        schema = denoise_schema()
        res = train(schema, denoise_examples(train_set),
                    TrainConfig(c_reg=100.0, eps=0.002))
        assert res.converged
        block = res.w[schema.block(0)]
        ok, violations = is_submodular(CliqueFunction((0, 1, 2, 3), block),
                                       tol=1e-6)
        assert ok, violations

        model_errs = [
            pixel_error(predict(schema, res.w, denoise_instance(di.noisy)),
                        di.truth)
            for di in test_set]
        lam, _ = baseline_generic_cuts(np.linspace(0, 1.0, 11), train_set)
        from sosflow.flow import minimize
        base_errs = [
            pixel_error(minimize(baseline_energy(di.noisy, lam)).labeling,
                        di.truth)
            for di in test_set]
        assert np.mean(model_errs) <= 1.1 * np.mean(base_errs)
        thresh_errs = [
            pixel_error((di.noisy.gray().reshape(-1) > 0.5).astype(int),
                        di.truth)
            for di in test_set]
        assert np.mean(model_errs) < np.mean(thresh_errs)


class TestKMeans:
    def test_single_cluster_is_mean(self, rng):
        pts = rng.normal(size=(40, 3))
        centroids, assign = kmeans(pts, 1, seed=0)
        np.testing.assert_allclose(centroids[0], pts.mean(axis=0))
        assert (assign == 0).all()

    def test_k_distinct_points_zero_distortion(self):
        pts = np.array([[0.0, 0], [5, 5], [-3, 4]])
        centroids, assign = kmeans(pts, 3, seed=1)
        d2 = ((pts - centroids[assign]) ** 2).sum()
        assert d2 == pytest.approx(0.0, abs=1e-12)

    def test_distortion_non_increasing(self, rng):
        pts = rng.normal(size=(120, 4))
        seen = []
        # re-run with increasing iteration caps; the distortion of the
        # returned model must not increase with more iterations
        for iters in (1, 2, 4, 8, 16, 32):
            centroids, assign = kmeans(pts, 5, seed=7, max_iter=iters)
            seen.append(((pts - centroids[assign]) ** 2).sum())
        for a, b in zip(seen, seen[1:]):
            assert b <= a + 1e-9

    def test_deterministic(self, rng):
        pts = rng.normal(size=(60, 2))
        c1, a1 = kmeans(pts, 4, seed=3)
        c2, a2 = kmeans(pts, 4, seed=3)
        np.testing.assert_array_equal(c1, c2)
        np.testing.assert_array_equal(a1, a2)


class TestSegmentationFeatures:
    def make_case(self, size=14, seed=0):
        img, truth, scribbles = synth_segmentation_dataset(1, size, seed)[0]
        clusters = build_cluster_model([img], k=4, seed=1)
        return img, truth, scribbles, clusters

    def test_feature_count_in_range(self):
        names = segmentation_feature_names()
        assert 300 <= len(names) <= 500
        schema = segmentation_schema(4)
        assert schema.dim == 4 * 16 + len(names)
        assert schema.unary_names == names

    def test_scribbled_pixel_distance_zero(self):
        img, truth, scribbles, clusters = self.make_case()
        x = segmentation_features(img, scribbles, clusters)
        names = segmentation_feature_names()
        col = names.index("off:dist_fg")
        fg_rows = np.nonzero(scribbles.marks.reshape(-1) == 1)[0]
        assert np.allclose(x.raw[fg_rows, col], 0.0)

    def test_uniform_image_single_cluster(self):
        img = ImageGrid(np.full((8, 8, 3), 0.5))
        clusters = build_cluster_model([img], k=3, seed=0)
        ids = clusters.assign(patch_gradient_vectors(img))
        assert len(set(ids.tolist())) == 1  # identical points, one bucket

    def test_features_in_unit_range(self):
        img, truth, scribbles, clusters = self.make_case()
        x = segmentation_features(img, scribbles, clusters)
        assert x.raw.min() >= 0.0
        assert x.raw.max() <= 1.0 + 1e-9

    def test_every_patch_assigned_once(self):
        img, truth, scribbles, clusters = self.make_case()
        x = segmentation_features(img, scribbles, clusters)
        total = sum(len(m) for m in x.members)
        assert total == (img.height - 1) * (img.width - 1)

    def test_degenerate_scribbles_rejected(self):
        img, truth, scribbles, clusters = self.make_case()
        empty = ScribbleMask(np.full(scribbles.marks.shape, 255,
                                     dtype=np.uint8))
        with pytest.raises(DataError):
            segmentation_features(img, empty, clusters)


class TestSplitsAndMetrics:
    class CountingAlgorithm:
        name = "probe"

        def fit(self, train, val):
            return ("model", len(train), len(val))

        def errors(self, model, test):
            return [0.0 for _ in test]

    def test_parse_and_format(self):
        spec = parse_split_spec("split train=75 val=38 test=38 seed=3")
        assert (spec.train, spec.val, spec.test, spec.seed) == (75, 38, 38, 3)
        assert spec.format() == "split train=75 val=38 test=38 seed=3"

    def test_perfect_predictor_zero_error(self):
        spec = SplitSpec(4, 2, 3, seed=0, repeats=3)
        row = evaluate_split(self.CountingAlgorithm(), list(range(9)), spec)
        assert row.avg_error == 0.0 and row.std_error == 0.0

    def test_constant_predictor_near_half(self):
        class Constant:
            name = "const"

            def fit(self, train, val):
                return None

            def errors(self, model, test):
                return [float(t) for t in test]

        # items are their own error rates: half 0.0, half 1.0
        data = [0.0, 1.0] * 10
        spec = SplitSpec(8, 4, 8, seed=1, repeats=5)
        row = evaluate_split(Constant(), data, spec)
        assert 0.3 <= row.avg_error <= 0.7

    def test_split_too_large_rejected(self):
        with pytest.raises(DataError):
            evaluate_split(self.CountingAlgorithm(), [1, 2],
                           SplitSpec(2, 1, 1, 0))

    def test_csv_format_and_determinism(self):
        rows = [MetricsRow("alg", 0.123456789, 0.01, 12.5, 0.8)]
        text = metrics_csv(rows)
        lines = text.splitlines()
        assert lines[0] == \
            "algorithm,avg_error,std_error,train_s,test_s_per_image"
        assert lines[1].startswith("alg,0.123456789,0.01,0.0,0.0")
        timed = metrics_csv(rows, include_timings=True)
        assert "12.5" in timed
        assert metrics_csv(rows) == text


class TestManifest:
    def test_parse(self, tmp_path):
        text = ("# dataset\n"
                "image a.png truth a_gt.png\n"
                "image b.png truth b_gt.png scribbles b_s.png\n")
        items = parse_manifest(text, base=tmp_path)
        assert len(items) == 2
        assert items[0]["image"] == tmp_path / "a.png"
        assert "scribbles" in items[1]

    def test_missing_truth_rejected(self):
        with pytest.raises(DataError):
            parse_manifest("image a.png\n")

    def test_unknown_field_rejected(self):
        with pytest.raises(DataError):
            parse_manifest("image a.png truth t.png extra x\n")
