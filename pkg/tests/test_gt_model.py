import numpy as np
import pytest
from _oracles import eq_weights, naive_laplacian, naive_mixture
from conftest import make_random_map, make_step_map

from dispmodal import (
    Cluster,
    ClusterSet,
    DisparityMap,
    ModelParams,
    WindowConfig,
    build_gt_distribution,
    build_gt_volume,
    build_gt_volume_with_counts,
    cluster_window,
    compute_weights,
    laplacian_distribution,
)

PARAMS = ModelParams(alpha=0.8, b=0.8, d_max=192)


def make_cluster_set(sizes, means, center_idx):
    clusters = [Cluster(np.full(s, m, np.float64), float(m)) for s, m in zip(sizes, means)]
    return ClusterSet(clusters, center_idx)


class TestModelParams:
    def test_alpha_below_half_rejected(self):
        with pytest.raises(ValueError):
            ModelParams(alpha=0.4)

    @pytest.mark.parametrize("kw", [{"b": 0.0}, {"d_max": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)


class TestComputeWeights:
    def test_unimodal_weight_is_one(self):
        cset = make_cluster_set([9], [50.0], 0)
        np.testing.assert_array_equal(compute_weights(cset, PARAMS), [1.0])

    def test_dense_hand_case(self):
        cset = make_cluster_set([6, 3], [50.0, 80.0], 0)
        w = compute_weights(cset, PARAMS)
        expected = [0.8 + (6 - 1) * (1.0 - 0.8) / (9 - 1), 3 * (1.0 - 0.8) / (9 - 1)]
        assert w.tolist() == expected  # exact float arithmetic
        np.testing.assert_allclose(w, [0.925, 0.075], atol=1e-12)

    def test_sparse_hand_case(self):
        cset = make_cluster_set([3, 2], [50.0, 80.0], 0)
        w = compute_weights(cset, PARAMS)
        np.testing.assert_allclose(w, [0.9, 0.1], atol=1e-12)

    def test_center_not_first(self):
        cset = make_cluster_set([3, 6], [20.0, 50.0], 1)
        w = compute_weights(cset, PARAMS)
        np.testing.assert_allclose(w, [0.075, 0.925], atol=1e-12)

    def test_singleton_window(self):
        cset = make_cluster_set([1], [10.0], 0)
        np.testing.assert_array_equal(compute_weights(cset, PARAMS), [1.0])

    def test_weights_sum_to_one_random(self):
        rng = np.random.default_rng(9)
        for _ in range(2000):
            k = int(rng.integers(1, 8))
            sizes = rng.integers(1, 10, k).tolist()
            cset = make_cluster_set(sizes, rng.uniform(0, 180, k), int(rng.integers(0, k)))
            alpha = float(rng.uniform(0.5, 1.0))
            w = compute_weights(cset, ModelParams(alpha=alpha))
            assert abs(w.sum() - 1.0) < 1e-12
            assert np.all(w >= 0)
            assert w[cset.center_cluster_index] == w.max()


class TestLaplacian:
    def test_matches_naive_oracle(self, both_backends):
        for mu in (0.0, 31.25, 50.0, 191.0):
            got = laplacian_distribution(mu, 0.8, 192)
            np.testing.assert_allclose(got, naive_laplacian(mu, 0.8, 192), rtol=1e-12)

    def test_far_out_of_range_mean_stable(self, both_backends):
        got = laplacian_distribution(500.0, 0.8, 192)
        assert np.isfinite(got).all()
        assert got.sum() == pytest.approx(1.0, abs=1e-9)
        assert got.argmax() == 191

    def test_sums_to_one(self, both_backends):
        rng = np.random.default_rng(2)
        for _ in range(50):
            got = laplacian_distribution(rng.uniform(-10, 200), rng.uniform(0.3, 3), 64)
            assert got.sum() == pytest.approx(1.0, abs=1e-12)


class TestBuildGtDistribution:
    def test_unimodal_peaked_at_center(self):
        cset = make_cluster_set([9], [50.0], 0)
        p = build_gt_distribution(cset, 50.0, PARAMS)
        assert p.argmax() == 50
        assert p.sum() == pytest.approx(1.0, abs=1e-9)

    def test_mixture_ratio_hand_case(self):
        # weights (0.925, 0.075) at means (50, 80): interior truncation is
        # negligible so the peak ratio equals the weight ratio
        cset = make_cluster_set([6, 3], [50.0, 80.0], 0)
        p = build_gt_distribution(cset, 50.0, PARAMS)
        assert p[50] / p[80] == pytest.approx(12.333333333, rel=1e-6)
        oracle = naive_mixture([0.925, 0.075], [50.0, 80.0], 0.8, 192)
        np.testing.assert_allclose(p, oracle, atol=1e-10)

    def test_center_mean_override(self):
        # cluster mean 50.4 but ground truth 50.1: the center component
        # must sit on the exact ground truth
        members = np.array([50.0, 50.4, 50.8])
        cset = ClusterSet([Cluster(members, 50.4)], 0)
        p = build_gt_distribution(cset, 50.1, ModelParams(0.8, 0.8, 192))
        np.testing.assert_allclose(p, naive_laplacian(50.1, 0.8, 192), rtol=1e-12)

    def test_border_mean_normalizes(self):
        cset = make_cluster_set([9], [0.0], 0)
        p = build_gt_distribution(cset, 0.0, PARAMS)
        assert p.sum() == pytest.approx(1.0, abs=1e-9)
        assert p.argmax() == 0

    def test_out_of_range_center_rejected(self):
        cset = make_cluster_set([9], [200.0], 0)
        with pytest.raises(ValueError):
            build_gt_distribution(cset, 200.0, PARAMS)
        with pytest.raises(ValueError):
            build_gt_distribution(cset, -1.0, PARAMS)


class TestBuildGtVolume:
    CFG = WindowConfig(1, 9, 3.0, 1)

    def test_constant_map_unimodal_bitwise(self, both_backends):
        gt = DisparityMap(np.full((6, 10), 33.0, np.float32), np.ones((6, 10), bool))
        vol, skip = build_gt_volume(gt, self.CFG, PARAMS)
        assert not skip.any()
        direct = laplacian_distribution(33.0, 0.8, 192).astype(np.float32)
        for y in range(6):
            for x in range(10):
                np.testing.assert_array_equal(vol.probs[:, y, x], direct)

    def test_step_edge_cluster_counts_and_weights(self, both_backends):
        gt = make_step_map(width=16, height=2)  # 20 | 60, edge at x=8
        vol, skip, kmap = build_gt_volume_with_counts(gt, self.CFG, PARAMS)
        assert not skip.any()
        # pixels >= 4 columns from the edge are uni-modal, nearer are bimodal
        for x in range(16):
            expected_k = 2 if 4 <= x <= 11 else 1
            assert kmap[0, x] == expected_k, f"x={x}"
        # hand-evaluated cardinalities at x=6: window 2..10 -> six 20s, three 60s
        oracle = naive_mixture(eq_weights([6, 3], 0, 0.8), [20.0, 60.0], 0.8, 192)
        np.testing.assert_allclose(vol.probs[:, 1, 6].astype(np.float64), oracle, atol=2e-7)
        # x=8 (first 60): window 4..12 -> four 20s, five 60s, center in the 60s
        oracle = naive_mixture(eq_weights([4, 5], 1, 0.8), [20.0, 60.0], 0.8, 192)
        np.testing.assert_allclose(vol.probs[:, 0, 8].astype(np.float64), oracle, atol=2e-7)

    def test_gt_modal_argmax_dominates_on_step_edge(self, both_backends):
        # alpha >= 0.5 with the other modal 40 px away (>> 2b ln(w1/w2)):
        # the distribution's argmax must sit on the rounded ground truth
        gt = make_step_map(width=16, height=2)
        vol, skip = build_gt_volume(gt, self.CFG, PARAMS)
        argmax = vol.probs.argmax(axis=0)
        np.testing.assert_array_equal(argmax, np.round(gt.values).astype(np.int64))

    def test_all_columns_normalized(self, both_backends):
        rng = np.random.default_rng(8)
        for valid_fraction in (1.0, 0.4):
            gt = make_random_map(rng, 12, 16, valid_fraction=valid_fraction)
            vol, skip = build_gt_volume(gt, self.CFG, ModelParams(0.8, 0.8, 64))
            sums = vol.probs.sum(axis=0, dtype=np.float64)
            assert np.abs(sums[~skip] - 1.0).max() < 1e-6
            assert np.all(sums[skip] == 0.0)
            assert np.all(vol.probs >= 0)

    def test_out_of_range_and_invalid_skipped(self, both_backends):
        vals = np.full((3, 9), 10.0, np.float32)
        vals[1, 4] = 70.0  # out of range for d_max=64
        valid = np.ones((3, 9), bool)
        valid[2, 2] = False
        gt = DisparityMap(np.where(valid, vals, 0).astype(np.float32), valid)
        vol, skip = build_gt_volume(gt, self.CFG, ModelParams(0.8, 0.8, 64))
        assert skip[1, 4] and skip[2, 2]
        assert skip.sum() == 2
        assert np.all(vol.probs[:, 1, 4] == 0)

    def test_fully_invalid_map(self, both_backends):
        gt = DisparityMap(np.zeros((4, 6), np.float32), np.zeros((4, 6), bool))
        vol, skip = build_gt_volume(gt, self.CFG, ModelParams(0.8, 0.8, 32))
        assert skip.all()
        assert not vol.probs.any()

    def test_determinism(self, both_backends):
        gt = make_random_map(np.random.default_rng(3), 10, 14, valid_fraction=0.7)
        a, skip_a = build_gt_volume(gt, self.CFG, ModelParams(0.8, 0.8, 48))
        b, skip_b = build_gt_volume(gt, self.CFG, ModelParams(0.8, 0.8, 48))
        np.testing.assert_array_equal(a.probs, b.probs)
        np.testing.assert_array_equal(skip_a, skip_b)

    def test_volume_matches_scalar_path(self, both_backends):
        rng = np.random.default_rng(12)
        gt = make_random_map(rng, 8, 12, lo=5, hi=60, valid_fraction=0.8)
        params = ModelParams(0.8, 0.8, 64)
        vol, skip = build_gt_volume(gt, self.CFG, params)
        for y, x in [(0, 0), (3, 5), (7, 11), (4, 8)]:
            if skip[y, x]:
                continue
            cset = cluster_window(gt, (y, x), self.CFG)
            expected = build_gt_distribution(cset, float(gt.values[y, x]), params)
            np.testing.assert_allclose(vol.probs[:, y, x].astype(np.float64),
                                       expected, atol=1e-6)

    def test_backend_agreement(self):
        from dispmodal import backend

        if not backend.HAS_NUMBA:
            pytest.skip("numba unavailable")
        rng = np.random.default_rng(21)
        gt = make_random_map(rng, 10, 20, lo=0, hi=180, valid_fraction=0.6)
        results = {}
        for name in ("numba", "numpy"):
            prev = backend.set_backend(name)
            try:
                vol, skip, kmap = build_gt_volume_with_counts(gt, self.CFG, PARAMS)
                results[name] = (vol.probs, skip, kmap)
            finally:
                backend.set_backend(prev)
        np.testing.assert_array_equal(results["numba"][1], results["numpy"][1])
        np.testing.assert_array_equal(results["numba"][2], results["numpy"][2])
        np.testing.assert_allclose(results["numba"][0], results["numpy"][0], atol=2e-6)

    def test_min_pts_2_volume(self, both_backends):
        # isolated center amid distant values: singleton GT modal dominates
        vals = np.array([[10.0, 30.0, 50.0, 70.0, 90.0]], np.float32)
        gt = DisparityMap(vals, np.ones_like(vals, bool))
        cfg = WindowConfig(1, 5, 3.0, 2)
        vol, skip, kmap = build_gt_volume_with_counts(gt, cfg, ModelParams(0.8, 0.8, 128))
        assert not skip.any()
        assert kmap[0, 2] == 1  # everything is noise; center forced singleton
        np.testing.assert_allclose(vol.probs[:, 0, 2].astype(np.float64),
                                   naive_laplacian(50.0, 0.8, 128), atol=2e-7)
