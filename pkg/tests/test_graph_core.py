import math

import numpy as np
import pytest

from graph_calculus import (
    KernelConfig,
    PointCloud,
    build_weights,
    degrees,
    degrees_from_cloud,
)


def random_cloud(n, dim, seed):
    rng = np.random.default_rng(seed)
    return PointCloud(points=rng.standard_normal((n, dim)))


# the worked 3-point example: (0,0), (1,0), (0,2) with eps = 1
WORKED_POINTS = [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]


class TestPointCloud:
    def test_shape_and_props(self):
        cloud = PointCloud(points=WORKED_POINTS)
        assert cloud.n_points == 3
        assert cloud.ambient_dim == 2

    def test_rejects_single_point(self):
        with pytest.raises(ValueError, match="at least 2"):
            PointCloud(points=[[0.0, 0.0]])

    def test_rejects_non_finite_naming_index(self):
        pts = [[0.0, 0.0], [1.0, np.nan], [2.0, 0.0]]
        with pytest.raises(ValueError, match="point index 1"):
            PointCloud(points=pts)

    def test_rejects_ragged_or_1d(self):
        with pytest.raises(ValueError):
            PointCloud(points=[1.0, 2.0, 3.0])

    def test_points_are_immutable(self):
        cloud = PointCloud(points=WORKED_POINTS)
        with pytest.raises(ValueError):
            cloud.points[0, 0] = 5.0

    def test_from_csv(self, tmp_path):
        path = tmp_path / "cloud.csv"
        path.write_text("# x,y header comment\n0.0,0.0\n1.0,0.0\n0.0,2.0\n")
        cloud = PointCloud.from_csv(path)
        assert cloud.n_points == 3
        np.testing.assert_array_equal(cloud.points, np.asarray(WORKED_POINTS))

    def test_from_csv_bad_content(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0.0,zzz\n1.0,2.0\n")
        with pytest.raises(ValueError, match="bad.csv"):
            PointCloud.from_csv(path)


class TestKernelConfig:
    @pytest.mark.parametrize("eps", [0.0, -1.0, np.nan, np.inf])
    def test_bad_epsilon(self, eps):
        with pytest.raises(ValueError, match="epsilon"):
            KernelConfig(epsilon=eps)

    @pytest.mark.parametrize("tau", [-0.1, 1.0, 1.5])
    def test_bad_tau(self, tau):
        with pytest.raises(ValueError, match="truncation_tau"):
            KernelConfig(epsilon=1.0, truncation_tau=tau)


class TestBuildWeights:
    def test_self_weight_is_one(self):
        w = build_weights(PointCloud(points=WORKED_POINTS), KernelConfig(epsilon=0.37))
        assert w.entries[0, 0] == 1.0
        assert w.entries[1, 1] == 1.0

    def test_distance_sq_two_eps_gives_inverse_e(self):
        # |u - v|^2 = 2 eps forces w = exp(-1)
        eps = 0.73
        pts = [[0.0, 0.0], [math.sqrt(2.0 * eps), 0.0]]
        w = build_weights(PointCloud(points=pts), KernelConfig(epsilon=eps))
        assert w.entries[0, 1] == pytest.approx(math.exp(-1.0), rel=1e-15)
        assert w.entries[0, 1] == pytest.approx(0.3678794, abs=5e-8)

    def test_worked_example_weights(self):
        w = build_weights(PointCloud(points=WORKED_POINTS), KernelConfig(epsilon=1.0))
        # squared distances 1, 4, 5 evaluated through the scalar kernel formula
        assert w.entries[0, 1] == pytest.approx(math.exp(-0.5), rel=1e-15)
        assert w.entries[1, 2] == pytest.approx(math.exp(-2.5), rel=1e-15)
        assert w.entries[0, 2] == pytest.approx(math.exp(-2.0), rel=1e-15)
        assert w.entries[0, 1] == pytest.approx(0.6065307, abs=5e-8)
        assert w.entries[1, 2] == pytest.approx(0.0820850, abs=5e-8)
        assert w.entries[0, 2] == pytest.approx(0.1353353, abs=5e-8)

    @pytest.mark.parametrize("n,dim,seed", [(2, 2, 0), (37, 3, 1), (200, 5, 2), (128, 4, 3)])
    def test_symmetry_is_bit_exact(self, n, dim, seed):
        cloud = random_cloud(n, dim, seed)
        w = build_weights(cloud, KernelConfig(epsilon=0.8))
        assert np.abs(w.entries - w.entries.T).max() == 0.0

    def test_sparse_symmetry_is_bit_exact(self):
        cloud = random_cloud(150, 3, 4)
        w = build_weights(cloud, KernelConfig(epsilon=0.3, truncation_tau=1e-5))
        diff = w.entries - w.entries.T
        assert diff.nnz == 0 or np.abs(diff.data).max() == 0.0

    def test_epsilon_monotonicity(self):
        cloud = random_cloud(40, 3, 5)
        w_small = build_weights(cloud, KernelConfig(epsilon=0.5)).entries
        w_big = build_weights(cloud, KernelConfig(epsilon=1.5)).entries
        off = ~np.eye(40, dtype=bool)
        assert (w_big[off] > w_small[off]).all()

    def test_truncation_consistency(self):
        cloud = random_cloud(120, 3, 6)
        tau = 1e-4
        dense = build_weights(cloud, KernelConfig(epsilon=0.4)).entries
        trunc = build_weights(cloud, KernelConfig(epsilon=0.4, truncation_tau=tau)).toarray()
        kept = trunc != 0
        assert np.array_equal(trunc[kept], dense[kept])
        assert dense[~kept].max() < tau

    def test_entries_in_unit_interval(self):
        cloud = random_cloud(60, 4, 7)
        w = build_weights(cloud, KernelConfig(epsilon=0.9)).entries
        assert w.min() >= 0.0 and w.max() <= 1.0

    def test_dense_limit_enforced(self):
        rng = np.random.default_rng(8)
        cloud = PointCloud(points=rng.standard_normal((4097, 2)))
        with pytest.raises(ValueError, match="truncation_tau"):
            build_weights(cloud, KernelConfig(epsilon=1.0))

    def test_build_is_deterministic(self):
        cloud = random_cloud(90, 3, 9)
        w1 = build_weights(cloud, KernelConfig(epsilon=0.6)).entries
        w2 = build_weights(cloud, KernelConfig(epsilon=0.6)).entries
        assert np.array_equal(w1, w2)


class TestDegrees:
    def test_coincident_points(self):
        cloud = PointCloud(points=[[1.0, 2.0]] * 3)
        d = degrees(build_weights(cloud, KernelConfig(epsilon=0.5)))
        np.testing.assert_array_equal(d, [3.0, 3.0, 3.0])

    def test_worked_example_degree(self):
        w = build_weights(PointCloud(points=WORKED_POINTS), KernelConfig(epsilon=1.0))
        d = degrees(w)
        expected = 1.0 + math.exp(-0.5) + math.exp(-2.0)
        assert d[0] == pytest.approx(expected, rel=1e-15)
        assert d[0] == pytest.approx(1.7418660, abs=1e-7)

    def test_kernel_decay_to_isolated(self):
        eps = 0.01
        pts = [[0.0], [math.sqrt(200.0 * eps)]]
        d = degrees(build_weights(PointCloud(points=pts), KernelConfig(epsilon=eps)))
        # 1 + exp(-100) rounds to exactly 1.0 in float64
        np.testing.assert_array_equal(d, [1.0, 1.0])

    def test_row_sum_consistency_and_bounds(self):
        cloud = random_cloud(180, 3, 10)
        w = build_weights(cloud, KernelConfig(epsilon=0.7))
        d = degrees(w)
        explicit = np.array([w.entries[i].sum() for i in range(180)])
        assert np.abs(d - explicit).max() <= 1e-12 * 180
        assert (d >= 1.0).all() and (d <= 180.0).all()
        assert (d >= w.entries.diagonal()).all()

    def test_sparse_degrees_match_dense(self):
        cloud = random_cloud(100, 3, 11)
        dd = degrees(build_weights(cloud, KernelConfig(epsilon=2.0)))
        ds = degrees(build_weights(cloud, KernelConfig(epsilon=2.0, truncation_tau=1e-13)))
        assert np.abs(dd - ds).max() <= 1e-12 * 100


class TestDegreesFromCloud:
    @pytest.mark.parametrize("tau", [0.0, 1e-8, 1e-4])
    def test_matches_materialized_route(self, tau):
        cloud = random_cloud(230, 3, 12)
        kernel = KernelConfig(epsilon=0.5, truncation_tau=tau)
        d_direct = degrees_from_cloud(cloud, kernel)
        d_route = degrees(build_weights(cloud, kernel))
        assert np.abs(d_direct - d_route).max() <= 1e-12 * 230

    def test_handles_blocking_boundaries(self):
        # force several blocks by using a cloud larger than one block row
        cloud = random_cloud(1201, 2, 13)
        kernel = KernelConfig(epsilon=0.2, truncation_tau=1e-6)
        d_direct = degrees_from_cloud(cloud, kernel)
        d_route = degrees(build_weights(cloud, kernel))
        assert np.abs(d_direct - d_route).max() <= 1e-12 * 1201
