import math

import numpy as np
import pytest

from mcfsing.errors import DimensionMismatch
from mcfsing.spacetime import (
    PointCloud,
    SpaceTimePoint,
    greedy_parabolic_cover,
    in_parabolic_ball,
    in_parabolic_tube,
    parabolic_ball_volume,
    parabolic_distance,
    ph_dimension_estimate,
    ph_measure_estimate,
)
from mcfsing.planes import TimeSlicePlane


def pt(x, t):
    return SpaceTimePoint(np.atleast_1d(np.asarray(x, float)), t)


class TestParabolicDistance:
    def test_pure_spatial(self):
        assert parabolic_distance(pt([0, 0], 0), pt([1, 0], 0)) == 1.0

    def test_pure_time(self):
        assert parabolic_distance(pt([0], 0), pt([0], 4.0)) == 2.0

    def test_max_of_both(self):
        assert parabolic_distance(pt([0], 0), pt([3], 4.0)) == 3.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            parabolic_distance(pt([0], 0), pt([0, 0], 0))

    def test_metric_axioms_campaign(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(3000, 3, 3))
        T = rng.normal(size=(3000, 3))
        for xs, ts in zip(X, T):
            p, q, w = (pt(xs[i], ts[i]) for i in range(3))
            dpq = parabolic_distance(p, q)
            assert dpq == parabolic_distance(q, p)
            assert dpq >= 0
            assert parabolic_distance(p, p) == 0
            assert dpq <= parabolic_distance(p, w) + parabolic_distance(w, q) + 1e-12

    def test_parabolic_scaling_covariance(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            x, y = rng.normal(size=(2, 4))
            s, t = rng.normal(size=2)
            lam = float(rng.uniform(0.1, 10.0))
            d1 = parabolic_distance(pt(lam * x, lam**2 * s),
                                    pt(lam * y, lam**2 * t))
            d2 = lam * parabolic_distance(pt(x, s), pt(y, t))
            assert d1 == pytest.approx(d2, rel=1e-12)


class TestBallsAndTubes:
    def test_inside(self):
        assert in_parabolic_ball(pt([0.5, 0], 0.5), pt([0, 0], 0), 1.0)

    def test_boundary_excluded(self):
        assert not in_parabolic_ball(pt([0, 0], 1.0), pt([0, 0], 0), 1.0)

    def test_tube_to_plane(self):
        plane = TimeSlicePlane.from_spanning(pt([0, 0], 0.0), [[1.0, 0.0]])
        p = pt([0, 0], 0.25)  # dist_P = sqrt(0.25) = 0.5
        assert in_parabolic_tube(p, plane, 0.6)
        assert not in_parabolic_tube(p, plane, 0.5)

    def test_tube_to_cloud(self):
        cloud = PointCloud([[0.0, 0.0], [1.0, 0.0]], [0.0, 0.0])
        assert in_parabolic_tube(pt([0.4, 0], 0.0), cloud, 0.5)
        assert not in_parabolic_tube(pt([0.5, 0.5], 0.0), cloud, 0.5)

    def test_nonpositive_radius(self):
        with pytest.raises(ValueError):
            in_parabolic_ball(pt([0], 0), pt([0], 0), 0.0)

    def test_volume_scaling(self):
        for dim in (2, 3, 4):
            v1 = parabolic_ball_volume(1.0, dim)
            for r in (0.3, 2.0, 5.5):
                assert parabolic_ball_volume(r, dim) == pytest.approx(
                    v1 * r ** (dim + 2), rel=1e-12)


def segment_cloud(m=2000):
    xs = np.linspace(0.0, 1.0, m)[:, None]
    return PointCloud(xs, np.zeros(m))


def euclidean_cover_count(xs, r):
    """Independent Euclidean greedy cover (test oracle)."""
    covered = np.zeros(len(xs), dtype=bool)
    count = 0
    for i in range(len(xs)):
        if covered[i]:
            continue
        count += 1
        covered |= np.linalg.norm(xs - xs[i], axis=1) <= r
    return count


class TestMeasure:
    def test_unit_segment_length(self):
        cloud = segment_cloud()
        scales = list(np.geomspace(0.1, 0.005, 6))
        est = ph_measure_estimate(cloud, 1, scales)
        assert est.sums()[-1] == pytest.approx(1.0, rel=0.10)

    def test_time_segment_k2(self):
        ts = np.linspace(0.0, 1.0, 4000)
        cloud = PointCloud(np.zeros((4000, 1)), ts)
        est = ph_measure_estimate(cloud, 2, list(np.geomspace(0.3, 0.05, 5)))
        assert np.all(est.sums() >= 0.4) and np.all(est.sums() <= 1.5)

    def test_single_point(self):
        cloud = PointCloud([[0.0]], [0.0])
        est = ph_measure_estimate(cloud, 1, [0.1, 0.01, 0.001])
        assert est.sums()[-1] == pytest.approx(0.0, abs=1e-3)

    def test_matches_euclidean_on_slice_sets(self):
        rng = np.random.default_rng(3)
        xs = rng.uniform(size=(500, 2))
        cloud = PointCloud(xs, np.zeros(500))
        for r in (0.2, 0.1, 0.05):
            par = len(greedy_parabolic_cover(cloud, r))
            euc = euclidean_cover_count(xs, r)
            assert abs(par - euc) <= 0.05 * euc

    def test_bad_scales(self):
        cloud = segment_cloud(10)
        with pytest.raises(ValueError):
            ph_measure_estimate(cloud, 1, [])
        with pytest.raises(ValueError):
            ph_measure_estimate(cloud, 1, [0.1, 0.2])

    def test_csv_shape(self):
        est = ph_measure_estimate(segment_cloud(100), 1, [0.2, 0.1])
        lines = est.to_csv().strip().splitlines()
        assert lines[0] == "scale,count,sum"
        assert len(lines) == 3


class TestDimension:
    def test_time_segment_is_two_dimensional(self):
        ts = np.linspace(0.0, 1.0, 6000)
        cloud = PointCloud(np.zeros((6000, 1)), ts)
        est = ph_dimension_estimate(
            cloud, scales=np.geomspace(0.45, 0.06, 10))
        assert est.value == pytest.approx(2.0, abs=0.2)

    def test_slice_disk_is_two_dimensional(self):
        g = np.linspace(-1, 1, 90)
        gx, gy = np.meshgrid(g, g)
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        pts = pts[np.linalg.norm(pts, axis=1) <= 1.0]
        cloud = PointCloud(pts, np.zeros(len(pts)))
        est = ph_dimension_estimate(
            cloud, scales=np.geomspace(0.3, 0.06, 9))
        assert est.value == pytest.approx(2.0, abs=0.2)

    def test_degenerate_fit_rejected(self):
        cloud = segment_cloud(50)
        with pytest.raises(ValueError):
            ph_dimension_estimate(cloud, scales=[0.5, 0.25], trim=0.0)


class TestCloudIO:
    def test_json_roundtrip(self):
        cloud = PointCloud([[0.0, 1.0], [2.0, 3.0]], [0.5, -1.0], [0, 1])
        back = PointCloud.from_json(cloud.to_json())
        assert np.array_equal(back.xs, cloud.xs)
        assert np.array_equal(back.ts, cloud.ts)
        assert np.array_equal(back.labels, cloud.labels)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((0, 2)), np.zeros(0))

    def test_mixed_dims_rejected(self):
        with pytest.raises(DimensionMismatch):
            PointCloud.from_points([pt([0], 0), pt([0, 0], 0)])
