import numpy as np
import pytest

from mcfsing.cone import (
    ConeProfile,
    ParabolicCone,
    cone_constant,
    cone_graph_extract,
    cone_profile,
    cone_time_slice_test,
    half_cone_check,
    ph2_bounded_proxy,
)
from mcfsing.errors import HypothesisNotVerified, InjectivityFailure
from mcfsing.spacetime import PointCloud, SpaceTimePoint
from mcfsing.synthetic import GeneratorSpec, generate


def brute_force_gamma(cloud, r0):
    worst = 0.0
    for i in range(len(cloud)):
        for j in range(i + 1, len(cloud)):
            dx2 = float(np.sum((cloud.xs[i] - cloud.xs[j]) ** 2))
            dt = abs(cloud.ts[i] - cloud.ts[j])
            if max(dx2, dt) > r0 * r0:
                continue
            if dx2 == 0.0:
                if dt > 0.0:
                    return float("inf")
                continue
            worst = max(worst, dt / dx2)
    return worst


class TestConeConstant:
    def test_slice_set_zero(self):
        cloud = generate(GeneratorSpec("slice_disk", {"per_axis": 7}))
        assert cone_constant(cloud, 1.0) == 0.0

    def test_figure1_matches_brute_force(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 200}))
        for r0 in (2.0, 0.5, 0.05):
            assert cone_constant(cloud, r0) == pytest.approx(
                brute_force_gamma(cloud, r0), rel=1e-12)

    def test_figure1_global_value(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 40}))
        assert cone_constant(cloud, 2.0) == pytest.approx(3.75)

    def test_line_constant_grows_with_resolution(self):
        for count in (101, 401):
            cloud = generate(GeneratorSpec("tilted_line",
                                           {"slope": 1.0, "count": count}))
            h = 2.0 / (count - 1)
            assert cone_constant(cloud, 1.0) >= 0.5 / h

    def test_duplicate_x_infinite(self):
        cloud = generate(GeneratorSpec("parabolic_cone_boundary",
                                       {"count": 30}))
        assert cone_constant(cloud, 2.0) == np.inf

    def test_no_pairs_in_scale(self):
        cloud = PointCloud([[0.0], [10.0]], [0.0, 0.0])
        with pytest.raises(ValueError):
            cone_constant(cloud, 0.5)


class TestConeProfile:
    def test_monotone_in_scale(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 100}))
        prof = cone_profile(cloud, np.geomspace(0.001, 2.0, 10))
        assert np.all(np.diff(prof.gammas) >= -1e-15)

    def test_dilation_invariance_exact(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 50}))
        lam = 3.0
        scaled = PointCloud(lam * cloud.xs, lam * lam * cloud.ts)
        g1 = cone_constant(cloud, 0.4)
        g2 = cone_constant(scaled, lam * 0.4)
        assert g1 == pytest.approx(g2, rel=1e-12)

    def test_figure1_vanishing(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 200}))
        prof = cone_profile(cloud, np.geomspace(1e-4, 2.0, 8))
        assert prof.vanishing

    def test_reifenberg_vanishing_implies_cone_vanishing(self):
        # consistency between the two smallness notions
        cloud = generate(GeneratorSpec("figure1", {"count": 150}))
        prof = cone_profile(cloud, np.geomspace(1e-4, 1.0, 6))
        assert prof.vanishing
        assert prof.gammas[0] <= prof.gammas[-1]


class TestHalfCone:
    def test_slice_gamma_zero(self):
        cloud = generate(GeneratorSpec("slice_disk", {"per_axis": 5}))
        res = half_cone_check(cloud, 0.0, 1.0, "forward")
        assert res.ok and res.level == 0.0

    def test_sufficient_gamma_both_directions(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 60}))
        g = cone_constant(cloud, 1.0)
        for direction in ("forward", "backward"):
            assert half_cone_check(cloud, g, 1.0, direction).ok

    def test_equivalence_campaign(self):
        rng = np.random.default_rng(42)
        for _ in range(120):
            n = int(rng.integers(5, 40))
            dim = int(rng.integers(1, 4))
            xs = rng.normal(size=(n, dim))
            ts = rng.normal(size=n) * rng.uniform(0.01, 1.0)
            cloud = PointCloud(xs, ts)
            r0 = float(rng.uniform(0.5, 3.0))
            try:
                full = cone_constant(cloud, r0)
            except ValueError:
                continue
            fwd = half_cone_check(cloud, np.inf, r0, "forward").level
            bwd = half_cone_check(cloud, np.inf, r0, "backward").level
            assert fwd == full
            assert bwd == full

    def test_witnesses_reported(self):
        cloud = PointCloud([[0.0], [0.5]], [0.0, 0.2])
        res = half_cone_check(cloud, 0.1, 1.0, "forward")
        assert not res.ok
        assert res.witnesses == [(0, 1)]


class TestConeGraph:
    def test_slice_constant_graph(self):
        cloud = generate(GeneratorSpec("slice_disk", {"per_axis": 5}))
        graph = cone_graph_extract(cloud, 0.0, 1.0)
        assert np.all(graph.values == 0.0)

    def test_figure1_graph_values(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 50}))
        g = cone_constant(cloud, 2.0)
        graph = cone_graph_extract(cloud, g, 2.0)
        assert graph.values == pytest.approx(cloud.ts)
        assert graph.constant == pytest.approx(3.75)
        # certified bound holds on every pair
        for i in range(len(cloud)):
            dx2 = (cloud.xs[:, 0] - cloud.xs[i, 0]) ** 2
            dt = np.abs(cloud.ts - cloud.ts[i])
            assert np.all(dt <= graph.constant * dx2 + 1e-12)

    def test_failed_cone_property_rejected(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 50}))
        with pytest.raises(HypothesisNotVerified):
            cone_graph_extract(cloud, 0.5, 2.0)

    def test_distant_duplicate_aborts_with_witnesses(self):
        xs = np.array([[0.0], [0.3], [0.0]])
        ts = np.array([0.0, 0.01, 100.0])
        cloud = PointCloud(xs, ts)
        with pytest.raises(InjectivityFailure) as exc:
            cone_graph_extract(cloud, 1.0, 1.0)
        assert exc.value.witnesses


class TestConeTimeSlice:
    def test_slice_set_passes(self):
        cloud = generate(GeneratorSpec("slice_disk", {"per_axis": 9}))
        rep = cone_time_slice_test(cloud, np.geomspace(0.1, 1.0, 4))
        assert rep.verdicts[0]

    def test_tilted_line_rejected(self):
        cloud = generate(GeneratorSpec("tilted_line",
                                       {"slope": 1.0, "count": 151}))
        with pytest.raises(HypothesisNotVerified):
            cone_time_slice_test(cloud, np.geomspace(0.05, 1.0, 4))

    def test_ph2_proxy_accepts_tame_sets(self):
        cloud = generate(GeneratorSpec("slice_disk", {"per_axis": 15}))
        assert ph2_bounded_proxy(cloud)


class TestParabolicCone:
    def test_contains(self):
        cone = ParabolicCone(SpaceTimePoint(np.zeros(2), 0.0), 1.0)
        assert cone.contains(SpaceTimePoint(np.array([1.0, 0.0]), 0.5))
        assert not cone.contains(SpaceTimePoint(np.array([0.5, 0.0]), 0.5))

    def test_vertex_aperture_of_cone_boundary(self):
        cloud = generate(GeneratorSpec("parabolic_cone_boundary"))
        dx2 = np.sum(cloud.xs ** 2, axis=1)
        keep = dx2 > 0
        assert np.max(np.abs(cloud.ts[keep]) / dx2[keep]) == pytest.approx(1.0)

    def test_negative_aperture_rejected(self):
        with pytest.raises(ValueError):
            ParabolicCone(SpaceTimePoint(np.zeros(1), 0.0), -0.1)
