import math

import numpy as np
import pytest

from mcfsing.errors import HypothesisNotVerified, InjectivityFailure
from mcfsing.planes import TimeSlicePlane
from mcfsing.reifenberg import (
    DELTA_BILIPSCHITZ_MAX,
    PlaneAssignment,
    best_plane_defect,
    extract_bilipschitz_graph,
    extract_lipschitz_graph_fregular,
    f_regularity_profile,
    plane_defects,
    strong_reifenberg_profile,
    time_slice_test,
    two_holder_fit,
)
from mcfsing.spacetime import PointCloud, SpaceTimePoint, ph_measure_estimate
from mcfsing.synthetic import GeneratorSpec, generate


def pt(x, t=0.0):
    return SpaceTimePoint(np.asarray(x, float), t)


def horizontal_lines(cloud):
    """Time-slice lines along e_x at every point."""
    e = np.zeros((1, cloud.ambient_dim))
    e[0, 0] = 1.0
    return PlaneAssignment.constant_directions(cloud, e)


def brute_force_delta(cloud, assignment, r):
    """Independent double-loop defect oracle."""
    worst = 0.0
    for i in range(len(cloud)):
        V = assignment[i]
        for j in range(len(cloud)):
            dx = np.linalg.norm(cloud.xs[j] - cloud.xs[i])
            dts = math.sqrt(abs(cloud.ts[j] - cloud.ts[i]))
            if max(dx, dts) >= r:
                continue
            d = max(V.spatial_distance(cloud.xs[j]), dts)
            worst = max(worst, d / r)
    return worst


class TestStrongReifenbergProfile:
    def test_plane_samples_zero_defect(self):
        g = np.linspace(-1, 1, 15)
        gx, gy = np.meshgrid(g, g)
        xs = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
        cloud = PointCloud(xs, np.zeros(len(xs)))
        A = PlaneAssignment.constant_directions(
            cloud, [[1, 0, 0], [0, 1, 0]])
        prof = strong_reifenberg_profile(cloud, A, [1.5, 1.0, 0.7])
        assert prof.max_delta() == 0.0
        assert prof.vanishing

    def test_tilted_line_has_uniform_obstruction(self):
        cloud = generate(GeneratorSpec("tilted_line",
                                       {"slope": 1.0, "count": 2000}))
        A = horizontal_lines(cloud)
        scales = np.geomspace(1.0, 0.12, 6)
        prof = strong_reifenberg_profile(cloud, A, scales)
        assert np.min(prof.deltas) >= 0.3
        assert not prof.vanishing

    def test_figure1_vanishes_and_matches_oracle(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 200}))
        A = horizontal_lines(cloud)
        scales = np.geomspace(0.5, 3e-5, 8)
        prof = strong_reifenberg_profile(cloud, A, scales, floor=0.0)
        for r, d in zip(prof.scales, prof.deltas):
            assert d == pytest.approx(brute_force_delta(cloud, A, r),
                                      abs=1e-12)
        # the defect decays like r^(1/4); check the trend, not a rate
        assert prof.deltas[-1] < 0.2
        assert prof.deltas[-1] < 0.3 * prof.deltas[0]
        assert prof.vanishing

    def test_dilation_covariance_exact(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 30}))
        A = horizontal_lines(cloud)
        lam = 4.0
        scaled = PointCloud(lam * cloud.xs, lam * lam * cloud.ts)
        As = horizontal_lines(scaled)
        for r in (0.25, 0.1):
            d1 = plane_defects(cloud, A, r)
            d2 = plane_defects(scaled, As, lam * r)
            assert d1 == pytest.approx(d2, rel=1e-12)

    def test_scale_below_floor_rejected(self):
        cloud = generate(GeneratorSpec("tilted_line",
                                       {"slope": 1.0, "count": 50}))
        A = horizontal_lines(cloud)
        with pytest.raises(ValueError):
            strong_reifenberg_profile(cloud, A, [1e-6])


class TestBestPlaneSearch:
    def test_four_points_strong2_holds_with_eps(self):
        eps = 0.1
        cloud = generate(GeneratorSpec("four_points", {"eps": eps}))
        scales = np.geomspace(2.0, 1.5 * eps, 8)
        worst = max(best_plane_defect(cloud, i, 2, scales, ngrid=600)[0]
                    for i in range(4))
        assert worst <= eps + 1e-9

    def test_four_points_strong1_fails_at_scale_2(self):
        eps = 0.1
        cloud = generate(GeneratorSpec("four_points", {"eps": eps}))
        scales = np.geomspace(2.0, 1.5 * eps, 8)
        worst = max(best_plane_defect(cloud, i, 1, scales, ngrid=600)[0]
                    for i in range(4))
        assert worst > 0.2  # far above delta = eps: no single line works


class TestFRegularity:
    def test_constant_assignment_is_zero(self):
        xs = np.stack([np.linspace(0, 1, 40), np.zeros(40)], axis=1)
        cloud = PointCloud(xs, np.zeros(40))
        A = PlaneAssignment.constant_directions(cloud, [[1.0, 0.0]])
        reg = f_regularity_profile(cloud, A)
        assert np.max(reg.envelope) == pytest.approx(0.0, abs=1e-12)

    def test_four_points_orthogonal_planes(self):
        cloud = generate(GeneratorSpec("four_points", {"eps": 0.1}))
        planes = [
            TimeSlicePlane.from_spanning(cloud.point(0),
                                         [[1, 0, 0], [0, 1, 0]]),
            TimeSlicePlane.from_spanning(cloud.point(1),
                                         [[1, 0, 0], [0, 0, 1]]),
            TimeSlicePlane.from_spanning(cloud.point(2),
                                         [[1, 0, 0], [0, 1, 0]]),
            TimeSlicePlane.from_spanning(cloud.point(3),
                                         [[1, 0, 0], [0, 0, 1]]),
        ]
        A = PlaneAssignment(cloud, planes)
        reg = f_regularity_profile(cloud, A, nbins=6)
        # the two plane families are orthogonal at pair distance about 1
        assert reg.value_at(1.0) == pytest.approx(1.0, abs=0.05)

    def test_tangent_lines_on_smooth_curve_vanish(self):
        x = np.linspace(-1, 1, 120)
        xs = np.stack([x, 0.1 * x ** 2], axis=1)
        cloud = PointCloud(xs, np.zeros(len(x)))
        planes = [TimeSlicePlane.from_spanning(
            cloud.point(i), [[1.0, 0.2 * x[i]]]) for i in range(len(x))]
        A = PlaneAssignment(cloud, planes)
        reg = f_regularity_profile(cloud, A, nbins=8)
        # f(r) = O(r): small bins well below large bins
        assert reg.envelope[0] < 0.05
        assert reg.envelope[0] < reg.envelope[-1] + 1e-12


class TestBiLipschitzExtraction:
    def test_plane_samples_constant_one(self):
        g = np.linspace(-1, 1, 21)
        xs = np.stack([g, np.zeros(21)], axis=1)
        cloud = PointCloud(xs, np.zeros(21))
        V = TimeSlicePlane.from_spanning(pt([0, 0]), [[1.0, 0.0]])
        res = extract_bilipschitz_graph(cloud, 10, V, 1.0 / 20.0, 1.0)
        assert res.constant == pytest.approx(1.0)
        assert np.max(np.abs(res.dts)) == 0.0

    def test_shallow_graph_constant_near_one(self):
        eps = 0.02
        x = np.linspace(-1, 1, 201)
        xs = np.stack([x, eps * x ** 2], axis=1)
        cloud = PointCloud(xs, np.zeros(len(x)))
        V = TimeSlicePlane.from_spanning(pt([0, 0]), [[1.0, 0.0]])
        res = extract_bilipschitz_graph(cloud, 100, V, 1.0 / 20.0, 1.0)
        # oracle: brute force the pairwise slope bound for the graph map
        assert res.constant <= 1.0 + 5 * eps
        assert res.constant_normal <= 2 * eps * 1.0 + 1e-9

    def test_four_points_single_plane_rejected(self):
        cloud = generate(GeneratorSpec("four_points", {"eps": 0.1}))
        V = TimeSlicePlane.from_spanning(cloud.point(0),
                                         [[1, 0, 0], [0, 1, 0]])
        with pytest.raises(HypothesisNotVerified):
            extract_bilipschitz_graph(cloud, 0, V, 1.0 / 20.0, 2.0)

    def test_delta_above_threshold_rejected(self):
        cloud = generate(GeneratorSpec("four_points", {"eps": 0.1}))
        V = TimeSlicePlane.from_spanning(cloud.point(0),
                                         [[1, 0, 0], [0, 1, 0]])
        with pytest.raises(HypothesisNotVerified):
            extract_bilipschitz_graph(cloud, 0, V, 0.2, 2.0)

    def test_proof_inequalities_single_constant(self):
        # f-regular synthetic set: tangent lines on a shallow slice curve
        x = np.linspace(-1, 1, 151)
        xs = np.stack([x, 0.02 * x ** 2], axis=1)
        cloud = PointCloud(xs, np.zeros(len(x)))
        planes = [TimeSlicePlane.from_spanning(
            cloud.point(i), [[1.0, 0.04 * x[i]]]) for i in range(len(x))]
        A = PlaneAssignment(cloud, planes)
        res = extract_lipschitz_graph_fregular(cloud, A, 75,
                                               delta=DELTA_BILIPSCHITZ_MAX)
        C = res.constant
        assert np.isfinite(C)
        tang, dts, normals = res.tangential, res.dts, res.normals
        for a in range(len(res.indices)):
            for b in range(a + 1, len(res.indices)):
                dpi = np.linalg.norm(tang[a] - tang[b])
                assert math.sqrt(abs(dts[a] - dts[b])) <= C * dpi + 1e-12
                assert np.linalg.norm(normals[a] - normals[b]) \
                    <= C * dpi + 1e-12


class TestFRegularExtraction:
    def test_smooth_slice_curve_succeeds(self):
        x = np.linspace(-1, 1, 201)
        xs = np.stack([x, 0.02 * x ** 2], axis=1)
        cloud = PointCloud(xs, np.zeros(len(x)))
        planes = [TimeSlicePlane.from_spanning(
            cloud.point(i), [[1.0, 0.04 * x[i]]]) for i in range(len(x))]
        A = PlaneAssignment(cloud, planes)
        res = extract_lipschitz_graph_fregular(cloud, A, 100)
        assert res.constant < 1.2

    def test_tilted_line_rejected(self):
        cloud = generate(GeneratorSpec("tilted_line",
                                       {"slope": 1.0, "count": 300}))
        A = horizontal_lines(cloud)
        with pytest.raises(HypothesisNotVerified):
            extract_lipschitz_graph_fregular(cloud, A, 150)

    def test_one_sequence_window_succeeds(self):
        eps = 0.1
        cloud = generate(GeneratorSpec("three_sequences",
                                       {"eps": eps, "count": 6}))
        # the pure e_x sub-sequence: a window where one sequence dominates
        keep = [0] + [1 + 3 * m for m in range(6)]
        sub = PointCloud(cloud.xs[keep], cloud.ts[keep])
        A = PlaneAssignment.constant_directions(sub, [[1.0, 0.0, 0.0]])
        res = extract_lipschitz_graph_fregular(sub, A, 0)
        assert res.constant == pytest.approx(1.0)


class TestTwoHolder:
    def test_slice_subset_zero(self):
        cloud = generate(GeneratorSpec("slice_disk", {"per_axis": 9}))
        fit = two_holder_fit(cloud)
        assert fit.constant == 0.0
        assert fit.vanishing

    def test_figure1_exact_constant(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 40}))
        fit = two_holder_fit(cloud)
        assert fit.constant == pytest.approx(3.75)  # pair k=1, m=2
        assert fit.vanishing
        assert fit.parabolic_lipschitz == pytest.approx(math.sqrt(3.75))

    def test_tilted_line_not_vanishing(self):
        cloud = generate(GeneratorSpec("tilted_line",
                                       {"slope": 1.0, "count": 201}))
        fit = two_holder_fit(cloud)
        spacing = 2.0 / 200
        assert fit.constant >= 0.5 / spacing
        assert not fit.vanishing

    def test_duplicate_x_goes_multivalued(self):
        xs = np.array([[0.0], [1.0], [0.0], [1.0]])
        ts = np.array([0.0, 0.0, 1.0, 1.0])
        fit = two_holder_fit(PointCloud(xs, ts))
        assert fit.multivalued
        assert len(fit.branches) == 2
        for _, branch in fit.branches:
            assert branch.constant == 0.0

    def test_parabolic_lipschitz_invariant(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 30}))
        fit = two_holder_fit(cloud)
        L = fit.parabolic_lipschitz
        for i in range(len(cloud)):
            for j in range(i + 1, len(cloud)):
                dx = abs(cloud.xs[i, 0] - cloud.xs[j, 0])
                dp = max(dx, math.sqrt(abs(cloud.ts[i] - cloud.ts[j])))
                assert dp <= L * dx + 1e-12


class TestTimeSlice:
    def test_slice_disk_verdict(self):
        cloud = generate(GeneratorSpec("slice_disk", {"per_axis": 11}))
        rep = time_slice_test(cloud)
        assert rep.verdicts[0]
        assert rep.component_spreads[0] == 0.0

    def test_figure1_h1_bound_shrinks(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 120}))
        rep = time_slice_test(cloud)
        assert rep.h1_bounds[0] <= 0.2 * np.max(rep.h1_bounds) + 1e-12
        # many distinct times: single component is not a time-slice
        assert not rep.verdicts[0]

    def test_unverified_hypotheses_rejected(self):
        cloud = generate(GeneratorSpec("tilted_line",
                                       {"slope": 1.0, "count": 101}))
        with pytest.raises(HypothesisNotVerified):
            time_slice_test(cloud)


class TestMeasureSandwich:
    def test_graph_measure_between_spatial_bounds(self):
        # two slabs at different times: a vanishing-constant 2-Hoelder graph
        x = np.concatenate([np.linspace(0, 1, 60),
                            np.linspace(2, 3, 60)])
        ts = np.concatenate([np.zeros(60), 0.5 * np.ones(60)])
        cloud = PointCloud(x[:, None], ts)
        fit = two_holder_fit(cloud)
        scales = list(np.geomspace(0.2, 0.05, 4))
        para = ph_measure_estimate(cloud, 1, scales).sums()
        flat = ph_measure_estimate(PointCloud(x[:, None], np.zeros_like(ts)),
                                   1, scales).sums()
        cprime = max(1.0, math.sqrt(max(fit.constant, 1.0)))
        assert np.all(para >= flat / 1.1)
        assert np.all(para <= cprime * flat * 1.1)
