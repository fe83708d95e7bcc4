import numpy as np
import pytest

from mcfsing.synthetic import GeneratorSpec, generate, ground_truth


class TestGenerators:
    def test_figure1_values(self):
        cloud = generate(GeneratorSpec("figure1", {"count": 5}))
        assert len(cloud) == 6
        assert cloud.xs[:, 0] == pytest.approx(
            [1, 1 / 2, 1 / 3, 1 / 4, 1 / 5, 0])
        assert cloud.ts == pytest.approx(
            [1, 1 / 16, 1 / 81, 1 / 256, 1 / 625, 0])

    def test_four_points(self):
        cloud = generate(GeneratorSpec("four_points", {"eps": 0.1}))
        assert cloud.ambient_dim == 3
        assert np.all(cloud.ts == 0.0)
        assert cloud.xs.tolist() == [[0, 0, 0], [1, 0, 0],
                                     [0, 0.1, 0], [1, 0, 0.1]]

    def test_koch_level0(self):
        cloud = generate(GeneratorSpec("koch", {"level": 0}))
        assert len(cloud) == 2
        assert np.all(cloud.ts == 0.0)

    def test_koch_counts(self):
        cloud = generate(GeneratorSpec("koch", {"level": 3}))
        assert len(cloud) == 4 ** 3 + 1

    def test_tilted_line_semantics(self):
        cloud = generate(GeneratorSpec("tilted_line",
                                       {"slope": 2.0, "count": 11}))
        assert cloud.ts == pytest.approx(2.0 * cloud.xs[:, 0])

    def test_cone_boundary_on_cone(self):
        cloud = generate(GeneratorSpec("parabolic_cone_boundary"))
        assert np.abs(cloud.ts) == pytest.approx(cloud.xs[:, 0] ** 2)

    def test_three_sequences_structure(self):
        cloud = generate(GeneratorSpec("three_sequences",
                                       {"eps": 0.1, "count": 3}))
        assert len(cloud) == 10
        assert np.all(cloud.ts == 0.0)

    def test_deterministic(self):
        spec = GeneratorSpec("koch", {"level": 4})
        a, b = generate(spec), generate(spec)
        assert np.array_equal(a.xs, b.xs) and np.array_equal(a.ts, b.ts)

    def test_invalid_kind(self):
        with pytest.raises(ValueError):
            GeneratorSpec("nonsense")

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            generate(GeneratorSpec("four_points", {"eps": 1.5}))
        with pytest.raises(ValueError):
            generate(GeneratorSpec("koch", {"level": -1}))


class TestGroundTruth:
    def test_four_points_verdicts(self):
        gt = ground_truth(GeneratorSpec("four_points", {"eps": 0.1}))
        assert gt["strong_2_reifenberg"]["holds"]
        assert not gt["strong_1_reifenberg_scale_2"]["holds"]
        assert not gt["full_2_reifenberg"]["holds"]

    def test_figure1_constant_is_brute_forced(self):
        gt = ground_truth(GeneratorSpec("figure1", {"count": 40}))
        # achieved at consecutive k = 1, 2: (1 - 1/16) / (1/2)^2
        assert gt["two_holder_graph"]["constant"] == pytest.approx(3.75)

    def test_tilted_line(self):
        assert not ground_truth(GeneratorSpec(
            "tilted_line", {"slope": 0.5}))["slice_1_reifenberg"]["holds"]
        assert ground_truth(GeneratorSpec(
            "tilted_line", {"slope": 0.0}))["slice_1_reifenberg"]["holds"]

    def test_koch_dimension(self):
        gt = ground_truth(GeneratorSpec("koch"))
        assert gt["dimension"]["value"] == pytest.approx(1.26185, abs=1e-4)
