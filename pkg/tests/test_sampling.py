"""Collocation, boundary, holdout and data-subset generation."""

import numpy as np
import pytest

from nnpde import problems as pb
from nnpde.errors import ConfigurationError
from nnpde.sampling import (
    box_surface,
    box_volume,
    data_subset,
    holdout_grid,
    sample_boundary,
    sample_interior,
)


class TestInterior:
    def test_1d_grid_three_points(self):
        ps = sample_interior([0.0], [1.0], 3, "uniform_grid", 0)
        assert np.allclose(ps.points[:, 0], [0.25, 0.5, 0.75], atol=1e-15)

    def test_2d_grid_tensor_product(self):
        # ceil(sqrt(4)) = 2 points per axis on the open grid j/(k+1)
        ps = sample_interior([0.0, 0.0], [1.0, 1.0], 4, "uniform_grid", 0)
        assert len(ps) == 4
        axis_vals = np.unique(ps.points[:, 0])
        assert np.allclose(axis_vals, [1 / 3, 2 / 3], atol=1e-15)

    def test_points_strictly_inside(self):
        for strategy in ("uniform_grid", "monte_carlo"):
            ps = sample_interior([0.0, -1.0], [1.0, 2.0], 100, strategy, 3)
            assert np.all(ps.points > [0.0, -1.0]) and np.all(ps.points < [1.0, 2.0])

    def test_monte_carlo_mean(self):
        ps = sample_interior([0.0, 0.0], [1.0, 1.0], 1000, "monte_carlo", 7)
        assert np.all(np.abs(ps.points.mean(axis=0) - 0.5) < 0.05)

    def test_volume_factor(self):
        ps = sample_interior([0.0, 0.0], [2.0, 3.0], 500, "monte_carlo", 1)
        assert ps.weight * len(ps) == pytest.approx(6.0, abs=1e-12)

    def test_determinism_bitwise(self):
        a = sample_interior([0.0], [1.0], 777, "monte_carlo", 42)
        b = sample_interior([0.0], [1.0], 777, "monte_carlo", 42)
        assert a.points.tobytes() == b.points.tobytes()

    def test_degenerate_grid_suggests_monte_carlo(self):
        with pytest.raises(ConfigurationError, match="monte_carlo"):
            sample_interior([0.0] * 3, [1.0] * 3, 1, "uniform_grid", 0)

    def test_unknown_strategy(self):
        with pytest.raises(ConfigurationError):
            sample_interior([0.0], [1.0], 5, "sobol", 0)


class TestBoundary:
    def test_1d_endpoints(self):
        ps = sample_boundary([0.0], [1.0], 2, 0)
        assert sorted(ps.points[:, 0]) == [0.0, 1.0]

    def test_2d_even_split(self):
        ps = sample_boundary([0.0, 0.0], [1.0, 1.0], 8, 0)
        on_face = [
            np.sum(ps.points[:, axis] == val)
            for axis in range(2)
            for val in (0.0, 1.0)
        ]
        assert on_face == [2, 2, 2, 2]

    def test_face_equation_exact(self):
        ps = sample_boundary([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 30, 5)
        for p in ps.points:
            assert np.any((p == 0.0) | (p == 1.0))

    def test_minimum_count(self):
        with pytest.raises(ConfigurationError):
            sample_boundary([0.0, 0.0], [1.0, 1.0], 3, 0)

    def test_area_factor(self):
        ps = sample_boundary([0.0, 0.0], [1.0, 2.0], 12, 0)
        assert ps.weight * len(ps) == pytest.approx(box_surface([0, 0], [1, 2]), abs=1e-12)


class TestHoldout:
    def test_1d_size_and_quadrature(self):
        ps = holdout_grid([0.0], [1.0])
        assert len(ps) == 1001
        assert ps.quad.sum() == pytest.approx(1.0, abs=1e-12)

    def test_2d_size(self):
        ps = holdout_grid([0.0, 0.0], [1.0, 1.0])
        assert len(ps) == 101**2
        assert ps.quad.sum() == pytest.approx(1.0, abs=1e-10)

    def test_high_dim_monte_carlo(self):
        ps = holdout_grid([0.0] * 4, [1.0] * 4)
        assert len(ps) == 4096
        assert ps.quad.sum() == pytest.approx(1.0, abs=1e-12)

    def test_trapezoid_integrates_sin_squared(self):
        ps = holdout_grid([0.0], [1.0])
        vals = np.sin(np.pi * ps.points[:, 0]) ** 2
        assert float(ps.quad @ vals) == pytest.approx(0.5, abs=1e-6)


class TestDataSubset:
    def test_leftmost_quarter(self):
        grid = holdout_grid([0.0], [1.0])
        exact = pb.exact_solution(pb.poisson(1))
        data = data_subset(grid, exact.evaluate, 0.25)
        assert len(data) == 250
        assert data.points[:, 0].max() < 0.25

    def test_labels_match_exact(self):
        grid = holdout_grid([0.0], [1.0])
        exact = pb.exact_solution(pb.infinite_well((2,)))
        data = data_subset(grid, exact.evaluate, 0.5)
        assert np.array_equal(data.labels, exact.evaluate(data.points))

    def test_empty_subset_rejected(self):
        grid = sample_interior([0.0], [1.0], 3, "uniform_grid", 0)
        with pytest.raises(ConfigurationError):
            data_subset(grid, lambda X: X[:, 0], 0.1)

    def test_lexicographic_order_2d(self):
        grid = holdout_grid([0.0, 0.0], [1.0, 1.0])
        exact = pb.exact_solution(pb.poisson(2))
        data = data_subset(grid, exact.evaluate, 0.25)
        # the first quarter in lexicographic order fills the low-x1 band
        assert data.points[:, 0].max() <= 0.25 + 1e-12


def test_box_helpers():
    assert box_volume([0, 0], [2, 3]) == 6.0
    assert box_surface([0, 0], [1, 1]) == 4.0
    assert box_surface([0], [5]) == 2.0
