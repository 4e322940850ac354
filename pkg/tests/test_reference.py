"""Finite-difference eigensolver, quadrature, and alignment utilities."""

import numpy as np
import pytest

from nnpde import problems as pb
from nnpde import reference as ref
from nnpde.errors import DegenerateStateError, MetricError
from nnpde.sampling import holdout_grid


class TestFdmEigensolve:
    def test_ipw_matches_discrete_dispersion(self):
        # V = 0 on (0,1): the discrete eigenvalue is (2/h^2) sin^2(pi h / 2)
        grid = ref.FdmGrid(0.0, 1.0, 999)
        pairs = ref.fdm_eigensolve(grid, lambda x: np.zeros_like(x), 1)
        h = grid.h
        discrete = 2.0 / h**2 * np.sin(np.pi * h / 2.0) ** 2
        assert pairs[0].energy == pytest.approx(discrete, rel=1e-10)
        assert pairs[0].energy == pytest.approx(np.pi**2 / 2, abs=1e-4)

    def test_qho_low_states(self):
        grid = ref.FdmGrid.symmetric(6.0, 1200)
        pairs = ref.fdm_eigensolve(grid, lambda x: 0.5 * x**2, 4)
        assert pairs[0].energy == pytest.approx(0.5, abs=1e-4)
        assert pairs[3].energy == pytest.approx(3.5, abs=1e-3)

    def test_states_normalized_and_ordered(self):
        grid = ref.FdmGrid.symmetric(6.0, 800)
        pairs = ref.fdm_eigensolve(grid, lambda x: 0.5 * x**2, 3)
        energies = [p.energy for p in pairs]
        assert energies == sorted(energies)
        for p in pairs:
            assert grid.h * np.dot(p.state, p.state) == pytest.approx(1.0, abs=1e-12)

    def test_ground_state_even(self):
        grid = ref.FdmGrid.symmetric(6.0, 801)
        pairs = ref.fdm_eigensolve(grid, lambda x: 0.5 * x**2, 1)
        s = pairs[0].state
        assert np.max(np.abs(s - s[::-1])) < 1e-8

    def test_eigenpair_residual(self):
        grid = ref.FdmGrid.symmetric(6.0, 600)
        pot = lambda x: 0.5 * x**2
        for pair in ref.fdm_eigensolve(grid, pot, 3):
            assert ref.eig_residual(grid, pot, pair) < 1e-8

    def test_convergence_order_two(self):
        # halving h reduces the energy error about 4x
        exact = np.pi**2 / 2
        errs = []
        for n in (250, 500, 1000):
            grid = ref.FdmGrid(0.0, 1.0, n - 1)  # h = 1/n
            e = ref.fdm_eigensolve(grid, lambda x: np.zeros_like(x), 1)[0].energy
            errs.append(abs(e - exact))
        rate = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
        assert all(1.8 < r < 2.2 for r in rate)

    def test_too_many_states_rejected(self):
        grid = ref.FdmGrid(0.0, 1.0, 5)
        with pytest.raises(ValueError):
            ref.fdm_eigensolve(grid, lambda x: np.zeros_like(x), 10)


class TestIntegrate:
    def test_sin_squared(self):
        grid = holdout_grid([0.0], [1.0])
        val = ref.integrate(lambda X: np.sin(np.pi * X[:, 0]) ** 2, grid)
        assert val == pytest.approx(0.5, abs=1e-6)

    def test_constant_exact(self):
        grid = holdout_grid([0.0], [1.0])
        assert ref.integrate(np.ones(len(grid)), grid) == pytest.approx(1.0, abs=1e-13)

    def test_ipw_orthogonality(self):
        grid = holdout_grid([0.0], [1.0])
        p1 = pb.exact_solution(pb.infinite_well((1,))).evaluate(grid.points)
        p2 = pb.exact_solution(pb.infinite_well((2,))).evaluate(grid.points)
        assert abs(ref.integrate(p1 * p2, grid)) < 1e-10

    def test_fdm_grid_weighting(self):
        grid = ref.FdmGrid(0.0, 1.0, 999)
        val = ref.integrate(lambda X: np.sin(np.pi * X[:, 0]) ** 2, grid)
        assert val == pytest.approx(0.5, abs=1e-5)


class TestAlign:
    def setup_method(self):
        self.grid = holdout_grid([0.0], [1.0])
        self.exact = pb.exact_solution(pb.infinite_well((1,))).evaluate(self.grid.points)

    def rel(self, pred):
        return ref.relative_l2_values(pred, self.exact, self.grid.quad, align_first=True)

    def test_sign_flip_removed(self):
        assert self.rel(-self.exact) == pytest.approx(0.0, abs=1e-12)

    def test_scale_removed(self):
        assert self.rel(2.0 * self.exact) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_perturbation(self):
        other = pb.exact_solution(pb.infinite_well((2,))).evaluate(self.grid.points)
        pred = self.exact + 0.1 * other
        # after unit-rescaling: sqrt((1 - 1/sqrt(1.01))^2 + 0.01/1.01)
        expected = np.sqrt((1 - 1 / np.sqrt(1.01)) ** 2 + 0.01 / 1.01)
        assert self.rel(pred) == pytest.approx(expected, abs=1e-4)

    def test_degenerate_prediction_rejected(self):
        with pytest.raises(DegenerateStateError):
            self.rel(np.zeros_like(self.exact))

    def test_zero_reference_rejected(self):
        with pytest.raises(MetricError):
            ref.relative_l2_values(self.exact, np.zeros_like(self.exact), self.grid.quad, True)


class TestKhReference:
    def test_zero_quiver_matches_bare(self):
        spec = pb.kh_well(alpha0=0.0)
        grid = ref.FdmGrid.symmetric(40.0, 2000)
        avg = ref.fdm_eigensolve(grid, lambda x: pb.kh_cycle_average(spec, x), 2)
        bare = ref.fdm_eigensolve(grid, lambda x: pb.kh_bare_potential(spec, x), 2)
        for a, b in zip(avg, bare):
            assert abs(a.energy - b.energy) < 1e-12

    def test_reference_solution_interpolates(self):
        spec = pb.kh_well(alpha0=10.0)
        sol = ref.kh_reference_solution(spec)
        assert sol.energy is not None
        # normalized on the truncated domain
        grid = holdout_grid(*spec.domain())
        nrm = ref.integrate(sol.evaluate(grid.points) ** 2, grid)
        assert nrm == pytest.approx(1.0, abs=1e-4)

    def test_bare_well_binds_at_least_one_state(self):
        spec = pb.kh_well(alpha0=0.0)
        _, pairs = ref.kh_eigenpairs(spec, 1)
        assert pairs[0].energy < 0.0


def test_resolve_exact_dispatch():
    assert ref.resolve_exact(pb.poisson(2)).energy is None
    assert ref.resolve_exact(pb.infinite_well((1,))).energy == pytest.approx(np.pi**2 / 2)
    assert ref.resolve_exact(pb.kh_well(alpha0=10.0, state=1)).energy is not None
