"""Malthus estimators and the power-iteration eigensolver."""

import math
import warnings

import numpy as np
import pytest
import scipy.linalg

import gfv
from gfv.dynamics import Stepper, Trajectory
from gfv.errors import NumericsError
from gfv.operator import dense_matrix

from conftest import make_model


def synthetic_trajectory(rate, t_end=10.0, samples=200):
    times = np.linspace(t_end / samples, t_end, samples)
    cols = {"log_mass": rate * times}
    return Trajectory(times, cols)


class TestLambdaN:
    def test_exact_exponential(self):
        traj = synthetic_trajectory(2.0)
        assert gfv.estimate_lambda_n(traj) == pytest.approx(2.0, abs=1e-12)

    def test_window_is_second_half(self):
        # slope change outside [t/2, t] must not matter
        traj = synthetic_trajectory(3.0)
        early = traj.times < traj.times[-1] / 2
        traj.columns["log_mass"][early] += 5.0
        assert gfv.estimate_lambda_n(traj) == pytest.approx(3.0, abs=1e-12)

    def test_insufficient_samples(self):
        traj = synthetic_trajectory(1.0, samples=12)
        with pytest.raises(ValueError, match="at least 10"):
            gfv.estimate_lambda_n(traj, traj.times[3])


class TestMomentEstimators:
    def test_lambda_tau_collapses_for_single_linear_trait(self, small_grid):
        model = make_model([2.7], gfv.Kernel(np.eye(1)))
        op = gfv.assemble(small_grid, model)
        state = gfv.initial_profile(small_grid, 1)
        assert gfv.estimate_lambda_tau(state, op) == pytest.approx(2.7, rel=1e-13)

    def test_lambda_gamma_zero_below_division_support(self, small_grid):
        division = gfv.DivisionLaw("power", coeff=1.0, exponent=2.0, threshold=8.0)
        model = make_model([1.0], gfv.Kernel(np.eye(1)), division=division)
        op = gfv.assemble(small_grid, model)
        state = gfv.initial_profile(small_grid, 1)  # concentrated near 0.5
        assert gfv.estimate_lambda_gamma(state, op) == 0.0

    def test_desk_estimators_agree_with_eigenvalue(self, mixing_traj, mixing_pair):
        lam = mixing_pair.growth_rate
        assert gfv.estimate_lambda_n(mixing_traj) == pytest.approx(lam, rel=1e-4)
        assert gfv.averaged_estimate(mixing_traj, "lambda_tau") == pytest.approx(lam, rel=0.02)
        assert gfv.averaged_estimate(mixing_traj, "lambda_gamma") == pytest.approx(lam, rel=0.02)


class TestPowerIteration:
    def test_single_trait_linear_growth_rate_is_trait(self):
        grid = gfv.build_grid(600, 50)
        model = make_model([2.0], gfv.Kernel(np.eye(1)))
        op = gfv.assemble(grid, model)
        pair = gfv.solve_eigenproblem(op, tol=1e-10, max_iter=100_000)
        assert pair.growth_rate == pytest.approx(2.0, rel=1e-6)
        assert pair.oscillating  # cyclic dynamics: vector via period averaging

    def test_conservative_case_rate_is_zero(self):
        grid = gfv.build_grid(600, 50)
        model = make_model([2.0], gfv.Kernel(np.eye(1)), death_factor=0.5)
        op = gfv.assemble(grid, model)
        pair = gfv.solve_eigenproblem(op, tol=1e-10, max_iter=100_000)
        assert abs(pair.growth_rate) <= 0.02 * 2.0

    def test_dense_oracle_small_instance(self):
        # independent check: dominant eigenvalue of the densified step map
        grid = gfv.build_grid(63, 16)
        model = make_model([1.0, 2.0], gfv.Kernel(np.array([[0.3, 0.7], [0.6, 0.4]])))
        op = gfv.assemble(grid, model)
        dt = op.dt_max()
        stepper = Stepper(op, dt)
        mat = dense_matrix(op, action=stepper.advance)
        eigvals, eigvecs = scipy.linalg.eig(mat)
        dominant = np.argmax(eigvals.real)
        assert abs(eigvals[dominant].imag) <= 1e-12
        rate_dense = math.log(eigvals[dominant].real) / dt

        pair = gfv.power_iterate(op, "direct", tol=1e-13, max_iter=400_000,
                                 residual_tol=1e-11)
        assert pair.growth_rate == pytest.approx(rate_dense, rel=1e-8)

        vec = np.abs(eigvecs[:, dominant].real).reshape(2, grid.size)
        vec /= (grid.weights[None, :] * vec).sum()
        mine = pair.direct / (grid.weights[None, :] * pair.direct).sum()
        l1_gap = (grid.weights[None, :] * np.abs(vec - mine)).sum()
        assert l1_gap <= 1e-6

    def test_two_random_starts_agree(self, mixing_op):
        rng = np.random.default_rng(21)
        pairs = []
        for _ in range(2):
            start = rng.random((3, mixing_op.grid.size))
            pairs.append(
                gfv.power_iterate(mixing_op, "direct", tol=1e-12,
                                  max_iter=200_000, residual_tol=1e-10,
                                  start=start)
            )
        a, b = pairs
        weights = mixing_op.grid.weights[None, :]
        na = a.direct / (weights * a.direct).sum()
        nb = b.direct / (weights * b.direct).sum()
        gap = (weights * np.abs(na - nb)).sum()
        assert gap <= 1e-6
        assert a.growth_rate == pytest.approx(b.growth_rate, rel=1e-9)

    def test_reducible_collapses_to_fastest_block(self, nonmixing_pair, desk_grid):
        masses = (desk_grid.weights[None, :] * nonmixing_pair.direct).sum(axis=1)
        assert masses[2] == pytest.approx(1.0, rel=1e-10)
        assert masses[0] <= 1e-12 and masses[1] <= 1e-12
        assert nonmixing_pair.growth_rate == pytest.approx(3.0, rel=1e-6)
        assert nonmixing_pair.oscillating

    def test_reducible_warns(self, desk_grid, nonmixing_model):
        op = gfv.assemble(desk_grid, nonmixing_model)
        with pytest.warns(UserWarning, match="reducible"):
            gfv.power_iterate(op, "direct", max_iter=200)

    def test_rejects_bad_start(self, mixing_op):
        bad = -np.ones((3, mixing_op.grid.size))
        with pytest.raises(ValueError, match="nonnegative"):
            gfv.power_iterate(mixing_op, start=bad)


class TestSolveEigenproblem:
    def test_normalizations(self, mixing_op, mixing_pair):
        weights = mixing_op.grid.weights[None, :]
        assert (weights * mixing_pair.direct).sum() == pytest.approx(1.0, abs=1e-12)
        assert (weights * mixing_pair.direct * mixing_pair.adjoint).sum() == pytest.approx(
            1.0, abs=1e-12
        )

    def test_residuals_below_target(self, mixing_pair):
        assert mixing_pair.residual_direct <= 1e-8
        assert mixing_pair.residual_adjoint <= 1e-8
        assert mixing_pair.converged

    def test_mixing_rate_in_table_band(self, mixing_pair):
        assert 1.44 <= mixing_pair.growth_rate <= 1.50

    def test_positivity_of_converged_pair(self, mixing_pair):
        # profile positive on a contiguous range from the bottom node (no
        # division threshold); the tail beyond is double-precision underflow
        # of the super-exponential decay.  The reproductive value is positive
        # everywhere except the top node, where the exact-shift transpose
        # imposes the outflow boundary.
        for feature_profile in mixing_pair.direct:
            positive = np.where(feature_profile > 0)[0]
            assert positive[0] == 0
            assert np.all(np.diff(positive) == 1)
        assert mixing_pair.adjoint[:, :-1].min() > 0.0

    def test_support_with_division_threshold(self, small_grid):
        # smallest possible newborn is half the division threshold
        division = gfv.DivisionLaw("power", coeff=1.0, exponent=2.0, threshold=1.0)
        model = make_model([1.0, 2.0], gfv.build_named_kernel("irreducible", 2),
                           division=division)
        op = gfv.assemble(small_grid, model)
        pair = gfv.solve_eigenproblem(op, tol=1e-10, max_iter=300_000)
        first = small_grid.node_near(0.5)
        peak = pair.direct.max()
        for feature_profile in pair.direct:
            assert np.abs(feature_profile[:first]).max() <= 1e-14 * peak
            positive = np.where(feature_profile > 0)[0]
            assert positive[0] == first
            assert np.all(np.diff(positive) == 1)
        assert pair.adjoint[:, :-1].min() > 0.0


