"""Shared fixtures: desk-scale models, eigenpairs and trajectories.

Session scope keeps the expensive runs (time integration, power iteration)
to one evaluation for the whole suite.
"""

import warnings

import numpy as np
import pytest

import gfv


def make_model(features, kernel, death_factor=1.0, growth=None, division=None):
    return gfv.Model(
        features=gfv.FeatureSet(np.asarray(features, dtype=float)),
        growth=growth or gfv.GrowthLaw("linear"),
        division=division or gfv.DivisionLaw("power", coeff=1.0, exponent=2.0),
        kernel=kernel,
        death_factor=death_factor,
    )


@pytest.fixture(scope="session")
def desk_grid():
    return gfv.build_grid(900, 75)


@pytest.fixture(scope="session")
def small_grid():
    return gfv.build_grid(300, 40)


@pytest.fixture(scope="session")
def mixing_model():
    return make_model([1.0, 2.0, 3.0], gfv.build_named_kernel("irreducible", 3))


@pytest.fixture(scope="session")
def mixing_op(desk_grid, mixing_model):
    return gfv.assemble(desk_grid, mixing_model)


@pytest.fixture(scope="session")
def mixing_pair(mixing_op):
    return gfv.solve_eigenproblem(mixing_op, tol=1e-10, max_iter=200_000)


@pytest.fixture(scope="session")
def mixing_traj(mixing_model, desk_grid, mixing_op, mixing_pair):
    init = gfv.initial_profile(desk_grid, 3)
    return gfv.simulate(
        mixing_model, desk_grid, gfv.Schedule(t_end=40.0, record_dt=0.02),
        init, eigenpair=mixing_pair, op=mixing_op,
    )


@pytest.fixture(scope="session")
def nonmixing_model():
    return make_model([1.0, 2.0, 3.0], gfv.build_named_kernel("reducible", 3))


@pytest.fixture(scope="session")
def nonmixing_op(desk_grid, nonmixing_model):
    return gfv.assemble(desk_grid, nonmixing_model)


@pytest.fixture(scope="session")
def nonmixing_traj(nonmixing_model, desk_grid, nonmixing_op):
    init = gfv.initial_profile(desk_grid, 3)
    return gfv.simulate(
        nonmixing_model, desk_grid, gfv.Schedule(t_end=20.0, record_dt=0.005),
        init, op=nonmixing_op,
    )


@pytest.fixture(scope="session")
def nonmixing_traj_long(nonmixing_model, desk_grid, nonmixing_op):
    """Doubled-length reference run for the period oracle."""
    init = gfv.initial_profile(desk_grid, 3)
    return gfv.simulate(
        nonmixing_model, desk_grid, gfv.Schedule(t_end=40.0, record_dt=0.005),
        init, op=nonmixing_op,
    )


@pytest.fixture(scope="session")
def nonmixing_pair(nonmixing_op):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return gfv.solve_eigenproblem(nonmixing_op, tol=1e-10, max_iter=150_000)
