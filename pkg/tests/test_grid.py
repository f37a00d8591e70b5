"""Geometric grid: node formula, doubling shift, quadrature."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import gfv
from gfv.grid import OVERFLOW


def test_full_resolution_grid_shape():
    grid = gfv.build_grid(2501, 200)
    assert grid.size == 5003
    assert grid.nodes[2501] == 1.0
    assert np.isclose(grid.nodes[0], 2.0 ** (-2501 / 200), rtol=1e-14)
    assert np.isclose(grid.nodes[-1], 2.0 ** (2501 / 200), rtol=1e-14)
    assert 2501 / 200 == pytest.approx(12.505)


def test_three_node_grid():
    grid = gfv.build_grid(1, 1)
    np.testing.assert_allclose(grid.nodes, [0.5, 1.0, 2.0], rtol=0, atol=0)


def test_doubling_is_exact_index_shift():
    grid = gfv.build_grid(4, 2)
    assert grid.nodes[4] == 2.0 * grid.nodes[2]


@pytest.mark.parametrize("half_count,resolution", [(100, 10), (900, 75), (2501, 200)])
def test_doubling_exactness_invariant(half_count, resolution):
    grid = gfv.build_grid(half_count, resolution)
    x = grid.nodes
    k = resolution
    gap = np.abs(x[k:] - 2.0 * x[:-k]) / x[k:]
    assert gap.max() <= 1e-14


def test_nodes_strictly_ascending_and_weights_positive():
    grid = gfv.build_grid(600, 50)
    assert np.all(np.diff(grid.nodes) > 0)
    assert np.all(grid.weights > 0)


def test_rejects_half_count_below_resolution():
    with pytest.raises(ValueError, match="half_count"):
        gfv.build_grid(10, 20)
    with pytest.raises(ValueError, match="resolution"):
        gfv.build_grid(10, 0)


def test_double_index():
    grid = gfv.build_grid(2501, 200)
    assert gfv.double_index(0, grid) == 200
    assert gfv.double_index(2 * 2501, grid) is OVERFLOW
    assert gfv.double_index(2 * 2501 - 200, grid) == 2 * 2501
    with pytest.raises(IndexError):
        gfv.double_index(-1, grid)


def test_integrate_zero_and_constant():
    grid = gfv.build_grid(50, 10)
    assert gfv.integrate(np.zeros(grid.size), grid) == 0.0
    total = gfv.integrate(np.ones(grid.size), grid)
    width = grid.nodes[-1] - grid.nodes[0]
    assert total == pytest.approx(width, rel=1e-3)


def test_integrate_inverse_size():
    # oracle: the exact logarithmic integral of 1/x over the span
    grid = gfv.build_grid(2000, 200)
    values = 1.0 / grid.nodes
    exact = math.log(grid.nodes[-1] / grid.nodes[0])
    assert gfv.integrate(values, grid) == pytest.approx(exact, rel=1e-4)


def test_integrate_rejects_non_finite():
    grid = gfv.build_grid(10, 5)
    bad = np.ones(grid.size)
    bad[3] = np.inf
    with pytest.raises(ValueError, match="non-finite"):
        gfv.integrate(bad, grid)


@pytest.mark.parametrize("power", [0, 1, 2])
def test_quadrature_second_order(power):
    # halving the resolution must grow the relative error ~4x (order 2)
    def rel_error(resolution):
        grid = gfv.build_grid(5 * resolution, resolution)
        approx = gfv.integrate(grid.nodes**power, grid)
        exact = (grid.nodes[-1] ** (power + 1) - grid.nodes[0] ** (power + 1)) / (power + 1)
        return abs(approx - exact) / exact

    coarse, fine = rel_error(20), rel_error(40)
    assert coarse / fine == pytest.approx(4.0, rel=0.3)


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-5, 5, allow_nan=False),
    b=st.floats(-5, 5, allow_nan=False),
    seed=st.integers(0, 2**31 - 1),
)
def test_integrate_is_linear(a, b, seed):
    grid = gfv.build_grid(60, 12)
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(grid.size)
    g = rng.standard_normal(grid.size)
    lhs = gfv.integrate(a * f + b * g, grid)
    rhs = a * gfv.integrate(f, grid) + b * gfv.integrate(g, grid)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(lhs)))


def test_node_near():
    grid = gfv.build_grid(600, 50)
    assert grid.node_near(1.0) == 600
    assert grid.node_near(2.0) == 650
    assert grid.node_near(grid.nodes[0] / 10) == 0
