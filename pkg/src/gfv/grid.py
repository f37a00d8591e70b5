"""Geometric size grid closed under exact doubling.

Nodes are ``x_m = 2**((m - N) / k)`` for ``m = 0..2N``, so multiplying a size
by two is exactly an index shift by ``k``.  Quadrature weights realize the
midpoint rule in log-size (exact for densities varying geometrically), with
the two endpoint weights halved so that the weight sum covers
``[x_0, x_{2N}]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)

#: Returned by :func:`double_index` when doubling leaves the grid.
OVERFLOW = None


@dataclass(frozen=True)
class Grid:
    """Geometric grid with ``2 * half_count + 1`` nodes.

    ``resolution`` is the number of nodes per octave: node ``m + resolution``
    sits at exactly twice the size of node ``m``.
    """

    half_count: int
    resolution: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return 2 * self.half_count + 1

    @property
    def log_step(self) -> float:
        """Log-size spacing ln(2)/k between adjacent nodes."""
        return LN2 / self.resolution

    @property
    def transport_widths(self) -> np.ndarray:
        """Cell widths ``x_m * ln2/k`` used by the upwind transport stencil."""
        return self.nodes * self.log_step

    def node_near(self, x: float) -> int:
        """Index of the node closest to ``x`` in log-size."""
        m = self.half_count + self.resolution * math.log2(x)
        return int(np.clip(round(m), 0, 2 * self.half_count))


def build_grid(half_count: int, resolution: int) -> Grid:
    """Build the geometric grid with ``2 * half_count + 1`` nodes.

    Requires ``half_count >= resolution >= 1`` so that the doubling shift
    stays on the grid for at least one full octave.
    """
    n_half = int(half_count)
    k = int(resolution)
    if k < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    if n_half < k:
        raise ValueError(
            f"half_count ({half_count}) must be >= resolution ({resolution}); "
            "otherwise doubling leaves the covered octaves"
        )
    m = np.arange(2 * n_half + 1, dtype=np.int64)
    # exp2 of the exact rational exponent; never repeated multiplication,
    # which would accumulate drift and break the doubling shift.
    nodes = np.exp2((m - n_half) / k)
    half_cell = 2.0 ** (1.0 / (2 * k))
    weights = nodes * (half_cell - 1.0 / half_cell)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Grid(n_half, k, nodes, weights)


def double_index(m: int, grid: Grid):
    """Index of the node at twice the size of node ``m``.

    Returns :data:`OVERFLOW` (``None``) when ``2 * x_m`` lies above the top
    node.
    """
    if not 0 <= m <= 2 * grid.half_count:
        raise IndexError(f"node index {m} outside 0..{2 * grid.half_count}")
    target = m + grid.resolution
    if target > 2 * grid.half_count:
        return OVERFLOW
    return target


def integrate(values, grid: Grid) -> float:
    """Quadrature of node-indexed values over the grid span."""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.nodes.shape:
        raise ValueError(f"expected {grid.nodes.shape} values, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("integrate: non-finite input")
    return float(grid.weights @ values)
