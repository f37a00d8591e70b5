"""Semi-discrete operator: upwind transport + division loss + doubling gain.

``apply`` realizes dn/dt = A n with, per feature i and node m,

* transport  -(F_m - F_{m-1}) / (x_m ln2/k),  F_m = rate_i(x_m) n_i(x_m),
  zero inflow at the bottom, outflow at the top;
* loss       -gamma_i(x_m) n_i(x_m);
* gain       4p * sum_j kernel[j, i] * gamma_j(x_{m+k}) * n_j(x_{m+k}),
  which needs no interpolation because 2 x_m = x_{m+k} exactly.

On this grid w_{m+k} = 2 w_m, so the plain nodal gain makes the discrete
mass and number balances exact (up to boundary flux).  ``apply_adjoint`` is
the exact transpose with respect to the quadrature inner product
sum_{i,m} w_m f_{i,m} g_{i,m}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import Grid
from .model import Model, validate_model


@dataclass(frozen=True)
class SemiDiscreteOperator:
    grid: Grid
    model: Model
    growth: np.ndarray          # (M, nodes) growth rate table
    division: np.ndarray        # (M, nodes) division rate per unit time
    kernel_matrix: np.ndarray   # (M, M)
    gain_scale: float           # 4 * death_factor

    @property
    def feature_count(self) -> int:
        return self.growth.shape[0]

    @property
    def unknowns(self) -> int:
        return self.growth.size

    def dt_max(self) -> float:
        """Largest stable transport step: min over cells of width / rate."""
        widths = self.grid.transport_widths
        return float((widths[None, :] / self.growth).min())

    def cfl_binding(self) -> tuple[int, int]:
        """(feature, node) where the stability bound is attained."""
        ratio = self.grid.transport_widths[None, :] / self.growth
        i, m = np.unravel_index(np.argmin(ratio), ratio.shape)
        return int(i), int(m)

    def stiffness(self, dt: float) -> float:
        """Largest dt * gamma over the grid (reported, not a stability limit)."""
        return float(dt * self.division.max())


def assemble(grid: Grid, model: Model, validate: bool = True) -> SemiDiscreteOperator:
    """Build the operator tables; optionally run the model validation."""
    if validate:
        validate_model(model, grid)
    growth = model.growth_table(grid)
    division = model.division_table(grid)
    return SemiDiscreteOperator(
        grid=grid,
        model=model,
        growth=growth,
        division=division,
        kernel_matrix=model.kernel.matrix.copy(),
        gain_scale=4.0 * model.death_factor,
    )


def _check_state(op: SemiDiscreteOperator, values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    expected = (op.feature_count, op.grid.size)
    if values.shape != expected:
        raise ValueError(f"state must have shape {expected}, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("state contains non-finite entries")
    return values


def apply_transport(op: SemiDiscreteOperator, values) -> np.ndarray:
    """Upwind transport part of the generator."""
    n = _check_state(op, values)
    widths = op.grid.transport_widths
    flux = op.growth * n
    out = np.empty_like(n)
    out[:, 0] = -flux[:, 0] / widths[0]
    out[:, 1:] = -(flux[:, 1:] - flux[:, :-1]) / widths[None, 1:]
    return out


def apply_fragmentation(op: SemiDiscreteOperator, values) -> np.ndarray:
    """Division loss plus doubling-aligned gain.

    By itself this part conserves the discrete mass exactly at survival 1,
    and the discrete number exactly at survival 1/2 (up to daughters of the
    lowest octave of mothers leaving the grid at the bottom).
    """
    n = _check_state(op, values)
    k = op.grid.resolution
    born = op.division * n
    out = -born
    out[:, :-k] += op.gain_scale * (op.kernel_matrix.T @ born[:, k:])
    return out


def apply(op: SemiDiscreteOperator, values) -> np.ndarray:
    """Action of the generator on a per-feature density array."""
    return apply_transport(op, values) + apply_fragmentation(op, values)


def apply_adjoint(op: SemiDiscreteOperator, values) -> np.ndarray:
    """Transpose of :func:`apply` in the quadrature inner product.

    In the interior this is the upwind discretization of
    rate * d(phi)/dx - gamma phi + 2p gamma * kernel-average of phi(x/2);
    at the boundary nodes it is whatever exact transposition dictates.
    """
    phi = _check_state(op, values)
    k = op.grid.resolution
    w = op.grid.weights
    widths = op.grid.transport_widths
    # transport^T: tau_m/w_m * (w_{m+1} phi_{m+1} / width_{m+1} - w_m phi_m / width_m)
    scaled = w[None, :] * phi / widths[None, :]
    out = np.empty_like(phi)
    out[:, :-1] = op.growth[:, :-1] * (scaled[:, 1:] - scaled[:, :-1]) / w[None, :-1]
    out[:, -1] = -op.growth[:, -1] * phi[:, -1] / widths[-1]
    out -= op.division * phi
    # gain^T: gamma_j(x_m) * 4p * (w_{m-k}/w_m) * sum_i kernel[j,i] phi_i(x_{m-k})
    ratio = w[: op.grid.size - k] / w[k:]
    out[:, k:] += (
        op.gain_scale
        * op.division[:, k:]
        * ratio[None, :]
        * (op.kernel_matrix @ phi[:, :-k])
    )
    return out


DENSE_LIMIT = 4096


def dense_matrix(op: SemiDiscreteOperator, action=None) -> np.ndarray:
    """Dense matrix of a linear action (default: the generator).

    Only for small instances (at most 4096 unknowns); columns are obtained
    by applying the action to basis vectors, so the export agrees with
    ``apply`` by construction.
    """
    if op.unknowns > DENSE_LIMIT:
        raise ConfigError(
            f"dense export limited to {DENSE_LIMIT} unknowns, got {op.unknowns}"
        )
    if action is None:
        action = lambda v: apply(op, v)
    shape = (op.feature_count, op.grid.size)
    size = op.unknowns
    mat = np.empty((size, size))
    basis = np.zeros(size)
    for j in range(size):
        basis[j] = 1.0
        mat[:, j] = action(basis.reshape(shape)).ravel()
        basis[j] = 0.0
    return mat


def dump_dense(op: SemiDiscreteOperator, path, action=None) -> None:
    """Row-major text dump of the dense matrix."""
    np.savetxt(path, dense_matrix(op, action), fmt="%.17g")
