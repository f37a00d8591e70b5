"""Model coefficients: growth law, division law, variability kernel.

The division rate per unit time is always produced as
``division_rate(v, x) = division_per_size(x) * growth_rate(v, x)``; only the
per-size rate and the growth law are user inputs, which keeps the
factorization structural.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError
from .grid import Grid

ROW_SUM_TOL = 1e-12
HETEROGENEITY_RTOL = 1e-12


@dataclass(frozen=True)
class FeatureSet:
    """Strictly increasing positive growth-rate traits."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 1:
            raise ConfigError("features must be a non-empty 1-d sequence")
        if not np.all(vals > 0):
            raise ConfigError("features must be positive")
        if vals.size > 1 and not np.all(np.diff(vals) > 0):
            raise ConfigError("features must be strictly increasing")

    @property
    def count(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class GrowthLaw:
    """Per-feature growth rate as a function of size.

    kinds:
      * ``linear``    -- rate(v, x) = v * x
      * ``power``     -- rate(v, x) = v * x**exponent
      * ``tabulated`` -- one row of node values per feature
    """

    kind: str
    exponent: float = 1.0
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "power", "tabulated"):
            raise ConfigError(f"unknown growth law kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.table is None:
                raise ConfigError("tabulated growth law needs a table")
            object.__setattr__(self, "table", np.asarray(self.table, dtype=float))

    def rates(self, features: FeatureSet, nodes: np.ndarray) -> np.ndarray:
        """Rate table of shape (feature count, node count)."""
        if self.kind == "linear":
            return features.values[:, None] * nodes[None, :]
        if self.kind == "power":
            return features.values[:, None] * nodes[None, :] ** self.exponent
        if self.table.shape != (features.count, nodes.size):
            raise ConfigError(
                f"tabulated growth law has shape {self.table.shape}, "
                f"expected {(features.count, nodes.size)}"
            )
        return self.table.copy()

    def frozen_single(self, features: FeatureSet, index: int) -> "GrowthLaw":
        """Law restricted to one feature (for single-trait comparison models)."""
        if self.kind == "tabulated":
            return GrowthLaw("tabulated", table=self.table[index : index + 1])
        return GrowthLaw(self.kind, exponent=self.exponent)


@dataclass(frozen=True)
class DivisionLaw:
    """Division rate per unit of size, a function of size only.

    kinds:
      * ``power``     -- coeff * x**exponent, optionally zero below threshold
      * ``tabulated`` -- node values
    The support threshold ``b`` means no division below size b.
    """

    kind: str
    coeff: float = 1.0
    exponent: float = 2.0
    threshold: float = 0.0
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("power", "tabulated"):
            raise ConfigError(f"unknown division law kind {self.kind!r}")
        if self.threshold < 0:
            raise ConfigError("division threshold must be >= 0")
        if self.kind == "tabulated":
            if self.table is None:
                raise ConfigError("tabulated division law needs a table")
            object.__setattr__(self, "table", np.asarray(self.table, dtype=float))

    def rates(self, nodes: np.ndarray) -> np.ndarray:
        if self.kind == "power":
            out = self.coeff * nodes**self.exponent
        else:
            if self.table.shape != nodes.shape:
                raise ConfigError(
                    f"tabulated division law has {self.table.shape}, expected {nodes.shape}"
                )
            out = self.table.copy()
        if self.threshold > 0:
            out = np.where(nodes >= self.threshold, out, 0.0)
        if np.any(out < 0):
            raise ConfigError("division rate per size must be nonnegative")
        return out


@dataclass(frozen=True)
class Kernel:
    """Row-stochastic matrix of daughter-feature probabilities."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ConfigError(f"kernel must be square, got shape {mat.shape}")
        if np.any(mat < 0):
            raise ConfigError("kernel entries must be nonnegative")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def row_sum_defect(self) -> float:
        return float(np.abs(self.matrix.sum(axis=1) - 1.0).max())

    def is_stochastic(self, tol: float = ROW_SUM_TOL) -> bool:
        return self.row_sum_defect() <= tol


def build_named_kernel(name: str, size: int | None = None, p: float | None = None) -> Kernel:
    """Kernels used throughout the numerical experiments.

    * ``reducible``    -- identity of any size (no mixing)
    * ``irreducible``  -- the 2x2 swap or the 3x3 mixing matrix
    * ``slow_to_fast`` -- [[p, 1-p], [0, 1]] (only the slow trait mutates)
    * ``fast_to_slow`` -- [[1, 0], [1-p, p]] (only the fast trait mutates)
    * ``homogeneous``  -- all entries 1/size
    """
    if name == "reducible":
        if size is None or size < 1:
            raise ConfigError("reducible kernel needs a size >= 1")
        return Kernel(np.eye(size))
    if name == "irreducible":
        if size == 2:
            return Kernel(np.array([[0.0, 1.0], [1.0, 0.0]]))
        if size == 3:
            return Kernel(
                np.array([[0.7, 0.2, 0.1], [0.5, 0.4, 0.1], [0.3, 0.3, 0.4]])
            )
        raise ConfigError("named irreducible kernel exists for sizes 2 and 3 only")
    if name == "homogeneous":
        if size is None or size < 1:
            raise ConfigError("homogeneous kernel needs a size >= 1")
        return Kernel(np.full((size, size), 1.0 / size))
    if name in ("slow_to_fast", "fast_to_slow"):
        if size not in (None, 2):
            raise ConfigError(f"{name} kernel is 2x2")
        if p is None or not 0.0 < p < 1.0:
            raise ConfigError(f"{name} kernel needs p in (0, 1), got {p}")
        if name == "slow_to_fast":
            return Kernel(np.array([[p, 1.0 - p], [0.0, 1.0]]))
        return Kernel(np.array([[1.0, 0.0], [1.0 - p, p]]))
    raise ConfigError(f"unknown kernel family {name!r}")


@dataclass(frozen=True)
class Model:
    """Full coefficient set for one run."""

    features: FeatureSet
    growth: GrowthLaw
    division: DivisionLaw
    kernel: Kernel
    death_factor: float = 1.0

    def __post_init__(self):
        if self.kernel.size != self.features.count:
            raise ConfigError(
                f"kernel is {self.kernel.size}x{self.kernel.size} but there are "
                f"{self.features.count} features"
            )
        if not 0.0 < self.death_factor <= 1.0:
            raise ConfigError(
                f"death factor must lie in (0, 1], got {self.death_factor}"
            )

    def growth_table(self, grid: Grid) -> np.ndarray:
        table = self.growth.rates(self.features, grid.nodes)
        if np.any(table <= 0) or not np.all(np.isfinite(table)):
            raise ConfigError("growth rate must be positive and finite at every node")
        return table

    def division_table(self, grid: Grid) -> np.ndarray:
        """Division rate per unit time, per feature and node."""
        return self.division.rates(grid.nodes)[None, :] * self.growth_table(grid)

    def gamma_at(self, grid: Grid, feature_index: int, node_index: int) -> float:
        """Division rate per unit time at one (feature, node)."""
        x = grid.nodes[node_index]
        tau = self.growth.rates(self.features, grid.nodes)[feature_index, node_index]
        beta = self.division.rates(np.asarray([x]))[0]
        return float(beta * tau)

    def frozen_single(self, index: int) -> "Model":
        """Single-feature model with the same division law (trait frozen)."""
        return Model(
            features=FeatureSet(self.features.values[index : index + 1]),
            growth=self.growth.frozen_single(self.features, index),
            division=self.division,
            kernel=Kernel(np.eye(1)),
            death_factor=self.death_factor,
        )


@dataclass
class KernelReport:
    """Outcome of the kernel/model validation checks."""

    stochastic: bool
    irreducible: bool
    scc_count: int
    scc_membership: np.ndarray
    heterogeneity_ok: bool
    row_sum_defect: float = 0.0

    def as_dict(self) -> dict:
        return {
            "stochastic": self.stochastic,
            "irreducible": self.irreducible,
            "scc_count": self.scc_count,
            "scc_membership": [int(c) for c in self.scc_membership],
            "heterogeneity_ok": self.heterogeneity_ok,
            "row_sum_defect": self.row_sum_defect,
        }


def validate_kernel(kernel: Kernel, model: Model, grid: Grid) -> KernelReport:
    """Stochasticity, irreducibility (strong connectivity) and the
    heterogeneity condition checked on grid nodes.

    The heterogeneity check asks, for every connected pair of distinct
    features (i -> j), that twice the daughter's growth rate at x differs
    from the mother's growth rate at 2x; this is what makes the entropy
    dissipation vanish only on multiples of the steady profile.
    """
    if kernel.size != model.features.count:
        raise ConfigError(
            f"kernel size {kernel.size} does not match feature count "
            f"{model.features.count}"
        )
    defect = kernel.row_sum_defect()
    graph = scipy.sparse.csr_matrix(kernel.matrix > 0)
    scc_count, membership = connected_components(
        graph, directed=True, connection="strong"
    )

    tau = model.growth_table(grid)
    k = grid.resolution
    top = 2 * grid.half_count - k
    hetero_ok = True
    for i in range(kernel.size):
        for j in range(kernel.size):
            if i == j or kernel.matrix[i, j] <= 0:
                continue
            # 2 * rate(v_j, x_m) vs rate(v_i, x_{m+k}) = rate(v_i, 2 x_m)
            lhs = 2.0 * tau[j, : top + 1]
            rhs = tau[i, k : top + 1 + k]
            scale = np.maximum(np.abs(lhs), np.abs(rhs))
            if np.any(np.abs(lhs - rhs) <= HETEROGENEITY_RTOL * scale):
                hetero_ok = False
    return KernelReport(
        stochastic=defect <= ROW_SUM_TOL,
        irreducible=scc_count == 1,
        scc_count=int(scc_count),
        scc_membership=membership,
        heterogeneity_ok=hetero_ok,
        row_sum_defect=defect,
    )


def validate_model(model: Model, grid: Grid) -> KernelReport:
    """Run all model checks; raise on hard violations, warn on soft ones.

    Hard: positive growth at every node, nonnegative division per size,
    stochastic kernel.  Soft: the division pressure at the top of the grid
    should be large (otherwise mass can escape to infinity), reported as a
    warning only.
    """
    report = validate_kernel(model.kernel, model, grid)
    if not report.stochastic:
        raise ConfigError(
            f"kernel rows must sum to 1 within {ROW_SUM_TOL:g} "
            f"(defect {report.row_sum_defect:.3e})"
        )
    beta = model.division.rates(grid.nodes)
    top_pressure = beta[-1] * grid.nodes[-1]
    if top_pressure < 10.0:
        warnings.warn(
            f"division pressure x*beta(x) = {top_pressure:.3g} at the top node; "
            "growth may dominate fragmentation at large sizes",
            stacklevel=2,
        )
    return report
