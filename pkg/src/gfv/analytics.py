"""Closed-form oracles and theorem-level consistency checks.

Covers the death-model rate formula, the critical mutation probability, the
monotonicity sandwich for the Malthus parameter, the duality residual of a
computed eigenpair, and the long-time-behavior conjecture table for the
one-way mutation kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Stepper
from .grid import Grid
from .model import Model
from .operator import SemiDiscreteOperator, assemble
from .spectral import EigenPair, solve_eigenproblem


def lambda_with_death(tau0: float, p: float) -> float:
    """Malthus parameter for linear growth rate tau0 * x when each daughter
    survives with probability p: tau0 * (log2(p) + 1).

    Zero at p = 1/2 (conservative case), tau0 at p = 1.
    """
    if tau0 <= 0:
        raise ValueError(f"growth coefficient must be positive, got {tau0}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"survival probability must lie in (0, 1], got {p}")
    return tau0 * (math.log2(p) + 1.0)


def critical_p0(v1: float, v2: float) -> float:
    """Survival probability at which the fast trait alone grows exactly as
    fast as the slow trait alone: 2**(v1/v2 - 1), in (1/2, 1]."""
    if not 0.0 < v1 <= v2:
        raise ValueError(f"need 0 < v1 <= v2, got v1={v1}, v2={v2}")
    return 2.0 ** (v1 / v2 - 1.0)


def lambda_fast_subpop(v2: float, p: float) -> float:
    """Growth rate of the fast subpopulation feeding itself a fraction p of
    its daughters: v2 * (log2(p) + 1)."""
    return lambda_with_death(v2, p)


@dataclass
class SandwichReport:
    lambda_low: float
    lambda_value: float
    lambda_high: float
    tolerance: float
    holds: bool
    low_converged: bool = True
    high_converged: bool = True


def check_sandwich(model: Model, grid: Grid, pair: EigenPair | None = None,
                   tol: float = 1e-8, max_iter: int = 40_000) -> SandwichReport:
    """Bound the mixed-model rate by the frozen slowest/fastest trait rates.

    Builds the two single-feature models sharing the division law, solves
    each eigenproblem (tail-averaged rate when the single-trait dynamics are
    cyclic), and checks lambda_low - eps <= lambda <= lambda_high + eps with
    eps combining solver tolerance and a 1% discretization allowance.
    """
    if model.features.count < 1:
        raise ValueError("model needs at least one feature")
    op = assemble(grid, model)
    if pair is None:
        pair = solve_eigenproblem(op, tol=tol, max_iter=max_iter)
    lo_model = model.frozen_single(0)
    hi_model = model.frozen_single(model.features.count - 1)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lo = solve_eigenproblem(assemble(grid, lo_model), tol=tol, max_iter=max_iter)
        hi = solve_eigenproblem(assemble(grid, hi_model), tol=tol, max_iter=max_iter)
    eps = 2.0 * (
        tol * max(1.0, abs(pair.growth_rate))
        + 0.01 * max(abs(lo.growth_rate), abs(hi.growth_rate))
    )
    holds = (
        lo.growth_rate - eps <= pair.growth_rate <= hi.growth_rate + eps
    )
    return SandwichReport(
        lambda_low=lo.growth_rate,
        lambda_value=pair.growth_rate,
        lambda_high=hi.growth_rate,
        tolerance=eps,
        holds=bool(holds),
        low_converged=lo.converged,
        high_converged=hi.converged,
    )


def duality_residual(op: SemiDiscreteOperator, pair: EigenPair,
                     rate_floor: float = 1e-8) -> float:
    """Defect of the duality bracket on the computed eigenpair.

    |<S N, phi> - mu <N, phi>| per unit time, relative to |rate| * <N, phi>;
    when the rate is below ``rate_floor`` (conservative case) the absolute
    per-unit-time defect is returned instead.
    """
    stepper = Stepper(op, pair.dt)
    w = op.grid.weights[None, :]
    pairing = float((w * pair.direct * pair.adjoint).sum())
    bracket = float((w * stepper.advance(pair.direct) * pair.adjoint).sum())
    defect = abs(bracket - pair.step_factor * pairing) / pair.dt
    if abs(pair.growth_rate) < rate_floor:
        return defect
    return defect / (abs(pair.growth_rate) * abs(pairing))


@dataclass(frozen=True)
class ConjectureRow:
    """One row of the long-time-behavior table for one-way mutation."""

    family: str                 # "slow_to_fast" | "fast_to_slow"
    p_range: str                # "(0,1)" | "(0,p0)" | "(p0,1)"
    slow_component: str         # "zero" | "periodic"
    fast_component: str
    predicted_rate: str         # "v2" | "v1" | "lambda_v2_p"


CONJECTURE_TABLE = (
    ConjectureRow("slow_to_fast", "(0,1)", "zero", "periodic", "v2"),
    ConjectureRow("fast_to_slow", "(0,p0)", "periodic", "zero", "v1"),
    ConjectureRow("fast_to_slow", "(p0,1)", "periodic", "periodic", "lambda_v2_p"),
)


def conjecture_row(family: str, p: float, v1: float, v2: float) -> ConjectureRow:
    """Table row applying to the given family and survival probability."""
    if family == "slow_to_fast":
        return CONJECTURE_TABLE[0]
    if family == "fast_to_slow":
        p0 = critical_p0(v1, v2)
        if p == p0:
            raise ValueError("p sits exactly at the critical value")
        return CONJECTURE_TABLE[1] if p < p0 else CONJECTURE_TABLE[2]
    raise ValueError(f"unknown kernel family {family!r}")


def predicted_rate(family: str, p: float, v1: float, v2: float) -> float:
    row = conjecture_row(family, p, v1, v2)
    if row.predicted_rate == "v2":
        return v2
    if row.predicted_rate == "v1":
        return v1
    return lambda_fast_subpop(v2, p)


@dataclass
class ConjectureComparison:
    row: ConjectureRow
    predicted: float
    measured: float
    rate_deviation: float
    vanishing_ok: bool
    behavior_ok: bool
    conclusive: bool

    @property
    def agrees(self) -> bool:
        return (
            self.conclusive
            and self.vanishing_ok
            and self.behavior_ok
            and self.rate_deviation <= 0.02
        )


VANISH_SHARE = 1e-6


def evaluate_conjecture(family: str, p: float, v1: float, v2: float,
                        measured_rate: float, end_shares: np.ndarray,
                        verdicts) -> ConjectureComparison:
    """Compare one simulated (family, p) cell against the conjecture table.

    ``end_shares`` are the per-feature number fractions at the end of the
    run (renormalized scale); ``verdicts`` the per-feature
    :class:`~gfv.entropy.BehaviorVerdict` of the fixed-size slice series.
    A component is considered vanished below a 1e-6 share.
    """
    row = conjecture_row(family, p, v1, v2)
    predicted = predicted_rate(family, p, v1, v2)
    deviation = abs(measured_rate - predicted) / abs(predicted)
    states = []
    for expected, share, verdict in zip(
        (row.slow_component, row.fast_component), end_shares, verdicts
    ):
        if expected == "zero":
            states.append(share <= VANISH_SHARE)
        else:
            states.append(share > VANISH_SHARE)
    vanish_ok = all(states)
    surviving = [
        verdict
        for expected, verdict in zip((row.slow_component, row.fast_component), verdicts)
        if expected == "periodic"
    ]
    conclusive = all(v.kind != "undecided" for v in surviving)
    behavior_ok = all(v.kind == "oscillating" for v in surviving)
    return ConjectureComparison(
        row=row,
        predicted=predicted,
        measured=measured_rate,
        rate_deviation=deviation,
        vanishing_ok=vanish_ok,
        behavior_ok=behavior_ok,
        conclusive=conclusive,
    )
