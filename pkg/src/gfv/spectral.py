"""Malthus parameter and eigenvectors.

Power iteration runs on the one-step map of the renormalized dynamics (the
same verified stepper used by ``simulate``); the dominant eigenvalue of that
map is exp(growth_rate * dt), so the rate is recovered as log(step growth) /
dt.  The adjoint vector comes from iterating the quadrature transpose of the
step map.  Where the dynamics are cyclic (no mixing, linear growth) the
windowed rate estimates never settle; the solver then reports an oscillation
indicator together with the tail-averaged iterate, whose running mean damps
the rotating eigencomponents.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import Population, Stepper, Trajectory, moment
from .errors import NumericsError
from .grid import Grid
from .model import validate_kernel
from .operator import SemiDiscreteOperator


@dataclass
class EigenPair:
    """Dominant eigenpair data; either side may be missing (half-filled)."""

    growth_rate: float
    direct: np.ndarray | None = None
    adjoint: np.ndarray | None = None
    residual_direct: float = math.nan
    residual_adjoint: float = math.nan
    iterations: int = 0
    converged: bool = False
    oscillating: bool = False
    oscillation_amplitude: float = 0.0
    dt: float = math.nan

    @property
    def step_factor(self) -> float:
        """Perron root of the one-step map, exp(growth_rate * dt)."""
        return math.exp(self.growth_rate * self.dt)


def _weighted_total(grid: Grid, values: np.ndarray) -> float:
    return float((grid.weights[None, :] * values).sum())


def power_iterate(op: SemiDiscreteOperator, which: str = "direct",
                  tol: float = 1e-10, max_iter: int = 10**6,
                  dt: float | None = None, window: int | None = None,
                  start: np.ndarray | None = None,
                  residual_tol: float | None = None) -> EigenPair:
    """Dominant eigenpair of the one-step map (or its transpose).

    Stops when the growth-rate estimate over consecutive ``window``-step
    blocks changes by less than ``tol`` (relatively, floored at one rate
    unit).  With ``residual_tol`` set, iteration continues past that point
    until an eigenvector residual (per unit time) also drops below it --
    either of the current iterate or, in cyclic dynamics where the iterate
    keeps rotating, of the tail average over whole transport periods, in
    which case the pair is flagged oscillating.  ``window`` defaults to the
    grid resolution: at CFL one that is one doubling period, so cyclic
    orbits contribute whole cycles to every window and to the tail average.
    On hitting ``max_iter`` the window history is inspected: a stable mean
    with persistent swing is likewise reported as oscillating rather than
    as a hard error.
    """
    if which not in ("direct", "adjoint"):
        raise ValueError(f"which must be 'direct' or 'adjoint', got {which!r}")
    if dt is None:
        dt = op.dt_max()
    if window is None:
        window = op.grid.resolution
    stepper = Stepper(op, dt)
    advance = stepper.advance if which == "direct" else stepper.advance_adjoint
    grid = op.grid

    if start is None:
        x = np.ones((op.feature_count, grid.size))
    else:
        x = np.asarray(start, dtype=float).copy()
        if x.min() < 0 or not np.all(np.isfinite(x)):
            raise ValueError("start vector must be nonnegative and finite")
    total = _weighted_total(grid, x)
    if total <= 0:
        raise ValueError("start vector must have positive total")
    x /= total

    report = validate_kernel(op.model.kernel, op.model, grid)
    if not report.irreducible:
        warnings.warn(
            "kernel is reducible; the dominant eigenpair may be degenerate "
            "and the iteration may oscillate",
            stacklevel=2,
        )

    window_rates: list[float] = []
    iterations = 0
    converged = False
    # Tail average with doubling restarts: the two accumulators together
    # always hold the mean over at least the trailing third of the run.
    # Iterates enter the sums in a fixed normalization (gauge ~ estimated
    # step growth to the power j); otherwise the periodic envelope of a
    # cyclic orbit would bias the average and rotating modes would survive.
    tail_sum = np.zeros_like(x)
    prev_sum = np.zeros_like(x)
    tail_count = prev_count = 0
    tail_cap = 4 * window
    gauge = 1.0
    step_growth_guess = 1.0

    def current_residual(vec):
        image = advance(vec)
        factor = _weighted_total(grid, image)
        gap = (grid.weights[None, :] * np.abs(image - factor * vec)).sum()
        return float(gap) / (abs(factor) * dt)

    def tail_average():
        avg = (prev_sum + tail_sum) / (prev_count + tail_count)
        return avg / _weighted_total(grid, avg)

    rate = math.nan
    oscillating = False
    while iterations < max_iter:
        block = 0.0
        for _ in range(window):
            x = advance(x)
            g = _weighted_total(grid, x)
            if not np.isfinite(g) or g <= 0.0:
                raise NumericsError(f"iterate lost positivity (growth {g})")
            x /= g
            gauge *= g / step_growth_guess
            block += math.log(g)
            iterations += 1
            if tail_count >= tail_cap:
                prev_sum, tail_sum = tail_sum, prev_sum
                prev_count = tail_count
                prev_sum /= gauge
                gauge = 1.0
                tail_sum[:] = 0.0
                tail_count = 0
                tail_cap *= 2
            tail_sum += gauge * x
            tail_count += 1
        rate = block / (window * dt)
        step_growth_guess = math.exp(rate * dt)
        # relative tolerance with an absolute floor of one rate unit, so the
        # conservative case (rate ~ 0) can still converge
        if window_rates and abs(rate - window_rates[-1]) <= tol * max(abs(rate), 1.0):
            window_rates.append(rate)
            if residual_tol is None or current_residual(x) <= residual_tol:
                converged = True
                break
            averaged = tail_average()
            if current_residual(averaged) <= residual_tol:
                # the iterate keeps rotating along a cycle but its average
                # over whole periods is a genuine eigenvector
                x = averaged
                converged = True
                oscillating = True
                break
        else:
            window_rates.append(rate)

    amplitude = 0.0
    if not converged and len(window_rates) >= 8:
        hist = np.asarray(window_rates)
        q = hist.size // 4
        last, prev = hist[-q:], hist[-2 * q : -q]
        amplitude = float(np.ptp(last)) / 2.0
        drift = abs(float(last.mean() - prev.mean()))
        if amplitude > 0 and drift <= 0.05 * amplitude:
            oscillating = True
            rate = float(last.mean())
            x = tail_average()

    total = _weighted_total(grid, x)
    x /= total
    image = advance(x)
    factor = _weighted_total(grid, image)
    residual = (
        float((grid.weights[None, :] * np.abs(image - factor * x)).sum())
        / (abs(factor) * dt)
    )
    if oscillating:
        # rate of the averaged vector, consistent with the reported residual
        rate = math.log(factor) / dt

    pair = EigenPair(growth_rate=rate, iterations=iterations,
                     converged=converged, oscillating=oscillating,
                     oscillation_amplitude=amplitude, dt=dt)
    if which == "direct":
        pair.direct = x
        pair.residual_direct = residual
    else:
        pair.adjoint = x
        pair.residual_adjoint = residual
    return pair


def solve_eigenproblem(op: SemiDiscreteOperator, tol: float = 1e-10,
                       max_iter: int = 10**6, dt: float | None = None,
                       window: int | None = None,
                       residual_tol: float | None = 1e-8) -> EigenPair:
    """Direct and adjoint solves combined under the problem normalizations.

    The rate is taken from the direct solve; direct and adjoint rates must
    agree within ``10 * tol`` (relative).  The direct profile integrates to
    one and the adjoint is scaled so their pairing is one.
    """
    if dt is None:
        dt = op.dt_max()
    direct = power_iterate(op, "direct", tol=tol, max_iter=max_iter, dt=dt,
                           window=window, residual_tol=residual_tol)
    adjoint = power_iterate(op, "adjoint", tol=tol, max_iter=max_iter, dt=dt,
                            window=window, residual_tol=residual_tol)
    scale = max(abs(direct.growth_rate), abs(adjoint.growth_rate), 1.0)
    gap = abs(direct.growth_rate - adjoint.growth_rate)
    # a vector residual r (per unit time) shifts the recovered rate by O(r)
    allowed = 10.0 * tol * scale + 2.0 * (
        direct.residual_direct + adjoint.residual_adjoint
    )
    if direct.converged and adjoint.converged and gap > allowed:
        raise NumericsError(
            f"direct and adjoint rates disagree: {direct.growth_rate!r} vs "
            f"{adjoint.growth_rate!r}"
        )
    grid = op.grid
    n_vec = direct.direct / _weighted_total(grid, direct.direct)
    pairing = float((grid.weights[None, :] * n_vec * adjoint.adjoint).sum())
    if pairing <= 0:
        raise NumericsError("direct/adjoint pairing is not positive")
    phi = adjoint.adjoint / pairing
    return EigenPair(
        growth_rate=direct.growth_rate,
        direct=n_vec,
        adjoint=phi,
        residual_direct=direct.residual_direct,
        residual_adjoint=adjoint.residual_adjoint,
        iterations=direct.iterations + adjoint.iterations,
        converged=direct.converged and adjoint.converged,
        oscillating=direct.oscillating or adjoint.oscillating,
        oscillation_amplitude=max(direct.oscillation_amplitude,
                                  adjoint.oscillation_amplitude),
        dt=dt,
    )


def estimate_lambda_n(trajectory: Trajectory, t: float | None = None) -> float:
    """Regression slope of the log total number over [t/2, t]."""
    times = trajectory.times
    if t is None:
        t = float(times[-1])
    log_mass = trajectory.columns["log_mass"]
    sel = (times >= t / 2.0) & (times <= t * (1.0 + 1e-12))
    if sel.sum() < 10:
        raise ValueError(
            f"need at least 10 samples in [{t / 2:g}, {t:g}], have {int(sel.sum())}"
        )
    y = log_mass[sel]
    if not np.all(np.isfinite(y)):
        raise NumericsError("log total number undefined (zero or invalid mass)")
    slope, _ = np.polyfit(times[sel], y, 1)
    return float(slope)


def estimate_lambda_tau(state: Population, op: SemiDiscreteOperator) -> float:
    """Growth-moment over size-moment; equals the Malthus parameter on the
    steady profile (survival 1)."""
    denom = moment(state, op, "size")
    if denom <= 0:
        raise NumericsError("size moment vanishes")
    return moment(state, op, "growth") / denom


def estimate_lambda_gamma(state: Population, op: SemiDiscreteOperator) -> float:
    """Division-moment over number.

    Identifies the Malthus parameter only at survival probability 1; with a
    death factor p the stationary balance reads
    rate = (2p - 1) * division-moment / number.
    """
    denom = moment(state, op, "one")
    if denom <= 0:
        raise NumericsError("total number vanishes")
    return moment(state, op, "division") / denom


def averaged_estimate(trajectory: Trajectory, name: str,
                      tail_fraction: float = 0.25) -> float:
    """Mean of a recorded estimator over the trailing fraction of samples."""
    col = trajectory.columns[name]
    start = int(len(col) * (1.0 - tail_fraction))
    tail = col[start:]
    tail = tail[np.isfinite(tail)]
    if tail.size == 0:
        raise NumericsError(f"no finite samples in the tail of {name!r}")
    return float(tail.mean())
