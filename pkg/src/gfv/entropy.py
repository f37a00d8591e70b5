"""Relative-entropy diagnostics and long-time behavior classification.

All quantities are evaluated in the renormalized frame (densities rescaled
by exp(-growth_rate * t)); raw exponentially growing magnitudes are never
used.  The ratio convention at nodes where the steady profile vanishes is
0/0 = 0, valid only when the density vanishes there too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SupportError
from .grid import Grid
from .operator import SemiDiscreteOperator


@dataclass(frozen=True)
class EntropyFunction:
    """Convex profile H for the relative entropy.

    kinds: ``square`` u^2, ``abs`` |u|, ``clipped_square`` (|u| - level)^2
    restricted to the part above the clip level.  Only ``square`` has the
    derivative needed by the dissipation formula.
    """

    kind: str
    level: float = 0.0

    def __post_init__(self):
        if self.kind not in ("square", "abs", "clipped_square"):
            raise ValueError(f"unknown entropy kind {self.kind!r}")

    def value(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "square":
            return u * u
        if self.kind == "abs":
            return np.abs(u)
        excess = np.maximum(np.abs(u) - self.level, 0.0)
        return excess * excess

    def derivative(self, u: np.ndarray) -> np.ndarray:
        if self.kind != "square":
            raise ValueError(f"dissipation requires the square entropy, not {self.kind!r}")
        return 2.0 * u


SQUARE = EntropyFunction("square")
ABS = EntropyFunction("abs")


@dataclass
class BehaviorVerdict:
    """Long-time classification of a recorded series."""

    kind: str                      # "converged" | "oscillating" | "undecided"
    period: float | None = None
    final_distance: float | None = None
    amplitude: float = 0.0

    def __post_init__(self):
        if self.kind not in ("converged", "oscillating", "undecided"):
            raise ValueError(f"unknown verdict {self.kind!r}")


def _ratio_to_profile(values: np.ndarray, profile: np.ndarray,
                      what: str) -> np.ndarray:
    """values / profile with 0/0 = 0; error if values live off the support."""
    values = np.asarray(values, dtype=float)
    if values.shape != profile.shape:
        raise ValueError(f"shape mismatch {values.shape} vs {profile.shape}")
    dead = profile <= 0.0
    if np.any(dead & (values != 0.0)):
        raise SupportError(
            f"{what} is nonzero at nodes where the steady profile vanishes"
        )
    return np.divide(values, profile, out=np.zeros_like(values), where=~dead)


def gre(values: np.ndarray, pair, grid: Grid,
        entropy_function: EntropyFunction = SQUARE) -> float:
    """General relative entropy of a renormalized-frame density.

    sum over features and nodes of w * adjoint * profile * H(density/profile).
    """
    u = _ratio_to_profile(values, pair.direct, "density")
    integrand = pair.adjoint * pair.direct * entropy_function.value(u)
    return float((grid.weights[None, :] * integrand).sum())


def dissipation(values: np.ndarray, pair, op: SemiDiscreteOperator,
                entropy_function: EntropyFunction = SQUARE) -> float:
    """Entropy dissipation for the square entropy (nonnegative).

    Discrete transcription of the jump form: for every coupled pair
    (mother feature j at node m+k, daughter feature i at node m),
    4p * w_m * adjoint_i(m) * kernel[j,i] * gamma_j(m+k) * profile_j(m+k)
        * (u_j(m+k) - u_i(m))^2,
    with u the density-to-profile ratio and the same gain coefficient as the
    assembled operator.
    """
    if entropy_function.kind != "square":
        raise ValueError("dissipation is defined here for the square entropy")
    grid = op.grid
    k = grid.resolution
    u = _ratio_to_profile(values, pair.direct, "density")
    w_low = grid.weights[: grid.size - k]
    source = (op.division * pair.direct)[:, k:]      # (j, m+k) over daughters' m
    total = 0.0
    m_count = grid.size - k
    for i in range(op.feature_count):
        phi_i = pair.adjoint[i, :m_count]
        u_i = u[i, :m_count]
        for j in range(op.feature_count):
            weight = op.kernel_matrix[j, i]
            if weight <= 0.0:
                continue
            diff = u[j, k:] - u_i
            total += float(
                (w_low * phi_i * weight * source[j] * diff * diff).sum()
            )
    return op.gain_scale * total


def rho_weight(state, pair, grid: Grid) -> float:
    """Pairing of the initial data with the adjoint vector (true scale)."""
    true_values = state.values * math.exp(state.log_scale)
    return float((grid.weights[None, :] * true_values * pair.adjoint).sum())


def l1_phi_distance(values: np.ndarray, pair, grid: Grid, rho: float) -> float:
    """Adjoint-weighted L1 distance of a renormalized density to rho * profile."""
    gap = np.abs(values - rho * pair.direct)
    return float((grid.weights[None, :] * gap * pair.adjoint).sum())


def detect_oscillation(times: np.ndarray, series: np.ndarray,
                       window: float) -> BehaviorVerdict:
    """Classify the trailing window of a series.

    Converged when the relative swing is at most 0.1%; oscillating when the
    detrended autocorrelation has a secondary peak of at least 0.5 at a
    positive lag, the relative swing is at least 1%, and at least four
    periods fit in the window; undecided otherwise.  These thresholds are
    artifact conventions, reported with the verdict.
    """
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    if times.shape != series.shape:
        raise ValueError("times and series must have equal length")
    sel = times >= times[-1] - window
    if sel.sum() < 8:
        raise ValueError(
            f"window {window:g} holds only {int(sel.sum())} samples; need >= 8"
        )
    y = series[sel]
    t = times[sel]
    scale = float(np.abs(y).mean())
    amplitude = float(y.max() - y.min()) / 2.0
    rel_amp = amplitude / scale if scale > 0 else 0.0
    if rel_amp <= 1e-3:
        return BehaviorVerdict("converged", amplitude=rel_amp)

    centered = y - y.mean()
    acf = np.correlate(centered, centered, mode="full")[centered.size - 1 :]
    # unbiased estimator: the raw sum over n - lag terms tapers linearly
    # with the lag and would drag the peak one sample early
    acf = acf / np.arange(centered.size, 0, -1)
    if acf[0] <= 0:
        return BehaviorVerdict("undecided", amplitude=rel_amp)
    acf = acf / acf[0]
    sample_dt = float(np.median(np.diff(t)))
    period = None
    for lag in range(1, acf.size - 1):
        if acf[lag] >= 0.5 and acf[lag - 1] <= acf[lag] >= acf[lag + 1]:
            a, b, c = acf[lag - 1], acf[lag], acf[lag + 1]
            curve = a - 2 * b + c
            offset = 0.5 * (a - c) / curve if curve != 0 else 0.0
            period = (lag + offset) * sample_dt
            break
    if period is not None and rel_amp >= 1e-2 and 4 * period <= window:
        return BehaviorVerdict("oscillating", period=period, amplitude=rel_amp)
    return BehaviorVerdict("undecided", period=period, amplitude=rel_amp)
