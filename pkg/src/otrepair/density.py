"""Uniform interpolated supports and Gaussian-KDE pmfs on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .exceptions import DataValidationError, DegenerateRangeError

MASS_TOL = 1e-9
IQR_SCALE = 1.34
BANDWIDTH_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class InterpolatedSupport:
    """Uniform grid of ``n`` states from ``lo`` to ``hi`` inclusive."""

    states: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 1 or states.size < 2:
            raise ValueError("a support needs at least 2 states")
        if not np.all(np.diff(states) > 0):
            raise ValueError("support states must be strictly increasing")
        states = states.copy()
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def n(self) -> int:
        return self.states.size

    @property
    def lo(self) -> float:
        return float(self.states[0])

    @property
    def hi(self) -> float:
        return float(self.states[-1])

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, InterpolatedSupport):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.states, other.states)

    def __hash__(self):
        return hash((self.n, self.lo, self.hi))


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """A pmf on an :class:`InterpolatedSupport` (or any sorted 1-D support)."""

    support: InterpolatedSupport
    mass: np.ndarray

    def __post_init__(self):
        mass = np.array(self.mass, dtype=float)
        if mass.shape != (self.support.n,):
            raise ValueError(
                f"mass has shape {mass.shape}, support has {self.support.n} states"
            )
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("pmf weights must be finite and nonnegative")
        if abs(mass.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"pmf sums to {mass.sum()!r}, not 1")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @property
    def states(self):
        return self.support.states

    def mean(self) -> float:
        return float(self.states @ self.mass)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.mass)


def point_mass(support: InterpolatedSupport, index: int) -> DiscreteDistribution:
    mass = np.zeros(support.n)
    mass[index] = 1.0
    return DiscreteDistribution(support, mass)


def build_support(values, n_states: int) -> InterpolatedSupport:
    """Uniform grid of ``n_states`` points spanning ``min(values)..max(values)``.

    Raises
    ------
    DegenerateRangeError
        If all values are equal.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise DataValidationError("support values must be non-empty and finite")
    if int(n_states) != n_states or n_states < 2:
        raise DataValidationError(f"n_Q must be an integer >= 2, got {n_states!r}")
    n_states = int(n_states)
    lo, hi = values.min(), values.max()
    if not hi > lo:
        raise DegenerateRangeError(f"zero-range feature slice (all values = {lo})")
    i = np.arange(1, n_states + 1)
    # endpoint-exact convex combination, as opposed to lo + i * step
    states = (n_states - i) / (n_states - 1) * lo + (i - 1) / (n_states - 1) * hi
    states[0], states[-1] = lo, hi
    return InterpolatedSupport(states)


def silverman_bandwidth(values) -> float:
    """Silverman's rule of thumb, ``0.9 * min(std, IQR/1.34) * n**(-1/5)``.

    The sample standard deviation uses ``ddof=1``. When the IQR is zero the
    standard deviation is used alone. The result is floored at
    ``1e-6 * (max - min)``.
    """
    x = np.asarray(values, dtype=float).ravel()
    if np.unique(x).size < 2:
        raise DataValidationError("bandwidth needs at least 2 distinct values")
    sd = np.std(x, ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    iqr = (q75 - q25) / IQR_SCALE
    spread = min(sd, iqr) if iqr > 0 else sd
    h = 0.9 * spread * x.size ** (-0.2)
    return float(max(h, BANDWIDTH_FLOOR * (x.max() - x.min())))


def kde_log_weights(values, grid, h: float) -> np.ndarray:
    """Log of the unnormalized Gaussian-kernel sum at each grid point."""
    x = np.asarray(values, dtype=float).ravel()
    grid = np.asarray(grid, dtype=float)
    out = np.empty(grid.size)
    # chunk over samples-by-grid blocks to cap memory at ~4M doubles
    step = max(1, 4_000_000 // max(x.size, 1))
    for start in range(0, grid.size, step):
        z = (grid[start:start + step, None] - x[None, :]) / h
        out[start:start + step] = logsumexp(-0.5 * z * z, axis=1)
    return out


def kde_pmf(values, support: InterpolatedSupport, h: float) -> DiscreteDistribution:
    """Gaussian kernel evaluated at every support state, normalized to sum 1.

    Computed in log space, so the result is a valid pmf even when ``h`` is
    tiny relative to the distance between the data and the grid.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise DataValidationError("kde_pmf needs at least one value")
    if not h > 0:
        raise DataValidationError(f"bandwidth must be positive, got {h!r}")
    logw = kde_log_weights(values, support.states, h)
    w = np.exp(logw - logw.max())
    return DiscreteDistribution(support, w / w.sum())


def kde_density(values, grid, h: float) -> np.ndarray:
    """Normalized Gaussian KDE density ``(1/nh) sum phi((g - x)/h)`` at ``grid``.

    Far-tail values may underflow to 0.
    """
    x = np.asarray(values, dtype=float).ravel()
    grid = np.asarray(grid, dtype=float)
    out = np.empty(grid.size)
    step = max(1, 4_000_000 // max(x.size, 1))
    for start in range(0, grid.size, step):
        z = (grid[start:start + step, None] - x[None, :]) / h
        out[start:start + step] = np.exp(-0.5 * z * z).sum(axis=1)
    return out / (x.size * h * np.sqrt(2.0 * np.pi))
