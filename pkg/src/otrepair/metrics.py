"""Conditional-dependence fairness measures.

``E[u, k]`` is the symmetrized Kullback-Leibler divergence between the s=0
and s=1 densities of feature k within group u, each density a Gaussian KDE.
``E_k`` weights the groups by their empirical frequency. Lower is fairer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .density import kde_density, silverman_bandwidth
from .exceptions import DataValidationError
from .model import CELLS, Dataset

logger = logging.getLogger(__name__)

DEFAULT_GRID = 1024
DEFAULT_FLOOR = 1e-12
PAD_BANDWIDTHS = 3.0
DI_THRESHOLD = 0.8


def kld_grid(sample0, sample1, h0, h1, size):
    lo = min(np.min(sample0), np.min(sample1)) - PAD_BANDWIDTHS * max(h0, h1)
    hi = max(np.max(sample0), np.max(sample1)) + PAD_BANDWIDTHS * max(h0, h1)
    return np.linspace(lo, hi, int(size))


def symmetrized_kld(sample0, sample1, eval_grid_size: int = DEFAULT_GRID,
                    floor: float = DEFAULT_FLOOR, bandwidths=None) -> float:
    """``KL(f0||f1)/2 + KL(f1||f0)/2`` of Gaussian-KDE densities.

    Densities are evaluated on ``eval_grid_size`` uniform points spanning both
    samples padded by three bandwidths, floored at ``floor``, and integrated
    by the trapezoidal rule. Written as ``(f0 - f1) log(f0 / f1) / 2`` the
    integrand is pointwise nonnegative and exactly symmetric in the samples.

    Parameters
    ----------
    bandwidths : (float, float), optional
        KDE bandwidths for the two samples; Silverman's rule by default.
    """
    x0 = np.asarray(sample0, dtype=float).ravel()
    x1 = np.asarray(sample1, dtype=float).ravel()
    for name, x in (("sample0", x0), ("sample1", x1)):
        if np.unique(x).size < 2:
            raise DataValidationError(f"{name} needs at least 2 distinct values")
    if eval_grid_size < 2 or not floor > 0:
        raise DataValidationError("eval_grid_size must be >= 2 and floor > 0")
    if bandwidths is None:
        h0, h1 = silverman_bandwidth(x0), silverman_bandwidth(x1)
    else:
        h0, h1 = map(float, bandwidths)
    grid = kld_grid(x0, x1, h0, h1, eval_grid_size)
    f0 = np.maximum(kde_density(x0, grid, h0), floor)
    f1 = np.maximum(kde_density(x1, grid, h1), floor)
    integrand = (f0 - f1) * (np.log(f0) - np.log(f1))
    return float(0.5 * trapezoid(integrand, grid))


@dataclass
class FairnessReport:
    """Per-(u, k) dependence ``E[u, k]`` (NaN where undefined) and summaries."""

    E: np.ndarray
    weights: np.ndarray
    counts: dict
    feature_names: tuple
    settings: dict = field(default_factory=dict)

    @property
    def E_k(self) -> np.ndarray:
        """Group-frequency weighted ``E`` per feature, over defined groups."""
        defined = ~np.isnan(self.E)
        w = self.weights[:, None] * defined
        total = w.sum(axis=0)
        with np.errstate(invalid="ignore"):
            return np.where(total > 0, np.nansum(self.E * w, axis=0) / total, np.nan)

    @property
    def aggregate(self) -> float:
        """Sum of ``E_k`` over features."""
        return float(np.nansum(self.E_k))

    def to_dict(self) -> dict:
        def num(v):
            return None if math.isnan(v) else float(v)

        return {
            "features": list(self.feature_names),
            "E_uk": [[num(v) for v in row] for row in self.E],
            "E_k": {name: num(v) for name, v in zip(self.feature_names, self.E_k)},
            "E": self.aggregate,
            "pr_u": [float(w) for w in self.weights],
            "counts": {f"u{u}_s{s}": int(c) for (u, s), c in sorted(self.counts.items())},
            "settings": self.settings,
        }


def conditional_fairness(data: Dataset, eval_grid_size: int = DEFAULT_GRID,
                         floor: float = DEFAULT_FLOOR) -> FairnessReport:
    """Measure ``E[u, k]`` for every group and feature of ``data``.

    Entries whose cells are empty or constant are NaN, logged, and left out
    of ``E_k`` (the remaining group weights are renormalized).
    """
    counts = {(u, s): int(np.count_nonzero((data.u == u) & (data.s == s))) for u, s in CELLS}
    n = max(data.n, 1)
    weights = np.array([np.count_nonzero(data.u == u) / n for u in (0, 1)])
    E = np.full((2, data.d), np.nan)
    for u in (0, 1):
        for k in range(data.d):
            x0, x1 = data.slice(u, 0, k), data.slice(u, 1, k)
            try:
                E[u, k] = symmetrized_kld(x0, x1, eval_grid_size, floor)
            except DataValidationError as exc:
                logger.warning("E undefined for (u=%d, k=%d): %s", u, k, exc)
    settings = {"eval_grid_size": int(eval_grid_size), "floor": float(floor),
                "bandwidth": "silverman"}
    return FairnessReport(E, weights, counts, tuple(data.feature_names), settings)


@dataclass(frozen=True)
class DisparateImpact:
    """Ratio of positive-prediction rates, s=0 over s=1, within one group."""

    u: int
    rate_s0: float
    rate_s1: float

    @property
    def value(self) -> float | None:
        if not self.rate_s1 > 0 or math.isnan(self.rate_s0):
            return None
        return self.rate_s0 / self.rate_s1

    @property
    def defined(self) -> bool:
        return self.value is not None

    @property
    def fair(self) -> bool | None:
        v = self.value
        return None if v is None else v > DI_THRESHOLD


def disparate_impact(data: Dataset, preds) -> dict:
    """Disparate impact per group u from externally supplied 0/1 predictions."""
    preds = np.asarray(preds).ravel()
    if preds.shape[0] != data.n:
        raise DataValidationError(f"{preds.shape[0]} predictions for {data.n} records")
    if not np.all(np.isin(preds, (0, 1))):
        raise DataValidationError("predictions must be 0/1")
    out = {}
    for u in (0, 1):
        rates = []
        for s in (0, 1):
            mask = (data.u == u) & (data.s == s)
            if not mask.any():
                raise DataValidationError(f"cell (u={u}, s={s}) is empty")
            rates.append(float(preds[mask].mean()))
        out[u] = DisparateImpact(u, *rates)
    return out
