"""Exact optimal transport between discrete measures on the real line.

The production solver is the monotone (north-west corner on CDF levels)
coupling, which is optimal for any cost ``|x - y|**p`` with ``p >= 1``.
:func:`lp_oracle_plan` solves the same transportation problem as a dense
linear program and exists to check it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog

from .density import MASS_TOL, DiscreteDistribution
from .exceptions import MarginalMismatchError, OracleSizeError

ORACLE_MAX_STATES = 64


@dataclass(frozen=True)
class CostSpec:
    """Ground cost ``|x - y| ** p``."""

    p: int = 2

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"cost exponent must be an integer >= 1, got {self.p!r}")

    def matrix(self, x, y) -> np.ndarray:
        return np.abs(np.subtract.outer(np.asarray(x, float), np.asarray(y, float))) ** self.p


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Coupling stored as sparse triplets over ``source_states x target_states``."""

    source_states: np.ndarray
    target_states: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for name in ("source_states", "target_states", "values"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        for name in ("rows", "cols"):
            a = np.array(getattr(self, name), dtype=np.intp)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def from_dense(cls, source_states, target_states, mass, tol=0.0):
        mass = np.asarray(mass, dtype=float)
        rows, cols = np.nonzero(mass > tol)
        return cls(source_states, target_states, rows, cols, mass[rows, cols])

    @property
    def shape(self):
        return (self.source_states.size, self.target_states.size)

    @property
    def nnz(self) -> int:
        return self.values.size

    @cached_property
    def mass(self) -> np.ndarray:
        dense = np.zeros(self.shape)
        np.add.at(dense, (self.rows, self.cols), self.values)
        dense.setflags(write=False)
        return dense

    def row_marginal(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.values, minlength=self.shape[0])

    def col_marginal(self) -> np.ndarray:
        return np.bincount(self.cols, weights=self.values, minlength=self.shape[1])

    def is_staircase(self) -> bool:
        """True if no two support cells cross (i < i' with j > j')."""
        order = np.lexsort((self.cols, self.rows))
        c = self.cols[order]
        return bool(np.all(np.diff(c) >= 0))


def monotone_coupling(a, b):
    """Triplets ``(rows, cols, values)`` of the CDF-matching coupling of two
    weight vectors given in sorted-location order.

    Both vectors must carry the same total mass (within ``MASS_TOL``).
    Zero-weight atoms never receive mass.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ta, tb = a.sum(), b.sum()
    if abs(ta - tb) > MASS_TOL:
        raise MarginalMismatchError(f"source mass {ta!r} != target mass {tb!r}")
    ca, cb = np.cumsum(a), np.cumsum(b)
    top = min(ca[-1], cb[-1])
    levels = np.union1d(ca, cb)
    levels = levels[levels < top]
    levels = np.append(levels, top)
    widths = np.diff(levels, prepend=0.0)
    keep = widths > 0
    levels, widths = levels[keep], widths[keep]
    rows = np.minimum(np.searchsorted(ca, levels, side="left"), a.size - 1)
    cols = np.minimum(np.searchsorted(cb, levels, side="left"), b.size - 1)
    # adjacent levels can share a cell when a cumsum rounds differently
    cell = rows * b.size + cols
    uniq, inverse = np.unique(cell, return_inverse=True)
    vals = np.bincount(inverse, weights=widths)
    return uniq // b.size, uniq % b.size, vals


def monotone_plan(mu: DiscreteDistribution, nu: DiscreteDistribution,
                  cost: CostSpec | None = None) -> TransportPlan:
    """Optimal plan between two pmfs on sorted 1-D supports.

    The monotone coupling does not depend on ``cost`` for any ``p >= 1``;
    the argument is accepted for symmetry with :func:`lp_oracle_plan`.
    Runs in time linear in the support sizes (after a merge of CDF levels).
    """
    rows, cols, vals = monotone_coupling(mu.mass, nu.mass)
    return TransportPlan(mu.states, nu.states, rows, cols, vals)


def transport_cost(plan: TransportPlan, cost: CostSpec | None = None) -> float:
    """Expected ground cost ``sum_ij C(x_i, y_j) * pi_ij``."""
    p = (cost or CostSpec()).p
    d = np.abs(plan.source_states[plan.rows] - plan.target_states[plan.cols])
    return float(np.sum(d ** p * plan.values))


def wasserstein_p(mu: DiscreteDistribution, nu: DiscreteDistribution, p: int = 2) -> float:
    cost = CostSpec(p)
    return transport_cost(monotone_plan(mu, nu), cost) ** (1.0 / p)


def quantile_atoms(mu0: DiscreteDistribution, mu1: DiscreteDistribution):
    """Merge the CDF levels of two pmfs.

    Returns ``(x0, x1, mass)``: for each level interval, the quantile of each
    input and the interval width. Zero-mass intervals are dropped.
    """
    rows, cols, vals = monotone_coupling(mu0.mass, mu1.mass)
    return mu0.states[rows], mu1.states[cols], vals


def barycenter(mu0: DiscreteDistribution, mu1: DiscreteDistribution,
               t: float = 0.5) -> DiscreteDistribution:
    """Point ``t`` of the W2 geodesic from ``mu0`` to ``mu1``, on their shared grid.

    Quantile functions are interpolated, ``(1 - t) F0^-1 + t F1^-1``; each
    resulting atom is then split linearly between its two neighbouring grid
    states, so on-grid atoms are kept exactly.
    """
    if mu0.support != mu1.support:
        raise ValueError("barycenter needs both pmfs on the same support")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t!r}")
    states = mu0.states
    x0, x1, w = quantile_atoms(mu0, mu1)
    # x0 + t (x1 - x0) is exact where the quantiles agree and at t = 0
    x = x1 if t == 1.0 else x0 + t * (x1 - x0)
    return DiscreteDistribution(mu0.support, split_onto_grid(x, w, states))


def split_onto_grid(x, w, states) -> np.ndarray:
    """Linear mass-splitting of weighted atoms onto a sorted grid."""
    x = np.clip(np.asarray(x, dtype=float), states[0], states[-1])
    n = states.size
    lo = np.clip(np.searchsorted(states, x, side="right") - 1, 0, n - 2)
    left, right = states[lo], states[lo + 1]
    frac = (x - left) / (right - left)
    out = np.bincount(lo, weights=w * (1.0 - frac), minlength=n)
    out += np.bincount(lo + 1, weights=w * frac, minlength=n)
    return out


def lp_oracle_plan(mu: DiscreteDistribution, nu: DiscreteDistribution,
                   cost: CostSpec | None = None) -> TransportPlan:
    """Reference solver: the transportation LP solved densely by HiGHS simplex."""
    cost = cost or CostSpec()
    n, m = mu.mass.size, nu.mass.size
    if max(n, m) > ORACLE_MAX_STATES:
        raise OracleSizeError(f"oracle limited to {ORACLE_MAX_STATES} states, got {max(n, m)}")
    if abs(mu.mass.sum() - nu.mass.sum()) > MASS_TOL:
        raise MarginalMismatchError("source and target masses differ")
    C = cost.matrix(mu.states, nu.states)
    a_rows = np.kron(np.eye(n), np.ones((1, m)))
    a_cols = np.kron(np.ones((1, n)), np.eye(m))
    res = linprog(
        C.ravel(),
        A_eq=np.vstack([a_rows, a_cols]),
        b_eq=np.concatenate([mu.mass, nu.mass]),
        bounds=(0, None),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10,
                 "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"LP oracle failed: {res.message}")
    mass = np.clip(res.x.reshape(n, m), 0.0, None)
    return TransportPlan.from_dense(mu.states, nu.states, mass)
