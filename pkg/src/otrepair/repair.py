"""Design of the per-(u, s, feature) plan bank and its application.

:func:`design_repair_model` builds, from labelled research data, one uniform
support and barycentric target per (u, feature) and one transport plan per
(u, s, feature). :func:`repair_dataset` then repairs any labelled data with
those plans, one record at a time and without revisiting the research data.
:func:`geometric_repair` is the on-sample displacement baseline.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .density import (DiscreteDistribution, InterpolatedSupport,
                      build_support, kde_pmf, silverman_bandwidth)
from .exceptions import (DataValidationError, DegenerateRangeError,
                         EmptyCellError, SchemaMismatchError)
from .model import CELLS, Dataset, partition_groups
from .rng import BERNOULLI, COLUMN, RepairRng
from .transport import (TransportPlan, barycenter, monotone_coupling,
                        monotone_plan)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
PLAN_TOL = 1e-9
ROW_MASS_MIN = 1e-12


def schema_fingerprint(d: int, feature_names) -> str:
    payload = json.dumps({"d": int(d), "features": list(feature_names)})
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def resolve_n_states(n_states, d: int) -> np.ndarray:
    """Expand an ``n_Q`` specification into a (2, d) integer array.

    Accepts an int, a (2, d) array-like indexed ``[u, k]``, or a mapping
    ``{(u, k): n}`` (missing keys are an error).
    """
    if isinstance(n_states, dict):
        out = np.zeros((2, d), dtype=int)
        for u in (0, 1):
            for k in range(d):
                if (u, k) not in n_states:
                    raise DataValidationError(f"n_Q missing for (u={u}, k={k})")
                out[u, k] = n_states[(u, k)]
    else:
        arr = np.broadcast_to(np.asarray(n_states, dtype=float), (2, d))
        if not np.all(arr == np.round(arr)):
            raise DataValidationError("n_Q values must be integers")
        out = arr.astype(int)
    bad = np.argwhere(out < 2)
    if bad.size:
        u, k = bad[0]
        raise DataValidationError(f"n_Q must be >= 2 for (u={u}, k={k}), got {out[u, k]}")
    return out


@dataclass(frozen=True, eq=False)
class RepairModel:
    """Output of plan design: supports, targets and plans per stratum.

    Dictionaries are keyed ``(u, k)`` for supports, barycentres and
    ``(u, s, k)`` for bandwidths, source pmfs and plans.
    """

    d: int
    feature_names: tuple
    t: float
    supports: dict
    barycenters: dict
    bandwidths: dict
    source_pmfs: dict
    plans: dict
    provenance: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @property
    def fingerprint(self) -> str:
        return schema_fingerprint(self.d, self.feature_names)

    @property
    def n_states(self) -> np.ndarray:
        return np.array([[self.supports[(u, k)].n for k in range(self.d)] for u in (0, 1)])

    def check_invariants(self, tol: float = PLAN_TOL):
        """Raise ``ValueError`` naming the first plan whose marginals are off."""
        for u, s in CELLS:
            for k in range(self.d):
                plan = self.plans[(u, s, k)]
                src = self.source_pmfs[(u, s, k)].mass
                tgt = self.barycenters[(u, k)].mass
                if plan.values.size and plan.values.min() < 0:
                    i = int(np.argmin(plan.values))
                    raise ValueError(
                        f"plan (u={u}, s={s}, k={k}) has negative entry at "
                        f"(i={plan.rows[i]}, j={plan.cols[i]})"
                    )
                if np.max(np.abs(plan.row_marginal() - src)) > tol:
                    raise ValueError(f"plan (u={u}, s={s}, k={k}): row sums != source pmf")
                if np.max(np.abs(plan.col_marginal() - tgt)) > tol:
                    raise ValueError(f"plan (u={u}, s={s}, k={k}): column sums != barycentre")

    @cached_property
    def _samplers(self) -> dict:
        return {key: _RowSampler.from_plan(plan) for key, plan in self.plans.items()}

    def check_schema(self, data: Dataset):
        if data.d != self.d:
            raise SchemaMismatchError(f"data has {data.d} features, model expects {self.d}")
        if tuple(data.feature_names) != tuple(self.feature_names):
            raise SchemaMismatchError(
                f"feature names {data.feature_names} != model {self.feature_names}"
            )


@dataclass(frozen=True)
class _RowSampler:
    """Row-conditional CDFs of one plan, with zero rows redirected."""

    states: np.ndarray
    row_of: np.ndarray
    cdf: np.ndarray

    @classmethod
    def from_plan(cls, plan: TransportPlan):
        mass = plan.mass
        row_mass = mass.sum(axis=1)
        live = np.flatnonzero(row_mass >= ROW_MASS_MIN)
        n = row_mass.size
        # nearest live row, lower index on ties
        dist = np.abs(np.arange(n)[:, None] - live[None, :])
        row_of = live[np.argmin(dist, axis=1)]
        cdf = np.zeros_like(mass)
        cdf[live] = np.cumsum(mass[live], axis=1) / row_mass[live, None]
        cdf[live, -1] = 1.0
        return cls(plan.target_states, row_of, cdf)


@dataclass
class RepairReport:
    """Bookkeeping for one repair run."""

    n_records: int = 0
    clamped: dict = field(default_factory=dict)

    def add_clamps(self, key, count):
        if count:
            self.clamped[key] = self.clamped.get(key, 0) + int(count)

    def to_dict(self):
        return {
            "n_records": self.n_records,
            "clamped_total": int(sum(self.clamped.values())),
            "clamped": [
                {"u": u, "s": s, "k": k, "count": c}
                for (u, s, k), c in sorted(self.clamped.items())
            ],
        }


def _cell_bandwidth(values, fallback_values, key):
    try:
        return silverman_bandwidth(values)
    except DataValidationError:
        logger.warning(
            "cell (u=%d, s=%d, k=%d) has %d distinct value(s); using the "
            "bandwidth of the pooled group", *key, np.unique(values).size,
        )
        return silverman_bandwidth(fallback_values)


def design_repair_model(research: Dataset, n_states=50, t: float = 0.5,
                        provenance: dict | None = None) -> RepairModel:
    """Design the plan bank from (u, s)-labelled research data.

    For each group u and feature k the support spans the pooled (both s)
    research values; each s-conditional pmf is a Gaussian KDE on it; the
    target is the t-barycentre of the two pmfs; each plan is the optimal
    coupling of a pmf to the target.

    Parameters
    ----------
    research : Dataset
    n_states : int, (2, d) array-like or dict {(u, k): int}
        Number of support states ``n_Q``.
    t : float, default=0.5
        Position of the target on the geodesic from s=0 to s=1.
    provenance : dict, optional
        Extra metadata stored with the model.
    """
    if not 0.0 <= t <= 1.0:
        raise DataValidationError(f"t must lie in [0, 1], got {t!r}")
    groups = partition_groups(research)
    for u, s in CELLS:
        if len(groups[(u, s)]) == 0:
            raise EmptyCellError(f"research cell (u={u}, s={s}) is empty")
        if len(groups[(u, s)]) == 1:
            logger.warning("research cell (u=%d, s=%d) has a single record", u, s)
    nq = resolve_n_states(n_states, research.d)

    supports, targets, bws, pmfs, plans = {}, {}, {}, {}, {}
    for u in (0, 1):
        pooled = research.X[research.u == u]
        for k in range(research.d):
            try:
                support = build_support(pooled[:, k], nq[u, k])
            except DegenerateRangeError as exc:
                raise DegenerateRangeError(f"(u={u}, k={k}): {exc}") from None
            supports[(u, k)] = support
            for s in (0, 1):
                x = research.X[groups[(u, s)], k]
                bws[(u, s, k)] = _cell_bandwidth(x, pooled[:, k], (u, s, k))
                pmfs[(u, s, k)] = kde_pmf(x, support, bws[(u, s, k)])
            targets[(u, k)] = barycenter(pmfs[(u, 0, k)], pmfs[(u, 1, k)], t)
            for s in (0, 1):
                plans[(u, s, k)] = monotone_plan(pmfs[(u, s, k)], targets[(u, k)])

    meta = {"n_research": {f"{u}{s}": len(groups[(u, s)]) for u, s in CELLS}}
    meta.update(provenance or {})
    return RepairModel(
        d=research.d, feature_names=tuple(research.feature_names), t=float(t),
        supports=supports, barycenters=targets, bandwidths=bws,
        source_pmfs=pmfs, plans=plans, provenance=meta,
    )


def _repair_column(x, indices, u, s, k, model: RepairModel, rng: RepairRng):
    """Repair values of one (u, s, k) stratum. Returns (repaired, n_clamped)."""
    support = model.supports[(u, k)]
    sampler = model._samplers[(u, s, k)]
    states = support.states
    n = states.size
    clamped = np.count_nonzero((x < support.lo) | (x > support.hi))
    x = np.clip(x, support.lo, support.hi)
    q = np.clip(np.searchsorted(states, x, side="right") - 1, 0, n - 1)
    top = q == n - 1
    upper = states[np.minimum(q + 1, n - 1)]
    with np.errstate(invalid="ignore", divide="ignore"):
        tau = np.where(top, 0.0, (x - states[q]) / (upper - states[q]))
    step = rng.uniforms(u, s, k, BERNOULLI, indices) < tau
    row = sampler.row_of[q + step]
    draw = rng.uniforms(u, s, k, COLUMN, indices)
    cdf = sampler.cdf[row]
    col = np.minimum((cdf <= draw[:, None]).sum(axis=1), n - 1)
    return sampler.states[col], clamped


def repair_value(x: float, u: int, s: int, k: int, model: RepairModel,
                 rng: RepairRng, index: int = 0) -> float:
    """Randomized repair of a single feature value (record ``index``)."""
    if not np.isfinite(x):
        raise DataValidationError(f"cannot repair non-finite value {x!r}")
    out, _ = _repair_column(np.array([float(x)]), np.array([index]), int(u), int(s),
                            int(k), model, rng)
    return float(out[0])


def repair_dataset(data: Dataset, model: RepairModel, seed: int, *,
                   offset: int = 0, report: RepairReport | None = None) -> Dataset:
    """Repair every feature of every record; labels and order are kept.

    ``offset`` is the global index of ``data``'s first record, so a stream
    repaired batch by batch matches a single-shot repair with the same seed.
    Values outside a support are clamped to it and counted in ``report``.
    """
    if data.n == 0:
        return data.with_features(np.empty((0, model.d)))
    model.check_schema(data)
    rng = RepairRng(seed)
    out = np.array(data.X, dtype=float)
    groups = partition_groups(data)
    for (u, s), pos in groups.cells.items():
        if pos.size == 0:
            continue
        for k in range(model.d):
            vals, clamped = _repair_column(data.X[pos, k], pos + offset, u, s, k, model, rng)
            out[pos, k] = vals
            if report is not None:
                report.add_clamps((u, s, k), clamped)
    if report is not None:
        report.n_records += data.n
    return data.with_features(out)


def geometric_repair(research: Dataset, t: float = 0.5) -> Dataset:
    """On-sample displacement repair of the research points themselves.

    Per group u and feature k, the two empirical s-conditional measures are
    coupled optimally; each s=0 point moves to
    ``(1 - t) x0_i + t n0 sum_j pi_ij x1_j`` and each s=1 point to
    ``(1 - t) n1 sum_i pi_ij x0_i + t x1_j``.
    """
    groups = partition_groups(research)
    for u, s in CELLS:
        if len(groups[(u, s)]) == 0:
            raise EmptyCellError(f"research cell (u={u}, s={s}) is empty")
    out = np.array(research.X, dtype=float)
    for u in (0, 1):
        p0, p1 = groups[(u, 0)], groups[(u, 1)]
        n0, n1 = p0.size, p1.size
        for k in range(research.d):
            x0, x1 = research.X[p0, k], research.X[p1, k]
            o0, o1 = np.argsort(x0, kind="stable"), np.argsort(x1, kind="stable")
            rows, cols, pi = monotone_coupling(np.full(n0, 1.0 / n0), np.full(n1, 1.0 / n1))
            pull0 = np.bincount(rows, weights=pi * x1[o1][cols], minlength=n0)
            pull1 = np.bincount(cols, weights=pi * x0[o0][rows], minlength=n1)
            out[p0[o0], k] = (1 - t) * x0[o0] + n0 * t * pull0
            out[p1[o1], k] = n1 * (1 - t) * pull1 + t * x1[o1]
    return research.with_features(out)
