"""Synthetic (u, s)-conditional Gaussian populations and Monte-Carlo studies.

The defaults of :class:`MixtureSpec` are the two-feature benchmark: means
(-1,-1), (0,0), (1,1), (0,0) for cells (u,s) = (0,0), (0,1), (1,0), (1,1),
identity covariances, Pr[u=0] = 0.5, Pr[s=0|u] = (0.3, 0.1), 500 research
and 5000 archival records.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .exceptions import DataValidationError, EmptyCellError, OTRepairError
from .metrics import DEFAULT_GRID, conditional_fairness
from .model import CELLS, Dataset, partition_groups
from .repair import design_repair_model, geometric_repair, repair_dataset

logger = logging.getLogger(__name__)

MAX_RESAMPLES = 1000


def _default_means():
    return {(0, 0): [-1.0, -1.0], (0, 1): [0.0, 0.0],
            (1, 0): [1.0, 1.0], (1, 1): [0.0, 0.0]}


@dataclass
class MixtureSpec:
    """Population ``x | s, u ~ N(mean[u, s], cov[u, s])`` with Bernoulli u and s|u."""

    means: dict = field(default_factory=_default_means)
    covs: dict | None = None
    p_u0: float = 0.5
    p_s0_given_u: tuple = (0.3, 0.1)
    n_research: int = 500
    n_archive: int = 5000
    seed: int = 0

    def __post_init__(self):
        self.means = {tuple(map(int, key)): np.asarray(m, dtype=float)
                      for key, m in self.means.items()}
        if set(self.means) != set(CELLS):
            raise DataValidationError("means must be given for all four (u, s) cells")
        dims = {m.shape for m in self.means.values()}
        if len(dims) != 1 or len(next(iter(dims))) != 1:
            raise DataValidationError("all means must be vectors of the same length")
        d = self.d
        if self.covs is None:
            self.covs = {key: np.eye(d) for key in CELLS}
        else:
            self.covs = {tuple(map(int, key)): np.asarray(c, dtype=float)
                         for key, c in self.covs.items()}
        for key, c in self.covs.items():
            if c.shape != (d, d) or not np.allclose(c, c.T):
                raise DataValidationError(f"covariance {key} must be symmetric {d}x{d}")
            if np.linalg.eigvalsh(c).min() <= 0:
                raise DataValidationError(f"covariance {key} is not positive-definite")
        probs = (self.p_u0, *self.p_s0_given_u)
        if len(self.p_s0_given_u) != 2 or not all(0.0 <= p <= 1.0 for p in probs):
            raise DataValidationError("probabilities must lie in [0, 1]")
        if self.n_research < 4 or self.n_archive < 0:
            raise DataValidationError("need n_research >= 4 and n_archive >= 0")

    @property
    def d(self) -> int:
        return next(iter(self.means.values())).shape[0]

    def cell_probabilities(self) -> dict:
        pu = (self.p_u0, 1.0 - self.p_u0)
        return {(u, s): pu[u] * (self.p_s0_given_u[u] if s == 0 else 1 - self.p_s0_given_u[u])
                for u, s in CELLS}

    @classmethod
    def from_dict(cls, cfg: dict) -> "MixtureSpec":
        cfg = dict(cfg)
        for name in ("means", "covs"):
            if cfg.get(name) is not None:
                cfg[name] = {_cell_key(k): v for k, v in cfg[name].items()}
        if "p_s0_given_u" in cfg:
            cfg["p_s0_given_u"] = tuple(cfg["p_s0_given_u"])
        return cls(**cfg)

    def to_dict(self) -> dict:
        return {
            "means": {f"{u}{s}": m.tolist() for (u, s), m in self.means.items()},
            "covs": {f"{u}{s}": c.tolist() for (u, s), c in self.covs.items()},
            "p_u0": self.p_u0, "p_s0_given_u": list(self.p_s0_given_u),
            "n_research": self.n_research, "n_archive": self.n_archive, "seed": self.seed,
        }


def _cell_key(key):
    if isinstance(key, str):
        digits = [c for c in key if c in "01"]
        if len(digits) != 2:
            raise DataValidationError(f"bad cell key {key!r}; use e.g. '01' for u=0, s=1")
        return int(digits[0]), int(digits[1])
    return tuple(map(int, key))


def _draw(spec: MixtureSpec, n: int, rng: np.random.Generator):
    u = (rng.random(n) >= spec.p_u0).astype(np.int8)
    p_s0 = np.asarray(spec.p_s0_given_u)[u]
    s = (rng.random(n) >= p_s0).astype(np.int8)
    X = np.empty((n, spec.d))
    for key in CELLS:
        mask = (u == key[0]) & (s == key[1])
        X[mask] = rng.multivariate_normal(spec.means[key], spec.covs[key],
                                          size=int(mask.sum()))
    return X, s, u


def sample_mixture(spec: MixtureSpec, rng=None, on_empty: str = "resample"):
    """Ancestral sample of ``n_research + n_archive`` records, split at random.

    Parameters
    ----------
    rng : Generator, int or None
        Defaults to ``spec.seed``.
    on_empty : {"resample", "error"}
        What to do when a research cell comes out empty.

    Returns
    -------
    research, archive : Dataset
    """
    if on_empty not in ("resample", "error"):
        raise ValueError("on_empty must be 'resample' or 'error'")
    impossible = [key for key, p in spec.cell_probabilities().items() if p == 0]
    if impossible:
        raise EmptyCellError(f"cells {impossible} have zero probability")
    rng = np.random.default_rng(spec.seed if rng is None else rng)
    n = spec.n_research + spec.n_archive
    names = tuple(f"x{k}" for k in range(spec.d))
    for _ in range(MAX_RESAMPLES):
        X, s, u = _draw(spec, n, rng)
        perm = rng.permutation(n)
        r_idx, a_idx = perm[:spec.n_research], perm[spec.n_research:]
        research = Dataset(X[r_idx], s[r_idx], u[r_idx], "research", names)
        empty = partition_groups(research).empty_cells()
        if not empty:
            archive = Dataset(X[a_idx], s[a_idx], u[a_idx], "archive", names)
            return research, archive
        if on_empty == "error":
            raise EmptyCellError(f"research cells {empty} empty after sampling")
    raise EmptyCellError(f"research cells still empty after {MAX_RESAMPLES} resamples")


def _concat(a: Dataset, b: Dataset) -> Dataset:
    return Dataset(np.vstack([a.X, b.X]), np.concatenate([a.s, b.s]),
                   np.concatenate([a.u, b.u]), "research", a.feature_names)


def _child_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint64)[0])


def run_replication(spec: MixtureSpec, n_states, seed_seq, eval_grid_size=DEFAULT_GRID,
                    geometric=True, data=None) -> dict:
    """One sample-design-repair-measure cycle; returns FairnessReports by name.

    Keys: ``research``, ``archive`` (unrepaired), ``research_dist``,
    ``archive_dist``, ``composite_dist``, and ``research_geom`` when asked.
    """
    data_ss, repair_ss = seed_seq.spawn(2)
    if data is None:
        data = sample_mixture(spec, np.random.default_rng(data_ss))
    research, archive = data
    model = design_repair_model(research, n_states)
    repair_seed = _child_seed(repair_ss)
    r_rep = repair_dataset(research, model, repair_seed)
    # archive indices continue after the research block
    a_rep = repair_dataset(archive, model, repair_seed, offset=research.n)

    def fair(ds):
        return conditional_fairness(ds, eval_grid_size)

    out = {
        "research": fair(research), "archive": fair(archive),
        "research_dist": fair(r_rep), "archive_dist": fair(a_rep),
        "composite_dist": fair(_concat(r_rep, a_rep)),
    }
    if geometric:
        out["research_geom"] = fair(geometric_repair(research))
    return out


@dataclass
class MonteCarloResult:
    """Per-replication ``E_k`` values in long form plus the summary table."""

    records: pd.DataFrame
    feature_names: tuple

    VARIANTS = (("none", "research", "research"), ("none", "archive", "archive"),
                ("distributional", "research", "research_dist"),
                ("distributional", "archive", "archive_dist"),
                ("geometric", "research", "research_geom"))

    def summary(self) -> pd.DataFrame:
        """Mean and standard deviation of ``E_k`` by repair, dataset and feature."""
        g = self.records.groupby(["repair", "dataset", "feature"], sort=False)["E"]
        return g.agg(mean="mean", sd="std", n="count").reset_index()

    def table(self) -> pd.DataFrame:
        """Rows none/distributional/geometric, columns dataset x feature, 'mean ± sd'."""
        summ = self.summary()
        cols = [f"{ds}:{f}" for ds in ("research", "archive") for f in self.feature_names]
        table = pd.DataFrame("-", index=["none", "distributional", "geometric"], columns=cols)
        for row in summ.itertuples():
            sd = 0.0 if np.isnan(row.sd) else row.sd
            table.loc[row.repair, f"{row.dataset}:{row.feature}"] = f"{row.mean:.4g} ± {sd:.2g}"
        return table

    def wide(self) -> pd.DataFrame:
        """One row per replication, one column per (repair, dataset, feature)."""
        return self.records.pivot_table(
            index="replication", columns=["repair", "dataset", "feature"], values="E")


def run_monte_carlo(spec: MixtureSpec, replications: int = 20, n_states=50,
                    eval_grid_size: int = DEFAULT_GRID, n_jobs: int = 1) -> MonteCarloResult:
    """Repeat the simulation study; replication r uses seed ``(spec.seed, r)``."""
    if replications < 1:
        raise DataValidationError("replications must be >= 1")

    def one(r):
        try:
            reports = run_replication(spec, n_states,
                                      np.random.SeedSequence([spec.seed, r]), eval_grid_size)
        except OTRepairError as exc:
            raise type(exc)(f"replication {r}: {exc}") from exc
        rows = []
        for repair, dataset, key in MonteCarloResult.VARIANTS:
            for name, e in zip(reports[key].feature_names, reports[key].E_k):
                rows.append((r, repair, dataset, name, float(e)))
        return rows

    results = Parallel(n_jobs=n_jobs)(delayed(one)(r) for r in range(replications))
    records = pd.DataFrame([row for rows in results for row in rows],
                           columns=["replication", "repair", "dataset", "feature", "E"])
    return MonteCarloResult(records, tuple(f"x{k}" for k in range(spec.d)))


@dataclass
class SweepSpec:
    """Vary ``n_R`` (research size) or ``n_Q`` (support size) over a grid."""

    variable: str
    grid: list
    replications: int = 10
    mixture: MixtureSpec = field(default_factory=MixtureSpec)
    n_states: int = 50

    def __post_init__(self):
        aliases = {"nR": "n_R", "nQ": "n_Q"}
        self.variable = aliases.get(self.variable, self.variable)
        if self.variable not in ("n_R", "n_Q"):
            raise DataValidationError("sweep variable must be n_R or n_Q")
        self.grid = [int(v) for v in self.grid]
        if not self.grid:
            raise DataValidationError("sweep grid is empty")
        floor = 4 if self.variable == "n_R" else 2
        if min(self.grid) < floor:
            raise DataValidationError(f"{self.variable} grid values must be >= {floor}")
        if self.replications < 1:
            raise DataValidationError("replications must be >= 1")


CURVE_COLUMNS = ["variable", "value", "replications",
                 "research_mean", "research_sd", "archive_mean", "archive_sd",
                 "composite_mean", "composite_sd",
                 "archive_unrepaired_mean", "archive_unrepaired_sd"]


def run_sweep(spec: SweepSpec, eval_grid_size: int = DEFAULT_GRID,
              n_jobs: int = 1) -> pd.DataFrame:
    """Aggregate ``E`` (summed over features) of repaired data along a grid.

    For an ``n_Q`` sweep each replication reuses one sample across the grid.
    """
    def one(r):
        rows = []
        if spec.variable == "n_Q":
            data = sample_mixture(spec.mixture,
                                  np.random.default_rng([spec.mixture.seed, r]))
            for v in spec.grid:
                rep = run_replication(spec.mixture, v,
                                      np.random.SeedSequence([spec.mixture.seed, r, v]),
                                      eval_grid_size, geometric=False, data=data)
                rows.append((v, rep))
        else:
            for v in spec.grid:
                mix = replace(spec.mixture, n_research=v)
                rep = run_replication(mix, spec.n_states,
                                      np.random.SeedSequence([spec.mixture.seed, r, v]),
                                      eval_grid_size, geometric=False)
                rows.append((v, rep))
        return [(v, r, rep["research_dist"].aggregate, rep["archive_dist"].aggregate,
                 rep["composite_dist"].aggregate, rep["archive"].aggregate)
                for v, rep in rows]

    results = Parallel(n_jobs=n_jobs)(delayed(one)(r) for r in range(spec.replications))
    raw = pd.DataFrame([row for rows in results for row in rows],
                       columns=["value", "replication", "research", "archive",
                                "composite", "archive_unrepaired"])
    g = raw.groupby("value", sort=False)
    curve = pd.DataFrame({
        "variable": spec.variable,
        "value": spec.grid,
        "replications": g.size().reindex(spec.grid).to_numpy(),
    })
    for col in ("research", "archive", "composite", "archive_unrepaired"):
        curve[f"{col}_mean"] = g[col].mean().reindex(spec.grid).to_numpy()
        curve[f"{col}_sd"] = g[col].std().reindex(spec.grid).to_numpy()
    return curve[CURVE_COLUMNS]
