"""Labelled records, datasets and (u, s) cell partitioning."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DataValidationError

ROLES = ("research", "archive")
CELLS = ((0, 0), (0, 1), (1, 0), (1, 1))


class LabeledRecord(NamedTuple):
    """One observation: feature vector plus binary sensitive (s) and
    unprotected (u) attributes."""

    features: Sequence[float]
    s: int
    u: int


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable column-oriented dataset.

    Parameters
    ----------
    X : ndarray of shape (n_samples, d)
        Finite feature matrix.
    s, u : ndarray of shape (n_samples,)
        Binary sensitive and unprotected attributes.
    role : {"research", "archive"}
    feature_names : tuple of str, optional
        Defaults to ``("x0", "x1", ...)``.
    """

    X: np.ndarray
    s: np.ndarray
    u: np.ndarray
    role: str = "research"
    feature_names: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "X", _frozen(np.asarray(self.X, dtype=float)))
        object.__setattr__(self, "s", _frozen(np.asarray(self.s, dtype=np.int8)))
        object.__setattr__(self, "u", _frozen(np.asarray(self.u, dtype=np.int8)))
        if not self.feature_names:
            names = tuple(f"x{k}" for k in range(self.d))
            object.__setattr__(self, "feature_names", names)
        else:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @classmethod
    def from_arrays(cls, X, s, u, role="research", feature_names=()):
        """Validate array inputs and build a dataset (see :func:`check_fair_inputs`)."""
        X, s, u = check_fair_inputs(X, s, u)
        if feature_names and len(feature_names) != X.shape[1]:
            raise DataValidationError(
                f"{len(feature_names)} feature names for {X.shape[1]} features"
            )
        return cls(X, s, u, role=role, feature_names=tuple(feature_names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def records(self) -> list[LabeledRecord]:
        return [
            LabeledRecord(tuple(x), int(s), int(u))
            for x, s, u in zip(self.X.tolist(), self.s, self.u)
        ]

    def subset(self, idx, role=None) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(
            self.X[idx], self.s[idx], self.u[idx],
            role=role or self.role, feature_names=self.feature_names,
        )

    def with_features(self, X) -> "Dataset":
        """Same labels and order, new feature values."""
        return Dataset(X, self.s, self.u, role=self.role,
                       feature_names=self.feature_names)

    def slice(self, u: int, s: int | None = None, k: int | None = None):
        """Rows of group u (and cell s, if given); column k if given."""
        mask = self.u == u
        if s is not None:
            mask &= self.s == s
        rows = self.X[mask]
        return rows if k is None else rows[:, k]


def check_fair_inputs(X, s, u, *, expected_d=None):
    """Validate a feature matrix and its binary attribute vectors.

    Returns float64 ``X`` and int8 ``s``, ``u``. Error messages name the
    offending record (and feature) index.
    """
    try:
        X = check_array(X, dtype=float, ensure_all_finite=False,
                        ensure_min_samples=0)
    except ValueError as exc:
        raise DataValidationError(str(exc)) from exc
    bad = np.argwhere(~np.isfinite(X))
    if bad.size:
        i, k = bad[0]
        raise DataValidationError(f"record {i}: feature {k} is not finite ({X[i, k]})")
    if expected_d is not None and X.shape[1] != expected_d:
        raise DataValidationError(f"expected {expected_d} features, got {X.shape[1]}")
    out = []
    for name, v in (("s", s), ("u", u)):
        v = np.asarray(v).ravel()
        if v.shape[0] != X.shape[0]:
            raise DataValidationError(
                f"{name} has {v.shape[0]} entries for {X.shape[0]} records"
            )
        bad = np.flatnonzero(~np.isin(v, (0, 1)))
        if bad.size:
            i = bad[0]
            raise DataValidationError(
                f"record {i}: attribute {name}={v[i]!r} outside {{0,1}}"
            )
        out.append(v.astype(np.int8))
    return X, out[0], out[1]


def validate_dataset(records: Iterable, expected_d: int, role="research",
                     feature_names=()) -> Dataset:
    """Build a :class:`Dataset` from ``LabeledRecord``-like triples.

    Raises :class:`DataValidationError` naming the first bad record.
    """
    records = list(records)
    if not records:
        raise DataValidationError("no records")
    if expected_d < 1:
        raise DataValidationError("expected_d must be >= 1")
    X = np.empty((len(records), expected_d))
    s = np.empty(len(records), dtype=np.int8)
    u = np.empty(len(records), dtype=np.int8)
    for i, rec in enumerate(records):
        feats, si, ui = rec
        feats = np.asarray(feats, dtype=float).ravel()
        if feats.shape[0] != expected_d:
            raise DataValidationError(
                f"record {i}: dimension {feats.shape[0]} != expected {expected_d}"
            )
        nonfinite = np.flatnonzero(~np.isfinite(feats))
        if nonfinite.size:
            raise DataValidationError(
                f"record {i}: feature {nonfinite[0]} is not finite"
            )
        for name, v in (("s", si), ("u", ui)):
            if v not in (0, 1):
                raise DataValidationError(
                    f"record {i}: attribute {name}={v!r} outside {{0,1}}"
                )
        X[i], s[i], u[i] = feats, si, ui
    return Dataset(X, s, u, role=role, feature_names=tuple(feature_names))


@dataclass(frozen=True)
class GroupIndex:
    """Record positions of each (u, s) cell, in dataset order."""

    cells: dict

    @property
    def counts(self) -> dict:
        return {key: len(pos) for key, pos in self.cells.items()}

    def __getitem__(self, key):
        return self.cells[key]

    def empty_cells(self) -> list:
        return [key for key, pos in self.cells.items() if len(pos) == 0]


def partition_groups(data: Dataset) -> GroupIndex:
    """Split record positions into the four (u, s) cells. Empty cells are kept."""
    cells = {}
    for u, s in CELLS:
        pos = np.flatnonzero((data.u == u) & (data.s == s))
        pos.setflags(write=False)
        cells[(u, s)] = pos
    return GroupIndex(cells)
