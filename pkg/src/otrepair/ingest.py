"""CSV loading with schema-driven attribute derivation, and research/archive splits."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DataValidationError, EmptyCellError
from .model import Dataset, check_fair_inputs, partition_groups

logger = logging.getLogger(__name__)

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "income",
]


@dataclass(frozen=True)
class AttributeRule:
    """Derive a 0/1 attribute from one column.

    Exactly one of ``equals`` (value or list of values mapped to 1) and
    ``min`` (numeric threshold, ``>=`` maps to 1) may be set; with neither,
    the column must already hold 0/1.
    """

    column: str
    equals: object = None
    min: float | None = None

    def __post_init__(self):
        if self.equals is not None and self.min is not None:
            raise DataValidationError(f"rule for {self.column!r}: set equals or min, not both")

    def apply(self, values: pd.Series) -> np.ndarray:
        if self.equals is not None:
            targets = self.equals if isinstance(self.equals, (list, tuple)) else [self.equals]
            targets = {str(t).strip() for t in targets}
            return values.astype(str).str.strip().isin(targets).to_numpy(np.int8)
        numeric = pd.to_numeric(values, errors="coerce")
        if numeric.isna().any():
            row = int(np.flatnonzero(numeric.isna().to_numpy())[0])
            raise DataValidationError(
                f"row {row}: column {self.column!r} value {values.iloc[row]!r} is not numeric")
        if self.min is not None:
            return (numeric >= self.min).to_numpy(np.int8)
        out = numeric.to_numpy()
        bad = np.flatnonzero(~np.isin(out, (0, 1)))
        if bad.size:
            raise DataValidationError(
                f"row {bad[0]}: attribute {self.column!r}={out[bad[0]]!r} outside {{0,1}}")
        return out.astype(np.int8)


@dataclass(frozen=True)
class TabularSchema:
    """Which columns are features and how s and u are derived.

    ``missing_policy`` is ``"any"`` (drop a row if any column is missing) or
    ``"used"`` (only feature and attribute columns count). ``columns`` names
    the fields of header-less files.
    """

    features: tuple
    sensitive: AttributeRule
    unprotected: AttributeRule
    missing_marker: str = "?"
    missing_policy: str = "any"
    columns: tuple | None = None
    bad_row_tolerance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise DataValidationError("schema must keep at least one feature")
        if self.missing_policy not in ("any", "used"):
            raise DataValidationError("missing_policy must be 'any' or 'used'")
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def used_columns(self) -> list:
        return [*self.features, self.sensitive.column, self.unprotected.column]

    @classmethod
    def from_dict(cls, cfg: dict) -> "TabularSchema":
        cfg = dict(cfg)
        for name in ("sensitive", "unprotected"):
            rule = cfg[name]
            cfg[name] = AttributeRule(**rule) if isinstance(rule, dict) else AttributeRule(rule)
        return cls(**cfg)

    @classmethod
    def from_file(cls, path) -> "TabularSchema":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["features"] = list(self.features)
        if self.columns is not None:
            out["columns"] = list(self.columns)
        return out


# s = 1 for males; u = 1 for Bachelors or above (education-num >= 13)
ADULT_SCHEMA = TabularSchema(
    features=("age", "hours-per-week"),
    sensitive=AttributeRule("sex", equals="Male"),
    unprotected=AttributeRule("education-num", min=13),
    columns=tuple(ADULT_COLUMNS),
)


def _has_header(path, schema: TabularSchema) -> bool:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("|"):
                names = {c.strip() for c in line.split(",")}
                # any known column name marks a header; missing ones are reported later
                return bool(names & set(schema.used_columns)) or schema.columns is None
    return True


def read_frames(path, schema: TabularSchema, chunksize: int | None = None):
    """Yield raw DataFrames (all columns as strings) from a CSV file.

    Leading spaces are stripped, lines starting with ``|`` are skipped, and
    header-less files take their column names from ``schema.columns``.
    """
    header = _has_header(path, schema)
    if not header and schema.columns is None:
        raise DataValidationError(f"{path}: no header row and schema gives no column names")
    reader = pd.read_csv(
        path, header=0 if header else None, names=None if header else list(schema.columns),
        skipinitialspace=True, comment="|", dtype=str, keep_default_na=False,
        chunksize=chunksize, skip_blank_lines=True,
    )
    frames = [reader] if chunksize is None else reader
    for df in frames:
        df.columns = [str(c).strip() for c in df.columns]
        missing = [c for c in schema.used_columns if c not in df.columns]
        if missing:
            raise DataValidationError(f"{path}: missing columns {missing}")
        yield df


def frame_to_arrays(df: pd.DataFrame, schema: TabularSchema, *, drop_missing=True):
    """Derive ``(X, s, u, kept_rows)`` from a raw frame.

    With ``drop_missing`` rows holding the missing marker are dropped per the
    schema policy; otherwise they raise.
    """
    cols = df.columns if schema.missing_policy == "any" else schema.used_columns
    is_missing = (df[list(cols)].apply(lambda c: c.str.strip()) == schema.missing_marker)
    is_missing |= df[list(cols)].isna()
    missing_rows = is_missing.any(axis=1).to_numpy()
    if missing_rows.any():
        if not drop_missing:
            used_missing = is_missing[schema.used_columns].any(axis=1).to_numpy()
            if used_missing.any():
                row = int(np.flatnonzero(used_missing)[0])
                raise DataValidationError(f"row {row}: missing value in a used column")
            missing_rows[:] = False
    kept = np.flatnonzero(~missing_rows)
    df = df.iloc[kept]
    X = df[list(schema.features)].apply(pd.to_numeric, errors="coerce").to_numpy(float)
    bad = ~np.isfinite(X).all(axis=1)
    if bad.any():
        frac = bad.mean()
        if frac > schema.bad_row_tolerance or not drop_missing:
            row = int(kept[np.flatnonzero(bad)[0]])
            raise DataValidationError(
                f"row {row}: unparseable feature value ({bad.sum()} bad rows, "
                f"{frac:.2%} > tolerance {schema.bad_row_tolerance:.2%})")
        logger.warning("dropping %d unparseable rows", int(bad.sum()))
        X, df, kept = X[~bad], df[~bad], kept[~bad]
    s = schema.sensitive.apply(df[schema.sensitive.column])
    u = schema.unprotected.apply(df[schema.unprotected.column])
    X, s, u = check_fair_inputs(X, s, u)
    return X, s, u, kept


def load_table(paths, schema: TabularSchema, role: str = "research") -> Dataset:
    """Load and concatenate one or more CSV files into a :class:`Dataset`."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    parts = []
    for path in paths:
        for df in read_frames(path, schema):
            parts.append(frame_to_arrays(df, schema)[:3])
    if not parts:
        raise DataValidationError("no input files")
    X = np.vstack([p[0] for p in parts])
    s = np.concatenate([p[1] for p in parts])
    u = np.concatenate([p[2] for p in parts])
    return Dataset(X, s, u, role=role, feature_names=schema.features)


def load_adult(paths, schema: TabularSchema = ADULT_SCHEMA) -> Dataset:
    """Adult income data (train and test files concatenated, missing rows dropped)."""
    return load_table(paths, schema)


def split_research_archive(data: Dataset, n_research: int, seed: int,
                           max_tries: int = 100):
    """Uniformly random research/archive split with all research cells non-empty.

    Both parts keep the input order. Attempt ``a`` uses generator
    ``(seed, a)``, so the split is deterministic per seed.
    """
    if not 0 < n_research < data.n:
        raise DataValidationError(f"n_R={n_research} must lie strictly between 0 and {data.n}")
    for attempt in range(max_tries):
        rng = np.random.default_rng([int(seed), attempt])
        chosen = np.zeros(data.n, dtype=bool)
        chosen[rng.choice(data.n, size=n_research, replace=False)] = True
        research = data.subset(np.flatnonzero(chosen), role="research")
        if not partition_groups(research).empty_cells():
            archive = data.subset(np.flatnonzero(~chosen), role="archive")
            return research, archive
    raise EmptyCellError(f"no split with all research cells non-empty in {max_tries} tries")
