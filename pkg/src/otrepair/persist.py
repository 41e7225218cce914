"""Versioned JSON model files.

Floats are written with Python's shortest round-trip repr, so a saved model
loads back bit-exact. Plans are dense matrices up to ``DENSE_MAX_STATES``
states and sparse triplets above. Files are written to a temporary sibling,
fsync'ed and renamed into place.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .density import DiscreteDistribution, InterpolatedSupport
from .exceptions import ModelFormatError
from .model import CELLS
from .repair import FORMAT_VERSION, RepairModel
from .transport import TransportPlan

FORMAT_NAME = "otrepair.RepairModel"
DENSE_MAX_STATES = 64
LOAD_TOL = 1e-6


def atomic_write_text(path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _plan_to_dict(plan: TransportPlan) -> dict:
    if max(plan.shape) <= DENSE_MAX_STATES:
        return {"layout": "dense", "matrix": plan.mass.tolist()}
    return {"layout": "sparse", "shape": list(plan.shape), "rows": plan.rows.tolist(),
            "cols": plan.cols.tolist(), "values": plan.values.tolist()}


def model_to_dict(model: RepairModel) -> dict:
    strata = []
    for u in (0, 1):
        for k in range(model.d):
            cells = []
            for s in (0, 1):
                cells.append({
                    "s": s,
                    "bandwidth": model.bandwidths[(u, s, k)],
                    "source_pmf": model.source_pmfs[(u, s, k)].mass.tolist(),
                    "plan": _plan_to_dict(model.plans[(u, s, k)]),
                })
            strata.append({
                "u": u, "k": k,
                "states": model.supports[(u, k)].states.tolist(),
                "barycenter": model.barycenters[(u, k)].mass.tolist(),
                "cells": cells,
            })
    return {
        "format": FORMAT_NAME,
        "version": model.format_version,
        "fingerprint": model.fingerprint,
        "d": model.d,
        "feature_names": list(model.feature_names),
        "t": model.t,
        "provenance": model.provenance,
        "strata": strata,
    }


def save_model(model: RepairModel, path):
    """Write ``model`` to ``path`` atomically. Non-finite numbers are rejected."""
    try:
        text = json.dumps(model_to_dict(model), allow_nan=False, indent=1)
    except ValueError as exc:
        raise ModelFormatError(f"model contains non-finite values: {exc}") from exc
    atomic_write_text(path, text)


def _plan_from_dict(obj, states, where) -> TransportPlan:
    layout = obj.get("layout")
    if layout == "dense":
        mass = np.asarray(obj["matrix"], dtype=float)
        if mass.shape != (states.size, states.size):
            raise ModelFormatError(f"plan {where} has shape {mass.shape}")
        neg = np.argwhere(mass < 0)
        if neg.size:
            i, j = neg[0]
            raise ModelFormatError(f"plan {where} has negative entry at (i={i}, j={j})")
        return TransportPlan.from_dense(states, states, mass)
    if layout == "sparse":
        rows = np.asarray(obj["rows"], dtype=np.intp)
        cols = np.asarray(obj["cols"], dtype=np.intp)
        vals = np.asarray(obj["values"], dtype=float)
        if not rows.shape == cols.shape == vals.shape:
            raise ModelFormatError(f"plan {where} triplet lengths differ")
        n = states.size
        if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
            raise ModelFormatError(f"plan {where} index out of range")
        neg = np.flatnonzero(vals < 0)
        if neg.size:
            i = neg[0]
            raise ModelFormatError(
                f"plan {where} has negative entry at (i={rows[i]}, j={cols[i]})")
        return TransportPlan(states, states, rows, cols, vals)
    raise ModelFormatError(f"plan {where} has unknown layout {layout!r}")


def model_from_dict(obj) -> RepairModel:
    if not isinstance(obj, dict) or obj.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a repair model file")
    if obj.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"model format version {obj.get('version')!r}, expected {FORMAT_VERSION}")
    try:
        d = int(obj["d"])
        supports, targets, bws, pmfs, plans = {}, {}, {}, {}, {}
        for stratum in obj["strata"]:
            u, k = int(stratum["u"]), int(stratum["k"])
            support = InterpolatedSupport(np.asarray(stratum["states"], dtype=float))
            supports[(u, k)] = support
            targets[(u, k)] = DiscreteDistribution(support, stratum["barycenter"])
            for cell in stratum["cells"]:
                s = int(cell["s"])
                where = f"(u={u}, s={s}, k={k})"
                bws[(u, s, k)] = float(cell["bandwidth"])
                pmfs[(u, s, k)] = DiscreteDistribution(support, cell["source_pmf"])
                plans[(u, s, k)] = _plan_from_dict(cell["plan"], support.states, where)
        expected = {(u, s, k) for u, s in CELLS for k in range(d)}
        if set(plans) != expected:
            raise ModelFormatError("model file is missing strata")
        model = RepairModel(
            d=d, feature_names=tuple(obj["feature_names"]), t=float(obj["t"]),
            supports=supports, barycenters=targets, bandwidths=bws,
            source_pmfs=pmfs, plans=plans, provenance=obj.get("provenance", {}),
        )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupted model file: {exc}") from exc
    if obj.get("fingerprint") != model.fingerprint:
        raise ModelFormatError("schema fingerprint does not match feature names")
    try:
        model.check_invariants(LOAD_TOL)
    except ValueError as exc:
        raise ModelFormatError(f"corrupted model file: {exc}") from exc
    return model


def load_model(path) -> RepairModel:
    """Read and revalidate a model file. Never returns a partial model."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"unreadable model file: {exc}") from exc
    return model_from_dict(obj)
