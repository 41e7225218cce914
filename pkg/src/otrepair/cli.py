"""Command-line interface: ``otrepair <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 data/validation error, 4 I/O error,
1 anything else. On failure a one-line JSON object
``{"error": <class>, "message": <text>}`` is written to stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .datagen import MixtureSpec, SweepSpec, run_monte_carlo, run_sweep
from .exceptions import OTRepairError
from .ingest import TabularSchema, frame_to_arrays, load_table, read_frames
from .metrics import DEFAULT_FLOOR, DEFAULT_GRID, conditional_fairness, disparate_impact
from .model import Dataset
from .persist import atomic_write_text, load_model, save_model
from .repair import RepairReport, design_repair_model, geometric_repair, repair_dataset

logger = logging.getLogger("otrepair")

DEFAULT_BATCH = 8192
EXIT_DATA, EXIT_IO, EXIT_OTHER = 3, 4, 1


def _parse_nq(value: str):
    """An int, or a JSON file/literal: a (2, d) list or {"u,k": n} mapping."""
    try:
        return int(value)
    except ValueError:
        pass
    path = Path(value)
    obj = json.loads(path.read_text() if path.exists() else value)
    if isinstance(obj, dict):
        return {tuple(int(p) for p in key.replace(" ", "").split(",")): int(n)
                for key, n in obj.items()}
    return obj


def _write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def _write_csv(path, frame):
    buf = io.StringIO()
    frame.to_csv(buf, index=False)
    atomic_write_text(path, buf.getvalue())


def cmd_design(args):
    schema = TabularSchema.from_file(args.schema)
    research = load_table(args.research, schema)
    provenance = {
        "seed": args.seed, "schema": schema.to_dict(), "research_file": str(args.research),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    model = design_repair_model(research, _parse_nq(args.nq), args.t, provenance)
    save_model(model, args.out)
    logger.info("designed %d plans on %d research records", len(model.plans), research.n)


def _model_schema(model) -> TabularSchema:
    cfg = model.provenance.get("schema")
    if cfg is None:
        # models designed through the API: features by name, s and u as 0/1 columns
        return TabularSchema.from_dict({
            "features": list(model.feature_names), "sensitive": {"column": "s"},
            "unprotected": {"column": "u"}, "missing_policy": "used"})
    return TabularSchema.from_dict(cfg)


def cmd_repair(args):
    model = load_model(args.model)
    schema = _model_schema(model)
    report = RepairReport()
    offset = 0
    out_path = Path(args.out)
    tmp = out_path.with_name(f".{out_path.name}.partial")
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            for df in read_frames(args.input, schema, chunksize=args.batch_size):
                X, s, u, _ = frame_to_arrays(df, schema, drop_missing=False)
                batch = Dataset(X, s, u, role="archive", feature_names=schema.features)
                repaired = repair_dataset(batch, model, args.seed, offset=offset, report=report)
                for k, name in enumerate(schema.features):
                    df[f"{name}_repaired"] = [repr(v) for v in repaired.X[:, k].tolist()]
                df.to_csv(fh, index=False, header=offset == 0)
                offset += len(df)
            fh.flush()
        tmp.replace(out_path)
    finally:
        if tmp.exists():
            tmp.unlink()
    if args.report:
        _write_json(args.report, {"model_fingerprint": model.fingerprint, "seed": args.seed,
                                  **report.to_dict()})
    if report.clamped:
        logger.warning("%d values outside the research range were clamped",
                       sum(report.clamped.values()))


def cmd_evaluate(args):
    schema = TabularSchema.from_file(args.schema)
    data = load_table(args.input, schema)
    report = conditional_fairness(data, args.grid, args.floor).to_dict()
    if args.predictions:
        frames = list(read_frames(args.input, schema))
        preds = np.concatenate([
            f.iloc[frame_to_arrays(f, schema)[3]][args.predictions].astype(int).to_numpy()
            for f in frames])
        report["disparate_impact"] = {
            f"u{u}": {"value": di.value, "fair": di.fair, "rate_s0": di.rate_s0,
                      "rate_s1": di.rate_s1}
            for u, di in disparate_impact(data, preds).items()
        }
    _write_json(args.out, report)


def _load_spec(path) -> tuple[MixtureSpec, dict]:
    cfg = json.loads(Path(path).read_text())
    extra = {key: cfg.pop(key) for key in ("n_states", "eval_grid_size") if key in cfg}
    return MixtureSpec.from_dict(cfg), extra


def cmd_simulate(args):
    spec, extra = _load_spec(args.spec)
    result = run_monte_carlo(spec, args.replications, extra.get("n_states", 50),
                             extra.get("eval_grid_size", DEFAULT_GRID), n_jobs=args.jobs)
    _write_csv(args.out, result.summary())
    print(result.table().to_string())


def cmd_sweep(args):
    spec, extra = _load_spec(args.spec)
    grid = [int(v) for v in args.grid.replace(" ", "").split(",") if v]
    sweep = SweepSpec(args.variable, grid, args.replications, spec,
                      extra.get("n_states", 50))
    curve = run_sweep(sweep, extra.get("eval_grid_size", DEFAULT_GRID), n_jobs=args.jobs)
    _write_csv(args.out, curve)


def cmd_baseline_geometric(args):
    schema = TabularSchema.from_file(args.schema)
    research = load_table(args.research, schema)
    repaired = geometric_repair(research, args.t)
    frame = pd.DataFrame(np.asarray(research.X), columns=list(schema.features))
    frame["s"], frame["u"] = research.s, research.u
    for k, name in enumerate(schema.features):
        frame[f"{name}_repaired"] = repaired.X[:, k]
    _write_csv(args.out, frame)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otrepair", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="design repair plans from research data")
    p.add_argument("--research", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--nq", default="50", help="int, or JSON file/literal per (u,k)")
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("repair", help="stream-repair a labelled CSV with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--batch-size", type=int, default=DEFAULT_BATCH)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("evaluate", help="conditional-dependence report for a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR)
    p.add_argument("--predictions", help="column of 0/1 predictions for disparate impact")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="Monte-Carlo study on a Gaussian mixture")
    p.add_argument("--spec", required=True)
    p.add_argument("--replications", type=int, default=20)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="sweep n_R or n_Q")
    p.add_argument("--spec", required=True)
    p.add_argument("--variable", required=True, choices=["nR", "nQ"])
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("baseline-geometric", help="on-sample geometric repair")
    p.add_argument("--research", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline_geometric)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
        return 0
    except (OTRepairError, json.JSONDecodeError, KeyError, TypeError) as exc:
        code, error = EXIT_DATA, exc
    except OSError as exc:
        code, error = EXIT_IO, exc
    except Exception as exc:  # noqa: BLE001 - last-resort reporting
        code, error = EXIT_OTHER, exc
    print(json.dumps({"error": type(error).__name__, "message": str(error)}), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
