"""Plot-ready CSV output and a reader that checks files against their schemas."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .engine import EnsembleResult
from .landscape import write_snapshot
from .params import ConfigError
from .scenario import ALL_KINDS

SCHEMAS = {
    "timeseries": ("year", "variable", "mean", "stderr"),
    "scenarios": ("portfolio_id", "policies", "delta_forest_pct", "delta_degraded_pct"),
    "portfolio_legend": ("portfolio_id",) + tuple(k.name for k in ALL_KINDS),
    "rankings": ("objective", "rank", "portfolio_id", "delta_forest_pct", "delta_degraded_pct", "in_both"),
    "sweep": ("rho", "portfolio_id", "delta_forest_pct", "delta_degraded_pct"),
    "threshold": ("rho_star",),
    "fit": ("parameter", "value"),
    "runs": ("seed", "year", "variable", "value"),
    "snapshot": ("x", "y", "land_use", "management", "epsilon"),
    "drivers": ("year", "population", "income_per_capita", "organic_share_crop", "organic_share_pasture"),
}
# columns that must parse as numbers ("nan" allowed for undefined values)
_NUMERIC = {"year", "mean", "stderr", "delta_forest_pct", "delta_degraded_pct", "rank", "rho", "value",
            "x", "y", "epsilon", "seed", "population", "income_per_capita", "organic_share_crop",
            "organic_share_pasture", "rho_star"} | {k.name for k in ALL_KINDS}


def fmt(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.9g}"


def _write(path: Path, header, rows) -> Path:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([x if isinstance(x, str) else fmt(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def write_timeseries(ens: EnsembleResult, path) -> Path:
    rows = ((int(y), var, ens.mean[i, j], ens.stderr[i, j])
            for i, y in enumerate(ens.years) for j, var in enumerate(ens.columns))
    return _write(Path(path), SCHEMAS["timeseries"], rows)


def write_runs(ens: EnsembleResult, path) -> Path:
    if ens.runs is None:
        raise ValueError("ensemble was run without keep_runs")
    rows = ((int(s), int(y), var, ens.runs[r, i, j]) for r, s in enumerate(ens.seeds)
            for i, y in enumerate(ens.years) for j, var in enumerate(ens.columns))
    return _write(Path(path), SCHEMAS["runs"], rows)


def portfolio_ids(results) -> list:
    return [f"P{i:04d}" for i in range(1, len(results) + 1)]


def write_scenarios(results, path, ids=None) -> Path:
    ids = ids or portfolio_ids(results)
    rows = ((pid, r.portfolio.label, r.delta_forest_pct, r.delta_degraded_pct) for pid, r in zip(ids, results))
    return _write(Path(path), SCHEMAS["scenarios"], rows)


def write_legend(results, path, ids=None) -> Path:
    """Composition matrix: magnitude of each policy kind in each portfolio (0 when absent)."""
    ids = ids or portfolio_ids(results)
    rows = []
    for pid, r in zip(ids, results):
        mags = {s.kind: s.magnitude for s in r.portfolio.policies}
        rows.append([pid] + [mags.get(k, 0.0) for k in ALL_KINDS])
    return _write(Path(path), SCHEMAS["portfolio_legend"], rows)


def write_rankings(ranking, path, ids) -> Path:
    pid = {id(r): i for r, i in zip(ranking.results, ids)}
    both = {id(r) for r in ranking.both}
    rows = []
    for objective, lst in (("forest", ranking.by_forest), ("degraded", ranking.by_degraded)):
        for rank, r in enumerate(lst, 1):
            rows.append([objective, rank, pid[id(r)], r.delta_forest_pct, r.delta_degraded_pct, id(r) in both])
    return _write(Path(path), SCHEMAS["rankings"], rows)


def write_sweep(sweep, path, ids) -> Path:
    rows = ((rho, pid, r.delta_forest_pct, r.delta_degraded_pct) for rho, pid, r in zip(sweep.rhos, ids, sweep.results))
    return _write(Path(path), SCHEMAS["sweep"], rows)


def write_threshold(rho_star, path) -> Path:
    return _write(Path(path), SCHEMAS["threshold"], [[rho_star]])


def write_fit(fit, path) -> Path:
    rows = [[k, v] for k, v in fit.params.items()] + [["rss", fit.rss]]
    return _write(Path(path), SCHEMAS["fit"], rows)


def write_snapshots(snapshots: dict, out_dir) -> list:
    paths = []
    for year, ls in sorted(snapshots.items()):
        p = Path(out_dir) / f"snapshot_{year}.csv"
        try:
            write_snapshot(ls, p)
        except OSError as exc:
            raise OSError(f"cannot write {p}: {exc.strerror}") from exc
        paths.append(p)
    return paths


def emit_results(out_dir, baseline: EnsembleResult | None = None, scenarios=None, snapshots=None) -> list:
    """Write timeseries.csv, scenarios.csv + portfolio_legend.csv (only when scenarios exist)
    and snapshot_<year>.csv files; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    written = []
    if baseline is not None:
        written.append(write_timeseries(baseline, out / "timeseries.csv"))
    if scenarios:
        ids = portfolio_ids(scenarios)
        written.append(write_scenarios(scenarios, out / "scenarios.csv", ids))
        written.append(write_legend(scenarios, out / "portfolio_legend.csv", ids))
    if snapshots:
        written.extend(write_snapshots(snapshots, out))
    return written


def schema_for(header) -> str | None:
    for name, cols in SCHEMAS.items():
        if tuple(header) == cols:
            return name
    return None


def validate_csv(path) -> tuple[str, int]:
    """Check a CSV against the known schemas; returns (schema, data rows)."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows:
        raise ConfigError(f"{path}: empty file")
    name = schema_for(rows[0])
    if name is None:
        raise ConfigError(f"{path}: unrecognized header {','.join(rows[0])}")
    cols = SCHEMAS[name]
    for n, row in enumerate(rows[1:], 2):
        if len(row) != len(cols):
            raise ConfigError(f"{path}:{n}: expected {len(cols)} fields, got {len(row)}")
        for col, v in zip(cols, row):
            if col in _NUMERIC:
                try:
                    float(v)
                except ValueError:
                    raise ConfigError(f"{path}:{n}: column {col} is not numeric: {v!r}") from None
    return name, len(rows) - 1
