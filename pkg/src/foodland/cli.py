"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 model error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import export
from .calibrate import fit_demand_params
from .config import RunConfig, dump_config, load_config, load_scenarios
from .demand import Drivers, builtin_drivers, load_drivers_csv
from .engine import run
from .params import ConfigError, ModelError
from .scenario import Experiment, Portfolio, PolicySpec, default_pool, demand_sweep, enumerate_and_rank

log = logging.getLogger("foodland")

EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_IO = 0, 2, 3, 4


def parse_grid(text: str) -> np.ndarray:
    """'a:b:step' -> a, a+step, ..., b (inclusive, rounded to 9 digits)."""
    try:
        a, b, s = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"sweep grid must be a:b:step, got {text!r}") from None
    if s <= 0 or b < a:
        raise ConfigError("sweep grid needs step > 0 and b >= a")
    n = int(np.floor((b - a) / s + 1e-9)) + 1
    return np.round(a + s * np.arange(n), 9)


def parse_pool(text: str | None):
    """Comma-separated policy kinds, each optionally 'Kind=magnitude'; default is all eight at 0.1."""
    if not text:
        return default_pool()
    specs = []
    for item in text.split(","):
        name, _, mag = item.partition("=")
        specs.append(PolicySpec(name, float(mag) if mag else 0.10))
    return specs


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.runs is not None:
        cfg.n_runs = args.runs
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.drivers is not None:
        cfg.drivers = args.drivers
    if getattr(args, "scenario", None):
        cfg.scenario = args.scenario
    return cfg.validate()


def _drivers(cfg: RunConfig) -> Drivers:
    if cfg.drivers == "builtin":
        return builtin_drivers(curves=cfg.curves)
    try:
        return load_drivers_csv(cfg.drivers)
    except FileNotFoundError as exc:
        raise OSError(f"cannot read drivers {cfg.drivers}: {exc.strerror}") from exc


def _experiment(cfg, args) -> Experiment:
    return Experiment(cfg.params, _drivers(cfg), cfg.n_runs, cfg.master_seed, workers=args.workers)


def _out(cfg) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    (out / "config_effective.yaml").write_text(dump_config(cfg))
    return out


def cmd_run(args) -> int:
    cfg = _resolve(args)
    ex = _experiment(cfg, args)
    t0 = time.perf_counter()
    base = ex.baseline
    log.info("baseline: %d runs in %.1fs", cfg.n_runs, time.perf_counter() - t0)
    out = _out(cfg)
    snaps = {}
    if cfg.snapshots:
        snaps = run(cfg.params, ex.drivers, seed=int(ex.seeds[0]), snapshot_years=cfg.snapshots).snapshots
    export.emit_results(out, baseline=base, snapshots=snaps)
    if cfg.per_run:
        from .engine import ensemble_forcing, prepare
        export.write_runs(ensemble_forcing(prepare(cfg.params, ex.drivers), ex.seeds, keep_runs=True),
                          out / "runs.csv")
    print(f"forest 2100: {base.at('area_forest', cfg.params.end_year):.1f}  "
          f"degraded 2100: {base.at('area_degraded', cfg.params.end_year):.1f}")
    return EXIT_OK


def _scenario_list(cfg):
    if not cfg.scenario:
        raise ConfigError("no scenario file given (use --scenario or the config's 'scenario' key)")
    return load_scenarios(cfg.scenario)


def cmd_scenario(args) -> int:
    cfg = _resolve(args)
    items = _scenario_list(cfg)
    ex = _experiment(cfg, args)
    results = []
    for name, pf in items:
        r = ex.scenario(pf)
        log.info("%s: %s -> forest %+.2f%%, degraded %+.2f%%", name, pf.label, r.delta_forest_pct,
                 r.delta_degraded_pct)
        results.append(r)
    export.emit_results(_out(cfg), baseline=ex.baseline, scenarios=results)
    for (name, _), r in zip(items, results):
        print(f"{name}\t{r.portfolio.label}\t{r.delta_forest_pct:+.2f}\t{r.delta_degraded_pct:+.2f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    base = _scenario_list(cfg)[0][1] if cfg.scenario else Portfolio()
    grid = parse_grid(args.sweep_grid)
    ex = _experiment(cfg, args)
    sw = demand_sweep(base, grid, ex)
    out = _out(cfg)
    ids = export.portfolio_ids(sw.results)
    export.emit_results(out, baseline=ex.baseline, scenarios=sw.results)
    export.write_sweep(sw, out / "sweep.csv", ids)
    export.write_threshold(sw.rho_star, out / "threshold.csv")
    for rho, r in zip(sw.rhos, sw.results):
        print(f"rho={rho:g}\t{r.delta_forest_pct:+.2f}\t{r.delta_degraded_pct:+.2f}")
    print("rho*: " + ("none" if sw.rho_star is None else f"{sw.rho_star:.3f}"))
    return EXIT_OK


def cmd_portfolio(args) -> int:
    cfg = _resolve(args)
    pool = parse_pool(args.pool)
    ex = _experiment(cfg, args)
    t0 = time.perf_counter()
    ranking = enumerate_and_rank(pool, ex, top_k=args.top)
    log.info("%d portfolios in %.1fs", len(ranking.results), time.perf_counter() - t0)
    out = _out(cfg)
    ids = export.portfolio_ids(ranking.results)
    export.emit_results(out, baseline=ex.baseline, scenarios=ranking.results)
    export.write_rankings(ranking, out / "rankings.csv", ids)
    pid = {id(r): i for r, i in zip(ranking.results, ids)}
    for title, lst in (("top by forest", ranking.by_forest), ("top by degraded", ranking.by_degraded)):
        print(title)
        for k, r in enumerate(lst, 1):
            mark = "*" if ranking.in_both(r) else " "
            print(f"{k:3d}{mark} {pid[id(r)]} {r.delta_forest_pct:+7.2f} {r.delta_degraded_pct:+7.2f}  "
                  f"{r.portfolio.label}")
    return EXIT_OK


def _read_fit_table(path):
    cols = ("income_per_capita", "calories_per_capita", "meat_per_capita")
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows or tuple(h.strip() for h in rows[0]) != cols:
        raise ConfigError(f"{path}: header must be {','.join(cols)}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric value ({exc})") from None
    if data.ndim != 2 or data.shape[1] != 3:
        raise ConfigError(f"{path}: no data rows")
    return data.T


def cmd_fit(args) -> int:
    income, cal, meat = _read_fit_table(args.data)
    fit = fit_demand_params(income, cal, meat)
    for k, v in fit.params.items():
        print(f"{k} = {v:.9g}")
    print(f"rss = {fit.rss:.9g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        export.write_fit(fit, out / "fit.csv")
    return EXIT_OK


def cmd_validate(args) -> int:
    bad = 0
    for p in args.paths:
        path = Path(p)
        files = sorted(path.glob("*.csv")) + sorted(path.glob("*.yaml")) if path.is_dir() else [path]
        if not files:
            raise OSError(f"no files to validate in {path}")
        for f in files:
            try:
                if f.suffix in (".yaml", ".yml"):
                    load_config(f)
                    print(f"ok   {f}  config")
                else:
                    name, n = export.validate_csv(f)
                    print(f"ok   {f}  {name} ({n} rows)")
            except ConfigError as exc:
                bad += 1
                print(f"FAIL {exc}")
    return EXIT_CONFIG if bad else EXIT_OK


def cmd_snapshot(args) -> int:
    cfg = _resolve(args)
    years = cfg.snapshots
    if args.years:
        try:
            years = sorted({int(y) for y in args.years.split(",")})
        except ValueError:
            raise ConfigError(f"--years must be a comma-separated list of years, got {args.years!r}") from None
    if not years:
        years = [cfg.params.start_year, cfg.params.policy_year, cfg.params.end_year]
    cfg.snapshots = years
    cfg.validate()
    seed = int(np.random.SeedSequence(cfg.master_seed).generate_state(1, np.uint32)[0])
    rec = run(cfg.params, _drivers(cfg), seed=seed, snapshot_years=years)
    paths = export.write_snapshots(rec.snapshots, _out(cfg))
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--drivers", help="driver CSV path or 'builtin'")
    common.add_argument("--runs", type=int, help="ensemble size (default 500)")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--out", help="output directory (default results)")
    common.add_argument("--workers", type=int, default=None, help="worker threads (default: all cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="foodland", description="Food-land system simulator and policy scenarios.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="baseline ensemble").set_defaults(func=cmd_run)
    p = sub.add_parser("scenario", parents=[common], help="policy scenarios from a file")
    p.add_argument("--scenario", help="scenario YAML file")
    p.set_defaults(func=cmd_scenario)
    p = sub.add_parser("sweep", parents=[common], help="demand-reduction sweep")
    p.add_argument("--scenario", help="base portfolio (first scenario in the file)")
    p.add_argument("--sweep-grid", default="0:1:0.1", help="a:b:step (default 0:1:0.1)")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("portfolio", parents=[common], help="enumerate and rank policy mixes")
    p.add_argument("--pool", help="comma-separated kinds, optionally Kind=m (default: all eight at 0.1)")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_portfolio)
    p = sub.add_parser("fit", help="fit demand parameters from a CSV")
    p.add_argument("data", help="CSV with income_per_capita,calories_per_capita,meat_per_capita")
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_fit)
    p = sub.add_parser("validate", help="check emitted CSV files or configs")
    p.add_argument("paths", nargs="+")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("snapshot", parents=[common], help="per-cell landscape snapshots of one run")
    p.add_argument("--years", help="comma-separated years (default start, policy and end year)")
    p.set_defaults(func=cmd_snapshot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
