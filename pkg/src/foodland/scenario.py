"""Policy transforms, scenario ensembles, demand-reduction sweeps and portfolio ranking."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .demand import Drivers
from .engine import EnsembleResult, PrefixCache, delta_vs_baseline, ensemble_forcing, prepare, run_seeds
from .params import ConfigError, ModelParams


class PolicyKind(Enum):
    ChemicalReduction = "chemical_reduction"
    OrganicCropExpansion = "organic_crop_expansion"
    OrganicMeatExpansion = "organic_pasture_expansion"
    LivestockDensityReduction = "livestock_density_reduction"
    DeforestationRestrictionCrop = "expansion_restriction_c"
    DeforestationRestrictionMeat = "expansion_restriction_m"
    CropDemandReduction = "crop_demand_reduction"
    MeatDemandReduction = "meat_demand_reduction"

    @property
    def field(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "PolicyKind":
        key = name.strip().replace("_", "").replace("-", "").lower()
        for kind in cls:
            if kind.name.lower() == key:
                return kind
        raise ConfigError(f"unknown policy kind {name!r}; expected one of {', '.join(k.name for k in cls)}")


ALL_KINDS = tuple(PolicyKind)


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind
    magnitude: float = 0.10

    def __post_init__(self):
        if not isinstance(self.kind, PolicyKind):
            object.__setattr__(self, "kind", PolicyKind.parse(str(self.kind)))
        m = float(self.magnitude)
        if not 0.0 <= m <= 1.0 or math.isnan(m):
            raise ConfigError(f"policy magnitude must lie in [0, 1], got {self.magnitude}")
        object.__setattr__(self, "magnitude", m)

    @property
    def label(self) -> str:
        return f"{self.kind.name}({self.magnitude:g})"


def apply_policy(params: ModelParams, drivers: Drivers | None, spec: PolicySpec):
    """Record one policy on the parameters; the transform itself takes effect after the policy year.

    Magnitudes are stored rather than compounded, so re-applying a policy is a no-op.
    Driver-side effects (organic share growth, demand excess removal) are resolved
    from these fields when a run is prepared, so the drivers pass through unchanged.
    """
    return params.replace(**{spec.kind.field: spec.magnitude}), drivers


@dataclass(frozen=True)
class Portfolio:
    policies: tuple = ()

    def __post_init__(self):
        specs = tuple(sorted(self.policies, key=lambda s: ALL_KINDS.index(s.kind)))
        kinds = [s.kind for s in specs]
        if len(set(kinds)) != len(kinds):
            raise ConfigError("a portfolio may hold at most one policy of each kind")
        object.__setattr__(self, "policies", specs)

    @classmethod
    def of(cls, *specs) -> "Portfolio":
        return cls(tuple(specs))

    def apply(self, params: ModelParams) -> ModelParams:
        for spec in self.policies:
            params, _ = apply_policy(params, None, spec)
        return params

    def with_policies(self, *specs) -> "Portfolio":
        keep = [s for s in self.policies if s.kind not in {x.kind for x in specs}]
        return Portfolio(tuple(keep) + tuple(specs))

    def kinds(self) -> set:
        return {s.kind for s in self.policies}

    @property
    def label(self) -> str:
        return "+".join(s.label for s in self.policies) or "baseline"

    def __len__(self):
        return len(self.policies)


@dataclass
class ScenarioResult:
    portfolio: Portfolio
    delta_forest_pct: float
    delta_degraded_pct: float
    ensemble: EnsembleResult


class Experiment:
    """Shared baseline, seed list and prefix cache for a family of scenarios."""

    def __init__(self, params: ModelParams, drivers: Drivers, n_runs: int = 500, master_seed: int = 0,
                 workers: int | None = None, share_prefix: bool = True, keep_runs: bool = False):
        self.params = params
        self.drivers = drivers
        self.seeds = run_seeds(master_seed, n_runs)
        self.workers = workers
        self.prefix = PrefixCache() if share_prefix else None
        self.keep_runs = keep_runs  # keep per-run records for the baseline only
        self._baseline = None

    def ensemble(self, portfolio: Portfolio | None = None, keep_runs: bool = False) -> EnsembleResult:
        forcing = prepare(self.params, self.drivers, portfolio)
        return ensemble_forcing(forcing, self.seeds, self.workers, self.prefix, keep_runs)

    @property
    def baseline(self) -> EnsembleResult:
        if self._baseline is None:
            self._baseline = self.ensemble(None, self.keep_runs)
        return self._baseline

    def scenario(self, portfolio: Portfolio) -> ScenarioResult:
        return run_scenario(portfolio, self.baseline, experiment=self)


def run_scenario(portfolio: Portfolio, baseline: EnsembleResult, n_runs: int | None = None,
                 master_seed: int | None = None, *, experiment: Experiment | None = None,
                 params: ModelParams | None = None, drivers: Drivers | None = None) -> ScenarioResult:
    """Ensemble for `portfolio` on the baseline's seed list, with end-year deltas."""
    if experiment is None:
        if params is None or drivers is None:
            raise ConfigError("run_scenario needs an experiment or params and drivers")
        seeds = baseline.seeds
        if n_runs is not None and master_seed is not None:
            seeds = run_seeds(master_seed, n_runs)
            if not np.array_equal(seeds, baseline.seeds):
                raise ConfigError("scenario seeds must match the baseline's seed list")
        ens = ensemble_forcing(prepare(params, drivers, portfolio), seeds)
    else:
        if not np.array_equal(experiment.seeds, baseline.seeds):
            raise ConfigError("scenario seeds must match the baseline's seed list")
        ens = experiment.ensemble(portfolio)
    df, dd = delta_vs_baseline(ens, baseline)
    return ScenarioResult(portfolio, df, dd, ens)


def win(r: ScenarioResult) -> bool:
    return r.delta_forest_pct > 0 and r.delta_degraded_pct < 0


def threshold(rhos, forest, degraded):
    """Smallest rho with forest gain and degradation loss, linearly interpolated
    between the last failing and first passing grid points; None if never reached."""
    for i, (rho, f, d) in enumerate(zip(rhos, forest, degraded)):
        if not (f > 0 and d < 0):
            continue
        if i == 0:
            return float(rho)
        r0 = rhos[i - 1]
        cross = [r0]
        for prev, cur, sign in ((forest[i - 1], f, 1.0), (degraded[i - 1], d, -1.0)):
            if sign * prev <= 0 and cur != prev:
                cross.append(r0 + (rho - r0) * (0.0 - prev) / (cur - prev))
        return float(max(cross))
    return None


@dataclass
class SweepResult:
    rhos: np.ndarray
    results: list
    rho_star: float | None


def demand_sweep(base_portfolio: Portfolio, rho_grid, experiment: Experiment) -> SweepResult:
    """Add crop and meat demand reductions of size rho to the base portfolio for each grid point."""
    rhos = np.asarray(rho_grid, dtype=float)
    if rhos.size == 0 or np.any((rhos < 0) | (rhos > 1)) or np.any(np.diff(rhos) <= 0):
        raise ConfigError("rho grid must be ascending values in [0, 1]")
    results = []
    for rho in rhos:
        pf = base_portfolio.with_policies(PolicySpec(PolicyKind.CropDemandReduction, rho),
                                          PolicySpec(PolicyKind.MeatDemandReduction, rho))
        results.append(experiment.scenario(pf))
    rs = threshold(rhos, [r.delta_forest_pct for r in results], [r.delta_degraded_pct for r in results])
    return SweepResult(rhos, results, rs)


MAX_POOL = 12


@dataclass
class Ranking:
    results: list  # every evaluated portfolio, in enumeration order
    by_forest: list
    by_degraded: list
    both: list  # portfolios in both top-k lists

    def in_both(self, r: ScenarioResult) -> bool:
        return r.portfolio in {x.portfolio for x in self.both}


def subsets(pool):
    for size in range(1, len(pool) + 1):
        for combo in itertools.combinations(pool, size):
            yield Portfolio(tuple(combo))


def rank(results, top_k: int = 10) -> Ranking:
    order = {id(r): i for i, r in enumerate(results)}
    key_nan = lambda v: -math.inf if math.isnan(v) else v
    by_f = sorted(results, key=lambda r: (-key_nan(r.delta_forest_pct), order[id(r)]))[:top_k]
    by_d = sorted(results, key=lambda r: (-key_nan(-r.delta_degraded_pct), order[id(r)]))[:top_k]
    ids = {id(r) for r in by_d}
    return Ranking(list(results), by_f, by_d, [r for r in by_f if id(r) in ids])


def enumerate_and_rank(policy_pool, experiment: Experiment, top_k: int = 10) -> Ranking:
    """Evaluate every nonempty subset of the pool and rank by forest gain and by degradation loss."""
    pool = list(policy_pool)
    if len({s.kind for s in pool}) != len(pool):
        raise ConfigError("policy pool must not repeat a kind")
    if len(pool) > MAX_POOL:
        raise ConfigError(f"pool of {len(pool)} policies means {2 ** len(pool) - 1} ensembles; "
                          f"use at most {MAX_POOL} policies or fewer runs per ensemble")
    if not pool:
        raise ConfigError("policy pool is empty")
    if top_k < 1:
        raise ConfigError("top_k must be >= 1")
    return rank([experiment.scenario(pf) for pf in subsets(pool)], top_k)


def default_pool(magnitude: float = 0.10):
    return [PolicySpec(k, magnitude) for k in ALL_KINDS]
