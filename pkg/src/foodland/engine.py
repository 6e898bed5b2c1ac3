"""Annual step, single runs and seeded Monte Carlo ensembles.

Two interchangeable backends execute the same step: `step` below is a plain
Python composition of the module functions, and `kernel.simulate` is its
compiled twin used for production runs. Both draw randomness only from hashed
per-cell keys, so a run is a pure function of (params, drivers, policy, seed).
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .demand import Drivers, expand_organic, exogenous_demand, extend_drivers, feedback_factor
from .landscape import (STREAM_LAND, STREAM_ORGANIC, Landscape, LandUse, _seqsum, abandon_cells,
                        cell_keys, compute_metrics, convert_cells, ecosystem_service, init_landscape,
                        round_half_up, set_organic_share, update_integrity)
from .params import ConfigError, ModelError, ModelParams
from .production import (InputState, advance_technology, crop_output, feed_demand, meat_output,
                         scale_meat_to_feed, update_crop_inputs, update_livestock)

COLUMNS = kernel.COLUMNS
COL = kernel.C


def land_response(D: float, Q_prev: float, params: ModelParams, side: str) -> tuple[int, int]:
    """Cells to expand and to abandon on one side ('crop' or 'pasture') given last year's gap."""
    if side not in ("crop", "pasture"):
        raise ValueError(f"side must be 'crop' or 'pasture', got {side!r}")
    if D <= 0:
        raise ValueError("demand must be positive")
    if side == "crop":
        zp, zm, rest = params.zeta_plus_c, params.zeta_minus_c, params.expansion_restriction_c
    else:
        zp, zm, rest = params.zeta_plus_m, params.zeta_minus_m, params.expansion_restriction_m
    gap = (D - Q_prev) / D
    n = params.n_cells
    quantum = round_half_up(params.phi * n)
    mode = 0 if params.floor_mode == "multiplier" else 1
    exp, con = kernel.land_change(gap, zp, zm, rest, quantum, n, params.phi, mode)
    return int(exp), int(con)


def run_seeds(master_seed: int, n_runs: int) -> np.ndarray:
    """Per-run seeds derived deterministically from the master seed."""
    if n_runs < 1:
        raise ConfigError("n_runs must be >= 1")
    return np.random.SeedSequence(int(master_seed)).generate_state(n_runs, np.uint32).astype(np.int64)


@dataclass
class Forcing:
    """Everything a run needs besides the landscape: exogenous series and the two parameter regimes."""
    years: np.ndarray
    meat: np.ndarray  # model units, before feedback
    food: np.ndarray
    share_crop: np.ndarray
    share_pasture: np.ndarray
    pre: ModelParams
    post: ModelParams
    policy_t: int

    def params_at(self, t: int) -> ModelParams:
        return self.post if t > self.policy_t else self.pre

    def prefix_digest(self) -> bytes:
        """Identifies the dynamics up to and including the policy year."""
        sl = slice(0, self.policy_t + 1)
        h = hashlib.sha1()
        h.update(param_vector(self.pre).tobytes())
        for name in ("width", "height", "share_natural", "share_pasture", "share_crop", "xi",
                     "mu_n", "mu_c", "mu_m", "sigma_n", "sigma_c", "sigma_m", "T0", "start_year"):
            h.update(repr(getattr(self.pre, name)).encode())
        for arr in (self.meat, self.food, self.share_crop, self.share_pasture):
            h.update(np.ascontiguousarray(arr[sl]).tobytes())
        return h.digest()


def param_vector(params: ModelParams) -> np.ndarray:
    vals = []
    for name in kernel.PRM_FIELDS:
        v = getattr(params, name)
        if name == "floor_mode":
            v = 0.0 if v == "multiplier" else 1.0
        vals.append(float(v))
    return np.array(vals)


def annual_drivers(drivers: Drivers, params: ModelParams) -> Drivers:
    """Drivers on the simulation's annual axis, extrapolating if needed."""
    y = drivers.years
    if y[0] <= params.start_year and y[-1] >= params.end_year:
        try:
            return drivers.window(params.start_year, params.end_year)
        except ConfigError:
            pass
    return extend_drivers(drivers, params.start_year, params.end_year)


def prepare(params: ModelParams, drivers: Drivers, policy=None) -> Forcing:
    """Resolve drivers and policy into a Forcing.

    `policy` is anything with an ``apply(params)`` method returning params with
    its magnitudes set (see scenario.Portfolio). Every policy acts only after
    the policy year.
    """
    params.validate()
    drivers = annual_drivers(drivers, params)
    applied = params if policy is None else policy.apply(params)
    applied.validate()
    pre, post = applied.regimes()
    drv = expand_organic(drivers, applied.policy_year, applied.organic_crop_expansion,
                         applied.organic_pasture_expansion)
    meat, food, _ = exogenous_demand(drv, applied)
    return Forcing(drv.years, meat, food, drv.organic_share_crop, drv.organic_share_pasture,
                   pre, post, params.policy_year - params.start_year)


@dataclass
class SimState:
    t: int  # row index of the last recorded year
    seed: int
    landscape: Landscape
    inputs: InputState
    last_D_m: float
    last_Q_m: float
    last_D_c: float
    last_Q_c: float
    lambda_cap: float = 0.0
    E: float = 1.0

    def year(self, forcing: Forcing) -> int:
        return int(forcing.years[self.t])

    def copy(self) -> "SimState":
        return SimState(self.t, self.seed, self.landscape.copy(),
                        InputState(self.inputs.T, self.inputs.M, self.inputs.Phi, self.inputs.Lambda),
                        self.last_D_m, self.last_Q_m, self.last_D_c, self.last_Q_c, self.lambda_cap, self.E)

    def vector(self) -> np.ndarray:
        i = self.inputs
        return np.array([i.T, i.M, i.Phi, i.Lambda, self.lambda_cap, self.last_D_m, self.last_Q_m,
                         self.last_D_c, self.last_Q_c, self.landscape.eps0_natural_sum,
                         float(self.landscape.saturation_events)])

    def load_vector(self, v: np.ndarray) -> None:
        self.inputs = InputState(float(v[0]), float(v[1]), float(v[2]), float(v[3]))
        self.lambda_cap = float(v[4])
        self.last_D_m, self.last_Q_m, self.last_D_c, self.last_Q_c = map(float, v[5:9])
        self.landscape.saturation_events = int(v[10])


def _group_means(ls: Landscape):
    lu, org, eps = ls.land_use, ls.organic, ls.eps
    out = []
    for use in (LandUse.CROP, LandUse.PASTURE):
        for o in (0, 1):
            sel = eps[(lu == use) & (org == o)]
            out.append((sel.size, _seqsum(sel) / sel.size if sel.size else 1.0))
    return out


def _metric_cells(ls: Landscape, row: np.ndarray, params: ModelParams) -> None:
    m = compute_metrics(ls, params.forest_threshold, params.degraded_threshold)
    nan = lambda v: np.nan if v is None else v
    row[COL["area_natural"]] = m.area_natural
    row[COL["area_crop"]] = m.area_crop
    row[COL["area_pasture"]] = m.area_pasture
    row[COL["area_forest"]] = m.area_forest
    row[COL["area_degraded"]] = m.area_degraded
    row[COL["mean_eps_natural"]] = nan(m.mean_eps_natural)
    row[COL["mean_eps_crop_conv"]] = nan(m.mean_eps_crop_conv)
    row[COL["mean_eps_crop_org"]] = nan(m.mean_eps_crop_org)
    row[COL["mean_eps_pasture_conv"]] = nan(m.mean_eps_pasture_conv)
    row[COL["mean_eps_pasture_org"]] = nan(m.mean_eps_pasture_org)
    lu, org = ls.land_use, ls.organic
    row[COL["area_crop_org"]] = np.count_nonzero((lu == LandUse.CROP) & (org == 1))
    row[COL["area_pasture_org"]] = np.count_nonzero((lu == LandUse.PASTURE) & (org == 1))
    deg = ls.eps < params.degraded_threshold
    row[COL["degraded_natural"]] = np.count_nonzero(deg & (lu == LandUse.NATURAL))
    row[COL["degraded_crop"]] = np.count_nonzero(deg & (lu == LandUse.CROP))
    row[COL["degraded_pasture"]] = np.count_nonzero(deg & (lu == LandUse.PASTURE))


def initial_state(forcing: Forcing, seed: int) -> tuple[SimState, np.ndarray]:
    """Landscape and inputs at the start year, plus the start-year record row (no step taken)."""
    p = forcing.pre
    ls = init_landscape(p, np.random.default_rng(int(seed)))
    st = SimState(0, int(seed), ls, InputState(p.T0), p.Q_m0, p.Q_m0, p.Q_c0, p.Q_c0)
    row = np.zeros(len(COLUMNS))
    (ncc, ecc), (nco, eco), (npc, epc), (npo, epo) = _group_means(ls)
    q_c, q_co = crop_output(ncc, nco, st.inputs, ecc, eco, p)
    q_m, q_mo = meat_output(npc, npo, st.inputs, epc, epo, p)
    D_feed = feed_demand(q_m + q_mo, p)
    D_m, D_food = float(forcing.meat[0]), float(forcing.food[0])
    Q_m, scale = scale_meat_to_feed(q_m + q_mo, q_c + q_co, D_food, D_feed)
    vals = dict(D_m=D_m, D_c_food=D_food, D_feed=D_feed, D_c=D_food + D_feed, q_c=q_c, q_c_org=q_co,
                q_m=q_m, q_m_org=q_mo, Q_c=q_c + q_co, Q_m=Q_m, feed_scaling=scale, T=p.T0, M=1.0,
                Phi=1.0, Lambda=1.0, E=1.0)
    for k, v in vals.items():
        row[COL[k]] = v
    _metric_cells(ls, row, p)
    return st, row


def step(state: SimState, forcing: Forcing) -> np.ndarray:
    """Advance one year in place and return its record row (reference implementation)."""
    t = state.t + 1
    if t >= forcing.years.size:
        raise ModelError("run complete: cannot step past end_year")
    p = forcing.params_at(t)
    ls, inp = state.landscape, state.inputs
    n = ls.n_cells

    # demand with shortfall feedback
    sym = p.symmetric_demand_feedback
    D_m = forcing.meat[t] * feedback_factor(state.last_D_m, state.last_Q_m, p.alpha_m, sym)
    D_food = forcing.food[t] * feedback_factor(state.last_D_c, state.last_Q_c, p.alpha_c, sym)

    inp.T = advance_technology(inp.T, p)
    update_livestock(inp, D_m, state.last_Q_m, p)
    if p.lambda_cap_at_policy_year and t > forcing.policy_t:
        inp.Lambda = min(inp.Lambda, state.lambda_cap)

    set_organic_share(ls, forcing.share_crop[t], forcing.share_pasture[t],
                      keys=cell_keys(state.seed, t, STREAM_ORGANIC, n))

    (ncc, ecc), (nco, eco), (npc, epc), (npo, epo) = _group_means(ls)
    q_m, q_mo = meat_output(npc, npo, inp, epc, epo, p)
    D_feed = feed_demand(q_m + q_mo, p)
    D_c = D_food + D_feed
    update_crop_inputs(inp, D_c, state.last_Q_c, p)
    q_c, q_co = crop_output(ncc, nco, inp, ecc, eco, p)
    Q_c = q_c + q_co
    Q_m, scale = scale_meat_to_feed(q_m + q_mo, Q_c, D_food, D_feed)

    # land: abandonment first, then conversion
    exp_c, con_c = land_response(D_c, state.last_Q_c, p, "crop")
    exp_m, con_m = land_response(D_m, state.last_Q_m, p, "pasture")
    keys = cell_keys(state.seed, t, STREAM_LAND, n)
    con_c = abandon_cells(ls, LandUse.CROP, con_c, keys=keys)
    con_m = abandon_cells(ls, LandUse.PASTURE, con_m, keys=keys)
    exp_c = convert_cells(ls, LandUse.CROP, exp_c, keys=keys)
    exp_m = convert_cells(ls, LandUse.PASTURE, exp_m, keys=keys)

    E = ecosystem_service(ls, p.p, p.eps_min)
    sat = update_integrity(ls, inp.Lambda, inp.M, inp.Phi, E, p)

    row = np.zeros(len(COLUMNS))
    vals = dict(D_m=D_m, D_c_food=D_food, D_feed=D_feed, D_c=D_c, q_c=q_c, q_c_org=q_co, q_m=q_m,
                q_m_org=q_mo, Q_c=Q_c, Q_m=Q_m, feed_scaling=scale, T=inp.T, M=inp.M, Phi=inp.Phi,
                Lambda=inp.Lambda, E=E, expand_crop=exp_c, contract_crop=con_c, expand_pasture=exp_m,
                contract_pasture=con_m, saturation_events=sat)
    for k, v in vals.items():
        row[COL[k]] = v
    _metric_cells(ls, row, p)

    if t == forcing.policy_t:
        state.lambda_cap = inp.Lambda
    state.last_D_m, state.last_Q_m, state.last_D_c, state.last_Q_c = D_m, Q_m, D_c, Q_c
    state.E = E
    state.t = t
    return row


def _advance_kernel(state: SimState, forcing: Forcing, t_to: int, out: np.ndarray,
                    vecs: tuple[np.ndarray, np.ndarray]) -> None:
    ls = state.landscape
    v = state.vector()
    kernel.simulate(ls.land_use, ls.organic, ls.eps, ls.theta_n, ls.theta_c, ls.theta_m, v,
                    state.seed, state.t + 1, t_to, forcing.meat, forcing.food, forcing.share_crop,
                    forcing.share_pasture, vecs[0], vecs[1], forcing.policy_t, out)
    state.load_vector(v)
    state.t = t_to - 1
    state.E = float(out[state.t, COL["E"]])


@dataclass
class RunRecord:
    years: np.ndarray
    data: np.ndarray  # (years, columns)
    seed: int
    columns: tuple = COLUMNS
    snapshots: dict = field(default_factory=dict)  # year -> Landscape

    def column(self, name: str) -> np.ndarray:
        return self.data[:, COL[name]]

    def row(self, year: int) -> dict:
        i = int(np.searchsorted(self.years, year))
        return dict(zip(self.columns, self.data[i]))


def _checked(data: np.ndarray, years, seed) -> None:
    bad = ~np.isfinite(data[:, COL["Q_c"]]) | ~np.isfinite(data[:, COL["E"]])
    if bad.any():
        raise ModelError(f"non-finite state in year {years[np.argmax(bad)]} (seed {seed})")


def run_forcing(forcing: Forcing, seed: int, backend: str = "kernel", snapshot_years=(),
                prefix: "PrefixCache | None" = None) -> RunRecord:
    """One run driven by a prepared Forcing."""
    if backend not in ("kernel", "python"):
        raise ConfigError(f"unknown backend {backend!r}")
    n_years = forcing.years.size
    out = np.zeros((n_years, len(COLUMNS)))
    snaps = {}
    stops = sorted({int(y) - int(forcing.years[0]) for y in snapshot_years})
    if any(s < 0 or s >= n_years for s in stops):
        raise ConfigError("snapshot year outside the simulated timeline")

    st = None
    if prefix is not None and backend == "kernel" and not stops:
        st = prefix.resume(forcing, seed, out)
    if st is None:
        st, row0 = initial_state(forcing, seed)
        out[0] = row0
    if 0 in stops:
        snaps[int(forcing.years[0])] = st.landscape.copy()

    try:
        if backend == "python":
            while st.t + 1 < n_years:
                row = step(st, forcing)
                out[st.t] = row
                if st.t in stops:
                    snaps[int(forcing.years[st.t])] = st.landscape.copy()
        else:
            vecs = (param_vector(forcing.pre), param_vector(forcing.post))
            marks = [s for s in stops if s > st.t]
            if prefix is not None and not stops and st.t < forcing.policy_t:
                marks = [forcing.policy_t]
            for stop in marks + [n_years - 1]:
                if stop > st.t:
                    _advance_kernel(st, forcing, stop + 1, out, vecs)
                if stop in stops:
                    snaps[int(forcing.years[stop])] = st.landscape.copy()
                if prefix is not None and stop == forcing.policy_t and not stops:
                    prefix.store(forcing, seed, st, out)
    except (ValueError, ZeroDivisionError, FloatingPointError) as exc:
        year = int(forcing.years[min(st.t + 1, n_years - 1)])
        raise ModelError(f"run failed in year {year} (seed {seed}): {exc}") from exc
    _checked(out, forcing.years, seed)
    return RunRecord(forcing.years.copy(), out, int(seed), snapshots=snaps)


def run(params: ModelParams, drivers: Drivers, policy=None, seed: int = 0, backend: str = "kernel",
        snapshot_years=()) -> RunRecord:
    """Simulate start_year..end_year; deterministic for a fixed seed."""
    return run_forcing(prepare(params, drivers, policy), seed, backend, snapshot_years)


class PrefixCache:
    """Shares the pre-policy part of runs between a baseline and its scenarios.

    Policies only act after the policy year, so runs with identical pre-policy
    inputs and seed are identical up to it; the state at the policy year is
    stored once and later runs resume from a copy.
    """

    def __init__(self):
        self._store = {}
        self.hits = 0

    def _key(self, forcing: Forcing, seed: int):
        return forcing.prefix_digest(), int(seed)

    def resume(self, forcing: Forcing, seed: int, out: np.ndarray):
        hit = self._store.get(self._key(forcing, seed))
        if hit is None:
            return None
        st, rows = hit
        out[:rows.shape[0]] = rows
        self.hits += 1
        return st.copy()

    def store(self, forcing: Forcing, seed: int, state: SimState, out: np.ndarray) -> None:
        self._store[self._key(forcing, seed)] = (state.copy(), out[:state.t + 1].copy())

    def clear(self):
        self._store.clear()


@dataclass
class EnsembleResult:
    years: np.ndarray
    mean: np.ndarray  # (years, columns), NaN where no run defines the value
    stderr: np.ndarray
    n_runs: int
    seeds: np.ndarray
    columns: tuple = COLUMNS
    runs: np.ndarray | None = None  # (runs, years, columns) when kept

    def column(self, name: str) -> np.ndarray:
        return self.mean[:, COL[name]]

    def column_stderr(self, name: str) -> np.ndarray:
        return self.stderr[:, COL[name]]

    def at(self, name: str, year: int) -> float:
        return float(self.mean[int(np.searchsorted(self.years, year)), COL[name]])


def aggregate(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error over axis 0, ignoring NaN entries (undefined class means)."""
    ok = ~np.isnan(stack)
    cnt = ok.sum(axis=0)
    x = np.where(ok, stack, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = x.sum(axis=0) / cnt
        dev = np.where(ok, stack - mean, 0.0)
        var = (dev * dev).sum(axis=0) / (cnt - 1)
        se = np.sqrt(var / cnt)
    se = np.where(cnt > 1, se, np.where(cnt == 1, 0.0, np.nan))
    return mean, se


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def run_ensemble(params: ModelParams, drivers: Drivers, policy=None, n_runs: int = 500,
                 master_seed: int = 0, workers: int | None = None, prefix: PrefixCache | None = None,
                 keep_runs: bool = False, backend: str = "kernel") -> EnsembleResult:
    """Independent runs over derived seeds; results are gathered by seed index, so the
    aggregate does not depend on completion order."""
    seeds = run_seeds(master_seed, n_runs)
    forcing = prepare(params, drivers, policy)
    return ensemble_forcing(forcing, seeds, workers, prefix, keep_runs, backend)


def ensemble_forcing(forcing: Forcing, seeds, workers=None, prefix=None, keep_runs=False,
                     backend="kernel") -> EnsembleResult:
    seeds = np.asarray(seeds)
    stack = np.empty((seeds.size, forcing.years.size, len(COLUMNS)))

    def job(i):
        try:
            stack[i] = run_forcing(forcing, int(seeds[i]), backend, prefix=prefix).data
        except ModelError:
            raise
        except Exception as exc:  # keep the seed in the report
            raise ModelError(f"run with seed {int(seeds[i])} failed: {exc}") from exc

    workers = workers or default_workers()
    if workers == 1 or seeds.size == 1:
        for i in range(seeds.size):
            job(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for fut in [pool.submit(job, i) for i in range(seeds.size)]:
                fut.result()  # fail fast on the first error in seed order
    mean, se = aggregate(stack)
    return EnsembleResult(forcing.years.copy(), mean, se, int(seeds.size), seeds.copy(),
                          runs=stack if keep_runs else None)


def _pct(s: float, b: float) -> float:
    if b == 0 or math.isnan(b) or math.isnan(s):
        return math.nan  # undefined
    return 100.0 * (s - b) / b


def delta_vs_baseline(scenario: EnsembleResult, baseline: EnsembleResult,
                      year: int | None = None) -> tuple[float, float]:
    """Percentage change of mean forest and degraded area relative to the baseline (NaN if undefined)."""
    if not np.array_equal(scenario.years, baseline.years):
        raise ConfigError("scenario and baseline timelines differ")
    year = int(baseline.years[-1]) if year is None else year
    return (_pct(scenario.at("area_forest", year), baseline.at("area_forest", year)),
            _pct(scenario.at("area_degraded", year), baseline.at("area_degraded", year)))
