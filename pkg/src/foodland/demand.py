"""Exogenous food demand: drivers, raw demand laws, normalization and shortfall feedback."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import ConfigError, ModelError, ModelParams


class DriverDomainError(ModelError):
    """Income below the Engel floor (a + b ln I <= 0)."""


DRIVER_COLUMNS = ("year", "population", "income_per_capita", "organic_share_crop", "organic_share_pasture")


@dataclass
class Drivers:
    years: np.ndarray
    population: np.ndarray
    income: np.ndarray
    organic_share_crop: np.ndarray
    organic_share_pasture: np.ndarray

    def __post_init__(self):
        self.years = np.asarray(self.years, dtype=np.int64)
        for name in ("population", "income", "organic_share_crop", "organic_share_pasture"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.years.shape:
                raise ConfigError(f"driver series {name!r} does not match the year axis")
            setattr(self, name, arr)
        if self.years.size == 0:
            raise ConfigError("drivers are empty")
        if np.any(np.diff(self.years) <= 0):
            raise ConfigError("driver years must be strictly increasing")
        if np.any(self.population < 0) or np.any(self.income <= 0):
            raise ConfigError("population must be nonnegative and income positive")
        for name in ("organic_share_crop", "organic_share_pasture"):
            s = getattr(self, name)
            if np.any((s < 0) | (s > 1)):
                raise ConfigError(f"{name} must lie in [0, 1]")

    def index(self, year: int) -> int:
        i = int(np.searchsorted(self.years, year))
        if i >= self.years.size or self.years[i] != year:
            raise ConfigError(f"year {year} not covered by drivers")
        return i

    def window(self, start: int, end: int) -> "Drivers":
        i, j = self.index(start), self.index(end)
        if j - i != end - start:
            raise ConfigError("drivers must be annual over the simulated window")
        sl = slice(i, j + 1)
        return Drivers(self.years[sl], self.population[sl], self.income[sl],
                       self.organic_share_crop[sl], self.organic_share_pasture[sl])

    def replace(self, **changes) -> "Drivers":
        kw = dict(years=self.years, population=self.population, income=self.income,
                  organic_share_crop=self.organic_share_crop,
                  organic_share_pasture=self.organic_share_pasture)
        kw.update(changes)
        return Drivers(**kw)


@dataclass
class DriverCurves:
    """Smooth parametric default drivers.

    Population is logistic through (1960, pop_1960) and (2022, pop_2022) with
    ceiling pop_max; income grows exponentially between its 1960 and 2022
    values; organic shares rise linearly from zero in `adoption_start` to the
    2022 value, then follow a logistic ramp to the 2100 value.
    """
    pop_1960: float = 1.301e9
    pop_2022: float = 9.866e9
    pop_max: float = 1.0e10
    income_1960: float = 37.0
    income_2022: float = 43.2
    organic_crop_2022: float = 0.015
    organic_crop_2100: float = 0.9
    organic_pasture_2022: float = 0.015
    organic_pasture_2100: float = 0.05
    adoption_start: int = 2000
    ramp_steepness: float = 8.0


def _logit(x):
    return np.log(x / (1.0 - x))


def organic_trajectory(years, share_2022, share_2100, start=2000, steepness=8.0):
    years = np.asarray(years, dtype=float)
    early = np.clip((years - start) / (2022 - start), 0.0, None) * share_2022
    ramp = lambda z: 1.0 / (1.0 + np.exp(-steepness * (z - 0.5)))
    x = np.clip((years - 2022) / 78.0, 0.0, 1.0)
    late = share_2022 + (share_2100 - share_2022) * (ramp(x) - ramp(0.0)) / (ramp(1.0) - ramp(0.0))
    return np.where(years <= 2022, early, late)


def builtin_drivers(years=None, curves: DriverCurves | None = None) -> Drivers:
    cv = curves or DriverCurves()
    years = np.arange(1960, 2101) if years is None else np.asarray(years)
    if not (0 < cv.pop_1960 < cv.pop_2022 < cv.pop_max):
        raise ConfigError("need 0 < pop_1960 < pop_2022 < pop_max")
    l0, l1 = _logit(cv.pop_1960 / cv.pop_max), _logit(cv.pop_2022 / cv.pop_max)
    rate = (l1 - l0) / 62.0
    pop = cv.pop_max / (1.0 + np.exp(-(l0 + rate * (years - 1960))))
    g = np.log(cv.income_2022 / cv.income_1960) / 62.0
    income = cv.income_1960 * np.exp(g * (years - 1960))
    return Drivers(years, pop, income,
                   organic_trajectory(years, cv.organic_crop_2022, cv.organic_crop_2100,
                                      cv.adoption_start, cv.ramp_steepness),
                   organic_trajectory(years, cv.organic_pasture_2022, cv.organic_pasture_2100,
                                      cv.adoption_start, cv.ramp_steepness))


def load_drivers_csv(path) -> Drivers:
    """Read a driver table; header row with exactly the documented columns is mandatory."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty driver file")
    header = [h.strip() for h in rows[0]]
    if tuple(header) != DRIVER_COLUMNS:
        raise ConfigError(f"{path}: header must be {','.join(DRIVER_COLUMNS)}, got {','.join(header)}")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric driver value ({exc})") from None
    if data.size == 0 or data.shape[1] != len(DRIVER_COLUMNS):
        raise ConfigError(f"{path}: no data rows or ragged rows")
    if np.any(data[:, 0] != np.round(data[:, 0])):
        raise ConfigError(f"{path}: years must be integers")
    return Drivers(data[:, 0].astype(np.int64), data[:, 1], data[:, 2], data[:, 3], data[:, 4])


def extend_drivers(drivers: Drivers, start: int, end: int) -> Drivers:
    """Annual drivers over [start, end]: linear interpolation inside the data range,
    fitted logistic population and exponential income beyond it, shares held flat."""
    from .calibrate import fit_income_exponential, fit_population_logistic

    if drivers.years[0] > start:
        raise ConfigError(f"drivers start in {drivers.years[0]}, after the simulation start {start}")
    years = np.arange(start, end + 1)
    last = drivers.years[-1]
    interp = lambda s: np.interp(years, drivers.years, s)
    pop, inc = interp(drivers.population), interp(drivers.income)
    if end > last:
        beyond = years > last
        if drivers.years.size < 3:
            raise ConfigError("at least 3 driver rows are needed to extrapolate beyond the data")
        pop_fit = fit_population_logistic(drivers.years, drivers.population)
        inc_fit = fit_income_exponential(drivers.years, drivers.income)
        # anchor the fitted curves at the last observation to keep the series continuous
        pop[beyond] = pop_fit.predict(years[beyond]) * drivers.population[-1] / pop_fit.predict([last])[0]
        inc[beyond] = inc_fit.predict(years[beyond]) * drivers.income[-1] / inc_fit.predict([last])[0]
    return Drivers(years, pop, inc, interp(drivers.organic_share_crop), interp(drivers.organic_share_pasture))


def caloric_demand_raw(I, N, params: ModelParams):
    """Engel-type calorie demand (a + b ln I) N."""
    I = np.asarray(I, dtype=float)
    per_capita = params.a + params.b * np.log(I)
    if np.any(per_capita <= 0):
        raise DriverDomainError("income below the Engel floor: a + b ln I <= 0")
    out = per_capita * np.asarray(N, dtype=float)
    return float(out) if out.ndim == 0 else out


def meat_demand_raw(I, N, params: ModelParams):
    """Constant-elasticity meat demand c I^d N."""
    out = params.c * np.asarray(I, dtype=float) ** params.d * np.asarray(N, dtype=float)
    return float(out) if out.ndim == 0 else out


def crop_food_demand_raw(I, N, params: ModelParams):
    """Calories left for direct crop consumption: D_t - kappa r D_m."""
    out = caloric_demand_raw(I, N, params) - params.meat_calorie_factor * params.r * meat_demand_raw(I, N, params)
    return out


def reduce_excess(series, years, policy_year: int, m: float):
    """Remove a fraction m of the growth beyond the policy-year level for later years."""
    series = np.asarray(series, dtype=float)
    if m == 0.0:
        return series.copy()
    years = np.asarray(years)
    ref = series[int(np.searchsorted(years, policy_year))]
    return np.where(years > policy_year, ref + (1.0 - m) * (series - ref), series)


def expand_organic(drivers: Drivers, policy_year: int, m_crop: float, m_pasture: float) -> Drivers:
    """Scale the growth of the organic shares beyond their policy-year level by (1 + m)."""
    if m_crop == 0.0 and m_pasture == 0.0:
        return drivers
    i = drivers.index(policy_year)
    later = drivers.years > policy_year

    def grow(s, m):
        out = np.where(later, s[i] + (1.0 + m) * (s - s[i]), s)
        return np.clip(out, 0.0, 1.0)

    return drivers.replace(organic_share_crop=grow(drivers.organic_share_crop, m_crop),
                           organic_share_pasture=grow(drivers.organic_share_pasture, m_pasture))


@dataclass
class DemandState:
    omega_m: float
    omega_c: float
    last_D_m: float
    last_Q_m: float
    last_D_c: float
    last_Q_c: float


def initial_crop_food(params: ModelParams) -> float:
    """Crop-food demand in model units at the start year.

    With a balanced start, food plus the feed needed for the initial meat output
    equals the initial crop output; otherwise food alone equals it.
    """
    if params.balanced_start:
        return params.Q_c0 - params.feed_coeff * params.Q_m0
    return params.Q_c0


def init_normalization(N0: float, I0: float, params: ModelParams,
                       crop_food_target: float | None = None) -> DemandState:
    """Normalization constants mapping t0 raw demand onto model units.

    omega_m puts raw meat demand at Q_m0; omega_c puts raw crop-food demand at
    `crop_food_target` (default Q_c0).
    """
    target = params.Q_c0 if crop_food_target is None else crop_food_target
    meat = meat_demand_raw(I0, N0, params)
    food = crop_food_demand_raw(I0, N0, params)
    if meat <= 0 or food <= 0 or target <= 0:
        raise ModelError("raw demand at the start year must be positive")
    omega_m = meat / params.Q_m0
    omega_c = food / target
    # the first step sees no shortfall
    return DemandState(omega_m, omega_c, params.Q_m0, params.Q_m0, params.Q_c0, params.Q_c0)


def feedback_factor(last_D: float, last_Q: float, alpha: float, symmetric: bool = False) -> float:
    """1 - alpha * shortfall fraction, clamped at 1 unless the feedback is symmetric."""
    if last_D == 0:
        return 1.0
    fb = 1.0 - alpha * (last_D - last_Q) / last_D
    fb = max(0.0, fb)
    return fb if symmetric else min(1.0, fb)


def demands_for_step(raw_meat: float, raw_food: float, state: DemandState,
                     params: ModelParams) -> tuple[float, float]:
    """Normalized meat and crop-food demand after the shortfall feedback."""
    sym = params.symmetric_demand_feedback
    D_m = raw_meat / state.omega_m * feedback_factor(state.last_D_m, state.last_Q_m, params.alpha_m, sym)
    D_food = raw_food / state.omega_c * feedback_factor(state.last_D_c, state.last_Q_c, params.alpha_c, sym)
    return D_m, D_food


def exogenous_demand(drivers: Drivers, params: ModelParams) -> tuple[np.ndarray, np.ndarray, DemandState]:
    """Normalized pre-feedback meat and crop-food series over the driver years.

    Demand reductions act on the raw series for years after the policy year.
    """
    meat = meat_demand_raw(drivers.income, drivers.population, params)
    food = crop_food_demand_raw(drivers.income, drivers.population, params)
    if np.any(food <= 0):
        raise DriverDomainError("crop-food demand is not positive for some year")
    state = init_normalization(drivers.population[0], drivers.income[0], params,
                               crop_food_target=initial_crop_food(params))
    meat = reduce_excess(meat, drivers.years, params.policy_year, params.meat_demand_reduction)
    food = reduce_excess(food, drivers.years, params.policy_year, params.crop_demand_reduction)
    return meat / state.omega_m, food / state.omega_c, state
