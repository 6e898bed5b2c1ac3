"""Least-squares fits for the demand laws and the driver extrapolation curves."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .params import ModelError


class FitError(ModelError):
    """The data do not identify the requested parameters."""


@dataclass
class FitResult:
    params: dict
    rss: float
    residuals: np.ndarray
    model: str = ""
    _predict: object = field(default=None, repr=False)

    def predict(self, x):
        return self._predict(np.asarray(x, dtype=float))


def _linear_lsq(x, y, what):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError(f"{what}: x and y must be 1-d arrays of equal length")
    if x.size < 2:
        raise FitError(f"{what}: need at least 2 points")
    if np.ptp(x) == 0:
        raise FitError(f"{what}: degenerate design matrix (constant income)")
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef, y - A @ coef


def fit_engel(income, calories):
    """(a, b) of calories per capita = a + b ln I."""
    income = np.asarray(income, dtype=float)
    if np.any(income <= 0):
        raise FitError("incomes must be positive")
    (a, b), res = _linear_lsq(np.log(income), calories, "calorie fit")
    return FitResult({"a": float(a), "b": float(b)}, float(res @ res), res, "a + b ln I",
                     lambda I: a + b * np.log(I))


def fit_meat(income, meat):
    """(c, d) of meat per capita = c I^d, fitted on the log-log scale."""
    income = np.asarray(income, dtype=float)
    meat = np.asarray(meat, dtype=float)
    if np.any(income <= 0) or np.any(meat <= 0):
        raise FitError("incomes and meat consumption must be positive")
    (lc, d), res = _linear_lsq(np.log(income), np.log(meat), "meat fit")
    c = float(np.exp(lc))
    return FitResult({"c": c, "d": float(d)}, float(res @ res), res, "c I^d",
                     lambda I: c * I ** d)


def fit_demand_params(income, calories, meat, min_points: int = 3) -> FitResult:
    """Fit (a, b, c, d) jointly from per-capita calorie and meat series against income.

    Residuals are calorie residuals followed by log-meat residuals.
    """
    for name, s in (("income", income), ("calories", calories), ("meat", meat)):
        if np.asarray(s).size < min_points:
            raise FitError(f"need at least {min_points} points for {name}")
    e = fit_engel(income, calories)
    m = fit_meat(income, meat)
    res = np.concatenate([e.residuals, m.residuals])
    return FitResult({**e.params, **m.params}, float(res @ res), res, "demand",
                     lambda I: np.stack([e.predict(I), m.predict(I)]))


def fit_population_logistic(years, population) -> FitResult:
    """N(y) = K / (1 + exp(-r (y - y0)))."""
    years = np.asarray(years, dtype=float)
    pop = np.asarray(population, dtype=float)
    if years.size < 3:
        raise FitError("need at least 3 population points")
    if np.any(pop <= 0):
        raise FitError("population must be positive")
    f = lambda y, K, r, y0: K / (1.0 + np.exp(-r * (y - y0)))
    p0 = (2.0 * pop.max(), 0.03, years.mean())
    scale = pop.max()
    try:
        (K, r, y0), _ = curve_fit(lambda y, K, r, y0: f(y, K * scale, r, y0) / scale, years, pop / scale,
                                  p0=(p0[0] / scale, p0[1], p0[2]), maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"population logistic fit did not converge: {exc}") from None
    K *= scale
    res = pop - f(years, K, r, y0)
    return FitResult({"K": float(K), "r": float(r), "y0": float(y0)}, float(res @ res), res,
                     "logistic", lambda y: f(y, K, r, y0))


def fit_income_exponential(years, income) -> FitResult:
    """I(y) = I0 exp(g (y - y_first)), fitted on log income."""
    years = np.asarray(years, dtype=float)
    income = np.asarray(income, dtype=float)
    if np.any(income <= 0):
        raise FitError("income must be positive")
    y_first = years[0]
    (li, g), res = _linear_lsq(years - y_first, np.log(income), "income fit")
    I0 = float(np.exp(li))
    return FitResult({"I0": I0, "g": float(g)}, float(res @ res), res, "exponential",
                     lambda y: I0 * np.exp(g * (y - y_first)))
