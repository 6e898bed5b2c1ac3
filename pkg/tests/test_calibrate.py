import numpy as np
import pytest

from foodland.calibrate import (FitError, fit_demand_params, fit_engel, fit_income_exponential, fit_meat,
                                fit_population_logistic)

TRUTH = {"a": -138.2, "b": 744.4, "c": 210.0, "d": 0.65}
INCOME = np.linspace(3.0, 60.0, 40)


def synth(I, noise=None):
    cal = TRUTH["a"] + TRUTH["b"] * np.log(I)
    meat = TRUTH["c"] * I ** TRUTH["d"]
    if noise is not None:
        cal = cal * (1 + noise[0])
        meat = meat * (1 + noise[1])
    return cal, meat


def test_exact_recovery():
    fit = fit_demand_params(INCOME, *synth(INCOME))
    for k, v in TRUTH.items():
        assert fit.params[k] == pytest.approx(v, rel=1e-9)
    assert fit.rss < 1e-15


def test_two_points_interpolate_exactly():
    I = np.array([10.0, 40.0])
    fit = fit_engel(I, [100.0, 900.0])
    assert fit.rss == pytest.approx(0.0, abs=1e-20)
    assert fit.predict(I) == pytest.approx([100.0, 900.0], rel=1e-12)


def test_constant_income_is_degenerate():
    with pytest.raises(FitError):
        fit_demand_params(np.full(5, 20.0), np.arange(5.0) + 1, np.arange(5.0) + 1)


def test_too_few_points_and_bad_values():
    with pytest.raises(FitError):
        fit_demand_params([1.0, 2.0], [1.0, 2.0], [1.0, 2.0])
    with pytest.raises(FitError):
        fit_meat([1.0, 2.0, 3.0], [1.0, -2.0, 3.0])


def noisy_estimates(trials=100, seed=0):
    rng = np.random.default_rng(seed)
    est = []
    for _ in range(trials):
        fit = fit_demand_params(INCOME, *synth(INCOME, rng.normal(0, 0.01, (2, INCOME.size))))
        est.append([fit.params[k] for k in TRUTH])
    return np.array(est), np.array(list(TRUTH.values()))


def test_noisy_recovery_median_within_two_percent():
    est, truth = noisy_estimates()
    assert np.all(np.abs(np.median(est, axis=0) / truth - 1) < 0.02)


def test_noisy_slopes_and_meat_law_accurate_per_trial():
    # the calorie intercept sits far from the data at ln I = 0 and is the least identified
    est, truth = noisy_estimates()
    err = np.median(np.abs(est / truth - 1), axis=0)
    assert np.all(err[1:] < 0.02)


def test_population_logistic_recovery():
    years = np.arange(1960, 2023)
    pop = 1e10 / (1 + np.exp(-0.05 * (years - 1990)))
    fit = fit_population_logistic(years, pop)
    assert fit.params["K"] == pytest.approx(1e10, rel=1e-6)
    assert fit.params["r"] == pytest.approx(0.05, rel=1e-6)
    assert fit.params["y0"] == pytest.approx(1990, rel=1e-9)


def test_income_exponential_recovery():
    years = np.arange(1960, 2023)
    fit = fit_income_exponential(years, 30 * np.exp(0.02 * (years - 1960)))
    assert fit.params["I0"] == pytest.approx(30, rel=1e-12)
    assert fit.params["g"] == pytest.approx(0.02, rel=1e-12)
