import math

import numpy as np
import pytest

from foodland import ModelParams, builtin_drivers
from foodland.params import ConfigError
from foodland.scenario import (ALL_KINDS, Experiment, PolicyKind, PolicySpec, Portfolio, apply_policy,
                               default_pool, demand_sweep, enumerate_and_rank, rank, run_scenario, threshold)

DRV = builtin_drivers()
P = ModelParams()


@pytest.fixture(scope="module")
def small():
    return Experiment(P, DRV, n_runs=3, master_seed=5, workers=1)


def test_apply_policy_is_idempotent():
    spec = PolicySpec("ChemicalReduction", 0.1)
    once, d1 = apply_policy(P, DRV, spec)
    twice, _ = apply_policy(once, DRV, spec)
    assert once == twice
    assert d1 is DRV


def test_chemical_reduction_scales_delta_after_policy_year():
    pre, post = Portfolio.of(PolicySpec("ChemicalReduction", 0.1)).apply(P).regimes()
    assert post.delta == pytest.approx(0.99, rel=1e-12)
    assert pre.delta == P.delta


def test_livestock_reduction_scales_gamma_and_caps_density():
    pre, post = Portfolio.of(PolicySpec("LivestockDensityReduction", 0.2)).apply(P).regimes()
    assert post.gamma == pytest.approx(0.8 * P.gamma)
    assert post.lambda_cap_at_policy_year and not pre.lambda_cap_at_policy_year


def test_empty_portfolio_changes_nothing():
    assert Portfolio().apply(P) == P
    assert Portfolio().label == "baseline"


@pytest.mark.parametrize("name", ["MeatDemandReduction", "meat_demand_reduction", "MEATDEMANDREDUCTION"])
def test_kind_parsing(name):
    assert PolicyKind.parse(name) is PolicyKind.MeatDemandReduction


def test_unknown_kind_and_bad_magnitude():
    with pytest.raises(ConfigError):
        PolicySpec("Afforestation")
    with pytest.raises(ConfigError):
        PolicySpec("ChemicalReduction", 1.5)


def test_portfolio_order_and_duplicates():
    a = Portfolio.of(PolicySpec("MeatDemandReduction"), PolicySpec("ChemicalReduction"))
    b = Portfolio.of(PolicySpec("ChemicalReduction"), PolicySpec("MeatDemandReduction"))
    assert a == b and a.label == b.label
    with pytest.raises(ConfigError):
        Portfolio.of(PolicySpec("ChemicalReduction"), PolicySpec("ChemicalReduction", 0.2))


def test_with_policies_replaces_same_kind():
    pf = Portfolio.of(PolicySpec("ChemicalReduction", 0.1)).with_policies(PolicySpec("ChemicalReduction", 0.3))
    assert pf.policies == (PolicySpec("ChemicalReduction", 0.3),)


def test_empty_scenario_is_exactly_zero(small):
    r = small.scenario(Portfolio())
    assert (r.delta_forest_pct, r.delta_degraded_pct) == (0.0, 0.0)


def test_run_scenario_without_experiment(small):
    pf = Portfolio.of(PolicySpec("MeatDemandReduction", 0.3))
    r = run_scenario(pf, small.baseline, 3, 5, params=P, drivers=DRV)
    assert r.ensemble.mean.tobytes() == small.scenario(pf).ensemble.mean.tobytes()
    with pytest.raises(ConfigError):
        run_scenario(pf, small.baseline, 4, 5, params=P, drivers=DRV)


def test_demand_sweep_zero_equals_base(small):
    base = Portfolio.of(PolicySpec("OrganicCropExpansion", 0.1))
    sw = demand_sweep(base, [0.0, 0.5], small)
    ref = small.scenario(base)
    assert sw.results[0].delta_forest_pct == ref.delta_forest_pct
    assert sw.results[0].delta_degraded_pct == ref.delta_degraded_pct


@pytest.mark.parametrize("grid", [[], [0.5, 0.2], [1.2]])
def test_demand_sweep_rejects_bad_grid(small, grid):
    with pytest.raises(ConfigError):
        demand_sweep(Portfolio(), grid, small)


def test_threshold_interpolates_latest_crossing():
    rhos = [0.0, 0.1, 0.2, 0.3]
    forest = [-4.0, -2.0, 2.0, 5.0]
    degraded = [-1.0, -3.0, -6.0, -9.0]
    assert threshold(rhos, forest, degraded) == pytest.approx(0.15)
    assert threshold(rhos, [1, 1, 1, 1], [-1, -1, -1, -1]) == 0.0
    assert threshold(rhos, [-1] * 4, degraded) is None


def test_threshold_takes_max_over_failing_criteria():
    # forest crosses at 0.15, degraded at 0.175
    assert threshold([0.1, 0.2], [-1.0, 1.0], [3.0, -1.0]) == pytest.approx(0.175)


def test_single_policy_pool_tops_both_lists(small):
    rk = enumerate_and_rank([PolicySpec("ChemicalReduction")], small)
    assert len(rk.by_forest) == len(rk.by_degraded) == 1
    assert rk.both == rk.by_forest


def test_ranking_deterministic(small):
    pool = [PolicySpec("ChemicalReduction"), PolicySpec("MeatDemandReduction")]
    a = enumerate_and_rank(pool, small)
    b = enumerate_and_rank(pool, Experiment(P, DRV, n_runs=3, master_seed=5, workers=1))
    assert [r.portfolio for r in a.by_forest] == [r.portfolio for r in b.by_forest]
    assert [r.delta_degraded_pct for r in a.by_degraded] == [r.delta_degraded_pct for r in b.by_degraded]
    assert len(a.results) == 3


def test_pool_validation(small):
    with pytest.raises(ConfigError):
        enumerate_and_rank([PolicySpec("ChemicalReduction"), PolicySpec("ChemicalReduction", 0.2)], small)
    with pytest.raises(ConfigError):
        enumerate_and_rank([], small)


def test_rank_puts_nan_last():
    class R:
        def __init__(self, f, d):
            self.delta_forest_pct, self.delta_degraded_pct = f, d
    rs = [R(math.nan, math.nan), R(1.0, -1.0), R(2.0, 0.5)]
    rk = rank(rs, top_k=2)
    assert rk.by_forest == [rs[2], rs[1]]
    assert rk.by_degraded == [rs[1], rs[2]]


def test_default_pool_has_every_kind():
    assert [s.kind for s in default_pool()] == list(ALL_KINDS)
    assert all(s.magnitude == 0.1 for s in default_pool())
