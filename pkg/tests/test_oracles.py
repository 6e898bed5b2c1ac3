"""Each model law against an independent straight-line evaluation, at 1e-9 relative tolerance."""

import math

import numpy as np
import pytest

from foodland.demand import DemandState, caloric_demand_raw, demands_for_step, feedback_factor, meat_demand_raw
from foodland.engine import land_response
from foodland.landscape import Landscape, ecosystem_service, update_integrity
from foodland.params import ModelParams
from foodland.production import (InputState, advance_technology, crop_output, feed_demand, meat_output,
                                 scale_meat_to_feed, update_inputs)

REL = 1e-9


def close(a, b):
    return a == pytest.approx(b, rel=REL, abs=1e-12)


# independent oracles

def o_calories(I, N, a, b):
    return (a + b * math.log(I)) * N


def o_meat(I, N, c, d):
    return c * math.pow(I, d) * N


def o_crop(A, T, Phi, M, eps, k, f):
    return A * (1 + T) * math.pow(Phi, k) * math.pow(M, f) * math.pow(eps, 1 - k - f)


def o_crop_org(A, T, M, eps, k, f):
    return A * (1 + T) * math.pow(M, f) * math.pow(eps, 1 - k - f)


def o_livestock(A, T, lam, eps, h):
    return A * (1 + T) * math.pow(lam, h) * math.pow(eps, 1 - h)


def o_livestock_org(A, T, lam, lam_max, eps, h):
    return A * (1 + T) * math.pow(min(lam_max, lam), h) * math.pow(eps, 1 - h)


def o_adjust(x, speed, D, Q):
    return max(1.0, x + speed * x * (D - Q) / D)


def o_tech(T, nu, Tmax):
    return T + nu * T * (1 - T / Tmax)


def o_expand(D, Q, phi, n, zp):
    return round(phi * n) * max(0, math.floor(1 + zp * (D - Q) / D))


def o_contract(D, Q, phi, n, zm):
    return round(phi * n) * max(0, math.floor(1 + zm * (Q - D) / D))


CALORIES = [(math.e, 1, -138.2, 744.4), (math.e ** 2, 2, -138.2, 744.4), (37.0, 3.1e9, -138.2, 744.4),
            (4150.0, 7.9e9, -138.2, 744.4), (1.0, 5.0, 10.0, 3.0), (123.456, 1.0, -50.0, 20.0)]


@pytest.mark.parametrize("I,N,a,b", CALORIES)
def test_calorie_law(I, N, a, b):
    p = ModelParams(a=a, b=b)
    assert close(caloric_demand_raw(I, N, p), o_calories(I, N, a, b))


def test_calorie_law_documented_values():
    p = ModelParams()
    assert close(caloric_demand_raw(math.e, 1, p), 606.2)
    assert close(caloric_demand_raw(math.e ** 2, 2, p), 2701.2)
    assert caloric_demand_raw(10.0, 0, p) == 0


MEAT = [(1.0, 1.0, 210, 0.65), (32.0, 1.0, 210, 0.65), (37.0, 1e9, 210, 0.65), (5000.0, 8e9, 210, 0.65),
        (2.5, 3.0, 1.0, 1.0), (100.0, 7.0, 42.0, 0.3)]


@pytest.mark.parametrize("I,N,c,d", MEAT)
def test_meat_demand_law(I, N, c, d):
    p = ModelParams(c=c, d=d)
    assert close(meat_demand_raw(I, N, p), o_meat(I, N, c, d))


def test_meat_demand_documented_values():
    p = ModelParams()
    assert close(meat_demand_raw(1.0, 1.0, p), 210.0)
    # the rounded reference value is only good to about four digits
    assert meat_demand_raw(32.0, 1.0, p) == pytest.approx(1997.7, rel=1e-4)


FEEDBACK = [(1000.0, 100.0, 90.0, 0.5, 950.0), (2000.0, 100.0, 80.0, 0.1, 1960.0),
            (500.0, 10.0, 10.0, 0.5, 500.0), (700.0, 50.0, 60.0, 0.5, 700.0),
            (300.0, 40.0, 10.0, 1.0, 75.0), (1.0, 3.0, 0.0, 0.25, 0.75)]


@pytest.mark.parametrize("raw,lastD,lastQ,alpha,expected", FEEDBACK)
def test_shortfall_feedback(raw, lastD, lastQ, alpha, expected):
    oracle = raw * min(1.0, 1 - alpha * (lastD - lastQ) / lastD)
    assert close(raw * feedback_factor(lastD, lastQ, alpha), oracle)
    assert close(oracle, expected)
    p = ModelParams(alpha_m=alpha, alpha_c=alpha)
    st = DemandState(1.0, 1.0, lastD, lastQ, lastD, lastQ)
    Dm, Dc = demands_for_step(raw, raw, st, p)
    assert close(Dm, oracle) and close(Dc, oracle)


CROP = [(1500, 0.0, 1.0, 1.0, 1.0), (1500, 0.2, 2.0, 1.0, 1.0), (100, 0.05, 3.3, 2.1, 0.7),
        (2457, 0.19, 24.0, 15.0, 0.8), (1, 0.001, 1.0, 7.5, 0.01), (800, 0.1, 1.7, 1.2, 0.95)]


@pytest.mark.parametrize("A,T,Phi,M,eps", CROP)
def test_conventional_crop_output(A, T, Phi, M, eps):
    p = ModelParams()
    q, _ = crop_output(A, 0, InputState(T, M, Phi), eps, 1.0, p)
    assert close(q, o_crop(A, T, Phi, M, eps, p.k, p.f))


@pytest.mark.parametrize("A,T,Phi,M,eps", CROP)
def test_organic_crop_output(A, T, Phi, M, eps):
    p = ModelParams()
    _, q = crop_output(0, A, InputState(T, M, Phi), 1.0, eps, p)
    assert close(q, o_crop_org(A, T, M, eps, p.k, p.f))


def test_crop_output_documented_values():
    p = ModelParams()
    assert close(crop_output(1500, 0, InputState(0.0), 1.0, 1.0, p)[0], 1500.0)
    assert crop_output(1500, 0, InputState(0.2, 1.0, 2.0), 1.0, 1.0, p)[0] == pytest.approx(2067.7, abs=0.05)
    assert crop_output(0, 100, InputState(0.0), 1.0, 0.5, p)[1] == pytest.approx(81.23, abs=0.005)


LIVESTOCK = [(3500, 0.0, 1.0, 1.0), (3500, 0.0, 2.0, 1.0), (100, 0.0, 5.0, 1.0), (6000, 0.2, 4.7, 0.6),
             (1, 0.1, 2.99, 0.3), (250, 0.15, 3.0, 0.05)]


@pytest.mark.parametrize("A,T,lam,eps", LIVESTOCK)
def test_conventional_meat_output(A, T, lam, eps):
    p = ModelParams()
    q, _ = meat_output(A, 0, InputState(T, Lambda=lam), eps, 1.0, p)
    assert close(q, o_livestock(A, T, lam, eps, p.h))


@pytest.mark.parametrize("A,T,lam,eps", LIVESTOCK)
def test_organic_meat_output(A, T, lam, eps):
    p = ModelParams()
    _, q = meat_output(0, A, InputState(T, Lambda=lam), 1.0, eps, p)
    assert close(q, o_livestock_org(A, T, lam, p.lambda_max, eps, p.h))


def test_meat_output_documented_values():
    p = ModelParams()
    assert close(meat_output(3500, 0, InputState(0.0), 1.0, 1.0, p)[0], 3500.0)
    assert meat_output(3500, 0, InputState(0.0, Lambda=2.0), 1.0, 1.0, p)[0] == pytest.approx(6761.6, rel=1e-4)
    assert meat_output(0, 100, InputState(0.0, Lambda=5.0), 1.0, 1.0, p)[1] == pytest.approx(283.98, rel=1e-4)


@pytest.mark.parametrize("q,fc", [(3500.0, 0.17), (0.0, 0.17), (1234.5, 0.4), (10.0, 0.0), (29000.0, 0.17)])
def test_feed_demand(q, fc):
    assert close(feed_demand(q, ModelParams(feed_coeff=fc)), fc * q)


def test_feed_documented_value():
    assert close(feed_demand(3500.0, ModelParams()), 595.0)


SCALING = [(100.0, 1200.0, 1000.0, 500.0), (100.0, 2000.0, 1000.0, 500.0), (100.0, 0.0, 1000.0, 500.0),
           (7.0, 10.0, 5.0, 20.0), (50.0, 1.0, 0.0, 0.0), (3500.0, 1450.0, 905.0, 595.0)]


@pytest.mark.parametrize("Qm,Qc,Df,Dfeed", SCALING)
def test_meat_scaling_to_feed(Qm, Qc, Df, Dfeed):
    factor = 1.0 if Df + Dfeed == 0 else min(1.0, Qc / (Df + Dfeed))
    out, fac = scale_meat_to_feed(Qm, Qc, Df, Dfeed)
    assert close(fac, factor) and close(out, Qm * factor)


def test_meat_scaling_documented_value():
    out, fac = scale_meat_to_feed(100.0, 1200.0, 1000.0, 500.0)
    assert close(fac, 0.8) and close(out, 80.0)


INPUTS = [(1.0, 1.0, 1.0, 100.0, 90.0, 100.0, 90.0), (2.0, 3.0, 1.5, 100.0, 120.0, 50.0, 40.0),
          (1.0, 1.0, 1.0, 100.0, 150.0, 100.0, 150.0), (8.0, 11.0, 4.6, 12000.0, 11800.0, 29000.0, 28500.0),
          (1.3, 1.0, 2.2, 10.0, 10.0, 10.0, 10.0), (5.0, 5.0, 5.0, 1.0, 0.2, 3.0, 5.0)]


@pytest.mark.parametrize("M,Phi,Lam,Dc,Qc,Dm,Qm", INPUTS)
def test_input_adjustment(M, Phi, Lam, Dc, Qc, Dm, Qm):
    p = ModelParams()
    out = update_inputs(InputState(0.01, M, Phi, Lam), Dc, Qc, Dm, Qm, p)
    assert close(out.M, o_adjust(M, p.beta, Dc, Qc))
    assert close(out.Phi, o_adjust(Phi, p.delta, Dc, Qc))
    assert close(out.Lambda, o_adjust(Lam, p.gamma, Dm, Qm))


def test_input_adjustment_documented_values():
    p = ModelParams()
    out = update_inputs(InputState(0.0), 100.0, 90.0, 100.0, 100.0, p)
    assert close(out.M, 1.095)
    out = update_inputs(InputState(0.0), 100.0, 150.0, 100.0, 100.0, p)
    assert out.Phi == 1.0  # raw 0.45, floored


@pytest.mark.parametrize("T", [0.001, 0.1, 0.2, 0.05, 0.1999, 0.0])
def test_technology_growth(T):
    p = ModelParams()
    assert close(advance_technology(T, p), o_tech(T, p.nu, p.T_max))


def test_technology_documented_values():
    p = ModelParams()
    assert close(advance_technology(0.001, p), 0.0010995)
    assert close(advance_technology(0.1, p), 0.105)
    assert advance_technology(0.2, p) == 0.2


LAND = [(100.0, 100.0), (100.0, 98.0), (100.0, 120.0), (1000.0, 990.0), (50.0, 49.9), (3000.0, 2400.0),
        (10.0, 10.5)]


@pytest.mark.parametrize("D,Q", LAND)
@pytest.mark.parametrize("side", ["crop", "pasture"])
def test_land_response(D, Q, side):
    p = ModelParams()
    zp, zm = (p.zeta_plus_c, p.zeta_minus_c) if side == "crop" else (p.zeta_plus_m, p.zeta_minus_m)
    exp, con = land_response(D, Q, p, side)
    assert exp == o_expand(D, Q, p.phi, p.n_cells, zp)
    assert con == o_contract(D, Q, p.phi, p.n_cells, zm)


def test_land_response_documented_values():
    p = ModelParams()
    assert land_response(100.0, 100.0, p, "crop") == (3, 3)
    assert land_response(100.0, 98.0, p, "crop")[0] == 9
    assert land_response(100.0, 150.0, p, "crop")[0] == 0


def _landscape(lu, eps, th):
    n = len(lu)
    th = np.asarray(th, dtype=float)
    return Landscape(n, 1, np.array(lu, dtype=np.int8), np.zeros(n, dtype=np.int8), np.array(eps, dtype=float),
                     th, th, th, 1.0)


INTEGRITY = [  # land use, eps, theta, Lambda, M, Phi, E
    (1, 1.0, 1e-4, 1.0, 1.0, 1.0, 1.0),
    (1, 0.7, 3e-3, 2.0, 8.0, 11.0, 0.8),
    (2, 0.9, 2e-4, 4.6, 1.0, 1.0, 0.7),
    (2, 0.5, 1e-2, 5.0, 1.0, 1.0, 0.95),
    (0, 1.0, 1e-3, 1.0, 1.0, 1.0, 1.0),
    (0, 1.2, 5e-3, 1.0, 1.0, 1.0, 0.6),
    (0, 2.0, 1e-3, 1.0, 1.0, 1.0, 0.9),
    (1, 0.3, 1e-4, 1.0, 15.0, 24.0, 0.63),
]


@pytest.mark.parametrize("lu,eps,th,lam,M,Phi,E", INTEGRITY)
def test_integrity_update(lu, eps, th, lam, M, Phi, E):
    p = ModelParams()
    ls = _landscape([lu], [eps], [th])
    update_integrity(ls, lam, M, Phi, E, p)
    if lu == 0:
        expected = eps * (1 + th * E * (1 - eps / p.eps_max))
    elif lu == 1:
        expected = eps * (1 - th * (M + Phi) / E)
    else:
        expected = eps * (1 - th * lam / E)
    assert close(ls.eps[0], expected)


def test_integrity_documented_values():
    p = ModelParams()
    ls = _landscape([1, 0, 0], [1.0, 1.0, 2.0], [1e-4, 1e-3, 1e-3])
    update_integrity(ls, 1.0, 1.0, 1.0, 1.0, p)
    assert close(ls.eps[0], 0.9998)
    assert close(ls.eps[1], 1.0005)
    assert ls.eps[2] == 2.0


@pytest.mark.parametrize("eps,eps0,p", [([2.0, 2.0], 4.0, 0.25), ([1.0, 1.0], 4.0, 0.25), ([0.3, 1.7, 0.9], 6.0, 0.25),
                                        ([1.0], 2.0, 0.0), ([0.5, 0.5, 0.5], 1.5, 0.5), ([1.9] * 7, 14.0, 1.0)])
def test_ecosystem_service(eps, eps0, p):
    ls = _landscape([0] * len(eps), eps, [1e-3] * len(eps))
    ls.eps0_natural_sum = eps0
    assert close(ecosystem_service(ls, p), math.pow(sum(eps) / eps0, p))


def test_ecosystem_service_documented_values():
    ls = _landscape([0, 0], [1.0, 1.0], [1e-3, 1e-3])
    ls.eps0_natural_sum = 4.0
    assert close(ecosystem_service(ls, 0.25), 0.5 ** 0.25)
    assert ecosystem_service(ls, 0.25) == pytest.approx(0.840896, abs=1e-6)
    ls.eps0_natural_sum = 2.0
    assert ecosystem_service(ls, 0.25) == 1.0
