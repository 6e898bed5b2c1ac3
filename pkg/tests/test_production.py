import pytest
from hypothesis import given, settings, strategies as st

from foodland.params import ModelParams
from foodland.production import (InputState, advance_technology, crop_output, feed_demand, meat_output,
                                 scale_meat_to_feed, update_inputs)

P = ModelParams()
pos = st.floats(0.01, 10.0)
eps = st.floats(0.01, 1.0)
area = st.integers(0, 5000)
ge1 = st.floats(1.0, 20.0)


@given(area, st.floats(0, 0.2), ge1, ge1, eps)
def test_organic_never_beats_conventional_crop(a, T, Phi, M, e):
    conv, _ = crop_output(a, 0, InputState(T, M, Phi), e, 1.0, P)
    _, org = crop_output(0, a, InputState(T, M, Phi), 1.0, e, P)
    assert org <= conv * (1 + 1e-12)


@given(area, st.floats(0, 0.2), ge1, eps)
def test_organic_never_beats_conventional_meat(a, T, lam, e):
    conv, _ = meat_output(a, 0, InputState(T, Lambda=lam), e, 1.0, P)
    _, org = meat_output(0, a, InputState(T, Lambda=lam), 1.0, e, P)
    assert org <= conv * (1 + 1e-12)


@given(st.integers(1, 5000), st.floats(0, 0.2), ge1, ge1, eps, st.floats(0.1, 10))
def test_crop_output_linear_in_area(a, T, Phi, M, e, s):
    inp = InputState(T, M, Phi)
    one, _ = crop_output(a, 0, inp, e, e, P)
    scaled, _ = crop_output(a * s, 0, inp, e, e, P)
    assert scaled == pytest.approx(s * one, rel=1e-12)


def test_zero_area_gives_zero_output():
    assert crop_output(0, 0, InputState(0.1, 2.0, 2.0), 0.5, 0.5, P) == (0.0, 0.0)
    assert meat_output(0, 0, InputState(0.1, Lambda=2.0), 0.5, 0.5, P) == (0.0, 0.0)


def test_negative_area_rejected():
    with pytest.raises(ValueError):
        crop_output(-1, 0, InputState(0.0), 1.0, 1.0, P)


@given(ge1, ge1, eps, st.floats(0, 0.2))
def test_chemical_elasticity_matches_finite_difference(Phi, M, e, T):
    h = 1e-6 * Phi
    f = lambda x: crop_output(100, 0, InputState(T, M, x), e, e, P)[0]
    fd = (f(Phi + h) - f(Phi - h)) / (2 * h)
    assert fd == pytest.approx(P.k * f(Phi) / Phi, rel=1e-5)


@given(pos, pos, pos, pos, pos, pos)
def test_intensities_stay_at_or_above_one(M, Phi, Dc, Qc, Dm, Qm):
    inp = update_inputs(InputState(0.0, max(M, 1), max(Phi, 1), 1.0), Dc, Qc, Dm, Qm, P)
    assert min(inp.M, inp.Phi, inp.Lambda) >= 1.0


def test_update_inputs_rejects_zero_demand():
    with pytest.raises(ValueError):
        update_inputs(InputState(0.0), 0.0, 1.0, 1.0, 1.0, P)


@settings(max_examples=200)
@given(st.floats(1e-6, 0.2))
def test_technology_monotone_and_bounded(T):
    T2 = advance_technology(T, P)
    assert T <= T2 <= P.T_max


@given(pos, pos, pos, pos)
def test_feed_scaling_in_unit_interval(Qm, Qc, Df, Dfe):
    Qm2, s = scale_meat_to_feed(Qm, Qc, Df, Dfe)
    assert 0 < s <= 1 and Qm2 <= Qm


def test_feed_scaling_zero_total_is_one():
    assert scale_meat_to_feed(10.0, 0.0, 0.0, 0.0) == (10.0, 1.0)


def test_feed_decoupled_when_coefficient_zero():
    assert feed_demand(3500.0, P.replace(feed_coeff=0.0)) == 0.0
    with pytest.raises(ValueError):
        feed_demand(-1.0, P)
