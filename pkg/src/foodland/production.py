"""Crop and livestock output, feed coupling and adaptive input intensities."""

from __future__ import annotations

from dataclasses import dataclass

from .params import ModelParams


@dataclass
class InputState:
    T: float
    M: float = 1.0
    Phi: float = 1.0
    Lambda: float = 1.0


@dataclass
class ProductionOutput:
    q_c: float
    q_c_org: float
    q_m: float
    q_m_org: float
    Q_c: float
    Q_m: float
    D_feed: float
    feed_scaling: float


def crop_output(area_conv, area_org, inputs: InputState, eps_conv, eps_org, params: ModelParams):
    """Conventional and organic crop output; organic forgoes the chemical term."""
    if area_conv < 0 or area_org < 0:
        raise ValueError("areas must be nonnegative")
    e = 1.0 - params.k - params.f
    tech = 1.0 + inputs.T
    q_c = area_conv * tech * inputs.Phi ** params.k * inputs.M ** params.f * eps_conv ** e if area_conv else 0.0
    q_o = area_org * tech * inputs.M ** params.f * eps_org ** e if area_org else 0.0
    return q_c, q_o


def meat_output(area_conv, area_org, inputs: InputState, eps_conv, eps_org, params: ModelParams):
    """Conventional and organic meat output; organic density is capped at lambda_max."""
    if area_conv < 0 or area_org < 0:
        raise ValueError("areas must be nonnegative")
    e = 1.0 - params.h
    tech = 1.0 + inputs.T
    q_m = area_conv * tech * inputs.Lambda ** params.h * eps_conv ** e if area_conv else 0.0
    lam_o = min(params.lambda_max, inputs.Lambda)
    q_o = area_org * tech * lam_o ** params.h * eps_org ** e if area_org else 0.0
    return q_m, q_o


def feed_demand(q_m_planned_total: float, params: ModelParams) -> float:
    if q_m_planned_total < 0:
        raise ValueError("planned meat output must be nonnegative")
    return params.feed_coeff * q_m_planned_total


def scale_meat_to_feed(Q_m_planned: float, Q_c: float, D_food: float, D_feed: float):
    """Scale meat back when crop output cannot cover food plus feed."""
    total = D_food + D_feed
    factor = 1.0 if total == 0 else min(1.0, Q_c / total)
    return Q_m_planned * factor, factor


def _adjust(x: float, speed: float, D: float, Q_prev: float) -> float:
    return max(1.0, x + speed * x * (D - Q_prev) / D)


def update_livestock(inputs: InputState, D_m: float, Q_m_prev: float, params: ModelParams) -> InputState:
    inputs.Lambda = _adjust(inputs.Lambda, params.gamma, D_m, Q_m_prev)
    return inputs


def update_crop_inputs(inputs: InputState, D_c: float, Q_c_prev: float, params: ModelParams) -> InputState:
    inputs.M = _adjust(inputs.M, params.beta, D_c, Q_c_prev)
    inputs.Phi = _adjust(inputs.Phi, params.delta, D_c, Q_c_prev)
    return inputs


def update_inputs(inputs: InputState, D_c: float, Q_c_prev: float, D_m: float, Q_m_prev: float,
                  params: ModelParams) -> InputState:
    """Proportional gap correction of M, Phi and Lambda, each floored at 1."""
    if D_c <= 0 or D_m <= 0:
        raise ValueError("demands must be positive")
    update_crop_inputs(inputs, D_c, Q_c_prev, params)
    return update_livestock(inputs, D_m, Q_m_prev, params)


def advance_technology(T: float, params: ModelParams) -> float:
    """Logistic technology growth towards T_max."""
    return T + params.nu * T * (1.0 - T / params.T_max)
