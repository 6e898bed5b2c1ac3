"""Model parameters with the calibrated defaults and their config-file grouping."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields


class ConfigError(ValueError):
    """Invalid configuration: bad values, unknown keys or unparseable files."""


class ModelError(RuntimeError):
    """Failure while simulating (out-of-domain drivers, broken invariants)."""


@dataclass
class ModelParams:
    # demand
    a: float = -138.2
    b: float = 744.4
    c: float = 210.0
    d: float = 0.65
    r: float = 3000.0
    alpha_m: float = 0.5
    alpha_c: float = 0.1
    meat_calorie_factor: float = 0.0  # share of r*D_m subtracted from total calories
    symmetric_demand_feedback: bool = False

    # production
    k: float = 0.2
    f: float = 0.5
    h: float = 0.95
    lambda_max: float = 3.0
    beta: float = 0.95
    delta: float = 1.1
    gamma: float = 0.95
    nu: float = 0.1
    T_max: float = 0.2
    T0: float = 0.001
    feed_coeff: float = 0.17
    Q_c0: float = 1500.0
    Q_m0: float = 3500.0
    balanced_start: bool = True

    # landscape
    width: int = 100
    height: int = 100
    share_natural: float = 0.5
    share_pasture: float = 0.35
    share_crop: float = 0.15
    xi: float = 10.0
    mu_n: float = 1.0
    mu_c: float = 1.0
    mu_m: float = 1.0
    sigma_n: float = 1000.0
    sigma_c: float = 10000.0
    sigma_m: float = 5000.0
    eps_max: float = 2.0
    eps_min: float = 1e-6
    p: float = 0.25
    natural_sign: float = 1.0
    forest_threshold: float = 1.9
    degraded_threshold: float = 0.1
    organic_chemical_intensity: float = 0.0
    organic_density_cap_in_integrity: bool = True

    # land dynamics
    phi: float = 3e-4
    zeta_plus_c: float = 130.0
    zeta_plus_m: float = 500.0
    zeta_minus_c: float = 120.0
    zeta_minus_m: float = 500.0
    floor_mode: str = "multiplier"

    # policy magnitudes, all acting only after policy_year
    chemical_reduction: float = 0.0
    livestock_density_reduction: float = 0.0
    organic_crop_expansion: float = 0.0
    organic_pasture_expansion: float = 0.0
    expansion_restriction_c: float = 0.0
    expansion_restriction_m: float = 0.0
    crop_demand_reduction: float = 0.0
    meat_demand_reduction: float = 0.0
    lambda_cap_at_policy_year: bool = False

    # timeline
    start_year: int = 1960
    policy_year: int = 2022
    end_year: int = 2100

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    @property
    def years(self):
        return list(range(self.start_year, self.end_year + 1))

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def regimes(self) -> tuple["ModelParams", "ModelParams"]:
        """(pre, post) parameter sets: policies zeroed before the policy year, resolved after it."""
        off = {name: (False if name == "lambda_cap_at_policy_year" else 0.0) for name in POLICY_FIELDS}
        pre = self.replace(**off)
        post = self.replace(delta=self.delta * (1.0 - self.chemical_reduction),
                            gamma=self.gamma * (1.0 - self.livestock_density_reduction),
                            lambda_cap_at_policy_year=(self.lambda_cap_at_policy_year
                                                       or self.livestock_density_reduction > 0),
                            chemical_reduction=0.0, livestock_density_reduction=0.0)
        return pre, post

    def validate(self) -> "ModelParams":
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("grid dimensions must be positive")
        shares = self.share_natural + self.share_pasture + self.share_crop
        if abs(shares - 1.0) > 1e-9:
            raise ConfigError(f"land shares must sum to 1, got {shares}")
        if min(self.share_natural, self.share_pasture, self.share_crop) < 0:
            raise ConfigError("land shares must be nonnegative")
        if not (self.start_year < self.end_year and self.start_year <= self.policy_year <= self.end_year):
            raise ConfigError("timeline must satisfy start_year <= policy_year <= end_year, start < end")
        if min(self.sigma_n, self.sigma_c, self.sigma_m) <= 0:
            raise ConfigError("lognormal scale parameters sigma_* must be positive")
        if min(self.mu_n, self.mu_c, self.mu_m) < 0:
            raise ConfigError("lognormal spreads mu_* must be nonnegative")
        if self.b <= 0 or self.c <= 0 or self.d <= 0 or self.r <= 0:
            raise ConfigError("demand coefficients b, c, d, r must be positive")
        for name in ("alpha_m", "alpha_c") + POLICY_FIELDS[:-1]:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if not (0 < self.k and 0 < self.f and self.k + self.f < 1):
            raise ConfigError("need 0 < k, f and k + f < 1")
        if not 0 < self.h < 1:
            raise ConfigError("need 0 < h < 1")
        if self.lambda_max < 1:
            raise ConfigError("lambda_max must be >= 1")
        if min(self.beta, self.delta, self.gamma, self.nu, self.T_max) <= 0:
            raise ConfigError("adjustment speeds and T_max must be positive")
        if not 0 < self.T0 <= self.T_max:
            raise ConfigError("need 0 < T0 <= T_max")
        if self.feed_coeff < 0:
            raise ConfigError("feed_coeff must be nonnegative")
        if self.Q_c0 <= 0 or self.Q_m0 <= 0:
            raise ConfigError("initial outputs must be positive")
        if self.balanced_start and self.Q_c0 - self.feed_coeff * self.Q_m0 <= 0:
            raise ConfigError("feed demand at start exceeds initial crop output")
        if not 0 < self.eps_min < 1 <= self.eps_max:
            raise ConfigError("need 0 < eps_min < 1 <= eps_max")
        if self.p < 0 or self.phi < 0 or self.xi <= 0:
            raise ConfigError("p and phi must be nonnegative, xi positive")
        if min(self.zeta_plus_c, self.zeta_plus_m, self.zeta_minus_c, self.zeta_minus_m) < 0:
            raise ConfigError("zeta responsiveness values must be nonnegative")
        if self.natural_sign not in (1.0, -1.0):
            raise ConfigError("natural_sign must be +1 or -1")
        if self.floor_mode not in ("multiplier", "cells"):
            raise ConfigError("floor_mode must be 'multiplier' or 'cells'")
        if self.organic_chemical_intensity < 0:
            raise ConfigError("organic_chemical_intensity must be nonnegative")
        return self


POLICY_FIELDS = ("chemical_reduction", "livestock_density_reduction", "organic_crop_expansion",
                 "organic_pasture_expansion", "expansion_restriction_c", "expansion_restriction_m",
                 "crop_demand_reduction", "meat_demand_reduction", "lambda_cap_at_policy_year")

# Grouping used by the hierarchical config file.
GROUPS = {
    "demand": ("a", "b", "c", "d", "r", "alpha_m", "alpha_c", "meat_calorie_factor",
               "symmetric_demand_feedback"),
    "production": ("k", "f", "h", "lambda_max", "beta", "delta", "gamma", "nu", "T_max", "T0",
                   "feed_coeff", "Q_c0", "Q_m0", "balanced_start"),
    "landscape": ("width", "height", "share_natural", "share_pasture", "share_crop", "xi",
                  "mu_n", "mu_c", "mu_m", "sigma_n", "sigma_c", "sigma_m", "eps_max", "eps_min",
                  "p", "natural_sign", "forest_threshold", "degraded_threshold",
                  "organic_chemical_intensity", "organic_density_cap_in_integrity"),
    "land": ("phi", "zeta_plus_c", "zeta_plus_m", "zeta_minus_c", "zeta_minus_m", "floor_mode"),
    "policy": POLICY_FIELDS,
    "timeline": ("start_year", "policy_year", "end_year"),
}

_TYPES = {fl.name: fl.type for fl in fields(ModelParams)}
assert sorted(n for g in GROUPS.values() for n in g) == sorted(_TYPES), "GROUPS out of sync"


def coerce(name: str, value):
    """Convert a raw config value to the declared type of parameter `name`."""
    kind = _TYPES[name]
    try:
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "int":
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if kind == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"parameter {name!r} expects {kind}, got {value!r}") from None


def params_from_groups(tree: dict | None) -> ModelParams:
    """Build ModelParams from a {group: {key: value}} mapping, rejecting unknown keys."""
    kw = {}
    for group, values in (tree or {}).items():
        if group not in GROUPS:
            raise ConfigError(f"unknown parameter group {group!r}")
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ConfigError(f"parameter group {group!r} must be a mapping")
        for key, value in values.items():
            if key not in GROUPS[group]:
                raise ConfigError(f"unknown key {group}.{key}")
            kw[key] = coerce(key, value)
    return ModelParams(**kw).validate()


def params_to_groups(params: ModelParams) -> dict:
    return {g: {n: getattr(params, n) for n in names} for g, names in GROUPS.items()}
