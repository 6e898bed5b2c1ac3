"""Grid of cells: initialization, integrity dynamics, land conversion and metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from .params import ConfigError, ModelParams


class LandUse(IntEnum):
    NATURAL = 0
    CROP = 1
    PASTURE = 2


class Management(IntEnum):
    CONVENTIONAL = 0
    ORGANIC = 1


# streams for the per-step hashed random keys
STREAM_ORGANIC = 1
STREAM_LAND = 2

_G = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix(z: np.ndarray) -> np.ndarray:
    z = z + _G
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def cell_keys(seed: int, step: int, stream: int, n: int) -> np.ndarray:
    """Uniform uint64 keys for n cells, a pure function of (seed, step, stream).

    Used for random tie-breaking and organic promotion so that a run needs no
    stateful generator after initialization.
    """
    h = _splitmix(np.array([seed], dtype=np.uint64))
    h = _splitmix(h ^ np.uint64(step))
    h = _splitmix(h ^ np.uint64(stream))
    return _splitmix(h + np.arange(n, dtype=np.uint64))


def _seqsum(x: np.ndarray) -> float:
    # left-to-right summation, matching the compiled kernel bit for bit
    return float(np.cumsum(x)[-1]) if x.size else 0.0


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class Landscape:
    width: int
    height: int
    land_use: np.ndarray  # int8, flat row-major
    organic: np.ndarray  # int8, 1 = organic; always 0 on natural cells
    eps: np.ndarray
    theta_n: np.ndarray
    theta_c: np.ndarray
    theta_m: np.ndarray
    eps0_natural_sum: float
    saturation_events: int = 0

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def copy(self) -> "Landscape":
        return Landscape(self.width, self.height, self.land_use.copy(), self.organic.copy(),
                         self.eps.copy(), self.theta_n, self.theta_c, self.theta_m,
                         self.eps0_natural_sum, self.saturation_events)

    def count(self, use: LandUse) -> int:
        return int(np.count_nonzero(self.land_use == use))


@dataclass
class LandscapeMetrics:
    area_natural: int
    area_crop: int
    area_pasture: int
    area_forest: int
    area_degraded: int
    mean_eps_natural: Optional[float]
    mean_eps_crop_conv: Optional[float]
    mean_eps_crop_org: Optional[float]
    mean_eps_pasture_conv: Optional[float]
    mean_eps_pasture_org: Optional[float]


def generate_correlated_mask(width: int, height: int, xi: float, fraction: float,
                             rng: np.random.Generator) -> np.ndarray:
    """Boolean (height, width) field with exactly round(fraction*cells) True cells.

    Gaussian white noise is smoothed with an isotropic kernel of width xi on a
    torus and thresholded at its quantile.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError(f"fraction must lie in [0, 1], got {fraction}")
    if xi <= 0:
        raise ConfigError("correlation length must be positive")
    n = width * height
    k = round_half_up(fraction * n)
    field = gaussian_filter(rng.standard_normal((height, width)), xi, mode="wrap")
    mask = np.zeros(n, dtype=bool)
    if k > 0:
        order = np.argsort(field.ravel(), kind="stable")
        mask[order[n - k:]] = True
    return mask.reshape(height, width)


def sample_theta(mu: float, sigma: float, rng: np.random.Generator, size=None):
    """Rate 1/L with lognormal lifespan L: median sigma, log-scale spread mu."""
    if sigma <= 0:
        raise ConfigError("sigma must be positive")
    if mu < 0:
        raise ConfigError("mu must be nonnegative")
    if mu == 0:
        return np.full(size, 1.0 / sigma) if size is not None else 1.0 / sigma
    return 1.0 / rng.lognormal(math.log(sigma), mu, size)


def init_landscape(params: ModelParams, rng: np.random.Generator) -> Landscape:
    params.validate()
    w, h = params.width, params.height
    n = w * h
    natural = generate_correlated_mask(w, h, params.xi, params.share_natural, rng).ravel()
    land_use = np.full(n, LandUse.PASTURE, dtype=np.int8)
    land_use[natural] = LandUse.NATURAL
    rest = np.flatnonzero(~natural)
    ag_share = params.share_crop + params.share_pasture
    n_crop = round_half_up(rest.size * params.share_crop / ag_share) if ag_share > 0 else 0
    land_use[rest[rng.permutation(rest.size)[:n_crop]]] = LandUse.CROP
    eps = np.where(natural, params.eps_max, 1.0)
    theta_n = sample_theta(params.mu_n, params.sigma_n, rng, n)
    theta_c = sample_theta(params.mu_c, params.sigma_c, rng, n)
    theta_m = sample_theta(params.mu_m, params.sigma_m, rng, n)
    eps0 = _seqsum(eps[natural])
    return Landscape(w, h, land_use, np.zeros(n, dtype=np.int8), eps, theta_n, theta_c, theta_m, eps0)


def ecosystem_service(landscape: Landscape, p: float, eps_min: float = 1e-6) -> float:
    """E = (current natural integrity / initial natural integrity) ** p."""
    if landscape.eps0_natural_sum <= 0:
        raise ConfigError("initial natural integrity sum must be positive")
    nat = landscape.land_use == LandUse.NATURAL
    if not nat.any():
        return (eps_min / landscape.eps0_natural_sum) ** p
    return (_seqsum(landscape.eps[nat]) / landscape.eps0_natural_sum) ** p


def update_integrity(landscape: Landscape, Lambda: float, M: float, Phi: float, E: float,
                     params: ModelParams) -> int:
    """Advance every cell's integrity one step in place; returns saturation events."""
    if E <= 0:
        raise ValueError("E must be positive")
    lu, org, eps = landscape.land_use, landscape.organic, landscape.eps
    nat = lu == LandUse.NATURAL
    crop = lu == LandUse.CROP
    past = lu == LandUse.PASTURE
    lam_org = min(params.lambda_max, Lambda) if params.organic_density_cap_in_integrity else Lambda
    phi_cell = np.where(org == 1, params.organic_chemical_intensity, Phi)
    lam_cell = np.where(org == 1, lam_org, Lambda)

    mult = np.empty_like(eps)
    mult[nat] = 1.0 + params.natural_sign * landscape.theta_n[nat] * E * (1.0 - eps[nat] / params.eps_max)
    mult[crop] = 1.0 - landscape.theta_c[crop] * (M + phi_cell[crop]) / E
    mult[past] = 1.0 - landscape.theta_m[past] * lam_cell[past] / E
    saturated = mult <= 0.0
    new = np.where(saturated, params.eps_min, eps * mult)
    upper = np.where(nat, params.eps_max, 1.0)
    np.clip(new, params.eps_min, upper, out=new)
    eps[:] = new
    events = int(np.count_nonzero(saturated))
    landscape.saturation_events += events
    return events


def _keys_or_draw(keys, rng, n):
    if keys is not None:
        return keys
    if rng is None:
        raise ValueError("either keys or rng is required for random tie-breaking")
    return rng.integers(0, np.iinfo(np.uint64).max, n, dtype=np.uint64, endpoint=True)


def convert_cells(landscape: Landscape, target: LandUse, count: int,
                  rng: np.random.Generator | None = None, keys: np.ndarray | None = None) -> int:
    """Turn the `count` highest-integrity natural cells into `target` land."""
    if target not in (LandUse.CROP, LandUse.PASTURE):
        raise ValueError("conversion target must be agricultural")
    if count <= 0:
        return 0
    keys = _keys_or_draw(keys, rng, landscape.n_cells)
    idx = np.flatnonzero(landscape.land_use == LandUse.NATURAL)
    chosen = idx[np.lexsort((keys[idx], -landscape.eps[idx]))[:count]]
    landscape.land_use[chosen] = target
    landscape.organic[chosen] = Management.CONVENTIONAL
    landscape.eps[chosen] = np.minimum(landscape.eps[chosen], 1.0)
    return int(chosen.size)


def abandon_cells(landscape: Landscape, source: LandUse, count: int,
                  rng: np.random.Generator | None = None, keys: np.ndarray | None = None) -> int:
    """Return the `count` lowest-integrity `source` cells to natural land, keeping their integrity."""
    if source not in (LandUse.CROP, LandUse.PASTURE):
        raise ValueError("abandonment source must be agricultural")
    if count <= 0:
        return 0
    keys = _keys_or_draw(keys, rng, landscape.n_cells)
    idx = np.flatnonzero(landscape.land_use == source)
    chosen = idx[np.lexsort((keys[idx], landscape.eps[idx]))[:count]]
    landscape.land_use[chosen] = LandUse.NATURAL
    landscape.organic[chosen] = Management.CONVENTIONAL
    return int(chosen.size)


def set_organic_share(landscape: Landscape, target_share_crop: float, target_share_pasture: float,
                      rng: np.random.Generator | None = None, keys: np.ndarray | None = None) -> None:
    """Promote conventional cells so each class holds round(share * area) organic cells."""
    keys = None if (target_share_crop <= 0 and target_share_pasture <= 0) else \
        _keys_or_draw(keys, rng, landscape.n_cells)
    for use, share in ((LandUse.CROP, target_share_crop), (LandUse.PASTURE, target_share_pasture)):
        if not 0.0 <= share <= 1.0:
            raise ValueError(f"organic share must lie in [0, 1], got {share}")
        in_class = landscape.land_use == use
        n_org = int(np.count_nonzero(in_class & (landscape.organic == 1)))
        need = round_half_up(share * np.count_nonzero(in_class)) - n_org
        if need <= 0:
            continue
        conv = np.flatnonzero(in_class & (landscape.organic == 0))
        chosen = conv[np.argsort(keys[conv], kind="stable")[:need]]
        landscape.organic[chosen] = Management.ORGANIC


def _mean_or_none(x: np.ndarray) -> Optional[float]:
    return _seqsum(x) / x.size if x.size else None


def compute_metrics(landscape: Landscape, forest_threshold: float = 1.9,
                    degraded_threshold: float = 0.1) -> LandscapeMetrics:
    lu, org, eps = landscape.land_use, landscape.organic, landscape.eps
    nat = lu == LandUse.NATURAL
    crop = lu == LandUse.CROP
    past = lu == LandUse.PASTURE
    return LandscapeMetrics(
        area_natural=int(nat.sum()),
        area_crop=int(crop.sum()),
        area_pasture=int(past.sum()),
        area_forest=int(np.count_nonzero(nat & (eps > forest_threshold))),
        area_degraded=int(np.count_nonzero(eps < degraded_threshold)),
        mean_eps_natural=_mean_or_none(eps[nat]),
        mean_eps_crop_conv=_mean_or_none(eps[crop & (org == 0)]),
        mean_eps_crop_org=_mean_or_none(eps[crop & (org == 1)]),
        mean_eps_pasture_conv=_mean_or_none(eps[past & (org == 0)]),
        mean_eps_pasture_org=_mean_or_none(eps[past & (org == 1)]),
    )


def write_snapshot(landscape: Landscape, path) -> None:
    """One row per cell: x, y, land_use, management, epsilon."""
    names = {int(u): u.name.lower() for u in LandUse}
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x", "y", "land_use", "management", "epsilon"])
        for i in range(landscape.n_cells):
            y, x = divmod(i, landscape.width)
            use = int(landscape.land_use[i])
            mgmt = "none" if use == LandUse.NATURAL else ("organic" if landscape.organic[i] else "conventional")
            out.writerow([x, y, names[use], mgmt, f"{landscape.eps[i]:.9g}"])
