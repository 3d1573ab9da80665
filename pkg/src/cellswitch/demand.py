"""Spatial service demand: distributions, volume and multi-service mixes."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, FileFormatError

__all__ = [
    "DemandProfile", "pixel_demand", "aggregate_services", "uniform_gamma",
    "hotspot_gamma", "kl_to_uniform", "load_demand_grid", "save_demand_grid",
    "profile_from_config",
]

_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DemandProfile:
    """Demand distribution ``gamma`` plus the first-order volume statistics.

    Times are in seconds, ``min_rate_bps`` in bit/s.
    """

    gamma: np.ndarray
    mean_interarrival_s: float
    mean_session_s: float
    min_rate_bps: float

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float).ravel()
        if g.size == 0 or np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ConfigurationError("gamma must be a nonnegative finite vector")
        if abs(math.fsum(g) - 1.0) > _SUM_TOL:
            raise ConfigurationError(f"gamma must sum to 1 (sums to {math.fsum(g)!r})")
        for name in ("mean_interarrival_s", "mean_session_s", "min_rate_bps"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @property
    def mean_users(self) -> float:
        """Average number of simultaneous sessions, E{mu}/E{lambda}."""
        return self.mean_session_s / self.mean_interarrival_s

    @property
    def total_demand_bps(self) -> float:
        return self.mean_users * self.min_rate_bps

    def scaled(self, multiplier: float) -> "DemandProfile":
        """Same distribution, volume multiplied via a shorter inter-arrival time."""
        if not multiplier > 0:
            raise ConfigurationError("volume multiplier must be positive")
        return replace(self, mean_interarrival_s=self.mean_interarrival_s / multiplier)


def pixel_demand(profile: DemandProfile) -> np.ndarray:
    """Average demand per pixel in bit/s; sums to the total volume."""
    return profile.mean_users * profile.gamma * profile.min_rate_bps


def aggregate_services(mix: Sequence[DemandProfile]) -> DemandProfile:
    """Collapse several service classes into one equivalent profile.

    The per-pixel demands add up; the resulting distribution is their
    normalization.  The equivalent service keeps the total volume: its
    session count is the sum of the per-class counts and its rate the
    session-weighted mean rate.
    """
    mix = list(mix)
    if not mix:
        raise ConfigurationError("service mix is empty")
    if len(mix) == 1:
        return mix[0]
    size = mix[0].gamma.size
    if any(p.gamma.size != size for p in mix):
        raise ConfigurationError("all services must share the pixel grid")
    # sort so the floating-point sums do not depend on the input order
    demands = sorted((pixel_demand(p) for p in mix), key=lambda d: d.tobytes())
    r_s = np.sum(demands, axis=0)
    total = math.fsum(r_s)
    if not total > 0:
        raise ConfigurationError("aggregate demand is zero")
    users = math.fsum(p.mean_users for p in mix)
    rate = math.fsum(p.mean_users * p.min_rate_bps for p in mix) / users
    session = math.fsum(p.mean_users * p.mean_session_s for p in mix) / users
    gamma = r_s / total
    gamma = gamma / math.fsum(gamma)
    return DemandProfile(gamma=gamma, mean_interarrival_s=session / users,
                         mean_session_s=session, min_rate_bps=rate)


def uniform_gamma(num_pixels: int) -> np.ndarray:
    return np.full(num_pixels, 1.0 / num_pixels)


def _normalized(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise FileFormatError("demand weights must be nonnegative and finite")
    total = math.fsum(w)
    if not total > 0:
        raise FileFormatError("demand grid is all zero")
    g = w / total
    return g / math.fsum(g)


def hotspot_gamma(grid_shape, pixel_size_m, *, num_hotspots=6, sigma_range=(40.0, 120.0),
                  background=0.15, seed=0) -> np.ndarray:
    """Seeded mixture of 2-D Gaussian hotspots over the grid plus a uniform floor.

    ``background`` is the probability mass spread uniformly.
    """
    if not 0 <= background <= 1:
        raise ConfigurationError("background must lie in [0, 1]")
    rows, cols = grid_shape
    rng = np.random.default_rng(seed)
    ys = (np.arange(rows) + 0.5) * pixel_size_m
    xs = (np.arange(cols) + 0.5) * pixel_size_m
    xx, yy = np.meshgrid(xs, ys)
    field_ = np.zeros((rows, cols))
    if num_hotspots > 0 and background < 1:
        for _ in range(num_hotspots):
            cx = rng.uniform(0, cols * pixel_size_m)
            cy = rng.uniform(0, rows * pixel_size_m)
            s = rng.uniform(*sigma_range)
            weight = rng.uniform(0.2, 1.0)
            blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s))
            field_ += weight * blob / blob.sum()
        field_ *= (1.0 - background) / field_.sum()
    field_ += background / (rows * cols)
    return _normalized(field_)


def kl_to_uniform(gamma) -> float:
    """Kullback-Leibler divergence D(gamma || uniform), in nats."""
    g = np.asarray(gamma, dtype=float)
    nz = g > 0
    return float(np.sum(g[nz] * np.log(g[nz] * g.size)))


def save_demand_grid(gamma, grid_shape, path) -> None:
    rows, cols = grid_shape
    grid = np.asarray(gamma, dtype=float).reshape(rows, cols)
    with open(path, "w") as fh:
        fh.write(f"# rows={rows} cols={cols}\n")
        np.savetxt(fh, grid, delimiter=",", fmt="%.12e")


def load_demand_grid(path, *, normalize=True, grid_shape=None) -> np.ndarray:
    """Read a text grid of nonnegative weights and return a flat distribution.

    With ``normalize=False`` a grid that does not already sum to 1 is rejected.
    """
    path = Path(path)
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise FileFormatError(f"{path}: missing '# rows=.. cols=..' header")
        meta = {}
        for token in header[1:].split():
            key, _, val = token.partition("=")
            try:
                meta[key] = int(val)
            except ValueError as exc:
                raise FileFormatError(f"{path}: bad header token {token!r}") from exc
        try:
            grid = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise FileFormatError(f"{path}: {exc}") from exc
    shape = (meta.get("rows"), meta.get("cols"))
    if grid.shape != shape:
        raise FileFormatError(f"{path}: header says {shape}, data is {grid.shape}")
    if grid_shape is not None and tuple(grid_shape) != grid.shape:
        raise FileFormatError(f"{path}: grid {grid.shape} does not match the pixel "
                              f"layout {tuple(grid_shape)}")
    try:
        gamma = _normalized(grid)
    except FileFormatError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    if not normalize and abs(math.fsum(grid.ravel()) - 1.0) > _SUM_TOL:
        raise FileFormatError(f"{path}: grid is not normalized")
    return gamma


def _gamma_for(source, grid_path, normalize, hotspots, sigma, background, seed,
               grid_shape, pixel_size_m):
    if source == "uniform":
        return uniform_gamma(grid_shape[0] * grid_shape[1])
    if source == "file":
        return load_demand_grid(grid_path, normalize=normalize, grid_shape=grid_shape)
    return hotspot_gamma(grid_shape, pixel_size_m, num_hotspots=hotspots,
                         sigma_range=tuple(sigma), background=background, seed=seed)


def profile_from_config(config, model) -> DemandProfile:
    """Demand profile for a scenario; service mixes are aggregated."""
    d = config.demand
    shape, px = model.grid_shape, model.pixel_size_m
    if not d.services:
        gamma = _gamma_for(d.source, d.grid_path, d.normalize, d.num_hotspots,
                           d.hotspot_sigma_m, d.background, [config.seed, 1], shape, px)
        return DemandProfile(gamma, d.mean_interarrival_s, d.mean_session_s, d.min_rate_bps)
    mix = []
    for i, s in enumerate(d.services):
        gamma = _gamma_for(s.source, s.grid_path, d.normalize, s.num_hotspots,
                           s.hotspot_sigma_m, s.background,
                           [config.seed, 2, i, s.seed_offset], shape, px)
        mix.append(DemandProfile(gamma, s.mean_interarrival_s, s.mean_session_s,
                                 s.min_rate_bps))
    return aggregate_services(mix)
