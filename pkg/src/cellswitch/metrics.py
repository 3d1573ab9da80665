"""Objective functions f1..f6, coverage constraint and transition accounting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .network import CoverageResult, NetworkModel, as_topology, dbm_to_w, lin_to_db

__all__ = [
    "PowerModel", "f1_active_cells", "f2_avg_capacity", "f3_cell_edge",
    "f4_uplink_power", "f5_power_consumption", "f6_load_dispersion",
    "hamming", "transition_cost", "coverage_constraint",
]


@dataclass(frozen=True)
class PowerModel:
    """Linear load-dependent base-station power model (watts)."""

    p0_fixed: float = 6.8
    p_sleep: float = 4.3
    slope: float = 4.0

    def __post_init__(self):
        if not self.p_sleep <= self.p0_fixed <= self.p_max_total:
            raise ConfigurationError("power model needs p_sleep <= p0_fixed <= p_max_total")

    @property
    def p_max_total(self) -> float:
        return self.p0_fixed + self.slope


def f1_active_cells(topo) -> int:
    return int(np.count_nonzero(np.asarray(topo)))


def _cell_sums(cov: CoverageResult, weights):
    cov_mask = cov.covered
    return np.bincount(cov.serving[cov_mask], weights=weights[cov_mask],
                       minlength=cov.num_cells)


def f2_avg_capacity(model: NetworkModel, topo, cov: CoverageResult, H, gamma) -> float:
    """Demand-weighted average network capacity in bit/s.

    Each cell's bandwidth is shared evenly among the pixels it serves; the
    factor A normalizes to the uniform-demand case.
    """
    hg = np.asarray(H, dtype=float) * np.asarray(gamma, dtype=float)
    per_cell = _cell_sums(cov, hg) * cov.n
    return float(model.bandwidth * model.num_pixels * per_cell.sum())


def pixel_rates(model: NetworkModel, cov: CoverageResult, H, gamma) -> np.ndarray:
    """Weighted pixel rates of covered pixels (bit/s)."""
    mask = cov.covered
    srv = cov.serving[mask]
    return (model.num_pixels * np.asarray(H)[mask] * np.asarray(gamma)[mask]
            * model.bandwidth * cov.n[srv])


def f3_cell_edge(model: NetworkModel, topo, cov: CoverageResult, H, gamma) -> float:
    """5th percentile of the weighted pixel rate over covered pixels.

    Order statistic at index floor(0.05 * covered), no interpolation; with
    fewer than 20 covered pixels that index is 0, i.e. the minimum.
    """
    r = np.sort(pixel_rates(model, cov, H, gamma))
    if r.size == 0:
        return 0.0
    return float(r[int(math.floor(0.05 * r.size))])


def f4_uplink_power(model: NetworkModel, topo, cov: CoverageResult, gamma, p0_ul,
                    kappa_ul, domain="linear") -> float:
    """Demand-weighted open-loop uplink power estimate over covered pixels.

    ``domain="linear"``: ``p0_ul`` in watts, path loss as linear attenuation.
    ``domain="db"``: ``p0_ul`` in dBm, path loss in dB (result in dBm).
    """
    if not 0 <= kappa_ul <= 1:
        raise ValueError("kappa_ul must lie in [0, 1]")
    mask = cov.covered
    g = np.asarray(gamma, dtype=float)[mask]
    mass = g.sum()
    if not mass > 0:
        raise ValueError("no covered demand mass; uplink power undefined")
    gain = model.G[np.flatnonzero(mask), cov.serving[mask]]
    pl = 1.0 / gain if domain == "linear" else -lin_to_db(gain)
    return float(np.dot(g, p0_ul + kappa_ul * pl) / mass)


def f5_power_consumption(loads, topo, pm: PowerModel) -> float:
    x = as_topology(topo)
    a = np.asarray(loads, dtype=float)
    return float(np.sum(np.where(x, pm.p0_fixed + pm.slope * a, pm.p_sleep)))


def f6_load_dispersion(loads, topo) -> float:
    """Coefficient of variation (population std / mean) of active-cell loads."""
    x = as_topology(topo)
    a = np.asarray(loads, dtype=float)[x]
    if a.size == 0:
        return 0.0
    mean = a.mean()
    if mean <= 0:
        return 0.0
    return float(a.std() / mean)


def hamming(a, b) -> int:
    return int(np.count_nonzero(as_topology(a) != as_topology(b)))


def transition_cost(from_topo, to_topo, cov_from: CoverageResult, cov_to: CoverageResult,
                    gamma) -> tuple[int, float]:
    """(on/off transitions, demand mass of pixels that change serving cell).

    Only pixels covered under both topologies count toward the handover mass.
    """
    transitions = hamming(from_topo, to_topo)
    both = cov_from.covered & cov_to.covered
    moved = both & (cov_from.serving != cov_to.serving)
    return transitions, float(np.asarray(gamma, dtype=float)[moved].sum())


def coverage_constraint(cov: CoverageResult, kappa_cov: float) -> bool:
    return cov.outage_fraction <= kappa_cov


def uplink_p0(p0_ul_dbm, domain):
    return float(dbm_to_w(p0_ul_dbm)) if domain == "linear" else float(p0_ul_dbm)
