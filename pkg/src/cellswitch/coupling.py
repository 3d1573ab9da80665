"""Average cell loads under load-coupled interference.

Each cell's load depends on the SINR of its pixels, which depends on the
other cells' loads.  ``solve_loads`` runs the Gauss-Seidel fixed-point sweep
from all-ones; ``find_volume`` locates the capacity and saturation volumes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .demand import DemandProfile
from .errors import NonConvergenceError, VolumeSearchError
from .network import CoverageResult, NetworkModel, as_topology, coverage

__all__ = ["LoadVector", "VolumeScale", "CouplingSystem", "cell_load", "solve_loads",
           "find_volume"]


@dataclass(frozen=True, eq=False)
class LoadVector:
    loads: np.ndarray       # clamped to [0, 1], zero on off cells
    raw: np.ndarray         # Load(loads) without the clamp; may exceed 1
    sweeps: int
    residual: float         # max |loads - min(1, raw)|


@dataclass(frozen=True)
class VolumeScale:
    multiplier: float
    mean_interarrival_s: float


class CouplingSystem:
    """Per-cell load map for one (topology, demand) pair.

    Cell sets come from pilot-power and uplink criteria only, so they do not
    move while the loads change.  A pixel's per-user bandwidth is capped at
    the carrier bandwidth, which keeps the map finite when SINR vanishes.
    """

    def __init__(self, model: NetworkModel, topo, profile: DemandProfile,
                 cov: CoverageResult | None = None):
        x = as_topology(topo, model.num_cells)
        if cov is None:
            cov = coverage(model, x, check_sinr=False)
        self.model = model
        self.x = x
        self.cov = cov
        self.active = np.flatnonzero(x)
        self.scale = profile.mean_users / model.bandwidth
        self.r_min = profile.min_rate_bps
        self.cells = {}
        for l in self.active:
            px = cov.cell_members(l)
            self.cells[l] = (model.G[px], model.G[px, l] * model.p_d[l], profile.gamma[px])

    def cell_load(self, l: int, loads: np.ndarray) -> float:
        """Raw load of cell ``l`` given every other cell's load."""
        G_sub, signal, gamma = self.cells[l]
        if gamma.size == 0:
            return 0.0
        w = self.model.p_d * self.x * loads
        w[l] = 0.0
        psi = signal / (G_sub @ w + self.model.noise_power)
        se = np.log2(1.0 + psi)
        B = self.model.bandwidth
        with np.errstate(divide="ignore"):
            b_u = np.where(se > 0, np.minimum(B, self.r_min / se), B)
        return float(self.scale * np.dot(gamma, b_u))

    def raw_loads(self, loads: np.ndarray) -> np.ndarray:
        out = np.zeros(self.model.num_cells)
        for l in self.active:
            out[l] = self.cell_load(l, loads)
        return out


def cell_load(model, topo, cov, profile, loads) -> np.ndarray:
    """Raw (unclamped) loads of all active cells for given interferer loads."""
    system = CouplingSystem(model, topo, profile, cov)
    return system.raw_loads(np.asarray(loads, dtype=float))


def _relative_change(new, old):
    out = np.zeros_like(new)
    pos = old > 0
    # a subnormal previous load may overflow to inf, which still means "not converged"
    with np.errstate(over="ignore"):
        out[pos] = np.abs(new[pos] - old[pos]) / old[pos]
    out[~pos & (new != old)] = np.inf
    return out


def solve_loads(model: NetworkModel, topo, profile: DemandProfile, eps: float = 1e-4,
                max_sweeps: int = 100, *, system: CouplingSystem | None = None,
                initial=None) -> LoadVector:
    """Iterative load estimation with in-place ("fast") updates.

    Starts from load 1 on every active cell, sweeps cells in index order and
    stops once no cell's load moved by more than ``eps`` relative to the
    previous sweep.  Raises NonConvergenceError after ``max_sweeps``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if system is None:
        system = CouplingSystem(model, topo, profile)
    x = system.x
    if not x.any():
        raise ValueError("topology has no active cell")
    loads = x.astype(float) if initial is None else np.where(x, initial, 0.0).astype(float)
    for sweep in range(1, max_sweeps + 1):
        previous = loads.copy()
        for l in system.active:
            loads[l] = min(1.0, system.cell_load(l, loads))
        if np.all(_relative_change(loads, previous) <= eps):
            raw = system.raw_loads(loads)
            residual = float(np.max(np.abs(loads - np.minimum(1.0, raw))))
            for arr in (loads, raw):
                arr.setflags(write=False)
            return LoadVector(loads=loads, raw=raw, sweeps=sweep, residual=residual)
    raise NonConvergenceError(
        f"load iteration did not converge in {max_sweeps} sweeps", last=loads)


def find_volume(model: NetworkModel, topo, profile: DemandProfile, target: str = "cap",
                rtol: float = 1e-4, max_doublings: int = 60) -> VolumeScale:
    """Demand-volume multiplier at capacity (``cap``) or saturation (``sat``).

    ``cap``: largest multiplier with every raw load <= 1.
    ``sat``: smallest multiplier with every active cell's raw load >= 1.
    Bracketed geometrically, then bisected to relative width ``rtol``.
    """
    if target not in ("cap", "sat"):
        raise ValueError("target must be 'cap' or 'sat'")
    x = as_topology(topo, model.num_cells)
    base = CouplingSystem(model, x, profile)
    if target == "sat":
        for l in base.active:
            if base.cells[l][2].sum() == 0:
                raise VolumeSearchError(
                    f"cell {l} carries no demand and can never saturate", cell=int(l))

    def raw_at(m):
        system = CouplingSystem(model, x, profile.scaled(m), cov=base.cov)
        return solve_loads(model, x, profile.scaled(m), eps=1e-9, max_sweeps=1000,
                           system=system).raw

    if target == "cap":
        ok = lambda m: np.max(raw_at(m)[base.active]) <= 1.0  # noqa: E731
    else:
        ok = lambda m: np.min(raw_at(m)[base.active]) >= 1.0  # noqa: E731
    # cap: ok(m) holds below the threshold; sat: ok(m) holds above it
    lo, hi = 1.0, 1.0
    if (target == "cap") == ok(1.0):
        for _ in range(max_doublings):
            hi *= 2.0
            if (target == "cap") != ok(hi):
                break
            lo = hi
        else:
            raise VolumeSearchError(f"{target} volume beyond multiplier {hi:g}",
                                    cell=_binding_cell(raw_at(hi), base.active, target))
    else:
        for _ in range(max_doublings):
            lo /= 2.0
            if (target == "cap") == ok(lo):
                break
            hi = lo
        else:
            raise VolumeSearchError(f"{target} volume below multiplier {lo:g}",
                                    cell=_binding_cell(raw_at(lo), base.active, target))
    while (hi - lo) > rtol * hi:
        mid = 0.5 * (lo + hi)
        if (target == "cap") == ok(mid):
            lo = mid
        else:
            hi = mid
    m = lo if target == "cap" else hi
    return VolumeScale(multiplier=m, mean_interarrival_s=profile.mean_interarrival_s / m)


def _binding_cell(raw, active, target):
    idx = active[np.argmax(raw[active])] if target == "cap" else active[np.argmin(raw[active])]
    return int(idx)
