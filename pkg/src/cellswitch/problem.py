"""Topology evaluation under either interference model, and objective pairs."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import metrics
from .coupling import CouplingSystem, solve_loads
from .demand import DemandProfile
from .network import NetworkModel, as_topology, coverage, spectral_efficiency

__all__ = ["SENSES", "PAIRS", "Evaluation", "TopologyEvaluator", "Problem",
           "bitstring", "from_bitstring"]

SENSES = {"f1": "min", "f2": "max", "f3": "max", "f4": "min", "f5": "min", "f6": "min"}
PAIRS = {"f1f2": ("f1", "f2"), "f1f3": ("f1", "f3"), "f1f4": ("f1", "f4"),
         "f5f6": ("f5", "f6")}
PAIR_ICI = {"f1f2": "fl", "f1f3": "fl", "f1f4": "fl", "f5f6": "lc"}


def bitstring(x) -> str:
    return "".join("1" if b else "0" for b in np.asarray(x, dtype=bool))


def from_bitstring(s: str) -> np.ndarray:
    if not s or set(s) - {"0", "1"}:
        raise ValueError(f"not a topology bitstring: {s!r}")
    return np.array([c == "1" for c in s], dtype=bool)


@dataclass(frozen=True, eq=False)
class Evaluation:
    topology: np.ndarray
    values: dict
    outage_fraction: float
    feasible: bool
    violation: float
    loads: Optional[np.ndarray] = field(default=None, repr=False)
    raw_loads: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def nac(self) -> int:
        return int(self.topology.sum())


class TopologyEvaluator:
    """Computes every metric available under one interference model.

    ``ici="fl"`` gives f1-f4 with full-load SINR; ``ici="lc"`` solves the
    load-coupling fixed point and gives f1, f5 and f6.  Results are cached
    per topology.  With ``require_adequate`` a load-coupled topology whose
    raw loads exceed 1 counts as infeasible (excess added to the violation).
    """

    def __init__(self, model: NetworkModel, profile: DemandProfile, *, ici="fl",
                 kappa_cov=0.02, power_model: metrics.PowerModel | None = None,
                 p0_ul_dbm=-78.0, kappa_ul=1.0, f4_domain="linear", f4_normalize=False,
                 require_adequate=True, eps=1e-4):
        if ici not in ("fl", "lc"):
            raise ValueError(f"unknown interference model {ici!r}")
        self.model = model
        self.profile = profile
        self.ici = ici
        self.kappa_cov = kappa_cov
        self.power_model = power_model or metrics.PowerModel()
        self.p0_ul = metrics.uplink_p0(p0_ul_dbm, f4_domain)
        self.kappa_ul = kappa_ul
        self.f4_domain = f4_domain
        self.require_adequate = require_adequate
        self.eps = eps
        self._cache: dict[bytes, Evaluation] = {}
        self.f4_reference = 1.0
        if f4_normalize and ici == "fl":
            self.f4_reference = self._f4(model.all_on(), coverage(model, model.all_on()))

    @property
    def evaluations(self) -> int:
        return len(self._cache)

    def _f4(self, x, cov):
        if not cov.covered.any():
            return float("inf")
        return metrics.f4_uplink_power(self.model, x, cov, self.profile.gamma,
                                       self.p0_ul, self.kappa_ul, self.f4_domain)

    def __call__(self, topo) -> Evaluation:
        return self.evaluate(topo)

    def evaluate(self, topo) -> Evaluation:
        x = as_topology(topo, self.model.num_cells)
        key = x.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        ev = self._evaluate_fl(x) if self.ici == "fl" else self._evaluate_lc(x)
        self._cache[key] = ev
        return ev

    def _evaluate_fl(self, x):
        model, gamma = self.model, self.profile.gamma
        cov = coverage(model, x)
        H = spectral_efficiency(cov.psi, cov.v)
        values = {
            "f1": metrics.f1_active_cells(x),
            "f2": metrics.f2_avg_capacity(model, x, cov, H, gamma),
            "f3": metrics.f3_cell_edge(model, x, cov, H, gamma),
            "f4": self._f4(x, cov) / self.f4_reference,
        }
        excess = max(0.0, cov.outage_fraction - self.kappa_cov)
        return Evaluation(topology=x, values=values, outage_fraction=cov.outage_fraction,
                          feasible=bool(x.any()) and excess == 0.0,
                          violation=excess if x.any() else 1.0)

    def _evaluate_lc(self, x):
        model = self.model
        if not x.any():
            pm = self.power_model
            values = {"f1": 0, "f5": model.num_cells * pm.p_sleep, "f6": 0.0}
            return Evaluation(topology=x, values=values, outage_fraction=1.0,
                              feasible=False, violation=1.0)
        system = CouplingSystem(model, x, self.profile)
        lv = solve_loads(model, x, self.profile, eps=self.eps, system=system)
        cov = coverage(model, x, loads=lv.loads)
        values = {
            "f1": metrics.f1_active_cells(x),
            "f5": metrics.f5_power_consumption(lv.loads, x, self.power_model),
            "f6": metrics.f6_load_dispersion(lv.loads, x),
        }
        excess = max(0.0, cov.outage_fraction - self.kappa_cov)
        if self.require_adequate:
            excess += max(0.0, float(lv.raw.max()) - 1.0)
        return Evaluation(topology=x, values=values, outage_fraction=cov.outage_fraction,
                          feasible=excess == 0.0, violation=excess,
                          loads=lv.loads, raw_loads=lv.raw)


class Problem:
    """Two-objective view of an evaluator, in minimization form."""

    def __init__(self, evaluator: TopologyEvaluator, pair: str = "f1f2"):
        if pair not in PAIRS:
            raise ValueError(f"unknown objective pair {pair!r}")
        if PAIR_ICI[pair] != evaluator.ici:
            raise ValueError(f"pair {pair} needs the {PAIR_ICI[pair]!r} interference model")
        self.evaluator = evaluator
        self.pair = pair
        self.names = PAIRS[pair]
        self.signs = np.array([1.0 if SENSES[n] == "min" else -1.0 for n in self.names])

    @property
    def num_bits(self) -> int:
        return self.evaluator.model.num_cells

    def __call__(self, topo) -> Evaluation:
        return self.evaluator.evaluate(topo)

    def minimized(self, ev: Evaluation) -> np.ndarray:
        return self.signs * np.array([ev.values[n] for n in self.names], dtype=float)
