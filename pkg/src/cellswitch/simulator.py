"""Monte-Carlo system-level evaluation of topologies.

Sessions arrive as a Poisson process, land on pixels drawn from the demand
distribution and stay for an exponential time.  At every QoS check each
active cell schedules its users in decreasing spectral-efficiency order
until its bandwidth runs out.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import metrics
from .coupling import solve_loads
from .demand import DemandProfile
from .errors import NonConvergenceError
from .network import NONE, NetworkModel, as_topology, coverage, spectral_efficiency

__all__ = ["SimConfig", "DemandPhase", "Sessions", "SimContext", "StaticPolicy",
           "SnapshotPolicy", "SimReport", "schedule_cell", "schedule",
           "generate_sessions", "run_experiment", "run_experiments", "select_topology",
           "report_summary", "report_rows", "REPORT_COLUMNS"]


@dataclass
class SimConfig:
    duration_s: float = 5400.0
    num_experiments: int = 100
    qos_check_interval_s: float = 1.0
    target_qos: float = 0.975
    seed: int = 0
    ici: str = "fl"
    volume_multiplier: float = 1.0

    def __post_init__(self):
        if not (self.duration_s > 0 and self.qos_check_interval_s > 0):
            raise ValueError("duration and check interval must be positive")
        if self.num_experiments < 1:
            raise ValueError("num_experiments must be >= 1")
        if not 0 < self.target_qos <= 1:
            raise ValueError("target_qos must lie in (0, 1]")
        if self.ici not in ("fl", "lc"):
            raise ValueError(f"unknown interference model {self.ici!r}")
        if self.volume_multiplier < 0:
            raise ValueError("volume_multiplier must be nonnegative")


@dataclass(frozen=True, eq=False)
class DemandPhase:
    """Demand conditions in force from ``start_s`` on."""

    start_s: float
    profile: DemandProfile
    multiplier: float = 1.0


# -- scheduler --------------------------------------------------------------

def schedule_cell(se, bandwidth, r_min):
    """Reference scheduler for one cell.

    Returns (satisfied flags, allocated bandwidth per user) in input order.
    Users with zero spectral efficiency are skipped; the first user that
    does not fit ends the allocation.
    """
    se = np.asarray(se, dtype=float)
    satisfied = np.zeros(se.size, dtype=bool)
    alloc = np.zeros(se.size)
    remaining = float(bandwidth)
    for i in sorted(range(se.size), key=lambda k: (-se[k], k)):
        if se[i] <= 0:
            continue
        need = r_min / se[i]
        if need > remaining:
            break
        satisfied[i] = True
        alloc[i] = need
        remaining -= need
    return satisfied, alloc


def schedule(serving, se, num_cells, bandwidth, r_min):
    """Vectorized scheduler over all cells at once (same rule as schedule_cell).

    ``serving`` is NONE for users without a server.  Returns (satisfied,
    per-cell allocated bandwidth).
    """
    serving = np.asarray(serving)
    se = np.asarray(se, dtype=float)
    n = serving.size
    satisfied = np.zeros(n, dtype=bool)
    used = np.zeros(num_cells)
    ok = (serving != NONE) & (se > 0)
    idx = np.flatnonzero(ok)
    if idx.size == 0 or bandwidth <= 0:
        return satisfied, used
    cells = serving[idx]
    order = np.lexsort((idx, -se[idx], cells))
    idx, cells = idx[order], cells[order]
    need = r_min / se[idx]
    csum = np.cumsum(need)
    starts = np.flatnonzero(np.r_[True, cells[1:] != cells[:-1]])
    offset = np.repeat(np.r_[0.0, csum[starts[1:] - 1]], np.diff(np.r_[starts, idx.size]))
    within = csum - offset
    # need > 0 throughout, so the in-cell cumulative sum is increasing and
    # "fits" is a prefix of each cell's queue
    fits = within <= bandwidth
    satisfied[idx[fits]] = True
    used = np.bincount(cells[fits], weights=need[fits], minlength=num_cells)
    return satisfied, used


# -- sessions ---------------------------------------------------------------

@dataclass(eq=False)
class Sessions:
    pixel: np.ndarray
    arrival: np.ndarray
    departure: np.ndarray


def _phase_bounds(phases, duration):
    starts = [p.start_s for p in phases]
    return list(zip(starts, starts[1:] + [duration]))


def generate_sessions(phases: Sequence[DemandPhase], duration_s, rng, volume_multiplier=1.0):
    """Pre-draw every session of one experiment.

    The first phase starts in steady state: Poisson(mean users) sessions are
    already present at t = 0 with exponential residual times.
    """
    pix, arr, dep = [], [], []
    first = phases[0]
    mean0 = first.profile.mean_users * first.multiplier * volume_multiplier
    n0 = rng.poisson(mean0) if mean0 > 0 else 0
    g0 = first.profile.gamma
    pix.append(rng.choice(g0.size, size=n0, p=g0))
    arr.append(np.zeros(n0))
    dep.append(rng.exponential(first.profile.mean_session_s, size=n0))
    for phase, (t0, t1) in zip(phases, _phase_bounds(phases, duration_s)):
        rate = phase.multiplier * volume_multiplier / phase.profile.mean_interarrival_s
        if rate <= 0 or t1 <= t0:
            continue
        k = rng.poisson(rate * (t1 - t0))
        t = np.sort(rng.uniform(t0, t1, size=k))
        pix.append(rng.choice(phase.profile.gamma.size, size=k, p=phase.profile.gamma))
        arr.append(t)
        dep.append(t + rng.exponential(phase.profile.mean_session_s, size=k))
    return Sessions(pixel=np.concatenate(pix).astype(np.int64), arrival=np.concatenate(arr),
                    departure=np.concatenate(dep))


# -- context and policies ---------------------------------------------------

class SimContext:
    """Per-topology serving and spectral-efficiency maps, cached.

    Under load coupling the SINR uses the average loads solved for the
    demand of the active phase.
    """

    def __init__(self, model: NetworkModel, phases: Sequence[DemandPhase], ici="fl",
                 kappa_cov=0.02, volume_multiplier=1.0):
        self.model = model
        self.phases = list(phases)
        self.ici = ici
        self.kappa_cov = kappa_cov
        self.volume_multiplier = volume_multiplier
        self.r_min = self.phases[0].profile.min_rate_bps
        self._maps: dict = {}
        self._cov: dict = {}

    def phase_index(self, t) -> int:
        k = 0
        for i, p in enumerate(self.phases):
            if t >= p.start_s:
                k = i
        return k

    def phase_profile(self, k) -> DemandProfile:
        p = self.phases[k]
        return p.profile.scaled(p.multiplier * self.volume_multiplier)

    def fl_coverage(self, x):
        key = x.tobytes()
        cov = self._cov.get(key)
        if cov is None:
            cov = coverage(self.model, x)
            self._cov[key] = cov
        return cov

    def cell_map(self, x, phase=0):
        """(serving with NONE for outage pixels, spectral efficiency) per pixel."""
        key = (x.tobytes(), phase if self.ici == "lc" else 0)
        hit = self._maps.get(key)
        if hit is not None:
            return hit
        if not x.any():
            out = (np.full(self.model.num_pixels, NONE), np.zeros(self.model.num_pixels))
        elif self.ici == "fl":
            out = self._to_map(self.fl_coverage(x))
        else:
            p = self.phases[phase]
            if p.multiplier * self.volume_multiplier > 0:
                try:
                    loads = solve_loads(self.model, x, self.phase_profile(phase)).loads
                except NonConvergenceError as exc:
                    loads = np.where(x, exc.last, 0.0)
            else:
                loads = np.zeros(self.model.num_cells)
            out = self._to_map(coverage(self.model, x, loads=loads))
        self._maps[key] = out
        return out

    @staticmethod
    def _to_map(cov):
        serving = np.where(cov.covered, cov.serving, NONE)
        return serving, spectral_efficiency(cov.psi, cov.v)


class StaticPolicy:
    """One topology for the whole run."""

    def __init__(self, topology):
        self.topology = as_topology(topology)

    def __call__(self, t, pixels, ctx, previous):
        return self.topology


class SnapshotPolicy:
    """Re-decides the topology from the current user snapshot every ``interval_s``."""

    def __init__(self, decide: Callable, interval_s=1.0):
        self.decide = decide
        self.interval_s = interval_s
        self._last_t = -math.inf

    def __call__(self, t, pixels, ctx, previous):
        if previous is not None and t - self._last_t < self.interval_s - 1e-9:
            return previous
        self._last_t = t
        return self.decide(ctx, pixels)


# -- experiments ------------------------------------------------------------

@dataclass(eq=False)
class SimReport:
    times: np.ndarray
    satisfied_fraction: np.ndarray
    users: np.ndarray
    nac: np.ndarray
    transitions: np.ndarray          # cumulative on/off switches
    handovers: np.ndarray            # cumulative users moved by switching
    handover_mass: np.ndarray        # cumulative demand mass re-served
    energy_w: np.ndarray             # f5 with instantaneous loads
    target_qos: float
    seed: int = 0
    experiment: int = 0

    @property
    def mean_satisfied(self) -> float:
        return float(self.satisfied_fraction.mean()) if self.times.size else 1.0

    @property
    def qos_pass_fraction(self) -> float:
        """Share of checks at which at least ``target_qos`` of the users were satisfied."""
        if not self.times.size:
            return 1.0
        return float(np.mean(self.satisfied_fraction >= self.target_qos))

    @property
    def total_transitions(self) -> int:
        return int(self.transitions[-1]) if self.times.size else 0

    @property
    def total_handovers(self) -> int:
        return int(self.handovers[-1]) if self.times.size else 0

    @property
    def total_handover_mass(self) -> float:
        return float(self.handover_mass[-1]) if self.times.size else 0.0

    @property
    def mean_nac(self) -> float:
        return float(self.nac.mean()) if self.times.size else 0.0

    @property
    def mean_energy_w(self) -> float:
        return float(self.energy_w.mean()) if self.times.size else 0.0


def _as_phases(profile_or_phases):
    if isinstance(profile_or_phases, DemandProfile):
        return [DemandPhase(0.0, profile_or_phases)]
    phases = sorted(profile_or_phases, key=lambda p: p.start_s)
    if not phases or phases[0].start_s > 0:
        raise ValueError("the first demand phase must start at t = 0")
    return phases


def run_experiment(model: NetworkModel, policy, profile, config: SimConfig,
                   experiment: int = 0, power_model: metrics.PowerModel | None = None,
                   kappa_cov: float = 0.02, context: SimContext | None = None) -> SimReport:
    """One seeded Monte-Carlo run of ``policy`` against ``profile``.

    ``profile`` is a DemandProfile or a list of DemandPhase for time-varying
    demand.  Results depend only on (config.seed, experiment).
    """
    phases = _as_phases(profile)
    pm = power_model or metrics.PowerModel()
    ctx = context or SimContext(model, phases, config.ici, kappa_cov, config.volume_multiplier)
    rng = np.random.default_rng([config.seed, experiment])
    sess = generate_sessions(phases, config.duration_s, rng, config.volume_multiplier)
    n_checks = int(math.floor(config.duration_s / config.qos_check_interval_s + 1e-9))
    times = np.arange(1, n_checks + 1) * config.qos_check_interval_s
    frac = np.ones(n_checks)
    users = np.zeros(n_checks, dtype=np.int64)
    nac = np.zeros(n_checks, dtype=np.int64)
    trans = np.zeros(n_checks, dtype=np.int64)
    hos = np.zeros(n_checks, dtype=np.int64)
    hmass = np.zeros(n_checks)
    energy = np.zeros(n_checks)
    B, L = model.bandwidth, model.num_cells
    prev_x, prev_serving_px, prev_ids = None, None, None
    n_trans, n_ho, mass = 0, 0, 0.0
    for k, t in enumerate(times):
        ids = np.flatnonzero((sess.arrival <= t) & (sess.departure > t))
        pixels = sess.pixel[ids]
        phase = ctx.phase_index(t)
        x = as_topology(policy(t, pixels, ctx, prev_x), L)
        serving_px, se_px = ctx.cell_map(x, phase)
        if prev_x is not None and not np.array_equal(x, prev_x):
            d, m = metrics.transition_cost(prev_x, x, ctx.fl_coverage(prev_x),
                                           ctx.fl_coverage(x), phases[phase].profile.gamma)
            n_trans += d
            mass += m
            stay = np.isin(ids, prev_ids, assume_unique=True)
            p = sess.pixel[ids[stay]]
            n_ho += int(np.count_nonzero(serving_px[p] != prev_serving_px[p]))
        sat, used = schedule(serving_px[pixels], se_px[pixels], L, B, ctx.r_min)
        users[k] = ids.size
        frac[k] = sat.mean() if ids.size else 1.0
        nac[k] = int(x.sum())
        trans[k], hos[k], hmass[k] = n_trans, n_ho, mass
        energy[k] = metrics.f5_power_consumption(np.minimum(1.0, used / B), x, pm)
        prev_x, prev_serving_px, prev_ids = x, serving_px, ids
    return SimReport(times=times, satisfied_fraction=frac, users=users, nac=nac,
                     transitions=trans, handovers=hos, handover_mass=hmass, energy_w=energy,
                     target_qos=config.target_qos, seed=config.seed, experiment=experiment)


def run_experiments(model, policy_factory: Callable[[], object], profile, config: SimConfig,
                    threads=1, **kwargs) -> list[SimReport]:
    """``config.num_experiments`` independent runs; a fresh policy per run."""
    phases = _as_phases(profile)
    ctx = kwargs.pop("context", None) or SimContext(
        model, phases, config.ici, kwargs.get("kappa_cov", 0.02), config.volume_multiplier)

    def one(i):
        return run_experiment(model, policy_factory(), phases, config, experiment=i,
                              context=ctx, **kwargs)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, range(config.num_experiments)))
    return [one(i) for i in range(config.num_experiments)]


def report_summary(reports: Sequence[SimReport]) -> dict:
    return {
        "experiments": len(reports),
        "mean_satisfied": float(np.mean([r.mean_satisfied for r in reports])),
        "qos_pass_fraction": float(np.mean([r.qos_pass_fraction for r in reports])),
        "mean_nac": float(np.mean([r.mean_nac for r in reports])),
        "transitions": float(np.mean([r.total_transitions for r in reports])),
        "handovers": float(np.mean([r.total_handovers for r in reports])),
        "handover_mass": float(np.mean([r.total_handover_mass for r in reports])),
        "mean_energy_w": float(np.mean([r.mean_energy_w for r in reports])),
    }


def select_topology(members, qos_pass, target_qos=0.975, key=None):
    """Cheapest member whose QoS pass fraction reaches ``target_qos``.

    ``members`` are topologies, ``qos_pass`` their pass fractions and ``key``
    the cost to minimize (defaults to the number of active cells).  Falls
    back to all cells on when nothing qualifies.
    """
    members = [as_topology(m) for m in members]
    if not members:
        raise ValueError("cannot select from an empty set")
    if len(qos_pass) != len(members):
        raise ValueError("one QoS figure per member is required")
    cost = key or (lambda x: int(x.sum()))
    ok = [i for i, q in enumerate(qos_pass) if q >= target_qos]
    if not ok:
        return np.ones(members[0].size, dtype=bool)
    best = min(ok, key=lambda i: (cost(members[i]), i))
    return members[best]


REPORT_COLUMNS = ["t", "satisfied_fraction", "users", "nac", "transitions", "handovers",
                  "handover_mass", "energy_w"]


def report_rows(report: SimReport):
    """Time-series rows matching REPORT_COLUMNS."""
    return [list(r) for r in zip(report.times.tolist(), report.satisfied_fraction.tolist(),
                                 report.users.tolist(), report.nac.tolist(),
                                 report.transitions.tolist(), report.handovers.tolist(),
                                 report.handover_mass.tolist(), report.energy_w.tolist())]
