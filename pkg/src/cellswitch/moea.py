"""NSGA-II over binary topologies with constrained domination.

Objectives are handled in minimization form throughout; ``Problem``
converts maximized metrics by sign.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .problem import Evaluation, Problem

__all__ = ["MoeaConfig", "Individual", "EvolutionResult", "dominance_matrix",
           "nondominated_sort", "crowding_distance", "hypervolume_2d", "evolve",
           "exhaustive_front", "pareto_filter"]


@dataclass
class MoeaConfig:
    population_size: int = 100
    crossover_prob: float = 1.0
    mutation_prob: float | None = None  # None -> 1/L
    hv_threshold: float = 1e-5
    hv_patience: int = 100
    max_generations: int = 500
    seed: int = 0
    threads: int = 1
    crossover: str = "uniform"

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2:
            raise ValueError("population_size must be even and >= 4")
        if not 0 <= self.crossover_prob <= 1:
            raise ValueError("crossover_prob must lie in [0, 1]")
        if self.mutation_prob is not None and not 0 <= self.mutation_prob <= 1:
            raise ValueError("mutation_prob must lie in [0, 1]")
        if self.crossover not in CROSSOVERS:
            raise ValueError(f"unknown crossover {self.crossover!r}")


@dataclass(eq=False)
class Individual:
    genome: np.ndarray
    objectives: np.ndarray          # native senses, e.g. (f1, f2)
    feasible: bool
    outage_fraction: float
    rank: int = 0
    crowding: float = float("inf")
    evaluation: Evaluation | None = field(default=None, repr=False)


@dataclass(eq=False)
class EvolutionResult:
    front: list[Individual]
    generations: int
    evaluations: int
    hv_history: list[float]
    reference_point: np.ndarray | None
    archives: list[np.ndarray] = field(default_factory=list, repr=False)


# -- ranking ----------------------------------------------------------------

def dominance_matrix(objs, violation=None) -> np.ndarray:
    """D[i, j] is True when i constrained-dominates j (minimization).

    A feasible point beats an infeasible one; two infeasible points compare
    by violation; two feasible points by Pareto dominance.
    """
    F = np.asarray(objs, dtype=float)
    n = F.shape[0]
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    pareto = le & lt
    if violation is None:
        return pareto
    v = np.asarray(violation, dtype=float)
    feas = v <= 0
    both_feas = feas[:, None] & feas[None, :]
    D = np.where(both_feas, pareto, False)
    D |= feas[:, None] & ~feas[None, :]
    both_inf = ~feas[:, None] & ~feas[None, :]
    D |= both_inf & (v[:, None] < v[None, :])
    D[np.arange(n), np.arange(n)] = False
    return D


def nondominated_sort(objs, violation=None) -> list[list[int]]:
    """Partition indices into fronts F0, F1, ... (fast nondominated sort)."""
    D = dominance_matrix(objs, violation)
    n = D.shape[0]
    counts = D.sum(axis=0)  # how many dominate each point
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for p in current:
            for q in np.flatnonzero(D[p]):
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(int(q))
        current = sorted(nxt)
    return fronts


def crowding_distance(objs) -> np.ndarray:
    """Crowding distance of each member of one front (normalized side sum)."""
    F = np.asarray(objs, dtype=float)
    n, m = F.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for k in range(m):
        order = np.argsort(F[:, k], kind="stable")
        col = F[order, k]
        span = col[-1] - col[0]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def hypervolume_2d(points, reference) -> float:
    """Exact 2-D hypervolume (minimization) dominated w.r.t. ``reference``.

    Points not strictly better than the reference in both objectives are
    ignored.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    ref = np.asarray(reference, dtype=float)
    P = P[np.all(P < ref, axis=1)]
    if P.size == 0:
        return 0.0
    P = P[np.lexsort((P[:, 1], P[:, 0]))]
    hv, best_y = 0.0, ref[1]
    for x, y in P:
        if y < best_y:
            hv += (ref[0] - x) * (best_y - y)
            best_y = y
    return float(hv)


def pareto_filter(objs) -> np.ndarray:
    """Indices of the nondominated rows of ``objs`` (minimization)."""
    D = dominance_matrix(objs)
    return np.flatnonzero(~D.any(axis=0))


# -- evolution --------------------------------------------------------------

class _Population:
    def __init__(self, genomes, evals, problem):
        self.genomes = genomes
        self.evals = evals
        self.F = np.array([problem.minimized(e) for e in evals]).reshape(len(evals), 2)
        self.viol = np.array([e.violation for e in evals], dtype=float)
        self.rank = np.zeros(len(evals), dtype=int)
        self.crowd = np.zeros(len(evals))

    def __len__(self):
        return len(self.evals)

    def assign(self):
        fronts = nondominated_sort(self.F, self.viol)
        for r, front in enumerate(fronts):
            self.rank[front] = r
            self.crowd[front] = crowding_distance(self.F[front])
        return fronts


def _evaluate_all(problem, genomes, pool):
    if pool is None:
        return [problem(g) for g in genomes]
    return list(pool.map(problem, genomes))


def _repair(genomes, rng):
    empty = np.flatnonzero(~genomes.any(axis=1))
    for i in empty:
        genomes[i, rng.integers(genomes.shape[1])] = True
    return genomes


def _initial_genomes(n, L, rng):
    """Random genomes whose cell counts are spread evenly over 1..L."""
    counts = np.rint(np.linspace(1, L, n)).astype(int)
    genomes = np.zeros((n, L), dtype=bool)
    for g, k in zip(genomes, counts):
        g[rng.choice(L, size=k, replace=False)] = True
    return genomes


def _tournament(pop, rng, n):
    a = rng.integers(len(pop), size=n)
    b = rng.integers(len(pop), size=n)
    better_a = (pop.rank[a] < pop.rank[b]) | (
        (pop.rank[a] == pop.rank[b]) & (pop.crowd[a] > pop.crowd[b]))
    tie = (pop.rank[a] == pop.rank[b]) & (pop.crowd[a] == pop.crowd[b])
    coin = rng.random(n) < 0.5
    return np.where(better_a | (tie & coin), a, b)


CROSSOVERS = ("uniform", "one_point", "two_point")


def _crossover_mask(kind, pairs, L, rng):
    """True where the first child takes the gene of the second parent."""
    if kind == "uniform":
        return rng.random((pairs, L)) < 0.5
    pos = np.arange(L)
    if kind == "one_point":
        cut = rng.integers(1, L, size=(pairs, 1)) if L > 1 else np.ones((pairs, 1), int)
        return pos >= cut
    a = rng.integers(0, L + 1, size=(pairs, 2))
    lo, hi = a.min(axis=1, keepdims=True), a.max(axis=1, keepdims=True)
    return (pos >= lo) & (pos < hi)


def _offspring(pop, cfg, pm, rng):
    n, L = len(pop), pop.genomes.shape[1]
    parents = _tournament(pop, rng, n)
    p1, p2 = pop.genomes[parents[0::2]], pop.genomes[parents[1::2]]
    do_cx = rng.random(n // 2) < cfg.crossover_prob
    mask = _crossover_mask(cfg.crossover, n // 2, L, rng) & do_cx[:, None]
    c1 = np.where(mask, p2, p1)
    c2 = np.where(mask, p1, p2)
    children = np.concatenate([c1, c2])
    flips = rng.random(children.shape) < pm
    return _repair(children ^ flips, rng)


def _survivors(merged, n):
    fronts = merged.assign()
    keep = []
    for front in fronts:
        if len(keep) + len(front) <= n:
            keep.extend(front)
            continue
        order = sorted(front, key=lambda i: (-merged.crowd[i], i))
        keep.extend(order[: n - len(keep)])
        break
    return np.array(keep, dtype=int)


def _unique_rows(genomes):
    seen, idx = set(), []
    for i, g in enumerate(genomes):
        k = g.tobytes()
        if k not in seen:
            seen.add(k)
            idx.append(i)
    return np.array(idx, dtype=int)


def _reference_point(F):
    """Nadir of the whole population widened by 10 % of its range.

    Infeasible members are included on purpose: sparse topologies sit at
    the worse end of the capacity axis, and a feasible-only nadir would
    clip that end of the front out of the indicator.
    """
    lo, hi = F.min(axis=0), F.max(axis=0)
    span = np.where(hi > lo, hi - lo, np.maximum(np.abs(hi), 1.0))
    return hi + 0.1 * span


def _feasible_front(pop):
    feas = pop.viol <= 0
    if not feas.any():
        return np.array([], dtype=int)
    idx = np.flatnonzero(feas)
    keep = idx[pareto_filter(pop.F[idx])]
    return keep[_unique_rows(pop.genomes[keep])]


def evolve(problem: Problem, config: MoeaConfig | None = None, initial=None,
           keep_archives=False) -> EvolutionResult:
    """Run NSGA-II and return the feasible nondominated set of the last population.

    Stops when the hypervolume of the feasible front (reference point fixed
    at the first generation holding a feasible member) grew by less than ``hv_threshold``
    (relative) over the last ``hv_patience`` generations, or at
    ``max_generations``.
    """
    cfg = config or MoeaConfig()
    rng = np.random.default_rng(cfg.seed)
    L = problem.num_bits
    n = cfg.population_size
    pm = 1.0 / L if cfg.mutation_prob is None else cfg.mutation_prob
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        genomes = _initial_genomes(n, L, rng)
        if initial is not None:
            seeds = np.asarray(initial, dtype=bool).reshape(-1, L)[:n]
            genomes[: len(seeds)] = seeds
            genomes = _repair(genomes, rng)
        pop = _Population(genomes, _evaluate_all(problem, genomes, pool), problem)
        pop.assign()
        ref = None
        hv_hist: list[float] = []
        archives = []
        generation = 0
        while True:
            front = _feasible_front(pop)
            if ref is None and front.size:
                ref = _reference_point(pop.F)
            hv_hist.append(hypervolume_2d(pop.F[front], ref) if ref is not None else 0.0)
            if keep_archives:
                archives.append(np.column_stack([pop.F[front]]) if front.size else np.empty((0, 2)))
            if generation >= cfg.max_generations:
                break
            if len(hv_hist) > cfg.hv_patience:
                old, new = hv_hist[-1 - cfg.hv_patience], hv_hist[-1]
                if old > 0 and (new - old) <= cfg.hv_threshold * old:
                    break
            generation += 1
            try:
                children = _offspring(pop, cfg, pm, rng)
                child_evals = _evaluate_all(problem, children, pool)
            except Exception as exc:
                raise RuntimeError(f"evaluation failed in generation {generation}: {exc}") from exc
            merged_genomes = np.concatenate([pop.genomes, children])
            merged_evals = pop.evals + child_evals
            uniq = _unique_rows(merged_genomes)
            if len(uniq) < n:  # top up with duplicates to keep the size fixed
                rest = np.setdiff1d(np.arange(len(merged_evals)), uniq)
                uniq = np.concatenate([uniq, rest[: n - len(uniq)]])
            merged = _Population(merged_genomes[uniq], [merged_evals[i] for i in uniq], problem)
            keep = _survivors(merged, n)
            pop = _Population(merged.genomes[keep], [merged.evals[i] for i in keep], problem)
            pop.assign()
    finally:
        if pool is not None:
            pool.shutdown()

    front = _feasible_front(pop)
    members = []
    for i in front:
        ev = pop.evals[i]
        members.append(Individual(
            genome=pop.genomes[i].copy(), objectives=problem.signs * pop.F[i],
            feasible=True, outage_fraction=ev.outage_fraction,
            rank=int(pop.rank[i]), crowding=float(pop.crowd[i]), evaluation=ev))
    members.sort(key=lambda ind: tuple(problem.signs * ind.objectives))
    evaluations = getattr(problem.evaluator, "evaluations", 0)
    return EvolutionResult(front=members, generations=generation, evaluations=evaluations,
                           hv_history=hv_hist, reference_point=ref, archives=archives)


def exhaustive_front(problem: Problem) -> list[Individual]:
    """Feasible Pareto front by enumerating all 2^L - 1 nonzero topologies."""
    L = problem.num_bits
    genomes, objs, evals = [], [], []
    for bits in itertools.product((False, True), repeat=L):
        g = np.array(bits, dtype=bool)
        if not g.any():
            continue
        ev = problem(g)
        if not ev.feasible:
            continue
        genomes.append(g)
        objs.append(problem.minimized(ev))
        evals.append(ev)
    if not genomes:
        return []
    F = np.array(objs)
    keep = pareto_filter(F)
    members = [Individual(genome=genomes[i], objectives=problem.signs * F[i], feasible=True,
                          outage_fraction=evals[i].outage_fraction, evaluation=evals[i])
               for i in keep]
    members.sort(key=lambda ind: tuple(problem.signs * ind.objectives))
    return members
