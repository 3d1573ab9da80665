"""Greedy minimum-distance chain: one topology per active-cell count."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .problem import Evaluation, TopologyEvaluator

__all__ = ["MdaChain", "run_mda"]


@dataclass(eq=False)
class MdaChain:
    topologies: list[np.ndarray]
    f2: list[float]
    evaluations: list[Evaluation] = field(repr=False, default_factory=list)
    evaluations_per_step: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.topologies)


def run_mda(evaluator: TopologyEvaluator, threads: int = 1) -> MdaChain:
    """Start from the best single cell and add, one at a time, the cell that
    maximizes f2.  Ties go to the lowest cell index."""
    L = evaluator.model.num_cells
    current = np.zeros(L, dtype=bool)
    chain = MdaChain(topologies=[], f2=[])
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for _ in range(L):
            candidates = np.flatnonzero(~current)
            trials = []
            for c in candidates:
                t = current.copy()
                t[c] = True
                trials.append(t)
            evals = list(pool.map(evaluator.evaluate, trials)) if pool else \
                [evaluator.evaluate(t) for t in trials]
            scores = np.array([e.values["f2"] for e in evals])
            best = int(np.argmax(scores))  # first maximum = lowest index
            current = trials[best]
            chain.topologies.append(current.copy())
            chain.f2.append(float(scores[best]))
            chain.evaluations.append(evals[best])
            chain.evaluations_per_step.append(len(trials))
    finally:
        if pool is not None:
            pool.shutdown()
    return chain
