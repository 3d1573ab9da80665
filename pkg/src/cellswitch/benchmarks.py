"""Snapshot-based switch-off heuristics used as baselines.

Each heuristic takes a SimContext and the pixels of the users present at
the snapshot and returns a topology.  Every returned topology meets the
coverage constraint: heuristics that could break it add cells back until
it holds.
"""
from __future__ import annotations

import numpy as np

from .network import NONE
from .simulator import SimContext, schedule

__all__ = ["cell_zooming", "improved_cell_zooming", "load_interference_aware",
           "set_cover", "coverage_floor", "BENCHMARKS"]


def _feasible(ctx: SimContext, x) -> bool:
    return bool(x.any()) and ctx.fl_coverage(x).outage_fraction <= ctx.kappa_cov


def coverage_floor(ctx: SimContext, x) -> np.ndarray:
    """Add cells, most outage reduction first (lowest index on ties), until feasible."""
    x = np.array(x, dtype=bool)
    while not _feasible(ctx, x) and not x.all():
        best, best_out = None, np.inf
        for c in np.flatnonzero(~x):
            t = x.copy()
            t[c] = True
            out = ctx.fl_coverage(t).outage_fraction
            if out < best_out:
                best, best_out = c, out
        x[best] = True
    return x


def _snapshot(ctx: SimContext, x, pixels):
    serving, se = ctx.cell_map(x, 0)
    srv, s = serving[pixels], se[pixels]
    sat, used = schedule(srv, s, ctx.model.num_cells, ctx.model.bandwidth, ctx.r_min)
    # load counts every served user's demand, satisfied or not
    need = np.zeros(pixels.size)
    ok = (srv != NONE) & (s > 0)
    need[ok] = ctx.r_min / s[ok]
    demand = np.bincount(srv[ok], weights=need[ok], minlength=ctx.model.num_cells)
    return sat, demand / ctx.model.bandwidth


def _removal_ok(ctx, x, cell, pixels, sat):
    """Switching ``cell`` off keeps coverage and loses no satisfied user."""
    t = x.copy()
    t[cell] = False
    if not _feasible(ctx, t):
        return None
    new_sat, _ = _snapshot(ctx, t, pixels)
    if np.any(sat & ~new_sat):
        return None
    return t, new_sat


def cell_zooming(ctx: SimContext, pixels, improved=False) -> np.ndarray:
    """Switch off the lowest-loaded cell while every user can be re-served.

    The plain variant stops at the first cell that cannot be removed; the
    improved variant skips it and keeps trying the others.
    """
    pixels = np.asarray(pixels, dtype=np.int64)
    x = np.ones(ctx.model.num_cells, dtype=bool)
    sat, load = _snapshot(ctx, x, pixels)
    failed: set[int] = set()
    while True:
        candidates = [c for c in np.flatnonzero(x) if c not in failed]
        if len(candidates) <= 1:
            break
        ranked = sorted(candidates, key=lambda c: (load[c], c))
        progress = False
        for c in ranked:
            res = _removal_ok(ctx, x, c, pixels, sat)
            if res is not None:
                x, sat = res
                _, load = _snapshot(ctx, x, pixels)
                progress = True
                break
            if not improved:
                return x
            failed.add(int(c))
        if not progress:
            break
    return x


def improved_cell_zooming(ctx: SimContext, pixels) -> np.ndarray:
    return cell_zooming(ctx, pixels, improved=True)


def _received_interference(ctx: SimContext, x):
    """Full-load interference power seen by each active cell's served pixels."""
    model = ctx.model
    cov = ctx.fl_coverage(x)
    w = model.p_d * x
    total = model.G[cov.covered] @ w
    srv = cov.serving[cov.covered]
    own = model.G[np.flatnonzero(cov.covered), srv] * model.p_d[srv]
    return np.bincount(srv, weights=total - own, minlength=model.num_cells)


def load_interference_aware(ctx: SimContext, pixels, threshold=0.3, weight=0.1) -> np.ndarray:
    """Switch off lightly loaded cells ranked by load and received interference.

    Score = load - weight * (interference / max interference); lowest score
    first.  Only cells with load below ``threshold`` are candidates and users
    of a removed cell are re-served best effort, so some may be dropped.
    """
    pixels = np.asarray(pixels, dtype=np.int64)
    x = np.ones(ctx.model.num_cells, dtype=bool)
    tried: set[int] = set()
    while x.sum() > 1:
        _, load = _snapshot(ctx, x, pixels)
        interf = _received_interference(ctx, x)
        top = interf[x].max()
        norm = interf / top if top > 0 else np.zeros_like(interf)
        score = load - weight * norm
        cands = [c for c in np.flatnonzero(x) if c not in tried and load[c] < threshold]
        if not cands:
            break
        c = min(cands, key=lambda k: (score[k], k))
        tried.add(int(c))
        t = x.copy()
        t[c] = False
        if _feasible(ctx, t):
            x = t
    return x


def set_cover(ctx: SimContext, pixels) -> np.ndarray:
    """Switch cells on from all-off, each time the one that serves the most
    still-unserved users at acceptable SNR within its bandwidth."""
    model = ctx.model
    pixels = np.asarray(pixels, dtype=np.int64)
    L = model.num_cells
    x = np.zeros(L, dtype=bool)
    if pixels.size:
        G = model.G[pixels]
        rx_ok = (G * model.p_ps >= model.min_rx_power) & (1.0 / G < model.max_ul_attenuation)
        snr = G * model.p_d / model.noise_power
        usable = rx_ok & (snr >= model.min_sinr)
        se = np.where(usable, np.log2(1.0 + snr), 0.0)
        unserved = np.ones(pixels.size, dtype=bool)
        while unserved.any():
            best, best_n, best_set = None, 0, None
            for c in np.flatnonzero(~x):
                idx = np.flatnonzero(unserved & usable[:, c])
                if idx.size == 0:
                    continue
                order = idx[np.argsort(-se[idx, c], kind="stable")]
                fits = np.cumsum(ctx.r_min / se[order, c]) <= model.bandwidth
                if fits.sum() > best_n:
                    best, best_n, best_set = c, int(fits.sum()), order[fits]
            if best is None:
                break
            x[best] = True
            unserved[best_set] = False
    return coverage_floor(ctx, x)


BENCHMARKS = {
    "cell_zooming": cell_zooming,
    "improved_cell_zooming": improved_cell_zooming,
    "load_interference_aware": load_interference_aware,
    "set_cover": set_cover,
}
