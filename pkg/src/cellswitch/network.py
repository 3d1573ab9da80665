"""Pixelized network model: geometry, path loss, cell selection, coverage, SINR.

Topologies are 1-D boolean arrays of length L (True = cell on).  Pixels are
indexed row-major over the grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FileFormatError

NONE = -1

__all__ = [
    "NONE", "NetworkModel", "CoverageResult", "db_to_lin", "lin_to_db",
    "dbm_to_w", "w_to_dbm", "log_distance_pathloss_db", "hex_positions",
    "generate_scenario", "received_power", "coverage", "sinr",
    "spectral_efficiency", "link_state", "as_topology", "save_gmatrix",
    "load_gmatrix",
]


def db_to_lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_w(x):
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)


def w_to_dbm(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float)) + 30.0


def as_topology(x, num_cells=None) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("topology must be a 1-D vector")
    if num_cells is not None and x.size != num_cells:
        raise ValueError(f"topology has {x.size} entries, model has {num_cells} cells")
    return x.astype(bool)


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """Immutable description of the network seen by every metric.

    ``G`` holds linear channel gains (A x L); powers are in watts.
    """

    G: np.ndarray
    p_ps: np.ndarray
    p_d: np.ndarray
    noise_power: float
    bandwidth: float
    min_rx_power: float
    min_sinr: float
    max_ul_attenuation: float
    pixel_size_m: float
    grid_shape: tuple
    cell_positions: np.ndarray | None = None

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        if G.ndim != 2:
            raise ConfigurationError("G must be an A x L matrix")
        A, L = G.shape
        if A == 0 or L == 0:
            raise ConfigurationError("pixel grid of zero size")
        if int(np.prod(self.grid_shape)) != A:
            raise ConfigurationError(f"grid {self.grid_shape} does not match A={A}")
        p_ps = np.broadcast_to(np.asarray(self.p_ps, dtype=float), (L,)).copy()
        p_d = np.broadcast_to(np.asarray(self.p_d, dtype=float), (L,)).copy()
        if not np.all(G > 0):
            raise ConfigurationError("all channel gains must be strictly positive")
        if not (np.all(p_ps > 0) and np.all(p_d > 0)):
            raise ConfigurationError("transmit powers must be strictly positive")
        if not self.noise_power > 0:
            raise ConfigurationError("noise power must be strictly positive")
        if not self.bandwidth > 0:
            raise ConfigurationError("bandwidth must be strictly positive")
        for arr in (G, p_ps, p_d):
            arr.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "p_ps", p_ps)
        object.__setattr__(self, "p_d", p_d)
        object.__setattr__(self, "grid_shape", tuple(int(v) for v in self.grid_shape))
        if self.cell_positions is not None:
            pos = np.array(self.cell_positions, dtype=float).reshape(L, 2)
            pos.setflags(write=False)
            object.__setattr__(self, "cell_positions", pos)

    @property
    def num_pixels(self) -> int:
        return self.G.shape[0]

    @property
    def num_cells(self) -> int:
        return self.G.shape[1]

    @cached_property
    def pixel_positions(self) -> np.ndarray:
        rows, cols = self.grid_shape
        ys = (np.arange(rows) + 0.5) * self.pixel_size_m - rows * self.pixel_size_m / 2
        xs = (np.arange(cols) + 0.5) * self.pixel_size_m - cols * self.pixel_size_m / 2
        xx, yy = np.meshgrid(xs, ys)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def with_powers(self, p_ps=None, p_d=None) -> "NetworkModel":
        return replace(self,
                       p_ps=self.p_ps if p_ps is None else p_ps,
                       p_d=self.p_d if p_d is None else p_d)

    def all_on(self) -> np.ndarray:
        return np.ones(self.num_cells, dtype=bool)


# -- scenario generation ----------------------------------------------------

def log_distance_pathloss_db(d, exponent, intercept_db, d0=1.0):
    """Path loss in dB: ``PL0 + 10*eta*log10(d/d0)``."""
    return intercept_db + 10.0 * exponent * np.log10(np.asarray(d, dtype=float) / d0)


def _hex_axial(num_cells):
    coords = [(0, 0)]
    ring = 1
    dirs = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]
    while len(coords) < num_cells:
        q, r = -ring, ring  # start corner, walk the six sides
        for dq, dr in dirs:
            for _ in range(ring):
                coords.append((q, r))
                q, r = q + dq, r + dr
        ring += 1
    return coords[:num_cells]


def _axial_to_xy(q, r, isd):
    return isd * (q + r / 2.0), isd * (np.sqrt(3) / 2.0) * r


def hex_positions(num_cells, cell_radius_m):
    """Cell sites on a hexagonal lattice, centre first then ring by ring."""
    isd = np.sqrt(3) * cell_radius_m
    return np.array([_axial_to_xy(q, r, isd) for q, r in _hex_axial(num_cells)])


def _hex_rings(num_cells):
    """Ring count n when num_cells = 3n^2 + 3n + 1, else None."""
    n = 0
    while 3 * n * n + 3 * n + 1 < num_cells:
        n += 1
    return n if 3 * n * n + 3 * n + 1 == num_cells else None


def _distances(pixels, cells, *, wraparound, hex_rings=None, isd=None, extent=None):
    diff = pixels[:, None, :] - cells[None, :, :]
    if not wraparound:
        return np.hypot(diff[..., 0], diff[..., 1])
    if hex_rings is not None:
        # images of the cluster: axial shift (2n+1, -n) and its rotations
        q, r = 2 * hex_rings + 1, -hex_rings
        shifts = [(0.0, 0.0)]
        for _ in range(6):
            shifts.append(_axial_to_xy(q, r, isd))
            q, r = -r, q + r
        best = None
        for sx, sy in shifts:
            d = np.hypot(diff[..., 0] - sx, diff[..., 1] - sy)
            best = d if best is None else np.minimum(best, d)
        return best
    w, h = extent
    dx = np.abs(diff[..., 0]) % w
    dy = np.abs(diff[..., 1]) % h
    return np.hypot(np.minimum(dx, w - dx), np.minimum(dy, h - dy))


def radio_powers(radio):
    """(pilot power per resource element, data power) in watts."""
    p_d = float(dbm_to_w(radio.tx_power_dbm))
    p_ps = float(dbm_to_w(radio.tx_power_dbm - 10 * np.log10(radio.pilot_subcarriers)))
    return p_ps, p_d


def generate_scenario(config) -> NetworkModel:
    """Build a NetworkModel from a ScenarioConfig (deterministic per seed)."""
    config.validate()
    g, ch, radio = config.geometry, config.channel, config.radio
    rows = int(round(g.area_height_m / g.pixel_size_m))
    cols = int(round(g.area_width_m / g.pixel_size_m))
    if rows < 1 or cols < 1:
        raise ConfigurationError("pixel grid of zero size")
    if g.layout == "hex":
        cells = hex_positions(g.num_cells, g.cell_radius_m)
    else:
        cells = np.asarray(g.positions, dtype=float)
    p_ps, p_d = radio_powers(radio)
    common = dict(
        p_ps=np.full(g.num_cells, p_ps),
        p_d=np.full(g.num_cells, p_d),
        noise_power=float(dbm_to_w(radio.noise_psd_dbm_hz + 10 * np.log10(radio.bandwidth_hz))),
        bandwidth=radio.bandwidth_hz,
        min_rx_power=float(dbm_to_w(radio.min_rx_power_dbm)),
        min_sinr=float(db_to_lin(radio.min_sinr_db)),
        max_ul_attenuation=float(db_to_lin(radio.max_ul_pathloss_db)),
        pixel_size_m=g.pixel_size_m,
        grid_shape=(rows, cols),
        cell_positions=cells,
    )
    if ch.gmatrix_path:
        gain_db, meta = load_gmatrix(ch.gmatrix_path)
        if gain_db.shape != (rows * cols, g.num_cells):
            raise ConfigurationError(
                f"G matrix shape {gain_db.shape} does not match grid {rows}x{cols}, "
                f"L={g.num_cells}")
        return NetworkModel(G=db_to_lin(gain_db), **common)

    probe = NetworkModel(G=np.ones((rows * cols, g.num_cells)), **common)
    hex_n = _hex_rings(g.num_cells) if g.layout == "hex" else None
    d = _distances(probe.pixel_positions, cells, wraparound=g.wraparound,
                   hex_rings=hex_n, isd=np.sqrt(3) * g.cell_radius_m,
                   extent=(cols * g.pixel_size_m, rows * g.pixel_size_m))
    d = np.maximum(d, g.min_distance_m)
    pl = log_distance_pathloss_db(d, ch.pathloss_exponent, ch.pathloss_intercept_db,
                                  ch.reference_distance_m)
    if ch.shadowing_std_db > 0:
        rng = np.random.default_rng([config.seed, 0])
        pl = pl + rng.normal(0.0, ch.shadowing_std_db, size=pl.shape)
    return NetworkModel(G=db_to_lin(-pl), **common)


# -- per-topology quantities --------------------------------------------------

def received_power(model: NetworkModel, topo) -> np.ndarray:
    """Pilot received power R_PS (A x L, watts); off columns are zero."""
    x = as_topology(topo, model.num_cells)
    return model.G * (model.p_ps * x)


def _interference(G, p_d, x, serving, loads):
    # elementwise products then a fixed-order row sum, so that lowering any
    # load can never raise the sum through rounding
    w = p_d * x * (1.0 if loads is None else np.asarray(loads, dtype=float))
    terms = G * w
    rows = np.arange(G.shape[0])
    terms[rows, serving] = 0.0
    return terms.sum(axis=1)


def link_state(model: NetworkModel, topo, pixels=None, loads=None, check_sinr=True):
    """Serving cell, outage flag and raw SINR for a set of pixels.

    ``loads`` are the interferers' average loads; ``None`` means full load.
    Returns ``(serving, outage, psi)`` with ``psi`` zero for outage pixels.
    """
    x = as_topology(topo, model.num_cells)
    G = model.G if pixels is None else model.G[np.asarray(pixels, dtype=int)]
    n = G.shape[0]
    if not x.any():
        return np.full(n, NONE), np.ones(n, dtype=bool), np.zeros(n)
    R = G * (model.p_ps * x)
    serving = np.argmax(R, axis=1)  # first maximum: lowest index wins ties
    rows = np.arange(n)
    g_srv = G[rows, serving]
    outage = (R[rows, serving] <= model.min_rx_power) | (1.0 / g_srv >= model.max_ul_attenuation)
    interf = _interference(G, model.p_d, x, serving, loads)
    psi = model.p_d[serving] * g_srv / (interf + model.noise_power)
    if check_sinr:
        outage |= psi <= model.min_sinr
    psi = np.where(outage, 0.0, psi)
    return serving, outage, psi


@dataclass(frozen=True, eq=False)
class CoverageResult:
    """Cell selection and outage bookkeeping for one topology.

    ``serving`` keeps the strongest active cell even for outage pixels;
    ``v`` marks outage and those pixels are excluded from ``S``.
    """

    serving: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    num_cells: int
    topology: np.ndarray = field(repr=False)

    @property
    def num_pixels(self) -> int:
        return self.serving.size

    @property
    def covered(self) -> np.ndarray:
        return ~self.v

    @property
    def outage_fraction(self) -> float:
        return float(self.v.sum()) / self.num_pixels

    @cached_property
    def cell_pixel_counts(self) -> np.ndarray:
        cov = self.covered
        return np.bincount(self.serving[cov], minlength=self.num_cells)

    @cached_property
    def n(self) -> np.ndarray:
        counts = self.cell_pixel_counts
        out = np.zeros(self.num_cells)
        out[counts > 0] = 1.0 / counts[counts > 0]
        return out

    @cached_property
    def S(self) -> np.ndarray:
        S = np.zeros((self.num_pixels, self.num_cells), dtype=bool)
        cov = np.flatnonzero(self.covered)
        S[cov, self.serving[cov]] = True
        return S

    @property
    def S_c(self) -> np.ndarray:
        return ~self.S

    def cell_members(self, cell) -> np.ndarray:
        return np.flatnonzero(self.covered & (self.serving == cell))


def coverage(model: NetworkModel, topo, loads=None, check_sinr=True) -> CoverageResult:
    """Serving cells and outage vector under the given interference loads.

    An all-off topology puts every pixel in outage (not an error).
    """
    x = as_topology(topo, model.num_cells)
    serving, outage, psi = link_state(model, x, loads=loads, check_sinr=check_sinr)
    for arr in (serving, outage, psi):
        arr.setflags(write=False)
    return CoverageResult(serving=serving, v=outage, psi=psi,
                          num_cells=model.num_cells, topology=x)


def sinr(model: NetworkModel, topo, loads=None, cov: CoverageResult | None = None) -> np.ndarray:
    """Average SINR per pixel; interferer j is weighted by ``loads[j]``.

    Full load is ``loads=None`` (equivalently ``loads = x``).  Pixels in
    outage according to ``cov``, or with no server, get 0.
    """
    x = as_topology(topo, model.num_cells)
    if loads is not None:
        loads = np.asarray(loads, dtype=float)
        if np.any(loads[~x] != 0):
            raise ValueError("loads must be zero on switched-off cells")
        if np.any((loads < 0) | (loads > 1)):
            raise ValueError("loads must lie in [0, 1]")
    if not x.any():
        return np.zeros(model.num_pixels)
    serving = cov.serving if cov is not None else np.argmax(received_power(model, x), axis=1)
    rows = np.arange(model.num_pixels)
    interf = _interference(model.G, model.p_d, x, serving, loads)
    psi = model.p_d[serving] * model.G[rows, serving] / (interf + model.noise_power)
    if cov is not None:
        psi = np.where(cov.v, 0.0, psi)
    return psi


def spectral_efficiency(psi, v) -> np.ndarray:
    """Shannon spectral efficiency; outage pixels (v=1) contribute zero."""
    psi = np.asarray(psi, dtype=float)
    return np.where(np.asarray(v, dtype=bool), 0.0, np.log2(1.0 + psi))


# -- G matrix files -----------------------------------------------------------

def save_gmatrix(model: NetworkModel, path) -> None:
    """Write channel gains in dB; ``.npz`` is binary, anything else is text."""
    path = Path(path)
    gain_db = lin_to_db(model.G)
    rows, cols = model.grid_shape
    if path.suffix == ".npz":
        np.savez(path, gain_db=gain_db, pixel_size_m=model.pixel_size_m,
                 grid_shape=np.array([rows, cols]))
        return
    with open(path, "w") as fh:
        fh.write(f"# A={model.num_pixels} L={model.num_cells} "
                 f"pixel_size_m={model.pixel_size_m!r} rows={rows} cols={cols}\n")
        np.savetxt(fh, gain_db, delimiter=",", fmt="%.6f")


def load_gmatrix(path):
    """Read a G matrix file; returns ``(gain_db, meta)``."""
    path = Path(path)
    if path.suffix == ".npz":
        try:
            with np.load(path) as z:
                gain_db = np.array(z["gain_db"], dtype=float)
                rows, cols = (int(v) for v in z["grid_shape"])
                meta = {"A": gain_db.shape[0], "L": gain_db.shape[1],
                        "pixel_size_m": float(z["pixel_size_m"]),
                        "rows": rows, "cols": cols}
        except (KeyError, ValueError, OSError) as exc:
            raise FileFormatError(f"{path}: {exc}") from exc
        return gain_db, meta
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise FileFormatError(f"{path}: missing header line")
        meta = {}
        for token in header[1:].split():
            key, _, val = token.partition("=")
            meta[key] = float(val) if key == "pixel_size_m" else int(val)
        try:
            gain_db = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise FileFormatError(f"{path}: {exc}") from exc
    if gain_db.shape != (meta.get("A"), meta.get("L")):
        raise FileFormatError(f"{path}: header says A={meta.get('A')} L={meta.get('L')}, "
                              f"data is {gain_db.shape}")
    return gain_db, meta
