"""Scenario configuration: dataclass schema, strict parsing and serialization.

Defaults reproduce the evaluation setting used throughout the package (37
omni small cells with wraparound, 5 MHz, 30 dBm, 5x5 m pixels, ...).  Files
may be YAML or JSON; unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .errors import ConfigurationError

__all__ = [
    "GeometryConfig", "ChannelConfig", "RadioConfig", "ServiceConfig",
    "DemandConfig", "OptimizationConfig", "SimulationConfig",
    "BenchmarkConfig", "PowerConfig", "ConstraintConfig", "ScenarioConfig",
    "load_config", "dump_config", "config_hash", "config_schema",
]


@dataclass
class GeometryConfig:
    num_cells: int = 37
    layout: str = "hex"  # hex | explicit
    cell_radius_m: float = 100.0
    positions: Optional[list[list[float]]] = None
    area_width_m: float = 1000.0
    area_height_m: float = 1000.0
    pixel_size_m: float = 5.0
    wraparound: bool = True
    min_distance_m: float = 10.0


@dataclass
class ChannelConfig:
    # 22.7 + 26*log10(2.14 GHz): UMi NLOS intercept folded into the reference
    pathloss_intercept_db: float = 31.29
    pathloss_exponent: float = 3.67
    reference_distance_m: float = 1.0
    shadowing_std_db: float = 4.0
    gmatrix_path: Optional[str] = None


@dataclass
class RadioConfig:
    bandwidth_hz: float = 5e6
    tx_power_dbm: float = 30.0
    # pilot power is reported per resource element: 300 subcarriers in 5 MHz
    pilot_subcarriers: int = 300
    noise_psd_dbm_hz: float = -174.0
    min_rx_power_dbm: float = -123.0
    min_sinr_db: float = -7.0
    max_ul_pathloss_db: float = 163.0


@dataclass
class ServiceConfig:
    mean_interarrival_s: float = 0.115
    mean_session_s: float = 119.2
    min_rate_bps: float = 400e3
    source: str = "hotspots"  # hotspots | uniform | file
    grid_path: Optional[str] = None
    num_hotspots: int = 6
    hotspot_sigma_m: list[float] = field(default_factory=lambda: [40.0, 120.0])
    background: float = 0.15
    seed_offset: int = 0


@dataclass
class DemandConfig:
    source: str = "hotspots"  # hotspots | uniform | file
    grid_path: Optional[str] = None
    normalize: bool = True
    num_hotspots: int = 6
    hotspot_sigma_m: list[float] = field(default_factory=lambda: [40.0, 120.0])
    background: float = 0.15
    mean_interarrival_s: float = 0.115
    mean_session_s: float = 119.2
    min_rate_bps: float = 400e3
    services: list[ServiceConfig] = field(default_factory=list)


@dataclass
class OptimizationConfig:
    pair: str = "f1f2"  # f1f2 | f1f3 | f1f4 | f5f6
    population_size: int = 100
    crossover_prob: float = 1.0
    mutation_prob: Optional[float] = None  # None -> 1/L
    hv_threshold: float = 1e-5  # 0.001 %
    hv_patience: int = 100
    max_generations: int = 500
    crossover: str = "uniform"  # uniform | one_point | two_point
    # demand volume for the load-coupling pairing, as a fraction of V_Cap
    volume_fraction: float = 0.6
    require_adequate: bool = True


@dataclass
class BenchmarkConfig:
    lia_load_threshold: float = 0.3
    lia_interference_weight: float = 0.1
    interval_s: float = 1.0


@dataclass
class SimulationConfig:
    duration_s: float = 5400.0
    num_experiments: int = 100
    qos_check_interval_s: float = 1.0
    target_qos: float = 0.975
    ici: str = "fl"  # fl | lc
    # demand volumes as fractions of V_Cap (all cells on, load coupling)
    volume_fractions: list[float] = field(
        default_factory=lambda: [0.2, 0.4, 0.6, 0.8, 1.0, 1.2])
    benchmarks: BenchmarkConfig = field(default_factory=BenchmarkConfig)


@dataclass
class PowerConfig:
    p0_fixed_w: float = 6.8
    p_sleep_w: float = 4.3
    slope_w: float = 4.0
    p0_ul_dbm: float = -78.0
    kappa_ul: float = 1.0
    f4_domain: str = "linear"  # linear | db
    f4_normalize: bool = True


@dataclass
class ConstraintConfig:
    kappa_cov: float = 0.02


@dataclass
class ScenarioConfig:
    seed: int = 1
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    demand: DemandConfig = field(default_factory=DemandConfig)
    optimization: OptimizationConfig = field(default_factory=OptimizationConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    power: PowerConfig = field(default_factory=PowerConfig)
    constraint: ConstraintConfig = field(default_factory=ConstraintConfig)

    def validate(self) -> "ScenarioConfig":
        g, r, d = self.geometry, self.radio, self.demand
        if g.num_cells < 1:
            raise ConfigurationError("geometry.num_cells must be positive")
        if g.layout not in ("hex", "explicit"):
            raise ConfigurationError(f"unknown geometry.layout {g.layout!r}")
        if g.layout == "explicit":
            if g.positions is None or len(g.positions) != g.num_cells:
                raise ConfigurationError(
                    "explicit layout needs one [x, y] position per cell")
        if g.pixel_size_m <= 0:
            raise ConfigurationError("geometry.pixel_size_m must be positive")
        if int(g.area_width_m // g.pixel_size_m) < 1 or int(g.area_height_m // g.pixel_size_m) < 1:
            raise ConfigurationError("pixel grid has zero size")
        if r.bandwidth_hz <= 0:
            raise ConfigurationError("radio.bandwidth_hz must be positive")
        if not math.isfinite(r.tx_power_dbm):
            raise ConfigurationError("radio.tx_power_dbm must be finite")
        if r.pilot_subcarriers < 1:
            raise ConfigurationError("radio.pilot_subcarriers must be >= 1")
        if d.source not in ("hotspots", "uniform", "file"):
            raise ConfigurationError(f"unknown demand.source {d.source!r}")
        if d.source == "file" and not d.grid_path:
            raise ConfigurationError("demand.source=file needs demand.grid_path")
        for name in ("mean_interarrival_s", "mean_session_s", "min_rate_bps"):
            if getattr(d, name) <= 0:
                raise ConfigurationError(f"demand.{name} must be positive")
        o = self.optimization
        if o.pair not in ("f1f2", "f1f3", "f1f4", "f5f6"):
            raise ConfigurationError(f"unknown optimization.pair {o.pair!r}")
        if o.population_size < 4 or o.population_size % 2:
            raise ConfigurationError("population_size must be even and >= 4")
        if not 0 <= o.crossover_prob <= 1:
            raise ConfigurationError("crossover_prob must lie in [0, 1]")
        if o.mutation_prob is not None and not 0 <= o.mutation_prob <= 1:
            raise ConfigurationError("mutation_prob must lie in [0, 1]")
        if o.crossover not in ("uniform", "one_point", "two_point"):
            raise ConfigurationError(f"unknown optimization.crossover {o.crossover!r}")
        if o.volume_fraction <= 0:
            raise ConfigurationError("optimization.volume_fraction must be positive")
        s = self.simulation
        if s.ici not in ("fl", "lc"):
            raise ConfigurationError(f"unknown simulation.ici {s.ici!r}")
        if not 0 < s.target_qos <= 1:
            raise ConfigurationError("target_qos must lie in (0, 1]")
        if s.duration_s <= 0 or s.num_experiments < 1 or s.qos_check_interval_s <= 0:
            raise ConfigurationError("simulation durations/counts must be positive")
        p = self.power
        if not p.p_sleep_w <= p.p0_fixed_w <= p.p0_fixed_w + p.slope_w:
            raise ConfigurationError("power model needs p_sleep <= p0 <= p0 + slope")
        if p.f4_domain not in ("linear", "db"):
            raise ConfigurationError(f"unknown power.f4_domain {p.f4_domain!r}")
        if not 0 <= p.kappa_ul <= 1:
            raise ConfigurationError("kappa_ul must lie in [0, 1]")
        if not 0 <= self.constraint.kappa_cov <= 1:
            raise ConfigurationError("kappa_cov must lie in [0, 1]")
        return self


# -- strict (de)serialization -------------------------------------------------

def _convert(tp, value, path):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:  # Optional[X]
        if value is None:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _convert(inner, value, path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigurationError(f"{path}: expected a mapping")
        return _from_dict(tp, value, path)
    if origin is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{path}: expected a list")
        return [_convert(args[0], v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{path}: expected a boolean")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{path}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{path}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"{path}: expected a string")
        return value
    raise ConfigurationError(f"{path}: unsupported type {tp}")


def _from_dict(cls, data: dict, path: str = ""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = path or "config"
        raise ConfigurationError(f"{where}: unknown keys {unknown}")
    kwargs = {k: _convert(hints[k], v, f"{path}.{k}" if path else k)
              for k, v in data.items()}
    return cls(**kwargs)


def config_from_dict(data: dict) -> ScenarioConfig:
    return _from_dict(ScenarioConfig, data or {}).validate()


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigurationError("config root must be a mapping")
    return config_from_dict(data or {})


def dump_config(cfg: ScenarioConfig, path=None) -> str:
    text = yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text


def config_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _schema_for(tp):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:
        inner = [a for a in args if a is not type(None)][0]
        return {"anyOf": [_schema_for(inner), {"type": "null"}]}
    if dataclasses.is_dataclass(tp):
        hints = typing.get_type_hints(tp)
        return {
            "type": "object",
            "additionalProperties": False,
            "properties": {f.name: _schema_for(hints[f.name])
                           for f in dataclasses.fields(tp)},
        }
    if origin is list:
        return {"type": "array", "items": _schema_for(args[0])}
    return {bool: {"type": "boolean"}, int: {"type": "integer"},
            float: {"type": "number"}, str: {"type": "string"}}[tp]


def config_schema() -> dict:
    """JSON schema of the configuration file."""
    schema = _schema_for(ScenarioConfig)
    schema["$schema"] = "https://json-schema.org/draft/2020-12/schema"
    schema["title"] = "cellswitch scenario"
    return schema
