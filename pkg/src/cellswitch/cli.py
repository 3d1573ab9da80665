"""Command-line entry point: ``cellswitch <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import benchmarks, metrics
from .config import ScenarioConfig, config_hash, config_schema, dump_config, load_config
from .coupling import find_volume
from .demand import kl_to_uniform, profile_from_config, save_demand_grid
from .errors import (ConfigurationError, FileFormatError, InfeasibleScenarioError,
                     NonConvergenceError, VolumeSearchError)
from .mda import run_mda
from .moea import MoeaConfig, evolve, exhaustive_front, hypervolume_2d
from .network import coverage, generate_scenario, radio_powers, save_gmatrix
from .problem import PAIR_ICI, Problem, TopologyEvaluator, bitstring
from .results import read_front, write_csv, write_front, write_json
from .simulator import (DemandPhase, SimConfig, SimContext, SnapshotPolicy, StaticPolicy,
                        report_summary, run_experiments, select_topology)

log = logging.getLogger("cellswitch")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NONCONVERGENCE = 0, 2, 3, 4
EXHAUSTIVE_MAX_CELLS = 20
DEFAULT_POWERS_DBM = [18.0, 21.0, 24.0, 27.0, 30.0, 33.0]


# -- shared setup -----------------------------------------------------------

class Session:
    """Scenario objects shared by the subcommands."""

    def __init__(self, cfg: ScenarioConfig, threads=1):
        self.cfg = cfg
        self.threads = threads
        self.model = generate_scenario(cfg)
        self.profile = profile_from_config(cfg, self.model)
        self.power_model = metrics.PowerModel(cfg.power.p0_fixed_w, cfg.power.p_sleep_w,
                                              cfg.power.slope_w)
        self._vcap = None

    @property
    def meta(self):
        return {"config_sha256": config_hash(self.cfg), "seed": self.cfg.seed}

    @property
    def v_cap(self) -> float:
        """V_Cap multiplier of the base demand with every cell on (load coupling)."""
        if self._vcap is None:
            self._vcap = find_volume(self.model, self.model.all_on(), self.profile, "cap").multiplier
        return self._vcap

    def evaluator(self, ici, multiplier=None):
        c = self.cfg
        profile = self.profile if multiplier is None else self.profile.scaled(multiplier)
        return TopologyEvaluator(
            self.model, profile, ici=ici, kappa_cov=c.constraint.kappa_cov,
            power_model=self.power_model, p0_ul_dbm=c.power.p0_ul_dbm,
            kappa_ul=c.power.kappa_ul, f4_domain=c.power.f4_domain,
            f4_normalize=c.power.f4_normalize,
            require_adequate=c.optimization.require_adequate)

    def lc_multiplier(self):
        return self.cfg.optimization.volume_fraction * self.v_cap

    def full_rows(self, topologies):
        """All six objectives per topology: f1-f4 under full load, f5/f6 under
        load coupling at the configured volume."""
        fl = self.evaluator("fl")
        lc = self.evaluator("lc", self.lc_multiplier())
        rows = []
        for x in topologies:
            a, b = fl.evaluate(x), lc.evaluate(x)
            feasible = a.feasible and (b.feasible if self.cfg.optimization.pair == "f5f6" else True)
            rows.append({"topology": x, **{k: a.values[k] for k in ("f1", "f2", "f3", "f4")},
                         "f5": b.values["f5"], "f6": b.values["f6"], "feasible": feasible,
                         "outage_fraction": a.outage_fraction})
        return rows


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "ici", None) is not None:
        cfg.simulation.ici = args.ici
    return cfg.validate()


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    return _apply_overrides(cfg, args)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"not a comma-separated number list: {text!r}") from exc


def _volumes(args, cfg):
    if getattr(args, "volume_multipliers", None):
        vals = _parse_floats(args.volume_multipliers)
    else:
        vals = list(cfg.simulation.volume_fractions)
    if not vals or any(v < 0 for v in vals):
        raise ConfigurationError("volume multipliers must be nonnegative")
    return vals


def _sim_config(cfg, multiplier, seed_offset=0, experiments=None):
    s = cfg.simulation
    return SimConfig(duration_s=s.duration_s,
                     num_experiments=experiments or s.num_experiments,
                     qos_check_interval_s=s.qos_check_interval_s, target_qos=s.target_qos,
                     seed=cfg.seed * 1000 + seed_offset, ici=s.ici,
                     volume_multiplier=multiplier)


# -- commands ---------------------------------------------------------------

def cmd_schema(args):
    print(json.dumps(config_schema(), indent=2))
    return EXIT_OK


def cmd_generate(args):
    cfg = _load(args)
    ses = Session(cfg)
    out = _out_dir(args)
    save_gmatrix(ses.model, out / "gmatrix.npz")
    save_demand_grid(ses.profile.gamma, ses.model.grid_shape, out / "demand.csv")
    dump_config(cfg, out / "config.yaml")
    cov = coverage(ses.model, ses.model.all_on())
    write_json(out / "scenario.json", {
        **ses.meta, "num_cells": ses.model.num_cells, "num_pixels": ses.model.num_pixels,
        "grid_shape": list(ses.model.grid_shape), "kl_to_uniform": kl_to_uniform(ses.profile.gamma),
        "all_on_outage_fraction": cov.outage_fraction, "v_cap_multiplier": ses.v_cap,
    })
    log.info("scenario written to %s", out)
    return EXIT_OK


def cmd_optimize(args):
    cfg = _load(args)
    ses = Session(cfg, args.threads)
    out = _out_dir(args)
    pair = cfg.optimization.pair
    meta = {**ses.meta, "algorithm": args.algorithm, "pair": pair}
    if args.algorithm == "mda":
        chain = run_mda(ses.evaluator("fl"), threads=args.threads)
        if not any(e.feasible for e in chain.evaluations):
            raise InfeasibleScenarioError("no topology meets the coverage constraint")
        rows = ses.full_rows(chain.topologies)
        write_front(out / "front.csv", rows, meta, order=list(range(1, len(rows) + 1)))
        write_json(out / "front.json", {**meta, "topologies": len(rows),
                                        "evaluations_per_step": chain.evaluations_per_step})
        return EXIT_OK

    if pair == "f5f6":
        evaluator = ses.evaluator("lc", ses.lc_multiplier())
    else:
        evaluator = ses.evaluator(PAIR_ICI[pair])
    problem = Problem(evaluator, pair)
    info = {}
    if args.exhaustive:
        if ses.model.num_cells > EXHAUSTIVE_MAX_CELLS:
            raise ConfigurationError(
                f"--exhaustive needs at most {EXHAUSTIVE_MAX_CELLS} cells "
                f"(scenario has {ses.model.num_cells})")
        front = exhaustive_front(problem)
        info["method"] = "exhaustive"
    else:
        o = cfg.optimization
        mc = MoeaConfig(population_size=o.population_size, crossover_prob=o.crossover_prob,
                        mutation_prob=o.mutation_prob, hv_threshold=o.hv_threshold,
                        hv_patience=o.hv_patience, max_generations=o.max_generations,
                        seed=cfg.seed, threads=args.threads, crossover=o.crossover)
        res = evolve(problem, mc)
        front = res.front
        info.update(method="nsga2", generations=res.generations,
                    final_hypervolume=res.hv_history[-1] if res.hv_history else 0.0,
                    reference_point=None if res.reference_point is None
                    else [float(v) for v in res.reference_point])
    if not front:
        raise InfeasibleScenarioError("no topology meets the coverage constraint")
    rows = ses.full_rows([ind.genome for ind in front])
    write_front(out / "front.csv", rows, meta)
    write_json(out / "front.json", {**meta, **info, "front_size": len(rows),
                                    "evaluations": evaluator.evaluations})
    return EXIT_OK


def _proposed_topology(ses, topologies, multiplier, experiments):
    """Offline selection: cheapest front member meeting the QoS target."""
    cfg = ses.cfg
    simcfg = _sim_config(cfg, multiplier * ses.v_cap, seed_offset=1, experiments=experiments)
    passes = []
    for x in topologies:
        reports = run_experiments(ses.model, lambda x=x: StaticPolicy(x), ses.profile, simcfg,
                                  threads=ses.threads, kappa_cov=cfg.constraint.kappa_cov,
                                  power_model=ses.power_model)
        passes.append(report_summary(reports)["qos_pass_fraction"])
    return passes, select_topology(topologies, passes, cfg.simulation.target_qos)


def cmd_evaluate(args):
    cfg = _load(args)
    ses = Session(cfg, args.threads)
    _, topologies = read_front(args.front, ses.model.num_cells)
    out = _out_dir(args)
    volumes = _volumes(args, cfg)
    rows, sel_rows = [], []
    for vm in volumes:
        simcfg = _sim_config(cfg, vm * ses.v_cap)
        passes = []
        for x in topologies:
            reports = run_experiments(ses.model, lambda x=x: StaticPolicy(x), ses.profile,
                                      simcfg, threads=args.threads,
                                      kappa_cov=cfg.constraint.kappa_cov,
                                      power_model=ses.power_model)
            s = report_summary(reports)
            passes.append(s["qos_pass_fraction"])
            rows.append([vm, bitstring(x), int(x.sum()), s["mean_satisfied"],
                         s["qos_pass_fraction"], s["mean_energy_w"], s["experiments"]])
        chosen = select_topology(topologies, passes, cfg.simulation.target_qos)
        sel_rows.append([vm, bitstring(chosen), int(chosen.sum())])
    meta = {**ses.meta, "ici": cfg.simulation.ici}
    write_csv(out / "evaluation.csv", ["volume_multiplier", "bitstring", "nac", "mean_satisfied",
                                       "qos_pass_fraction", "mean_energy_w", "experiments"],
              rows, meta)
    write_csv(out / "selection.csv", ["volume_multiplier", "bitstring", "nac"], sel_rows, meta)
    return EXIT_OK


def _front_for_compare(ses, args):
    if args.front:
        return read_front(args.front, ses.model.num_cells)[1]
    chain = run_mda(ses.evaluator("fl"), threads=ses.threads)
    return [x for x, e in zip(chain.topologies, chain.evaluations) if e.feasible]


def cmd_compare(args):
    cfg = _load(args)
    ses = Session(cfg, args.threads)
    out = _out_dir(args)
    volumes = _volumes(args, cfg)
    topologies = _front_for_compare(ses, args)
    if not topologies:
        raise InfeasibleScenarioError("no topology meets the coverage constraint")
    b = cfg.simulation.benchmarks
    deciders = {
        "cell_zooming": benchmarks.cell_zooming,
        "improved_cell_zooming": benchmarks.improved_cell_zooming,
        "load_interference_aware": lambda ctx, px: benchmarks.load_interference_aware(
            ctx, px, threshold=b.lia_load_threshold, weight=b.lia_interference_weight),
        "set_cover": benchmarks.set_cover,
    }
    rows = []
    for vm in volumes:
        simcfg = _sim_config(cfg, vm * ses.v_cap)
        ctx = SimContext(ses.model, [DemandPhase(0.0, ses.profile)], simcfg.ici,
                         cfg.constraint.kappa_cov, simcfg.volume_multiplier)
        _, chosen = _proposed_topology(ses, topologies, vm, args.selection_experiments)
        schemes = {"proposed": lambda: StaticPolicy(chosen)}
        for name, fn in deciders.items():
            schemes[name] = lambda fn=fn: SnapshotPolicy(fn, b.interval_s)
        for name, factory in schemes.items():
            reports = run_experiments(ses.model, factory, ses.profile, simcfg,
                                      threads=args.threads, context=ctx,
                                      kappa_cov=cfg.constraint.kappa_cov,
                                      power_model=ses.power_model)
            s = report_summary(reports)
            rows.append([name, vm, s["mean_nac"], s["mean_satisfied"], s["qos_pass_fraction"],
                         s["transitions"], s["handovers"], s["handover_mass"],
                         s["mean_energy_w"]])
    write_csv(out / "compare.csv",
              ["scheme", "volume_multiplier", "mean_nac", "mean_satisfied", "qos_pass_fraction",
               "transitions", "handovers", "handover_mass", "mean_energy_w"],
              rows, {**ses.meta, "ici": cfg.simulation.ici})
    return EXIT_OK


def coverage_table(cfg: ScenarioConfig, powers_dbm, margin_db=3.0, max_servers=4):
    """Coverage statistics per transmit power.

    Columns: covered share with only the central cell on, covered share
    with every cell on, mean number of cells above the pilot threshold, and
    the share of pixels with k candidate servers within ``margin_db`` of the
    best one (k = 1..max_servers, last bin open).
    """
    rows = []
    base = generate_scenario(cfg)
    centre = int(np.argmin(np.hypot(*base.cell_positions.T)))
    for p in powers_dbm:
        radio = cfg.radio
        old = radio.tx_power_dbm
        radio.tx_power_dbm = p
        try:
            p_ps, p_d = radio_powers(radio)
        finally:
            radio.tx_power_dbm = old
        model = base.with_powers(np.full(base.num_cells, p_ps), np.full(base.num_cells, p_d))
        single = np.zeros(model.num_cells, dtype=bool)
        single[centre] = True
        cov1 = coverage(model, single, check_sinr=False)
        covall = coverage(model, model.all_on())
        R = model.G * model.p_ps
        detect = (R > model.min_rx_power) & (1.0 / model.G < model.max_ul_attenuation)
        best = R.max(axis=1, keepdims=True)
        near = (R >= best * 10 ** (-margin_db / 10)) & detect
        counts = np.minimum(near.sum(axis=1), max_servers)
        served = detect.any(axis=1)
        hist = [float(np.mean(served & (counts == k))) for k in range(1, max_servers + 1)]
        rows.append([p, 1.0 - cov1.outage_fraction, 1.0 - covall.outage_fraction,
                     float(detect.sum(axis=1).mean()), *hist])
    cols = ["tx_power_dbm", "coverage_single_cell", "coverage_all_on", "mean_detectable_cells"]
    cols += [f"servers_within_margin_{k}{'+' if k == max_servers else ''}"
             for k in range(1, max_servers + 1)]
    return cols, rows


def cmd_coverage_report(args):
    cfg = _load(args)
    out = _out_dir(args)
    powers = _parse_floats(args.powers) if args.powers else DEFAULT_POWERS_DBM
    cols, rows = coverage_table(cfg, powers, args.margin_db)
    write_csv(out / "coverage.csv", cols, rows,
              {"config_sha256": config_hash(cfg), "seed": cfg.seed, "margin_db": args.margin_db})
    return EXIT_OK


# -- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellswitch",
                                     description="Multiobjective cell switch-off toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="scenario file (YAML or JSON); defaults if omitted")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        if out:
            p.add_argument("--out", default="out", help="output directory")

    sub.add_parser("schema", help="print the configuration JSON schema").set_defaults(
        func=cmd_schema)

    p = sub.add_parser("generate", help="write the G matrix, demand grid and scenario summary")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("optimize", help="compute a Pareto front or MDA chain")
    common(p)
    p.add_argument("--algorithm", choices=["moea", "mda"], default="moea")
    p.add_argument("--exhaustive", action="store_true",
                   help=f"enumerate every topology (at most {EXHAUSTIVE_MAX_CELLS} cells)")
    p.add_argument("--ici", choices=["fl", "lc"], help="simulation interference model")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="simulate front members and select per volume")
    common(p)
    p.add_argument("--front", required=True, help="front CSV from 'optimize'")
    p.add_argument("--volume-multipliers", help="comma-separated fractions of V_Cap")
    p.add_argument("--ici", choices=["fl", "lc"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="proposed pipeline versus benchmark heuristics")
    common(p)
    p.add_argument("--front", help="front CSV; an MDA chain is used if omitted")
    p.add_argument("--volume-multipliers", help="comma-separated fractions of V_Cap")
    p.add_argument("--ici", choices=["fl", "lc"])
    p.add_argument("--selection-experiments", type=int, default=5,
                   help="experiments per front member during selection")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("coverage-report", help="coverage statistics versus transmit power")
    common(p)
    p.add_argument("--powers", help="comma-separated transmit powers in dBm")
    p.add_argument("--margin-db", type=float, default=3.0,
                   help="candidate-server window below the best server")
    p.set_defaults(func=cmd_coverage_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigurationError, FileFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleScenarioError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NonConvergenceError, VolumeSearchError) as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
