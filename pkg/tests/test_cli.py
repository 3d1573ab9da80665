import json
import subprocess
import sys

import pytest

from cellswitch.cli import main
from cellswitch.config import config_hash, dump_config, load_config
from cellswitch.results import read_csv, read_front

from conftest import small_config


@pytest.fixture(scope="module")
def cfg_path(tmp_path_factory):
    cfg = small_config(optimization__population_size=12, optimization__max_generations=15,
                       simulation__duration_s=10.0, simulation__num_experiments=2,
                       simulation__volume_fractions=[0.5])
    path = tmp_path_factory.mktemp("cfg") / "small.yaml"
    dump_config(cfg, path)
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_schema_prints_json(capsys):
    assert run("schema") == 0
    assert json.loads(capsys.readouterr().out)["type"] == "object"


def test_generate_writes_scenario(cfg_path, tmp_path):
    assert run("generate", "--config", cfg_path, "--out", tmp_path) == 0
    info = json.loads((tmp_path / "scenario.json").read_text())
    assert info["num_cells"] == 7 and info["num_pixels"] == 400
    assert info["config_sha256"] == config_hash(load_config(cfg_path))
    assert (tmp_path / "gmatrix.npz").exists() and (tmp_path / "demand.csv").exists()
    assert load_config(tmp_path / "config.yaml").seed == load_config(cfg_path).seed


def test_mda_chain_has_one_row_per_cell_count(cfg_path, tmp_path):
    assert run("optimize", "--config", cfg_path, "--algorithm", "mda", "--out", tmp_path) == 0
    meta, rows = read_csv(tmp_path / "front.csv")
    assert meta["seed"] == "3" and len(meta["config_sha256"]) == 64
    assert [int(r["order"]) for r in rows] == list(range(1, 8))
    assert [int(r["nac"]) for r in rows] == list(range(1, 8))


def test_moea_matches_exhaustive_on_small_network(cfg_path, tmp_path):
    assert run("optimize", "--config", cfg_path, "--exhaustive", "--out", tmp_path / "ex") == 0
    assert run("optimize", "--config", cfg_path, "--out", tmp_path / "ga") == 0
    _, ex = read_csv(tmp_path / "ex" / "front.csv")
    _, ga = read_csv(tmp_path / "ga" / "front.csv")
    assert [(r["bitstring"], r["f2"]) for r in ga] == [(r["bitstring"], r["f2"]) for r in ex]
    info = json.loads((tmp_path / "ga" / "front.json").read_text())
    assert info["method"] == "nsga2" and info["front_size"] == len(ga)


def test_optimize_is_deterministic(cfg_path, tmp_path):
    for d in ("a", "b"):
        assert run("optimize", "--config", cfg_path, "--out", tmp_path / d) == 0
    assert (tmp_path / "a" / "front.csv").read_bytes() == (tmp_path / "b" / "front.csv").read_bytes()


def test_seed_override_changes_header(cfg_path, tmp_path):
    assert run("optimize", "--config", cfg_path, "--algorithm", "mda", "--seed", "5",
               "--out", tmp_path) == 0
    assert read_csv(tmp_path / "front.csv")[0]["seed"] == "5"


@pytest.fixture(scope="module")
def front_file(cfg_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("front")
    assert run("optimize", "--config", cfg_path, "--algorithm", "mda", "--out", out) == 0
    return out / "front.csv"


def test_evaluate_selects_per_volume(cfg_path, front_file, tmp_path):
    assert run("evaluate", "--config", cfg_path, "--front", front_file,
               "--volume-multipliers", "0.2,0.5", "--out", tmp_path) == 0
    _, rows = read_csv(tmp_path / "evaluation.csv")
    assert len(rows) == 2 * 7
    _, sel = read_csv(tmp_path / "selection.csv")
    assert [float(r["volume_multiplier"]) for r in sel] == [0.2, 0.5]
    _, members = read_front(front_file, 7)
    assert all(r["bitstring"] in {"".join("1" if b else "0" for b in m) for m in members}
               or r["bitstring"] == "1" * 7 for r in sel)


def test_compare_lists_every_scheme(cfg_path, front_file, tmp_path):
    assert run("compare", "--config", cfg_path, "--front", front_file,
               "--selection-experiments", "1", "--out", tmp_path) == 0
    _, rows = read_csv(tmp_path / "compare.csv")
    assert {r["scheme"] for r in rows} == {"proposed", "cell_zooming", "improved_cell_zooming",
                                          "load_interference_aware", "set_cover"}


def test_coverage_report_grows_with_power(cfg_path, tmp_path):
    assert run("coverage-report", "--config", cfg_path, "--powers", "0,10,20",
               "--out", tmp_path) == 0
    _, rows = read_csv(tmp_path / "coverage.csv")
    single = [float(r["coverage_single_cell"]) for r in rows]
    assert single == sorted(single)


def test_unknown_config_key_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("radio:\n  bandwith_hz: 5.0e6\n")
    assert run("generate", "--config", bad, "--out", tmp_path) == 2
    assert "bandwith_hz" in capsys.readouterr().err


def test_bad_front_file_exits_2(cfg_path, tmp_path, capsys):
    bad = tmp_path / "front.csv"
    bad.write_text("bitstring\n1010101\n10x0101\n")
    assert run("evaluate", "--config", cfg_path, "--front", bad, "--out", tmp_path) == 2
    assert "row 2" in capsys.readouterr().err


def test_exhaustive_refuses_large_networks(tmp_path):
    assert run("optimize", "--exhaustive", "--out", tmp_path) == 2


def test_uncoverable_scenario_exits_3(tmp_path):
    cfg = small_config(tx_dbm=-40.0, optimization__population_size=8,
                       optimization__max_generations=3)
    path = tmp_path / "weak.yaml"
    dump_config(cfg, path)
    assert run("optimize", "--config", path, "--algorithm", "mda", "--out", tmp_path) == 3
    assert run("optimize", "--config", path, "--out", tmp_path) == 3


def test_entry_point_runs_as_module(tmp_path):
    res = subprocess.run([sys.executable, "-m", "cellswitch.cli", "schema"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "cellswitch scenario" in res.stdout


def test_empty_front_file_exits_2(cfg_path, tmp_path, capsys):
    empty = tmp_path / "front.csv"
    empty.write_text("# seed=3\nbitstring\n")
    assert run("evaluate", "--config", cfg_path, "--front", empty, "--out", tmp_path) == 2
    assert "no rows" in capsys.readouterr().err


def test_all_on_passes_at_low_volume_and_fails_beyond_saturation(cfg_path, tmp_path):
    front = tmp_path / "front.csv"
    front.write_text("bitstring\n1111111\n")
    assert run("evaluate", "--config", cfg_path, "--front", front,
               "--volume-multipliers", "0.2,20", "--out", tmp_path) == 0
    _, rows = read_csv(tmp_path / "evaluation.csv")
    passes = {float(r["volume_multiplier"]): float(r["qos_pass_fraction"]) for r in rows}
    assert passes[0.2] >= 0.975 and passes[20.0] < 0.975


def test_compare_without_demand_switches_cells_off(cfg_path, tmp_path):
    assert run("compare", "--config", cfg_path, "--volume-multipliers", "0",
               "--selection-experiments", "1", "--out", tmp_path) == 0
    _, rows = read_csv(tmp_path / "compare.csv")
    for r in rows:
        assert float(r["mean_nac"]) < 7
        assert float(r["qos_pass_fraction"]) == 1.0
        if r["scheme"] == "proposed":
            assert float(r["transitions"]) == 0.0


def test_coverage_vanishes_without_transmit_power(cfg_path, tmp_path):
    assert run("coverage-report", "--config", cfg_path, "--powers", "-80",
               "--out", tmp_path) == 0
    _, rows = read_csv(tmp_path / "coverage.csv")
    assert float(rows[0]["coverage_single_cell"]) == 0.0
    assert float(rows[0]["coverage_all_on"]) == 0.0
