import numpy as np
import pytest

from cellswitch.config import ScenarioConfig
from cellswitch.demand import profile_from_config
from cellswitch.network import NetworkModel, generate_scenario


def toy_model(G, *, p_ps=1.0, p_d=1.0, noise=1e-13, bandwidth=5e6, min_rx=1e-15,
              min_sinr=0.1, max_ul=1e16, grid_shape=None):
    G = np.atleast_2d(np.asarray(G, dtype=float))
    return NetworkModel(G=G, p_ps=p_ps, p_d=p_d, noise_power=noise, bandwidth=bandwidth,
                        min_rx_power=min_rx, min_sinr=min_sinr, max_ul_attenuation=max_ul,
                        pixel_size_m=1.0, grid_shape=grid_shape or (G.shape[0], 1))


def small_config(num_cells=7, area=400.0, pixel=20.0, seed=3, radius=80.0, tx_dbm=10.0, **over):
    cfg = ScenarioConfig(seed=seed)
    cfg.geometry.num_cells = num_cells
    cfg.geometry.area_width_m = area
    cfg.geometry.area_height_m = area
    cfg.geometry.pixel_size_m = pixel
    cfg.geometry.cell_radius_m = radius
    cfg.radio.tx_power_dbm = tx_dbm
    for key, value in over.items():
        block, _, name = key.partition("__")
        setattr(getattr(cfg, block), name, value)
    return cfg.validate()


def small_scenario(**kw):
    cfg = small_config(**kw)
    model = generate_scenario(cfg)
    return cfg, model, profile_from_config(cfg, model)


@pytest.fixture(scope="session")
def small():
    return small_scenario()


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
