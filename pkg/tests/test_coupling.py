import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cellswitch.coupling import CouplingSystem, find_volume, solve_loads
from cellswitch.demand import DemandProfile
from cellswitch.errors import NonConvergenceError, VolumeSearchError
from cellswitch.network import coverage, sinr

from conftest import toy_model

G_TOY = np.array([[1e-9, 1e-10], [5e-10, 2e-10], [2e-10, 6e-10], [1e-10, 1e-9]])
GAMMA_TOY = np.array([0.3, 0.2, 0.2, 0.3])


def toy_profile(users):
    # mean users = session / interarrival
    return DemandProfile(GAMMA_TOY, 1.0, float(users), 400e3)


def load_map_by_hand(users, other_load, cell):
    """Cell load from the definition, written out for the 2-cell toy."""
    B, r_min, noise = 5e6, 400e3, 1e-13
    px = [0, 1] if cell == 0 else [2, 3]
    total = 0.0
    for a in px:
        psi = G_TOY[a, cell] / (other_load * G_TOY[a, 1 - cell] + noise)
        total += GAMMA_TOY[a] * min(B, r_min / np.log2(1 + psi))
    return users / B * total


def bisect(f, lo, hi, tol=1e-14):
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("users", [5.0, 20.0, 40.0, 60.0])
def test_two_cell_fixed_point_matches_bisection(users):
    a0 = bisect(lambda a: load_map_by_hand(users, load_map_by_hand(users, a, 1), 0) - a, 0.0, 1.0)
    a1 = load_map_by_hand(users, a0, 1)
    assert 0 < a0 < 1 and 0 < a1 < 1
    model = toy_model(G_TOY, grid_shape=(4, 1))
    lv = solve_loads(model, [1, 1], toy_profile(users), eps=1e-10)
    assert lv.loads[0] == pytest.approx(a0, abs=1e-6)
    assert lv.loads[1] == pytest.approx(a1, abs=1e-6)


def test_overloaded_cell_is_clamped():
    model = toy_model(G_TOY, grid_shape=(4, 1))
    lv = solve_loads(model, [1, 1], toy_profile(5000.0))
    assert np.all(lv.loads == 1.0)
    assert np.all(lv.raw > 1.0)


def test_off_cells_have_zero_load(small):
    _, model, profile = small
    x = np.array([1, 1, 0, 1, 0, 1, 1], dtype=bool)
    lv = solve_loads(model, x, profile.scaled(0.01))
    assert np.all(lv.loads[~x] == 0)
    assert np.all((lv.loads >= 0) & (lv.loads <= 1))


def test_single_cell_needs_one_sweep():
    model = toy_model(G_TOY[:, :1], grid_shape=(4, 1))
    lv = solve_loads(model, [1], toy_profile(10.0))
    # no interferer, so the second sweep reproduces the first
    assert lv.sweeps <= 2


def test_non_convergence_reports_last_iterate():
    model = toy_model(G_TOY, grid_shape=(4, 1))
    with pytest.raises(NonConvergenceError) as err:
        solve_loads(model, [1, 1], toy_profile(60.0), eps=1e-15, max_sweeps=1)
    assert err.value.last is not None


def test_all_off_rejected():
    model = toy_model(G_TOY, grid_shape=(4, 1))
    with pytest.raises(ValueError):
        solve_loads(model, [0, 0], toy_profile(60.0))


def test_loads_are_a_fixed_point(small):
    _, model, profile = small
    x = np.ones(7, dtype=bool)
    p = profile.scaled(0.02)
    lv = solve_loads(model, x, p, eps=1e-10)
    raw = CouplingSystem(model, x, p).raw_loads(lv.loads)
    assert np.allclose(lv.loads, np.minimum(1.0, raw), atol=1e-8)


def test_capacity_volume_brackets_the_limit():
    model = toy_model(G_TOY, grid_shape=(4, 1))
    base = toy_profile(10.0)
    vs = find_volume(model, [1, 1], base, "cap", rtol=1e-6)
    below = solve_loads(model, [1, 1], base.scaled(vs.multiplier * 0.999), eps=1e-10).raw
    above = solve_loads(model, [1, 1], base.scaled(vs.multiplier * 1.001), eps=1e-10).raw
    assert below.max() <= 1.0 < above.max()
    assert vs.mean_interarrival_s == pytest.approx(base.mean_interarrival_s / vs.multiplier)


def test_saturation_volume_brackets_the_limit():
    model = toy_model(G_TOY, grid_shape=(4, 1))
    base = toy_profile(10.0)
    cap = find_volume(model, [1, 1], base, "cap").multiplier
    sat = find_volume(model, [1, 1], base, "sat", rtol=1e-6).multiplier
    assert sat >= cap
    below = solve_loads(model, [1, 1], base.scaled(sat * 0.999), eps=1e-10).raw
    above = solve_loads(model, [1, 1], base.scaled(sat * 1.001), eps=1e-10).raw
    assert below.min() < 1.0 <= above.min()


def test_saturation_names_a_cell_without_demand():
    model = toy_model(G_TOY, grid_shape=(4, 1))
    g = np.array([0.5, 0.5, 0.0, 0.0])
    with pytest.raises(VolumeSearchError) as err:
        find_volume(model, [1, 1], DemandProfile(g, 1.0, 10.0, 400e3), "sat")
    assert err.value.cell == 1


@settings(max_examples=20, deadline=None)
@given(x=st.lists(st.booleans(), min_size=7, max_size=7).filter(any),
       volume=st.floats(0.001, 0.2))
def test_load_coupled_sinr_never_below_full_load(small, x, volume):
    _, model, profile = small
    x = np.array(x)
    lv = solve_loads(model, x, profile.scaled(volume))
    cov = coverage(model, x, check_sinr=False)
    assert np.all(sinr(model, x, loads=lv.loads, cov=cov) >= sinr(model, x, cov=cov))


@settings(max_examples=15, deadline=None)
@given(start=st.lists(st.floats(0.0, 1.0), min_size=7, max_size=7))
def test_fixed_point_does_not_depend_on_the_start(small, start):
    _, model, profile = small
    x = np.ones(7, dtype=bool)
    p = profile.scaled(0.02)
    a = solve_loads(model, x, p, eps=1e-10)
    b = solve_loads(model, x, p, eps=1e-10, initial=np.array(start))
    assert np.allclose(a.loads, b.loads, atol=1e-7)


@settings(max_examples=15, deadline=None)
@given(volume=st.floats(0.002, 0.05), factor=st.floats(1.0, 3.0))
def test_more_demand_never_lowers_a_raw_load(small, volume, factor):
    _, model, profile = small
    x = np.array([1, 1, 0, 1, 1, 1, 0], dtype=bool)
    lo = solve_loads(model, x, profile.scaled(volume), eps=1e-10).raw
    hi = solve_loads(model, x, profile.scaled(volume * factor), eps=1e-10).raw
    assert np.all(hi >= lo - 1e-9)


def test_extra_sweep_is_idempotent(small):
    _, model, profile = small
    x = np.ones(7, dtype=bool)
    p = profile.scaled(0.02)
    lv = solve_loads(model, x, p)
    again = solve_loads(model, x, p, initial=lv.loads)
    assert again.sweeps == 1
    assert np.all(np.abs(again.loads - lv.loads) <= 1e-4 * np.maximum(lv.loads, 1e-12) + 1e-12)
