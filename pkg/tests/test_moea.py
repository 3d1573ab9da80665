import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cellswitch.moea import (MoeaConfig, crowding_distance, dominance_matrix, evolve,
                             exhaustive_front, hypervolume_2d, nondominated_sort)
from cellswitch.problem import Problem, TopologyEvaluator

from conftest import small_scenario


def test_sort_examples():
    assert nondominated_sort([(1, 1), (2, 2)]) == [[0], [1]]
    assert nondominated_sort([(1, 3), (2, 2), (3, 1)]) == [[0, 1, 2]]


def brute_force_fronts(F, viol):
    """Peel fronts by checking every pair directly."""
    def dominates(i, j):
        fi, fj = viol[i] <= 0, viol[j] <= 0
        if fi and not fj:
            return True
        if fj and not fi:
            return False
        if not fi:
            return viol[i] < viol[j]
        return all(a <= b for a, b in zip(F[i], F[j])) and any(a < b for a, b in zip(F[i], F[j]))

    left, fronts = set(range(len(F))), []
    while left:
        front = sorted(i for i in left if not any(dominates(j, i) for j in left if j != i))
        fronts.append(front)
        left -= set(front)
    return fronts


points = st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.sampled_from([0, 0, 1, 2])),
                  min_size=1, max_size=12)


@settings(max_examples=100, deadline=None)
@given(pts=points)
def test_sort_matches_brute_force(pts):
    F = [(a, b) for a, b, _ in pts]
    viol = [float(v) for _, _, v in pts]
    assert nondominated_sort(F, viol) == brute_force_fronts(F, viol)


@settings(max_examples=50, deadline=None)
@given(pts=points)
def test_feasible_always_outranks_infeasible(pts):
    F = [(a, b) for a, b, _ in pts]
    viol = np.array([float(v) for _, _, v in pts])
    rank = np.empty(len(F), int)
    for r, front in enumerate(nondominated_sort(F, viol)):
        rank[front] = r
    if (viol <= 0).any() and (viol > 0).any():
        assert rank[viol <= 0].max() < rank[viol > 0].min()


def test_dominance_is_irreflexive():
    D = dominance_matrix([(1, 1), (1, 1)], [0, 0])
    assert not D.any()


def test_crowding_examples():
    assert np.all(np.isinf(crowding_distance([(1, 2)])))
    assert np.all(np.isinf(crowding_distance([(1, 2), (2, 1)])))
    d = crowding_distance([(0, 2), (1, 1), (2, 0)])
    assert d[1] == pytest.approx(2.0)
    assert np.isinf(d[0]) and np.isinf(d[2])
    dup = crowding_distance([(0, 2), (1, 1), (1, 1), (2, 0)])
    assert np.isfinite(dup[1:3]).all() and np.isinf(dup[[0, 3]]).all()


def test_hypervolume_examples():
    assert hypervolume_2d([(1, 1)], (2, 2)) == 1.0
    assert hypervolume_2d([(1, 2), (2, 1)], (3, 3)) == 3.0
    assert hypervolume_2d([(1, 2), (2, 1), (2.5, 2.5)], (3, 3)) == 3.0
    assert hypervolume_2d([(4, 1)], (3, 3)) == 0.0
    assert hypervolume_2d([], (3, 3)) == 0.0


def grid_hypervolume(pts, ref):
    """Count unit cells [i, i+1] x [j, j+1] dominated by some point."""
    total = 0
    for i in range(ref[0]):
        for j in range(ref[1]):
            total += any(px <= i and py <= j for px, py in pts)
    return total


@settings(max_examples=100, deadline=None)
@given(pts=st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=10))
def test_hypervolume_matches_grid_count(pts):
    assert hypervolume_2d(pts, (10, 10)) == grid_hypervolume(pts, (10, 10))


@pytest.fixture(scope="module")
def toy4():
    _, model, profile = small_scenario(num_cells=4, area=300.0, radius=70.0, seed=11)
    return model, profile


def test_evolve_recovers_exhaustive_front(small):
    _, model, profile = small
    truth = exhaustive_front(Problem(TopologyEvaluator(model, profile), "f1f2"))
    assert len(truth) >= 2
    res = evolve(Problem(TopologyEvaluator(model, profile), "f1f2"),
                 MoeaConfig(population_size=24, seed=1, max_generations=80))
    got = {tuple(ind.objectives) for ind in res.front}
    assert got == {tuple(ind.objectives) for ind in truth}


@pytest.fixture(scope="module")
def run7():
    _, model, profile = small_scenario(seed=4)
    problem = Problem(TopologyEvaluator(model, profile), "f1f2")
    return problem, evolve(problem, MoeaConfig(population_size=24, seed=3, max_generations=40),
                           keep_archives=True)


def test_front_is_feasible_sorted_and_nonempty(run7):
    problem, res = run7
    assert res.front
    f1 = [ind.objectives[0] for ind in res.front]
    f2 = [ind.objectives[1] for ind in res.front]
    assert f1 == sorted(f1)
    assert all(b > a for a, b in zip(f2, f2[1:]))
    for ind in res.front:
        assert ind.feasible and ind.genome.any()
        assert ind.outage_fraction <= 0.02
    genomes = {ind.genome.tobytes() for ind in res.front}
    assert len(genomes) == len(res.front)


def test_best_f2_per_nac_never_worsens(run7):
    _, res = run7
    prev = None
    for F in res.archives:
        best = {}
        for f1, neg_f2 in F:
            best[f1] = min(best.get(f1, np.inf), neg_f2)
        if prev is not None:
            for k in set(best) & set(prev):
                assert best[k] <= prev[k]
        prev = best


def test_evolve_is_deterministic(run7):
    problem, res = run7
    again = evolve(Problem(TopologyEvaluator(problem.evaluator.model, problem.evaluator.profile),
                           "f1f2"), MoeaConfig(population_size=24, seed=3, max_generations=40))
    assert [ind.genome.tolist() for ind in again.front] == [ind.genome.tolist() for ind in res.front]


def test_each_generation_evaluates_one_population(toy4):
    model, profile = toy4
    inner = Problem(TopologyEvaluator(model, profile), "f1f2")
    calls = []

    class Counting(Problem):
        def __call__(self, topo):
            calls.append(1)
            return inner(topo)

    counting = Counting(inner.evaluator, "f1f2")
    res = evolve(counting, MoeaConfig(population_size=10, seed=2, max_generations=5,
                                      hv_threshold=-1.0))
    assert res.generations == 5
    assert len(calls) == 10 * (res.generations + 1)


def test_threads_do_not_change_the_result(toy4):
    model, profile = toy4
    cfg = dict(population_size=12, seed=5, max_generations=10)
    a = evolve(Problem(TopologyEvaluator(model, profile), "f1f2"), MoeaConfig(**cfg))
    b = evolve(Problem(TopologyEvaluator(model, profile), "f1f2"), MoeaConfig(threads=3, **cfg))
    assert [i.genome.tolist() for i in a.front] == [i.genome.tolist() for i in b.front]


@pytest.mark.parametrize("kw", [dict(population_size=5), dict(population_size=2),
                                dict(crossover_prob=1.5), dict(mutation_prob=-0.1),
                                dict(crossover="blend")])
def test_invalid_config_rejected(kw):
    with pytest.raises(ValueError):
        MoeaConfig(**kw)


def test_load_coupled_pair_runs(toy4):
    model, profile = toy4
    ev = TopologyEvaluator(model, profile.scaled(0.002), ici="lc")
    res = evolve(Problem(ev, "f5f6"), MoeaConfig(population_size=12, seed=1, max_generations=10))
    for ind in res.front:
        assert ind.feasible
    with pytest.raises(ValueError):
        Problem(ev, "f1f2")
