import warnings

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from evcs_planner import AlgoConfig, ParetoArchive, Plan, fast_nondominated_sort, nsga2
from evcs_planner.feasibility import GeneBounds, repair
from evcs_planner.moea import (
    ArchiveEntry,
    arithmetic_crossover,
    binary_tournament,
    chaos_genes,
    chaos_init,
    chaos_seed,
    crowding_distance,
    logistic_step,
    logistic_trajectory,
    mutate,
)
from evcs_planner.problem import ChargingProblem, ConvexTestProblem

from oracles import brute_force_fronts


class ScriptedRng:
    """Stand-in generator that replays fixed draws."""

    def __init__(self, randoms=(), integers=()):
        self._r = list(randoms)
        self._i = list(integers)

    def random(self):
        return self._r.pop(0)

    def integers(self, n, size=None):
        if size is None:
            return self._i.pop(0)
        return np.array([self._i.pop(0) for _ in range(size)])

    def uniform(self, lo, hi):
        return lo + self._r.pop(0) * (hi - lo)


class TestLogistic:
    def test_step(self):
        assert logistic_step(0.3, 4) == pytest.approx(0.84)
        assert logistic_step(0.5, 4) == 1.0
        assert logistic_step(1.0, 4) == 0.0
        for tau in (0.5, 2.0, 4.0):
            assert logistic_step(0.0, tau) == 0.0

    def test_outside_unit_interval(self):
        with pytest.raises(ValueError):
            logistic_step(1.2, 4)

    def test_trajectory_and_scaling(self):
        traj = logistic_trajectory(0.3, 4.0, 3)
        np.testing.assert_allclose(traj, [0.84, 0.5376, 0.99434496], rtol=1e-12)
        np.testing.assert_allclose(10 + 25 * traj, [31.0, 23.44, 34.858624], rtol=1e-12)

    def test_ergodic_coverage(self):
        traj = logistic_trajectory(0.123456, 4.0, 10_000)
        hits = np.histogram(traj, bins=20, range=(0, 1))[0]
        assert np.all(hits > 0)

    def test_seed_excludes_traps(self):
        rng = ScriptedRng(randoms=[0.5, 0.25 + 5e-7, 0.0, 0.75, 0.3])
        assert chaos_seed(rng) == 0.3

    def test_genes_follow_trajectories(self):
        lo, hi = np.array([0.0, 10.0]), np.array([1.0, 35.0])
        genes = chaos_genes(5, lo, hi, 4.0, np.random.default_rng(3))
        seeds = [chaos_seed(r) for r in [np.random.default_rng(3)] for _ in range(2)]
        expected = lo + logistic_trajectory(np.array(seeds), 4.0, 5) * (hi - lo)
        np.testing.assert_allclose(genes, expected)

    def test_init_produces_valid_plans(self, roads, dm, params):
        bounds = GeneBounds.for_problem(roads, dm, params)
        plans = chaos_init(AlgoConfig(pop_size=20), bounds)
        assert len(plans) == 20
        n_min, n_max = bounds.n_range
        for plan in plans:
            assert plan.check_invariants(params) == []
            assert n_min <= plan.n_stations <= n_max


class TestSorting:
    def test_example(self):
        fronts = fast_nondominated_sort([(1, 2), (2, 1), (2, 2)])
        assert [f.tolist() for f in fronts] == [[0, 1], [2]]

    def test_identical_points(self):
        fronts = fast_nondominated_sort([(3, 3)] * 4)
        assert [f.tolist() for f in fronts] == [[0, 1, 2, 3]]

    def test_feasible_beats_infeasible(self):
        fronts = fast_nondominated_sort([(100, 100), (0, 0)], [0.0, 0.3])
        assert [f.tolist() for f in fronts] == [[0], [1]]

    def test_less_violation_wins(self):
        fronts = fast_nondominated_sort([(0, 0), (9, 9), (5, 5)], [0.5, 0.1, 0.1])
        assert [f.tolist() for f in fronts] == [[1, 2], [0]]

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 30), st.integers(0, 2**32 - 1))
    def test_matches_brute_force(self, n, seed):
        rng = np.random.default_rng(seed)
        F = rng.integers(0, 6, size=(n, 2)).astype(float)
        V = np.where(rng.random(n) < 0.3, rng.integers(1, 4, n) / 4, 0.0)
        got = [sorted(f.tolist()) for f in fast_nondominated_sort(F, V)]
        assert got == brute_force_fronts(F, V)

    def test_empty(self):
        with pytest.raises(ValueError):
            fast_nondominated_sort(np.zeros((0, 2)))


class TestCrowding:
    def test_pair(self):
        assert np.all(np.isinf(crowding_distance([(0, 1), (1, 0)])))

    def test_example(self):
        d = crowding_distance([(0, 4), (1, 2), (2, 0)])
        assert d[1] == pytest.approx(2.0)
        assert np.isinf(d[0]) and np.isinf(d[2])

    def test_identical(self):
        d = crowding_distance([(1, 1)] * 4)
        assert np.isinf(d).sum() >= 1
        assert np.all(d[~np.isinf(d)] == 0)

    def test_nonnegative(self, rng):
        d = crowding_distance(rng.random((30, 2)))
        assert np.all(d >= 0)


class TestTournament:
    def test_lower_rank_wins(self):
        assert binary_tournament([1, 2], [0.0, 9.0], ScriptedRng(integers=[1, 0])) == 0

    def test_crowding_breaks_rank_ties(self):
        assert binary_tournament([1, 1], [1.2, np.inf], ScriptedRng(integers=[0, 1])) == 1

    def test_first_drawn_wins_full_tie(self):
        assert binary_tournament([1, 1], [1.0, 1.0], ScriptedRng(integers=[1, 0])) == 1
        assert binary_tournament([1, 1], [1.0, 1.0], ScriptedRng(integers=[0, 1])) == 0


class TestCrossover:
    a = np.array([0.0, 10.0, 35.0])
    b = np.array([1.0, 20.0, 15.0])

    def test_m_one(self):
        ca, cb = arithmetic_crossover(self.a, self.b, ScriptedRng([0.0, 1.0]), 0.9)
        np.testing.assert_array_equal(ca, self.a)
        np.testing.assert_array_equal(cb, self.b)

    def test_midpoint(self):
        ca, cb = arithmetic_crossover(self.a, self.b, ScriptedRng([0.0, 0.5]), 0.9)
        np.testing.assert_allclose(ca, (self.a + self.b) / 2)
        np.testing.assert_allclose(cb, (self.a + self.b) / 2)

    def test_skipped(self):
        ca, cb = arithmetic_crossover(self.a, self.b, ScriptedRng([0.95]), 0.9)
        np.testing.assert_array_equal(ca, self.a)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            arithmetic_crossover(self.a, self.b[:2], rng, 1.0)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12), st.integers(0, 2**32 - 1))
    def test_conserves_gene_sums(self, genes, seed):
        rng = np.random.default_rng(seed)
        a = np.array(genes)
        b = rng.permutation(a) + 1.0
        ca, cb = arithmetic_crossover(a, b, rng, 1.0)
        np.testing.assert_allclose(ca + cb, a + b, rtol=1e-12, atol=1e-9)


class TestMutation:
    lower = np.array([0.0, 0.0, 10.0, 10.0])
    upper = np.array([1.0, 1.0, 35.0, 35.0])
    binary = np.array([True, True, False, False])

    def test_zero_probability(self, rng):
        g = np.array([1.0, 0.2, 12.0, 30.0])
        for _ in range(100):
            np.testing.assert_array_equal(mutate(g, rng, 0.0, self.lower, self.upper, self.binary, ~self.binary), g)

    def test_open_gene_flip_closes_station(self):
        g = np.array([1.0, 0.0, 20.0, 30.0, 0.0, 0.0])
        out = mutate(g[:4], ScriptedRng([0.0], integers=[0]), 1.0, self.lower, self.upper,
                     self.binary, ~self.binary)
        assert out[0] == 0.0
        bounds = GeneBounds(D=2, nf_range=(10, 35), ns_range=(10, 35), n_range=(0, 2),
                            demand=np.ones(2))
        plan = repair(np.r_[out[:2], out[2], 20.0, out[3], 20.0], None, bounds)
        assert plan.open.tolist() == [0, 0] and plan.nf.tolist() == [0, 0]
        assert mutate(np.array([0.3, 0, 10, 10]), ScriptedRng([0.0], integers=[0]), 1.0,
                      self.lower, self.upper, self.binary, ~self.binary)[0] == 1.0

    def test_pile_redraw_is_uniform(self):
        rng = np.random.default_rng(7)
        lower, upper = np.array([10.0]), np.array([35.0])
        draws = [mutate([20.0], rng, 1.0, lower, upper, np.array([False]), np.array([True]))[0]
                 for _ in range(10_000)]
        counts = np.bincount(np.asarray(draws, dtype=int) - 10, minlength=26)
        assert counts.size == 26
        assert chisquare(counts).pvalue > 0.01


def entry(f, v=0.0):
    return ArchiveEntry(solution=None, objectives=tuple(f), violation=v)


class TestArchive:
    def test_insert_keeps_front(self):
        arch = ParetoArchive()
        assert arch.insert(entry((2, 2)))
        assert arch.insert(entry((1, 3)))
        assert not arch.insert(entry((3, 3)))
        assert not arch.insert(entry((2, 2)))
        assert arch.insert(entry((1, 1)))
        assert arch.objectives.tolist() == [[1, 1]]

    def test_infeasible_replaced(self):
        arch = ParetoArchive([entry((0, 0), 0.4), entry((5, 5), 0.2)])
        assert arch.objectives.tolist() == [[5, 5]]
        arch.insert(entry((9, 9)))
        assert arch.feasible and len(arch) == 1

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8), st.sampled_from([0.0, 0.0, 0.5, 1.0])),
                    min_size=1, max_size=40),
           st.integers(1, 10))
    @example([(0, 0, 0.5), (0, 0, 0.0)], 2)
    def test_batch_update_matches_sequential(self, points, chunk):
        seq = ParetoArchive()
        for f1, f2, v in points:
            seq.insert(entry((f1, f2), v))
        bat = ParetoArchive()
        for k in range(0, len(points), chunk):
            bat.update([entry((f1, f2), v) for f1, f2, v in points[k:k + chunk]])
        key = sorted((e.objectives, e.violation) for e in seq)
        assert sorted((e.objectives, e.violation) for e in bat) == key
        assert bat.is_mutually_nondominated()
        F = np.array([p[:2] for p in points], dtype=float)
        V = np.array([p[2] for p in points])
        first = brute_force_fronts(F, V)[0]
        assert key == sorted({(points[i][:2], points[i][2]) for i in first})

    def test_feasible_duplicate_replaces_infeasible(self):
        arch = ParetoArchive([entry((0, 0), 0.5)])
        assert arch.insert(entry((0, 0)))
        assert arch.feasible and len(arch) == 1
        bat = ParetoArchive()
        assert bat.update([entry((0, 0), 0.5), entry((0, 0))]) == 1
        assert bat.feasible and len(bat) == 1

    def test_sorted_by_first_objective(self):
        arch = ParetoArchive([entry((3, 1)), entry((1, 3)), entry((2, 2))])
        assert arch.sorted().objectives[:, 0].tolist() == [1, 2, 3]


def weakly_covered(old, new):
    """Every old point is weakly dominated by some new point."""
    return all(np.any(np.all(new <= p, axis=1)) for p in old)


class TestEvolve:
    def test_config_validation(self):
        for bad in ({"pop_size": 5}, {"pop_size": 2}, {"tau": 0.0}, {"tau": 4.5},
                    {"crossover_prob": 1.5}, {"generations": -1}):
            with pytest.raises(ValueError):
                AlgoConfig(**bad)

    def test_convex_front_and_elitism(self):
        problem = ConvexTestProblem()
        snapshots = []
        result = nsga2(problem, AlgoConfig(pop_size=40, generations=40, seed=5),
                       callback=lambda g, arch: snapshots.append(arch.objectives.copy()))
        assert len(snapshots) == 41
        for old, new in zip(snapshots, snapshots[1:]):
            assert weakly_covered(old, new)
        assert result.archive.is_mutually_nondominated()
        assert problem.front_distance(result.archive.objectives).max() <= 0.05

    def test_generations_zero_is_initial_front(self):
        problem = ConvexTestProblem()
        result = nsga2(problem, AlgoConfig(pop_size=20, generations=0, seed=1))
        F = np.array([e.objectives for e in result.population])
        first = fast_nondominated_sort(F)[0]
        assert sorted(map(tuple, F[first])) == sorted(map(tuple, result.archive.objectives))
        assert len(result.history) == 1

    def test_seed_determinism(self):
        problem = ConvexTestProblem()
        a = nsga2(problem, AlgoConfig(pop_size=20, generations=15, seed=9))
        b = nsga2(problem, AlgoConfig(pop_size=20, generations=15, seed=9))
        np.testing.assert_array_equal(a.archive.objectives, b.archive.objectives)
        c = nsga2(problem, AlgoConfig(pop_size=20, generations=15, seed=10))
        assert not np.array_equal(a.archive.objectives, c.archive.objectives)

    def test_parallel_evaluation_is_identical(self, roads, dm, params):
        problem = ChargingProblem(roads, dm, params)
        cfg = AlgoConfig(pop_size=12, generations=3, seed=4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            serial = nsga2(problem, cfg, n_jobs=1)
            threaded = nsga2(problem, cfg, n_jobs=3)
        np.testing.assert_array_equal(serial.archive.objectives, threaded.archive.objectives)
        for e in serial.archive:
            assert isinstance(e.solution, Plan)
            assert e.solution.check_invariants(params) == []

    def test_infeasible_only_warns(self, roads, dm, params):
        problem = ChargingProblem(roads, dm, params.replace(p_max_kw=1.0))
        with pytest.warns(RuntimeWarning, match="least-violating"):
            result = nsga2(problem, AlgoConfig(pop_size=8, generations=1, seed=0))
        assert not result.archive.feasible
        assert len(set(e.violation for e in result.archive)) == 1
