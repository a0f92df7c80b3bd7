import itertools
import math

import numpy as np
import pytest

from conftest import brute_force_pmf
from pmdkit.anon_games import (
    AnonymousGame,
    MixedProfile,
    SolverCaps,
    batch_max_regret,
    brute_force_nash,
    build_compatibility,
    dp_assign,
    enumerate_statistics,
    eps_nash_certificate,
    exhaustive_assign,
    is_eps_nash,
    max_regret,
    partitions,
    ptas_search,
    ptas_solve,
    random_game,
    regret,
    statistic_of,
    view_distribution,
)
from pmdkit.cover import simplex_grid
from pmdkit.errors import DimensionMismatch, Exhausted, Infeasible, TooLarge, ValidationError
from pmdkit.pmd_core import LatticeDistribution, PmdParams, exact_pmf, tv_distance


def game_from(fn, n, k):
    """Utilities u[i, j, p] = fn(i, j, partition)."""
    parts = partitions(n - 1, k)
    return AnonymousGame(n, k, np.array([[[fn(i, j, x) for x in parts] for j in range(k)] for i in range(n)]))


def dominant_game(n, k=2):
    return game_from(lambda i, j, x: 1.0 if j == 0 else 0.0, n, k)


def pennies():
    # player 0 wants to match the other, player 1 wants to differ; x[0] = 1 means the other played 0
    return game_from(lambda i, j, x: float((x[j] == 1) == (i == 0)), 2, 2)


def random_profile(rng, n, k):
    return MixedProfile(rng.dirichlet(np.ones(k), size=n))


# --------------------------------------------------------- representation


def test_partitions():
    assert partitions(2, 2) == [(0, 2), (1, 1), (2, 0)]
    assert len(partitions(4, 3)) == math.comb(6, 2)


def test_game_json_round_trip(rng):
    g = random_game(3, 3, 7)
    data = g.to_json()
    assert set(data["utilities"]) == {"0", "1", "2"}
    assert "0,1,1" in data["utilities"]["0"]["2"]
    back = AnonymousGame.from_json(data)
    assert np.array_equal(back.utilities, g.utilities)


def test_game_validation():
    with pytest.raises(DimensionMismatch):
        AnonymousGame(2, 2, np.zeros((2, 2, 5)))
    data = random_game(2, 2, 0).to_json()
    del data["utilities"]["1"]["0"]["1,0"]
    with pytest.raises(DimensionMismatch):
        AnonymousGame.from_json(data)


def test_profile_json():
    p = MixedProfile([[0.5, 0.5], [1.0, 0.0]])
    assert MixedProfile.from_json(p.to_json()).rho.tolist() == p.rho.tolist()


# ------------------------------------------------------------------ views


def test_view_two_players():
    rho = MixedProfile([[0.5, 0.5], [0.2, 0.8]])
    v = view_distribution(rho, 0)
    assert v.support == {(1, 0): pytest.approx(0.2), (0, 1): pytest.approx(0.8)}


def test_view_deterministic():
    rho = MixedProfile([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.3, 0.3, 0.4]])
    assert view_distribution(rho, 3).support == {(1, 1, 1): 1.0}


def test_view_matches_enumeration(rng):
    rho = random_profile(rng, 4, 2)
    for i in range(4):
        others = PmdParams(np.delete(rho.rho, i, axis=0))
        oracle = brute_force_pmf(others)
        v = view_distribution(rho, i)
        assert set(v.support) == set(oracle.support)
        assert all(abs(v.prob(z) - p) < 1e-12 for z, p in oracle.support.items())
        assert tv_distance(v, exact_pmf(others)) == 0


# ----------------------------------------------------------------- regret


def test_regret_constant_utilities(rng):
    g = game_from(lambda i, j, x: 0.4, 3, 2)
    assert max_regret(g, random_profile(rng, 3, 2)) == 0


def test_regret_pure_best_response():
    g = dominant_game(3)
    assert max_regret(g, MixedProfile([[1.0, 0.0]] * 3)) == 0


def test_regret_pennies():
    g = pennies()
    assert max_regret(g, MixedProfile([[0.5, 0.5]] * 2)) == pytest.approx(0)
    assert max_regret(g, MixedProfile([[1.0, 0.0]] * 2)) == pytest.approx(1)
    assert regret(g, MixedProfile([[1.0, 0.0]] * 2), 0) == 0


def test_is_eps_nash_cases(rng):
    g = dominant_game(3)
    assert is_eps_nash(g, brute_force_nash(g).profile, 1e-6)
    gap = game_from(lambda i, j, x: 0.8 if j == 0 else 0.5, 3, 2)
    assert not is_eps_nash(gap, MixedProfile([[0.5, 0.5]] * 3), 0.1)
    r = random_game(4, 3, 2)
    assert is_eps_nash(r, random_profile(rng, 4, 3), 1.0)


def test_batch_regret_matches_scalar(rng):
    g = random_game(4, 3, 5)
    batch = rng.dirichlet(np.ones(3), size=(20, 4))
    fast = batch_max_regret(g, batch)
    assert np.allclose(fast, [max_regret(g, MixedProfile(b)) for b in batch], atol=1e-12)


# ------------------------------------------------------------ certificate


def mix_view(view, other, t):
    keys = set(view.support) | set(other.support)
    return LatticeDistribution({z: (1 - t) * view.prob(z) + t * other.prob(z) for z in keys}, view.dimension)


def test_certificate_exact_views(rng):
    g = random_game(3, 2, 1)
    rho = random_profile(rng, 3, 2)
    views = [view_distribution(rho, i) for i in range(3)]
    eps2 = max_regret(g, rho)
    cert = eps_nash_certificate(g, rho, views, 0.0, eps2)
    assert cert.holds
    assert not eps_nash_certificate(g, rho, views, 0.0, eps2 - 0.01).best_response_ok


def test_certificate_violated_makes_no_claim(rng):
    g = random_game(3, 2, 1)
    rho = random_profile(rng, 3, 2)
    far = [LatticeDistribution({(2, 0): 1.0}, 2)] * 3
    cert = eps_nash_certificate(g, rho, far, 0.01, 1.0)
    assert not cert.tv_ok and cert.conclusion is None and not cert.holds


def test_certificate_bound_property(rng):
    checked = 0
    for trial in range(50):
        n, k = 3, 2
        g = random_game(n, k, 100 + trial)
        rho = random_profile(rng, n, k)
        t = rng.uniform(0, 0.1)
        views = []
        for i in range(n):
            other = LatticeDistribution({x: w for x, w in zip(partitions(n - 1, k), rng.dirichlet(np.ones(n)))}, k)
            views.append(mix_view(view_distribution(rho, i), other, t))
        eps1 = max(tv_distance(view_distribution(rho, i), views[i]) for i in range(n))
        eu = [g.utilities[i] @ np.array([views[i].prob(x) for x in g.partitions]) for i in range(n)]
        eps2 = max(float(np.max(e.max() - e[rho.rho[i] > 1e-12])) for i, e in enumerate(eu))
        cert = eps_nash_certificate(g, rho, views, eps1, eps2)
        assert cert.tv_ok and cert.best_response_ok and cert.conclusion
        checked += 1
    assert checked == 50


def test_certificate_perturbed_views(rng):
    g = dominant_game(3)
    rho = MixedProfile([[1.0, 0.0]] * 3)
    views = [mix_view(view_distribution(rho, i), LatticeDistribution({(0, 2): 1.0}, 2), 0.05) for i in range(3)]
    cert = eps_nash_certificate(g, rho, views, 0.05, 0.0)
    assert cert.holds


# ------------------------------------------------------------ brute force


def test_brute_force_dominant():
    res = brute_force_nash(dominant_game(3))
    assert res.regret == 0 and res.profile.rho.tolist() == [[1.0, 0.0]] * 3


def test_brute_force_anti_coordination():
    g = game_from(lambda i, j, x: float(x[j] == 0), 2, 2)
    res = brute_force_nash(g)
    assert res.regret <= 0.1 and is_eps_nash(g, res.profile, 0.1)


def test_brute_force_is_minimiser():
    g = random_game(3, 2, 4)
    res = brute_force_nash(g, 0.25)
    rows = simplex_grid(2, 4)
    every = np.array([rows[list(idx)] for idx in itertools.product(range(len(rows)), repeat=3)])
    assert res.regret == pytest.approx(batch_max_regret(g, every).min())
    assert res.searched == len(every)


def test_brute_force_limits():
    with pytest.raises(TooLarge):
        brute_force_nash(random_game(3, 2, 0), 0.05)
    with pytest.raises(TooLarge):
        brute_force_nash(random_game(6, 3, 0), 0.1)


# -------------------------------------------------------------- statistics


def test_statistics_no_sparse():
    stats = list(enumerate_statistics(3, 2, 0.5, SolverCaps(sparse_budget=0, gaussian_denominator=2)))
    assert stats and all(s.sparse_count == 0 for s in stats)


@pytest.mark.parametrize("order, expected", [(1, 50), (2, 56)])
def test_statistics_count(order, expected):
    caps = SolverCaps(sparse_denominator=2, gaussian_denominator=2, power_order=order)
    stats = list(enumerate_statistics(3, 2, 0.5, caps))
    assert len(stats) == expected
    assert len({s.vector() for s in stats}) == expected


def test_statistics_contain_profiles(rng):
    caps = SolverCaps(sparse_denominator=4, gaussian_denominator=4)
    stream = {s.vector() for s in enumerate_statistics(3, 2, 0.5, caps)}
    for _ in range(20):
        nums = [(a, 4 - a) for a in rng.integers(0, 5, size=3)]
        tags = [("sparse", "gaussian")[b] for b in rng.integers(0, 2, size=3)]
        assert statistic_of(nums, tags, 3, 2, 0.5, caps).vector() in stream


# -------------------------------------------------------- compatibility


SMALL = SolverCaps(sparse_denominator=2, gaussian_denominator=2, power_order=2)


def test_compatibility_constant_game():
    g = game_from(lambda i, j, x: 0.3, 3, 2)
    for stat in enumerate_statistics(3, 2, 0.2, SMALL):
        graph = build_compatibility(g, stat, 0.2, SMALL)
        assert all(graph.degree(i) == graph.annotations["views"] for i in range(3))


def test_compatibility_dominated_strategy():
    g = game_from(lambda i, j, x: 0.9 if j == 0 else 0.2, 3, 2)
    for stat in enumerate_statistics(3, 2, 0.2, SMALL):
        graph = build_compatibility(g, stat, 0.2, SMALL)
        assert all(e.numerators[1] == 0 for edges in graph.edges for e in edges)


def test_compatibility_deterministic():
    g = random_game(3, 2, 3)
    stat = next(iter(enumerate_statistics(3, 2, 0.3, SMALL)))
    assert build_compatibility(g, stat, 0.3, SMALL, 5) == build_compatibility(g, stat, 0.3, SMALL, 5)


# ------------------------------------------------------------------ DP


def test_dp_single_player():
    g = random_game(1, 2, 0)
    caps = SolverCaps(sparse_denominator=2, gaussian_denominator=2)
    for stat in enumerate_statistics(1, 2, 1.0, caps):
        graph = build_compatibility(g, stat, 1.0, caps)
        a = dp_assign(graph, stat)
        assert statistic_of([e.numerators for e in a.edges], a.tags, 1, 2, 1.0, caps).vector() == stat.vector()


def test_dp_unreachable():
    g = random_game(2, 2, 0)
    stats = list(enumerate_statistics(2, 2, 1.0, SMALL))
    graph = build_compatibility(g, stats[0], 1.0, SMALL)
    from pmdkit.anon_games import AggregateStatistic
    bogus = AggregateStatistic(stats[0].sparse, tuple(x + 1000 for x in stats[0].gaussian))
    with pytest.raises(Infeasible):
        dp_assign(graph, bogus)


def test_dp_matches_exhaustive():
    checked = 0
    for seed in range(3):
        g = random_game(4, 2, seed)
        for stat in enumerate_statistics(4, 2, 0.5, SMALL):
            graph = build_compatibility(g, stat, 0.5, SMALL)
            assert all(graph.degree(i) <= 6 for i in range(4))
            every = exhaustive_assign(graph, stat)
            if every:
                assert dp_assign(graph, stat) in every
                checked += 1
            else:
                with pytest.raises(Infeasible):
                    dp_assign(graph, stat)
    assert checked > 0


# ---------------------------------------------------------------- solver


def test_ptas_dominant():
    g = dominant_game(4)
    rho = ptas_solve(g, 0.05, SolverCaps(sparse_budget=0, gaussian_denominator=4))
    assert rho.rho.tolist() == [[1.0, 0.0]] * 4
    assert is_eps_nash(g, rho, 0.05)


@pytest.mark.parametrize("seed", [0, 1])
def test_ptas_random_game(seed):
    g = random_game(5, 2, seed)
    res = ptas_search(g, 0.15, seed=seed)
    assert is_eps_nash(g, res.profile, 0.15)
    assert res.regret <= brute_force_nash(g).regret + 0.15


def test_ptas_k3_small():
    g = random_game(3, 3, 1)
    res = ptas_search(g, 0.15, SolverCaps(sparse_denominator=10), seed=1)
    assert is_eps_nash(g, res.profile, 0.15)


def test_ptas_caps_exhausted():
    g = random_game(4, 2, 0)
    with pytest.raises(Exhausted):
        ptas_search(g, 0.15, SolverCaps(multiset_cap=1))
    with pytest.raises(Exhausted):
        ptas_search(g, 0.01, SolverCaps(sparse_denominator=1, gaussian_denominator=1, max_statistics=3))
    with pytest.raises(ValidationError):
        ptas_search(g, 0.0)
