import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_pmf, random_params
from pmdkit.errors import (
    BadC,
    BadPivot,
    DimensionMismatch,
    NegativeEntry,
    RowSumViolation,
    SupportTooLarge,
    ZeroDirection,
)
from pmdkit.pmd_core import (
    Distribution1D,
    LatticeDistribution,
    exact_pmf,
    gmd_from_pmd,
    gmd_pmf,
    kolmogorov_distance_1d,
    params_from_json,
    project_direction,
    round_params,
    round_params_report,
    sample_pmd,
    tv_distance,
    validate_params,
)


def test_validate_accepts_single_row():
    p = validate_params([[0.3, 0.7]])
    assert (p.n, p.k) == (1, 2)


def test_validate_rejects_short_row():
    with pytest.raises(RowSumViolation):
        validate_params([[0.3, 0.6]])


def test_validate_accepts_deterministic_row():
    assert validate_params([[0.5, 0.5], [1.0, 0.0]]).n == 2


def test_validate_rejects_negative():
    with pytest.raises(NegativeEntry):
        validate_params([[-0.1, 1.1]])


def test_params_json_checks_k():
    with pytest.raises(DimensionMismatch):
        params_from_json({"k": 3, "rows": [[0.5, 0.5]]})


def test_exact_pmf_single_crv():
    d = exact_pmf(validate_params([[0.3, 0.7]]))
    assert d.support == pytest.approx({(1, 0): 0.3, (0, 1): 0.7})


def test_exact_pmf_fair_binomial():
    d = exact_pmf(validate_params([[0.5, 0.5], [0.5, 0.5]]))
    assert d.support == pytest.approx({(2, 0): 0.25, (1, 1): 0.5, (0, 2): 0.25})


def test_exact_pmf_matches_enumeration(rng):
    for _ in range(5):
        p = random_params(rng, 3, 3)
        a, b = exact_pmf(p), brute_force_pmf(p)
        assert set(a.support) == set(b.support)
        assert max(abs(a.prob(z) - b.prob(z)) for z in b.support) < 1e-12


def test_exact_pmf_respects_cap():
    with pytest.raises(SupportTooLarge):
        exact_pmf(validate_params(np.full((50, 4), 0.25)), cap=1000)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(2, 4), st.integers(0, 2 ** 32 - 1))
def test_exact_pmf_total_mass(n, k, seed):
    p = random_params(np.random.default_rng(seed), n, k, alpha=0.5)
    d = exact_pmf(p)
    assert abs(d.probs().sum() - 1) < 1e-9
    assert np.all(d.points().sum(axis=1) == n)


def test_sample_deterministic_crv():
    s = sample_pmd(validate_params([[1.0, 0.0]]), 50, seed=3)
    assert np.all(s.points == [1, 0])


def test_sample_fair_frequency():
    s = sample_pmd(validate_params([[0.5, 0.5], [0.5, 0.5]]), 100_000, seed=7)
    freq = np.mean(np.all(s.points == [1, 1], axis=1))
    assert abs(freq - 0.5) < 0.01


def test_sample_same_seed_identical(rng):
    p = random_params(rng, 6, 3)
    assert np.array_equal(sample_pmd(p, 500, 11).points, sample_pmd(p, 500, 11).points)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 10), st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
def test_sample_points_on_simplex(n, k, seed):
    p = random_params(np.random.default_rng(seed), n, k)
    pts = sample_pmd(p, 200, seed).points
    assert np.all(pts >= 0) and np.all(pts.sum(axis=1) == n)


def test_tv_identity_disjoint_and_value():
    a = LatticeDistribution({(0,): 0.5, (1,): 0.5}, 1)
    b = LatticeDistribution({(0,): 0.3, (1,): 0.7}, 1)
    c = LatticeDistribution({(5,): 1.0}, 1)
    assert tv_distance(a, a) == 0
    assert tv_distance(a, c) == 1
    assert tv_distance(a, b) == pytest.approx(0.2)


def test_tv_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        tv_distance(LatticeDistribution({(0,): 1.0}, 1), LatticeDistribution({(0, 0): 1.0}, 2))


def _fair2():
    return exact_pmf(validate_params([[0.5, 0.5], [0.5, 0.5]]))


def test_project_coordinate():
    d = project_direction(_fair2(), [1, 0])
    assert d.values.tolist() == [0, 1, 2]
    assert d.probs.tolist() == pytest.approx([0.25, 0.5, 0.25])


def test_project_all_ones_is_point_mass(rng):
    p = random_params(rng, 5, 3)
    d = project_direction(exact_pmf(p), [1, 1, 1])
    assert d.values.tolist() == [5] and d.probs.tolist() == pytest.approx([1.0])


def test_project_difference():
    d = project_direction(_fair2(), [1, -1])
    assert d.values.tolist() == [-2, 0, 2]
    assert d.probs.tolist() == pytest.approx([0.25, 0.5, 0.25])


def test_project_zero_direction():
    with pytest.raises(ZeroDirection):
        project_direction(_fair2(), [0, 0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_project_preserves_mass(seed):
    rng = np.random.default_rng(seed)
    d = project_direction(exact_pmf(random_params(rng, 4, 3)), rng.normal(size=3))
    assert d.probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_kolmogorov_basic():
    a = Distribution1D(np.array([0.0]), np.array([1.0]))
    b = Distribution1D(np.array([1.0]), np.array([1.0]))
    assert kolmogorov_distance_1d(a, a) == 0
    assert kolmogorov_distance_1d(a, b) == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_kolmogorov_below_tv(seed):
    rng = np.random.default_rng(seed)
    pa, pb = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
    A = LatticeDistribution({(i,): float(x) for i, x in enumerate(pa)}, 1)
    B = LatticeDistribution({(i,): float(x) for i, x in enumerate(pb)}, 1)
    vals = np.arange(6.0)
    dk = kolmogorov_distance_1d(Distribution1D(vals, pa), Distribution1D(vals, pb))
    assert dk <= tv_distance(A, B) + 1e-12


def test_gmd_pivot_choices():
    p = validate_params([[0.3, 0.7]])
    assert gmd_from_pmd(p, 1).matrix.tolist() == [[0.3]]
    assert gmd_from_pmd(p, 0).matrix.tolist() == [[0.7]]
    with pytest.raises(BadPivot):
        gmd_from_pmd(p, 2)


def test_gmd_round_trip(rng):
    p = random_params(rng, 4, 3)
    for pivot in range(3):
        g = gmd_pmf(gmd_from_pmd(p, pivot))
        rebuilt = {}
        for z, q in g.support.items():
            full = list(z)
            full.insert(pivot, p.n - sum(z))
            rebuilt[tuple(full)] = q
        assert tv_distance(LatticeDistribution(rebuilt, 3), exact_pmf(p)) < 1e-12


def test_round_small_entry():
    assert round_params(validate_params([[0.05, 0.95]]), 0.1).matrix.tolist() == [[0.0, 1.0]]
    assert round_params(validate_params([[0.5, 0.5]]), 0.1).matrix.tolist() == [[0.5, 0.5]]


def test_round_bad_c():
    with pytest.raises(BadC):
        round_params(validate_params([[0.5, 0.5]]), 0.3)


def test_round_tv_within_bound(rng):
    p = validate_params(rng.dirichlet([0.3, 0.3, 0.3], size=4))
    rep = round_params_report(p, 0.05)
    assert rep["tv"] <= rep["bound"]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([0.05, 0.1, 0.2]))
def test_round_invariants(seed, c):
    rng = np.random.default_rng(seed)
    p = validate_params(rng.dirichlet([0.4, 0.4], size=5))
    out = round_params(p, min(c, 0.25)).matrix
    assert not np.any((out > 0) & (out < min(c, 0.25)))
    assert np.all(out[p.matrix == 0] == 0)
    assert np.allclose(out.sum(axis=1), 1)
