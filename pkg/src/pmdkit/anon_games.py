"""Anonymous games: views, regret, epsilon-Nash checks, a brute-force oracle
and a statistic-guessing solver with a compatibility graph and a DP.

Players and strategies are 0-based.  A partition is a tuple of k counts
summing to n - 1, the strategy counts of everybody else.  Probabilities on
the solver lattices are stored as integer numerators so every statistic is
an exact integer vector.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .cover import simplex_grid
from .errors import (
    CapExceeded,
    DimensionMismatch,
    Exhausted,
    Infeasible,
    NoMomentWitness,
    TooLarge,
    ValidationError,
)
from .gaussian import GaussianParams, discretized_normal_1d, sample_discretized
from .pmd_core import LatticeDistribution, PmdParams, exact_pmf, tv_distance, validate_params

SUPPORT_TOL = 1e-12
REGRET_TOL = 1e-12
DEFAULT_PROFILE_CAP = 2_000_000
DEFAULT_STATE_CAP = 200_000
DEFAULT_MULTISET_CAP = 2_000_000
GAUSS_MC_BUDGET = 20_000


# ---------------------------------------------------------------- types


def partitions(total: int, k: int) -> list[tuple[int, ...]]:
    """All k-tuples of nonnegative integers summing to total, lexicographic."""
    return [c + (total - sum(c),) for c in itertools.product(range(total + 1), repeat=k - 1) if sum(c) <= total]


def partition_key(x: Sequence[int]) -> str:
    return ",".join(str(int(v)) for v in x)


@dataclass(frozen=True)
class AnonymousGame:
    """utilities[i, j, p] is player i's payoff for strategy j against partition p."""

    n: int
    k: int
    utilities: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.utilities, dtype=float)
        if self.n < 1 or self.k < 2:
            raise DimensionMismatch("need n >= 1 and k >= 2")
        if u.shape != (self.n, self.k, len(partitions(self.n - 1, self.k))):
            raise DimensionMismatch(f"utilities must have shape (n, k, #partitions), got {u.shape}")
        if u.size and (u.min() < 0 or u.max() > 1):
            raise ValidationError("utilities must lie in [0, 1]")
        u.setflags(write=False)
        object.__setattr__(self, "utilities", u)

    @property
    def partitions(self) -> list[tuple[int, ...]]:
        return partitions(self.n - 1, self.k)

    def utility(self, i: int, j: int, x: Sequence[int]) -> float:
        return float(self.utilities[i, j, self.partitions.index(tuple(int(v) for v in x))])

    def to_json(self) -> dict:
        parts = self.partitions
        return {"n": self.n, "k": self.k, "utilities": {
            str(i): {str(j): {partition_key(x): float(self.utilities[i, j, p]) for p, x in enumerate(parts)}
                     for j in range(self.k)} for i in range(self.n)}}

    @classmethod
    def from_json(cls, data) -> "AnonymousGame":
        try:
            n, k = int(data["n"]), int(data["k"])
            parts = partitions(n - 1, k)
            u = np.empty((n, k, len(parts)))
            for i in range(n):
                for j in range(k):
                    table = data["utilities"][str(i)][str(j)]
                    for p, x in enumerate(parts):
                        u[i, j, p] = float(table[partition_key(x)])
        except KeyError as exc:
            raise DimensionMismatch(f"missing utility entry {exc}") from exc
        return cls(n, k, u)


def random_game(n: int, k: int, seed: int) -> AnonymousGame:
    rng = np.random.default_rng(seed)
    return AnonymousGame(n, k, rng.uniform(size=(n, k, len(partitions(n - 1, k)))))


@dataclass(frozen=True)
class MixedProfile:
    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", validate_params(self.rho).matrix)

    @property
    def n(self) -> int:
        return self.rho.shape[0]

    @property
    def k(self) -> int:
        return self.rho.shape[1]

    def to_json(self) -> dict:
        return {"rho": self.rho.tolist()}

    @classmethod
    def from_json(cls, data) -> "MixedProfile":
        return cls(np.asarray(data["rho"], dtype=float))


# ------------------------------------------------------ views and regret


def view_distribution(rho: MixedProfile, i: int) -> LatticeDistribution:
    others = np.delete(rho.rho, i, axis=0)
    if len(others) == 0:
        return LatticeDistribution({(0,) * rho.k: 1.0}, rho.k)
    return exact_pmf(PmdParams(others))


def expected_utilities(game: AnonymousGame, i: int, view: LatticeDistribution) -> np.ndarray:
    index = {x: p for p, x in enumerate(game.partitions)}
    w = np.zeros(len(index))
    for x, p in view.support.items():
        if x not in index:
            raise DimensionMismatch(f"view point {x} is not a partition of {game.n - 1}")
        w[index[x]] += p
    return game.utilities[i] @ w


def _regret_from(eu: np.ndarray, row: np.ndarray) -> float:
    support = row > SUPPORT_TOL
    return float(np.max(eu.max() - eu[support]))


def regret(game: AnonymousGame, rho: MixedProfile, i: int) -> float:
    """Worst shortfall of a supported strategy against the best response."""
    return _regret_from(expected_utilities(game, i, view_distribution(rho, i)), rho.rho[i])


def max_regret(game: AnonymousGame, rho: MixedProfile) -> float:
    _check_dims(game, rho)
    return max(regret(game, rho, i) for i in range(game.n))


def is_eps_nash(game: AnonymousGame, rho: MixedProfile, eps: float) -> bool:
    return max_regret(game, rho) <= eps + REGRET_TOL


def _check_dims(game: AnonymousGame, rho: MixedProfile) -> None:
    if rho.rho.shape != (game.n, game.k):
        raise DimensionMismatch("profile shape does not match the game")


@dataclass(frozen=True)
class NashCertificate:
    tv_ok: bool
    best_response_ok: bool
    conclusion: bool | None

    @property
    def holds(self) -> bool:
        return self.tv_ok and self.best_response_ok and bool(self.conclusion)


def eps_nash_certificate(game: AnonymousGame, rho: MixedProfile, views: Sequence[LatticeDistribution],
                         eps1: float, eps2: float) -> NashCertificate:
    """Check closeness of each view and eps2-best responses against it.

    When both hold, the profile must be a (2 eps1 + eps2)-Nash equilibrium;
    the conclusion is evaluated against the true views.
    """
    _check_dims(game, rho)
    tv_ok = all(tv_distance(view_distribution(rho, i), views[i]) <= eps1 + REGRET_TOL for i in range(game.n))
    br_ok = all(_regret_from(expected_utilities(game, i, views[i]), rho.rho[i]) <= eps2 + REGRET_TOL
                for i in range(game.n))
    conclusion = is_eps_nash(game, rho, 2 * eps1 + eps2) if tv_ok and br_ok else None
    return NashCertificate(tv_ok, br_ok, conclusion)


# --------------------------------------------------------- brute force


def _dense_views(batch: np.ndarray, i: int, n: int, k: int) -> np.ndarray:
    """Views of player i for a (B, n, k) batch, dense over the first k-1 counts."""
    B = batch.shape[0]
    shape = (B,) + (n,) * (k - 1)
    dist = np.zeros(shape)
    dist[(slice(None),) + (0,) * (k - 1)] = 1.0
    for r in range(n):
        if r == i:
            continue
        p = batch[:, r, :]
        new = dist * p[:, -1].reshape((B,) + (1,) * (k - 1))
        for j in range(k - 1):
            shifted = np.zeros_like(dist)
            src = [slice(None)] * (k)
            dst = [slice(None)] * (k)
            src[j + 1] = slice(0, n - 1)
            dst[j + 1] = slice(1, n)
            shifted[tuple(dst)] = dist[tuple(src)]
            new += shifted * p[:, j].reshape((B,) + (1,) * (k - 1))
        dist = new
    return dist.reshape(B, -1)


def _partition_flat_index(n: int, k: int) -> np.ndarray:
    return np.array([np.ravel_multi_index(x[:-1], (n,) * (k - 1)) if k > 1 else 0
                     for x in partitions(n - 1, k)], dtype=int)


def batch_max_regret(game: AnonymousGame, batch: np.ndarray) -> np.ndarray:
    """Max regret for every profile in a (B, n, k) array."""
    n, k = game.n, game.k
    flat = _partition_flat_index(n, k)
    out = np.zeros(batch.shape[0])
    for i in range(n):
        view = _dense_views(batch, i, n, k)[:, flat]
        eu = view @ game.utilities[i].T
        short = eu.max(axis=1, keepdims=True) - eu
        short = np.where(batch[:, i, :] > SUPPORT_TOL, short, -np.inf)
        out = np.maximum(out, short.max(axis=1))
    return out


@dataclass(frozen=True)
class BruteForceResult:
    profile: MixedProfile
    regret: float
    searched: int


def brute_force_nash(game: AnonymousGame, grid_step: float = 0.1, cap: int = DEFAULT_PROFILE_CAP,
                     batch_size: int = 20_000) -> BruteForceResult:
    """Profile minimising the max regret over the simplex grid; ties go to the first in order."""
    if grid_step < 0.1 - 1e-12:
        raise TooLarge("grid step must be at least 0.1")
    m = int(round(1 / grid_step))
    rows = simplex_grid(game.k, m)
    total = len(rows) ** game.n
    if total > cap:
        raise TooLarge(f"{total} grid profiles exceed the cap {cap}")
    best, best_idx = math.inf, 0
    radix = np.array([len(rows) ** (game.n - 1 - r) for r in range(game.n)])
    for start in range(0, total, batch_size):
        ids = np.arange(start, min(total, start + batch_size))
        digits = (ids[:, None] // radix) % len(rows)
        scores = batch_max_regret(game, rows[digits])
        j = int(np.argmin(scores))
        if scores[j] < best - 1e-15:
            best, best_idx = float(scores[j]), int(ids[j])
    digits = (best_idx // radix) % len(rows)
    return BruteForceResult(MixedProfile(rows[digits]), best, total)


# ----------------------------------------------------------- statistics


@dataclass(frozen=True)
class SolverCaps:
    sparse_denominator: int | None = None
    gaussian_denominator: int | None = None
    sparse_budget: int | None = None
    power_order: int | None = None
    multiset_cap: int = DEFAULT_MULTISET_CAP
    state_cap: int = DEFAULT_STATE_CAP
    max_statistics: int | None = None


@dataclass(frozen=True)
class Lattices:
    n: int
    k: int
    sparse_q: int
    gauss_q: int
    budget: int
    orders: tuple[tuple[int, ...], ...]


def resolve_lattices(n: int, k: int, eps: float, caps: SolverCaps) -> Lattices:
    """Desk defaults: sparse step 1/ceil(k/eps), Gaussian step 1/ceil(nk/eps), all players sparse."""
    if not eps > 0:
        raise ValidationError("eps must be positive")
    sq = caps.sparse_denominator or math.ceil(k / eps)
    gq = caps.gaussian_denominator or math.ceil(n * k / eps)
    budget = n if caps.sparse_budget is None else min(caps.sparse_budget, n)
    L = caps.power_order or max(1, math.ceil(math.log2(1 / eps)))
    orders = tuple(a for total in range(1, L + 1) for a in itertools.product(range(total + 1), repeat=k - 1)
                   if sum(a) == total)
    return Lattices(n, k, sq, gq, budget, orders)


def sparse_contribution(num: Sequence[int], lat: Lattices) -> np.ndarray:
    """[1, prod_j num_j^alpha_j for each order alpha] over the free coordinates."""
    free = np.asarray(num[:-1], dtype=object)
    vals = [1] + [int(np.prod([int(f) ** int(a) for f, a in zip(free, alpha)], dtype=object)) for alpha in lat.orders]
    return np.array(vals, dtype=np.int64)


def gaussian_contribution(num: Sequence[int], lat: Lattices) -> np.ndarray:
    """[1, scaled mean, scaled covariance upper triangle] over the free coordinates."""
    q = lat.gauss_q
    free = [int(x) for x in num[:-1]]
    d = len(free)
    cov = [(q * free[a] if a == b else 0) - free[a] * free[b] for a in range(d) for b in range(a, d)]
    return np.array([1] + free + cov, dtype=np.int64)


def _lattice_rows(k: int, q: int) -> np.ndarray:
    return np.rint(simplex_grid(k, q) * q).astype(np.int64)


@dataclass(frozen=True)
class AggregateStatistic:
    sparse: tuple[int, ...]
    gaussian: tuple[int, ...]
    sparse_witness: tuple[int, ...] = field(compare=False, default=())

    @property
    def sparse_count(self) -> int:
        return self.sparse[0]

    @property
    def gaussian_count(self) -> int:
        return self.gaussian[0]

    def vector(self) -> tuple[int, ...]:
        return self.sparse + self.gaussian

    def gaussian_moments(self, lat: Lattices) -> tuple[np.ndarray, np.ndarray]:
        return _moments_from(np.array(self.gaussian), lat)

    def to_json(self) -> dict:
        return {"sparse": list(self.sparse), "gaussian": list(self.gaussian)}


def _moments_from(vec: np.ndarray, lat: Lattices) -> tuple[np.ndarray, np.ndarray]:
    d = lat.k - 1
    q = lat.gauss_q
    mean = vec[1:1 + d] / q
    cov = np.zeros((d, d))
    iu = np.triu_indices(d)
    cov[iu] = vec[1 + d:] / q ** 2
    cov = cov + np.triu(cov, 1).T
    return mean, cov


class _MultisetTable:
    """Exact statistic vectors of every multiset of a given size of lattice rows."""

    def __init__(self, rows: np.ndarray, contrib: np.ndarray, cap: int):
        self.rows, self.contrib, self.cap = rows, contrib, cap
        self._cache: dict[int, dict[tuple, tuple[int, ...]]] = {}

    def table(self, size: int) -> dict[tuple, tuple[int, ...]]:
        if size not in self._cache:
            count = math.comb(len(self.rows) + size - 1, size)
            if count > self.cap:
                raise CapExceeded(f"{count} multisets of size {size} exceed the cap {self.cap}")
            if size == 0:
                combos = np.zeros((1, 0), dtype=int)
            else:
                combos = np.array(list(itertools.combinations_with_replacement(range(len(self.rows)), size)))
            sums = self.contrib[combos].sum(axis=1) if size else np.zeros((1, self.contrib.shape[1]), np.int64)
            sums[:, 0] = size
            out: dict[tuple, tuple[int, ...]] = {}
            for key, combo in zip(map(tuple, sums.tolist()), combos.tolist()):
                out.setdefault(key, tuple(combo))
            self._cache[size] = out
        return self._cache[size]


class _Context:
    def __init__(self, game_n: int, k: int, eps: float, caps: SolverCaps):
        self.lat = resolve_lattices(game_n, k, eps, caps)
        self.caps = caps
        self.s_rows = _lattice_rows(k, self.lat.sparse_q)
        self.g_rows = _lattice_rows(k, self.lat.gauss_q)
        s_con = np.array([sparse_contribution(r, self.lat) for r in self.s_rows])
        g_con = np.array([gaussian_contribution(r, self.lat) for r in self.g_rows])
        self.sparse = _MultisetTable(self.s_rows, s_con, caps.multiset_cap)
        self.gauss = _MultisetTable(self.g_rows, g_con, caps.multiset_cap)
        self.s_con, self.g_con = s_con, g_con


def enumerate_statistics(n: int, k: int, eps: float, caps: SolverCaps = SolverCaps()) -> Iterator[AggregateStatistic]:
    """Distinct (power sums, Gaussian moments) pairs realisable on the lattices.

    The sparse size runs from the budget down to 0; within a size the order
    follows the first multiset (lexicographic) realising each vector.
    """
    yield from _statistics(_Context(n, k, eps, caps))


def _statistics(ctx: _Context) -> Iterator[AggregateStatistic]:
    lat = ctx.lat
    emitted = 0
    for s in range(lat.budget, -1, -1):
        sparse = ctx.sparse.table(s)
        gauss = ctx.gauss.table(lat.n - s)
        for skey, witness in sparse.items():
            for gkey in gauss:
                if ctx.caps.max_statistics is not None and emitted >= ctx.caps.max_statistics:
                    raise CapExceeded(f"more than {ctx.caps.max_statistics} statistics")
                emitted += 1
                yield AggregateStatistic(skey, gkey, witness)


def statistic_of(profile_nums: Sequence[Sequence[int]], tags: Sequence[str], n: int, k: int, eps: float,
                 caps: SolverCaps = SolverCaps()) -> AggregateStatistic:
    """Statistic of an assignment given as lattice numerators and 'sparse'/'gaussian' tags."""
    lat = resolve_lattices(n, k, eps, caps)
    s = np.zeros(1 + len(lat.orders), dtype=np.int64)
    g = np.zeros(k + (k - 1) * k // 2, dtype=np.int64)
    for num, tag in zip(profile_nums, tags):
        if tag == "sparse":
            s += sparse_contribution(num, lat)
        else:
            g += gaussian_contribution(num, lat)
    return AggregateStatistic(tuple(s.tolist()), tuple(g.tolist()))


# -------------------------------------------------- compatibility graph


@dataclass(frozen=True)
class Edge:
    tag: str
    numerators: tuple[int, ...]
    denominator: int
    contribution: tuple[int, ...]

    @property
    def probs(self) -> np.ndarray:
        return np.array(self.numerators, dtype=float) / self.denominator


@dataclass(frozen=True)
class CompatibilityGraph:
    edges: tuple[tuple[Edge, ...], ...]
    annotations: dict

    def degree(self, i: int) -> int:
        return len(self.edges[i])


def _view_from_parts(sparse_rows: np.ndarray, g_count: int, g_mean: np.ndarray, g_cov: np.ndarray,
                     n: int, k: int, seed: int) -> np.ndarray | None:
    """Dense view over the first k-1 counts (axes of length n), renormalised to valid partitions.

    None when no mass lands on a valid partition.
    """
    d = k - 1
    shape = (n,) * d
    dist = np.zeros(shape)
    dist[(0,) * d] = 1.0
    for p in sparse_rows:
        new = dist * p[-1]
        for j in range(d):
            shifted = np.zeros_like(dist)
            src = [slice(None)] * d
            dst = [slice(None)] * d
            src[j], dst[j] = slice(0, n - 1), slice(1, n)
            shifted[tuple(dst)] = dist[tuple(src)]
            new += shifted * p[j]
        dist = new
    if g_count > 0:
        gauss = _gaussian_box(g_mean, g_cov, n, seed)
        full = np.zeros(tuple(2 * n - 1 for _ in range(d)))
        for idx in np.argwhere(dist > 0):
            sl = tuple(slice(i, i + n) for i in idx)
            full[sl] += dist[tuple(idx)] * gauss
        dist = full[tuple(slice(0, n) for _ in range(d))]
    valid = np.zeros(shape, dtype=bool)
    for x in partitions(n - 1, k):
        valid[x[:-1]] = True
    dist = np.where(valid, dist, 0.0)
    total = dist.sum()
    return dist.reshape(-1) / total if total > 1e-12 else None


def _gaussian_box(mean: np.ndarray, cov: np.ndarray, n: int, seed: int) -> np.ndarray:
    d = len(mean)
    cov = (cov + cov.T) / 2
    w, U = np.linalg.eigh(cov) if d else (np.zeros(0), np.zeros((0, 0)))
    cov = (U * np.clip(w, 0.0, None)) @ U.T
    if not np.any(cov - np.diag(np.diag(cov))):
        box = discretized_normal_1d(mean[0], cov[0, 0], 0, n - 1)
        for j in range(1, d):
            box = np.multiply.outer(box, discretized_normal_1d(mean[j], cov[j, j], 0, n - 1))
        return box
    pts = sample_discretized(GaussianParams(mean, cov), GAUSS_MC_BUDGET, seed).points
    keep = np.all((pts >= 0) & (pts < n), axis=1)
    box = np.zeros((n,) * d)
    np.add.at(box, tuple(pts[keep].T), 1.0 / GAUSS_MC_BUDGET)
    return box


def _block_compatible(cov_total: np.ndarray, cov_y: np.ndarray) -> bool:
    """The candidate adds no variance or correlation where the target has none."""
    zero = np.abs(cov_total) <= 1e-12
    return not np.any(np.abs(cov_y[zero]) > 1e-12)


def _graph(game: AnonymousGame, stat: AggregateStatistic, eps: float, ctx: _Context, seed: int) -> CompatibilityGraph:
    lat = ctx.lat
    n, k = game.n, game.k
    flat_index = _partition_flat_index(n, k)
    s_vec = np.array(stat.sparse, dtype=np.int64)
    g_vec = np.array(stat.gaussian, dtype=np.int64)
    g_mean, g_cov = _moments_from(g_vec, lat)
    views: list[tuple[Edge, np.ndarray]] = []
    missing = 0

    if stat.sparse_count > 0:
        table = ctx.sparse.table(stat.sparse_count - 1)
        for r, row in enumerate(ctx.s_rows):
            rest = tuple((s_vec - ctx.s_con[r]).tolist())
            combo = table.get(rest)
            if combo is None:
                missing += 1
                continue
            rows = ctx.s_rows[list(combo)] / lat.sparse_q
            view = _view_from_parts(rows, stat.gaussian_count, g_mean, g_cov, n, k, seed)
            if view is None:
                continue
            views.append((Edge("sparse", tuple(row.tolist()), lat.sparse_q, tuple(ctx.s_con[r].tolist())), view))

    if stat.gaussian_count > 0:
        witness = ctx.s_rows[list(stat.sparse_witness)] / lat.sparse_q if stat.sparse_count else np.zeros((0, k))
        if stat.sparse_count and not stat.sparse_witness:
            combo = ctx.sparse.table(stat.sparse_count).get(stat.sparse)
            if combo is None:
                raise NoMomentWitness("no lattice PMD has the guessed power sums")
            witness = ctx.s_rows[list(combo)] / lat.sparse_q
        for r, row in enumerate(ctx.g_rows):
            rest = g_vec - ctx.g_con[r]
            mean, cov = _moments_from(rest, lat)
            _, cov_y = _moments_from(ctx.g_con[r], lat)
            if rest[0] < 0 or np.any(mean < -1e-12) or (len(cov) and np.linalg.eigvalsh(cov).min() < -1e-12):
                continue
            if not _block_compatible(g_cov, cov_y):
                continue
            view = _view_from_parts(witness, int(rest[0]), mean, cov, n, k, seed)
            if view is None:
                continue
            views.append((Edge("gaussian", tuple(row.tolist()), lat.gauss_q, tuple(ctx.g_con[r].tolist())), view))

    per_player = []
    for i in range(n):
        edges = []
        for edge, view in views:
            eu = game.utilities[i] @ view[flat_index]
            support = np.array(edge.numerators) > 0
            if np.all(eu[support] >= eu.max() - eps - REGRET_TOL):
                edges.append(edge)
        per_player.append(tuple(sorted(edges, key=lambda e: (e.tag != "sparse", e.numerators))))
    return CompatibilityGraph(tuple(per_player), {"views": len(views), "no_witness": missing})


def build_compatibility(game: AnonymousGame, stat: AggregateStatistic, eps: float,
                        caps: SolverCaps = SolverCaps(), seed: int = 0) -> CompatibilityGraph:
    """Edges (player, lattice CRV) whose support is eps-best against the surrogate view.

    A sparse-side player sees a lattice PMD matching the residual power sums
    plus the guessed Gaussian; a Gaussian-side player sees the guessed sparse
    PMD plus the Gaussian with the candidate's moments removed.
    """
    return _graph(game, stat, eps, _Context(game.n, game.k, eps, caps), seed)


# ------------------------------------------------------------------ DP


@dataclass(frozen=True)
class Assignment:
    edges: tuple[Edge, ...]

    def profile(self) -> MixedProfile:
        return MixedProfile(np.array([e.probs for e in self.edges]))

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(e.tag for e in self.edges)


def _edge_vector(edge: Edge, s_len: int, g_len: int) -> np.ndarray:
    vec = np.zeros(s_len + g_len, dtype=np.int64)
    if edge.tag == "sparse":
        vec[:s_len] = edge.contribution
    else:
        vec[s_len:] = edge.contribution
    return vec


def dp_assign(graph: CompatibilityGraph, stat: AggregateStatistic, state_cap: int = DEFAULT_STATE_CAP) -> Assignment:
    """Sweep players in order tracking reachable residual statistics."""
    s_len, g_len = len(stat.sparse), len(stat.gaussian)
    start = tuple(stat.vector())
    layers: list[dict[tuple, tuple[tuple, Edge]]] = []
    frontier = {start: None}
    for edges in graph.edges:
        vectors = [(e, _edge_vector(e, s_len, g_len)) for e in edges]
        nxt: dict[tuple, tuple[tuple, Edge]] = {}
        for state in frontier:
            arr = np.array(state, dtype=np.int64)
            for e, v in vectors:
                res = arr - v
                if res[0] < 0 or res[s_len] < 0:
                    continue
                key = tuple(res.tolist())
                if key not in nxt:
                    nxt[key] = (state, e)
        if not nxt:
            raise Infeasible("no compatible assignment reaches the statistic")
        if len(nxt) > state_cap:
            raise CapExceeded(f"{len(nxt)} DP states exceed the cap {state_cap}")
        layers.append(nxt)
        frontier = nxt
    zero = (0,) * (s_len + g_len)
    if zero not in frontier:
        raise Infeasible("no compatible assignment reaches the statistic")
    picked = []
    state = zero
    for layer in reversed(layers):
        prev, e = layer[state]
        picked.append(e)
        state = prev
    return Assignment(tuple(reversed(picked)))


def exhaustive_assign(graph: CompatibilityGraph, stat: AggregateStatistic) -> list[Assignment]:
    """Every assignment matching the statistic; test oracle for the DP."""
    s_len, g_len = len(stat.sparse), len(stat.gaussian)
    target = np.array(stat.vector(), dtype=np.int64)
    out = []
    for combo in itertools.product(*graph.edges):
        total = sum((_edge_vector(e, s_len, g_len) for e in combo), np.zeros_like(target))
        if np.array_equal(total, target):
            out.append(Assignment(tuple(combo)))
    return out


# -------------------------------------------------------------- solver


@dataclass(frozen=True)
class SolveResult:
    profile: MixedProfile
    regret: float
    statistic: AggregateStatistic
    tags: tuple[str, ...]
    statistics_tried: int


def ptas_search(game: AnonymousGame, eps: float, caps: SolverCaps = SolverCaps(), seed: int = 0) -> SolveResult:
    """Guess a statistic, build the compatibility graph, run the DP, and keep
    the first profile that passes the eps-Nash check."""
    ctx = _Context(game.n, game.k, eps, caps)
    tried = 0
    try:
        for stat in _statistics(ctx):
            tried += 1
            try:
                graph = _graph(game, stat, eps, ctx, seed)
                if min(graph.degree(i) for i in range(game.n)) == 0:
                    continue
                assignment = dp_assign(graph, stat, caps.state_cap)
            except (Infeasible, NoMomentWitness):
                continue
            profile = assignment.profile()
            r = max_regret(game, profile)
            if r <= eps + REGRET_TOL:
                return SolveResult(profile, r, stat, assignment.tags, tried)
    except CapExceeded as exc:
        raise Exhausted(f"search stopped after {tried} statistics: {exc}") from exc
    raise Exhausted(f"no verified profile among {tried} statistics")


def ptas_solve(game: AnonymousGame, eps: float, caps: SolverCaps = SolverCaps(), seed: int = 0) -> MixedProfile:
    return ptas_search(game, eps, caps, seed).profile
