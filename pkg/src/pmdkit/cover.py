"""Non-proper cover enumeration and LP-based properization of Gaussian blocks.

The Gaussian side is covered by block structure, pivot, block size, a mean
lattice and a covariance grid refined by a local PSD cover.  Properization
turns a Gaussian block back into integral CRVs with a cutting-plane LP over
the convex hull of single-CRV moment profiles followed by a greedy
Shapley-Folkman peel.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import brentq, linprog

from .errors import (
    CapExceeded,
    DimensionMismatch,
    EigenMinBelowOne,
    Infeasible,
    LpTooLarge,
    NotLaplacian,
    NotPSD,
    PeelStuck,
    PremiseViolated,
    SolverIterationLimit,
)
from .gaussian import BlockStructure, GaussianParams, StructuredGaussian
from .pmd_core import GmdParams, PmdParams, validate_params

NEIGHBORHOOD = 0.25
DEFAULT_COVER_CAP = 2_000_000
DEFAULT_PROFILE_CAP = 20_000
MAX_CUTS = 200
ORACLE_TOL = 1e-6
LAPLACIAN_TOL = 1e-9


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class MomentProfilePoint:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float).reshape(len(mean), len(mean))
        if len(mean) and np.linalg.eigvalsh((cov + cov.T) / 2).min() < -1e-9:
            raise NotPSD("profile covariance is not PSD")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return len(self.mean)

    def flattened(self) -> np.ndarray:
        iu = np.triu_indices(self.dim)
        return np.concatenate([self.mean, self.cov[iu]])


@dataclass(frozen=True)
class PsdCover:
    center: np.ndarray
    elements: np.ndarray
    eps: float
    basis: np.ndarray = field(repr=False)
    eig_grid: tuple = field(repr=False)
    proj_steps: np.ndarray = field(repr=False)
    proj_radius: int = 0

    def __len__(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class CoverElement:
    gaussian: StructuredGaussian | None
    sparse: PmdParams | None
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        g = sum(self.gaussian.block_sums) if self.gaussian is not None else 0
        return g + (self.sparse.n if self.sparse is not None else 0)

    def to_json(self) -> dict:
        return {
            "gaussian": None if self.gaussian is None else self.gaussian.to_json(),
            "sparse": None if self.sparse is None else self.sparse.to_json(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, data) -> "CoverElement":
        g = data.get("gaussian")
        s = data.get("sparse")
        return cls(None if g is None else StructuredGaussian.from_json(g),
                   None if s is None else validate_params(s["rows"] if isinstance(s, dict) else s),
                   dict(data.get("provenance", {})))


@dataclass(frozen=True)
class ProfileSet:
    """Moment profiles of every CRV whose probabilities are multiples of 1/n.

    Probability vectors are stored with the pivot in the last column and are
    sorted lexicographically, which fixes tie-breaking everywhere.
    """

    probs: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def __len__(self) -> int:
        return len(self.probs)

    def flat(self) -> np.ndarray:
        iu = np.triu_indices(self.dim)
        return np.hstack([self.means, self.covs[:, iu[0], iu[1]]])

    def point(self, i: int) -> MomentProfilePoint:
        return MomentProfilePoint(self.means[i], self.covs[i])


@dataclass(frozen=True)
class LpSolution:
    weights: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    cuts: int


@dataclass(frozen=True)
class GaussianCoverConfig:
    """Grid granularities; None picks the formulas driven by (c, t)."""

    mean_step: float | None = None
    weight_step: float | None = None
    min_block_eig: float | None = None
    delta_c: float = 0.1
    delta_t: float = 0.1
    block_sizes: tuple[int, ...] | None = None
    structures: tuple[BlockStructure, ...] | None = None
    cap: int = DEFAULT_COVER_CAP


# ------------------------------------------------------- sparsification


def check_laplacian(L: np.ndarray) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise NotLaplacian("Laplacian must be square")
    scale = max(1.0, float(np.abs(L).max(initial=0.0)))
    off = L - np.diag(np.diag(L))
    if np.abs(L - L.T).max(initial=0.0) > LAPLACIAN_TOL * scale:
        raise NotLaplacian("Laplacian must be symmetric")
    if off.max(initial=0.0) > LAPLACIAN_TOL * scale:
        raise NotLaplacian("off-diagonal entries must be nonpositive")
    if np.abs(L.sum(axis=1)).max(initial=0.0) > LAPLACIAN_TOL * scale * len(L):
        raise NotLaplacian("rows must sum to zero")
    return L


def edge_budget(k: int, eps: float) -> int:
    return math.ceil((k - 1) / eps ** 2)


def laplacian_from_edges(k: int, edges: dict) -> np.ndarray:
    L = np.zeros((k, k))
    for (i, j), w in edges.items():
        L[i, j] -= w
        L[j, i] -= w
        L[i, i] += w
        L[j, j] += w
    return L


def spectral_sandwich(L: np.ndarray, H: np.ndarray) -> tuple[float, float]:
    """Extreme generalized eigenvalues of H relative to L on the range of L."""
    w, U = np.linalg.eigh(L)
    keep = w > 1e-10 * max(1.0, w.max(initial=0.0))
    if not keep.any():
        return 1.0, 1.0
    Wi = U[:, keep] / np.sqrt(w[keep])
    rel = np.linalg.eigvalsh(Wi.T @ H @ Wi)
    return float(rel.min()), float(rel.max())


def sparsify_laplacian(L, eps: float, seed: int = 0, attempts: int = 50) -> np.ndarray:
    """Sub-Laplacian H with (1-eps)^2 L <= H <= (1+eps)^2 L and at most the edge budget.

    Under budget the input is returned unchanged.  Otherwise edges are
    sampled by effective resistance and every candidate is checked exactly;
    if no candidate passes, the input is returned.
    """
    L = check_laplacian(L)
    k = len(L)
    budget = edge_budget(k, eps)
    iu = np.triu_indices(k, 1)
    weights = -L[iu]
    present = weights > 0
    if present.sum() <= budget:
        return L.copy()
    ei, ej, w = iu[0][present], iu[1][present], weights[present]
    Lp = np.linalg.pinv(L)
    resist = Lp[ei, ei] + Lp[ej, ej] - 2 * Lp[ei, ej]
    lev = np.clip(w * resist, 1e-15, None)
    prob = lev / lev.sum()
    lo, hi = (1 - eps) ** 2, (1 + eps) ** 2
    rng = np.random.default_rng(seed)
    draws = budget
    for _ in range(attempts):
        picks = rng.choice(len(w), size=draws, p=prob)
        counts = np.bincount(picks, minlength=len(w))
        if (counts > 0).sum() > budget:
            draws = max(1, int(draws * 0.9))
            continue
        edges = {(int(ei[e]), int(ej[e])): float(w[e] * counts[e] / (draws * prob[e]))
                 for e in np.flatnonzero(counts)}
        H = laplacian_from_edges(k, edges)
        a, b = spectral_sandwich(L, H)
        if a > 0:
            # a global rescale keeps H a Laplacian and centres the sandwich
            H = H * (2.0 / (a + b)) * ((lo + hi) / 2)
            a, b = spectral_sandwich(L, H)
            if lo <= a and b <= hi:
                return H
        draws = int(draws * 1.1) + 1
    return L.copy()


# ------------------------------------------------------------ PSD cover


def _eig_grid(mu: float, eps: float, eps1: float = NEIGHBORHOOD) -> np.ndarray:
    steps = math.ceil(math.log((1 + 2 * eps1) / (1 - 2 * eps1)) / math.log1p(eps))
    return (1 - 2 * eps1) * mu * (1 + eps) ** np.arange(steps + 1)


def psd_cover_layout(A, eps: float):
    A = np.asarray(A, dtype=float)
    if not 0 < eps < 1:
        raise PremiseViolated("eps must lie in (0, 1)")
    mu, U = np.linalg.eigh((A + A.T) / 2)
    if mu.min() < 1 - 1e-12:
        raise EigenMinBelowOne(f"minimum eigenvalue {mu.min()} is below 1")
    k = len(mu)
    eps_proj = math.sqrt(eps / k ** 3)
    radius = int(math.floor(1 / eps_proj))
    steps = eps_proj * np.minimum(2 * np.sqrt(mu[None, :] / np.maximum(mu[:, None], 1.0)), 1.0)
    grids = tuple(_eig_grid(m, eps) for m in mu)
    return mu, U, grids, steps, radius


def psd_cover_size(A, eps: float) -> int:
    mu, _, grids, _, radius = psd_cover_layout(A, eps)
    return math.prod(len(g) for g in grids) * (2 * radius + 1) ** (len(mu) ** 2)


def _assemble(U: np.ndarray, lams: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """U (sum_z lam_z v_z v_z^T) U^T for batches; vecs[..., z, :] is v_z."""
    local = np.einsum("...z,...zi,...zj->...ij", lams, vecs, vecs)
    return U @ local @ U.T


def iter_psd_cover(A, eps: float) -> Iterator[np.ndarray]:
    mu, U, grids, steps, radius = psd_cover_layout(A, eps)
    k = len(mu)
    ells = np.arange(-radius, radius + 1)
    for lam in itertools.product(*grids):
        lam = np.array(lam)
        for idx in itertools.product(ells, repeat=k * k):
            vecs = np.array(idx, dtype=float).reshape(k, k) * steps
            yield _assemble(U, lam, vecs)


def psd_cover(A, eps: float, cap: int = DEFAULT_COVER_CAP) -> PsdCover:
    """Multiplicative eigenvalue grid times signed additive eigenvector grid.

    Elements are ordered eigenvalue-major; within one eigenvalue tuple the
    k*k projection indices run in row-major mixed radix.
    """
    A = np.asarray(A, dtype=float)
    size = psd_cover_size(A, eps)
    if size > cap:
        raise CapExceeded(f"cover would have {size} elements (cap {cap})")
    mu, U, grids, steps, radius = psd_cover_layout(A, eps)
    k = len(mu)
    lams = np.array(list(itertools.product(*grids)))
    ells = np.arange(-radius, radius + 1, dtype=float)
    mesh = np.stack(np.meshgrid(*([ells] * (k * k)), indexing="ij"), axis=-1).reshape(-1, k, k)
    vecs = mesh * steps
    local = np.einsum("qz,pzi,pzj->qpij", lams, vecs, vecs).reshape(-1, k, k)
    elements = U @ local @ U.T
    return PsdCover(A, elements, eps, U, grids, steps, radius)


def spectral_ratio(B: np.ndarray, B_hat: np.ndarray) -> np.ndarray:
    """max_y |y^T (B_hat - B) y| / y^T B y for positive definite B (batched over B_hat)."""
    w, V = np.linalg.eigh(B)
    Wi = V / np.sqrt(w)
    rel = np.einsum("ai,...ab,bj->...ij", Wi, B_hat - B, Wi)
    return np.abs(np.linalg.eigvalsh(rel)).max(axis=-1)


def _nearest_index(grid: np.ndarray, x: float) -> list[int]:
    j = int(np.searchsorted(grid, x))
    return sorted({min(max(j - 1, 0), len(grid) - 1), min(j, len(grid) - 1)})


def covering_element(cover: PsdCover, B) -> tuple[int, float]:
    """Index and spectral ratio of the cover element closest to B.

    Grid neighbours of B's own eigen-decomposition are tried first; the full
    cover is scanned only if none of them is within eps.
    """
    B = np.asarray(B, dtype=float)
    k = len(B)
    local = cover.basis.T @ B @ cover.basis
    lam, V = np.linalg.eigh((local + local.T) / 2)
    vecs = V.T
    radius = cover.proj_radius
    lam_opts = [_nearest_index(g, x) for g, x in zip(cover.eig_grid, lam)]
    proj_opts = []
    for z in range(k):
        for i in range(k):
            r = vecs[z, i] / cover.proj_steps[z, i]
            proj_opts.append(sorted({int(np.clip(math.floor(r), -radius, radius)),
                                     int(np.clip(math.ceil(r), -radius, radius))}))
    lam_radix = [len(g) for g in cover.eig_grid]
    per_lam = (2 * radius + 1) ** (k * k)
    cand = []
    for li in itertools.product(*lam_opts):
        q = int(np.ravel_multi_index(li, lam_radix))
        for pi in itertools.product(*proj_opts):
            p = int(np.ravel_multi_index(tuple(x + radius for x in pi), [2 * radius + 1] * (k * k)))
            cand.append(q * per_lam + p)
    cand = np.array(sorted(set(cand)))
    ratios = spectral_ratio(B, cover.elements[cand])
    best = int(np.argmin(ratios))
    if ratios[best] <= cover.eps:
        return int(cand[best]), float(ratios[best])
    ratios = spectral_ratio(B, cover.elements)
    best = int(np.argmin(ratios))
    return best, float(ratios[best])


def directional_closeness_check(Sigma, Sigma_hat, eps: float) -> bool:
    """Checks the scaled eigenvector directions and their pairwise sums."""
    S = np.asarray(Sigma, dtype=float)
    D = np.asarray(Sigma_hat, dtype=float) - S
    lam, V = np.linalg.eigh((S + S.T) / 2)
    keep = lam > 1e-12 * max(1.0, lam.max(initial=0.0))
    U = V[:, keep] / np.sqrt(lam[keep])
    Q = U.T @ D @ U
    singles = np.abs(np.diag(Q))
    if np.any(singles > eps):
        return False
    pairs = np.diag(Q)[:, None] + np.diag(Q)[None, :] + 2 * Q
    return bool(np.all(np.abs(pairs) <= 4 * eps))


# --------------------------------------------------- cover enumeration


def structural_constants(eps: float, k: int, delta_c: float = 0.1, delta_t: float = 0.1) -> tuple[float, float]:
    c = (eps ** 2 / k ** 5) ** (1 + delta_c)
    t = (k ** 19 / (c * eps ** 6)) ** (1 + delta_t)
    return c, t


def _set_partitions(items: list[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def block_structures(k: int) -> list[BlockStructure]:
    out = []
    for part in _set_partitions(list(range(k))):
        blocks = tuple(sorted(tuple(sorted(b)) for b in part))
        for pivots in itertools.product(*blocks):
            out.append(BlockStructure(blocks, tuple(pivots)))
    return sorted(out, key=lambda s: (len(s.blocks), s.blocks, s.pivots))


def _resolved(cfg: GaussianCoverConfig, k: int, eps: float) -> tuple[float, float, float]:
    c, t = structural_constants(eps, k, cfg.delta_c, cfg.delta_t)
    mean_step = cfg.mean_step if cfg.mean_step is not None else k ** 5 / eps
    weight_step = cfg.weight_step if cfg.weight_step is not None else t * c / (100 * k ** 6)
    min_eig = cfg.min_block_eig if cfg.min_block_eig is not None else t * c / (2 * k ** 4)
    return mean_step, weight_step, min_eig


def _mean_axis(size: int, step: float) -> np.ndarray:
    return np.arange(0.0, size + 1e-9, step)


def _weight_axis(size: int, step: float) -> np.ndarray:
    return np.arange(0.0, 1.2 * size + 1e-9, step)


def _block_cov_candidates(m: int, size: int, weight_step: float, min_eig: float) -> Iterator[np.ndarray]:
    """Free-coordinate covariances (pivot dropped) of gridded Laplacians on m nodes."""
    if m == 1:
        yield np.zeros((0, 0))
        return
    axis = _weight_axis(size, weight_step)
    iu = np.triu_indices(m, 1)
    for ws in itertools.product(axis, repeat=len(iu[0])):
        L = laplacian_from_edges(m, {(int(a), int(b)): w for a, b, w in zip(iu[0], iu[1], ws)})
        free = L[:-1, :-1]
        if np.linalg.eigvalsh(free).min() >= max(min_eig, 1.0):
            yield free


def _block_options(block: tuple[int, ...], pivot: int, size: int, eps_block: float,
                   mean_step: float, weight_step: float, min_eig: float) -> Iterator[tuple]:
    order = [i for i in block if i != pivot] + [pivot]
    free = len(block) - 1
    for mean in itertools.product(_mean_axis(size, mean_step), repeat=free):
        if sum(mean) > size + 1e-9:
            continue
        for M2 in _block_cov_candidates(len(block), size, weight_step, min_eig):
            if free == 0:
                yield order, np.array(mean), M2
                continue
            for cov in iter_psd_cover(M2, eps_block):
                yield order, np.array(mean), cov


def _block_count(m: int, size: int, eps_block: float, mean_step: float, weight_step: float, min_eig: float) -> int:
    free = m - 1
    means = sum(1 for mean in itertools.product(_mean_axis(size, mean_step), repeat=free)
                if sum(mean) <= size + 1e-9)
    if free == 0:
        return means
    covs = sum(psd_cover_size(M2, eps_block)
               for M2 in _block_cov_candidates(m, size, weight_step, min_eig))
    return means * covs


def _size_tuples(n: int, blocks: int, sizes: tuple[int, ...] | None):
    axis = range(n + 1) if sizes is None else sizes
    return itertools.product(axis, repeat=blocks)


def gaussian_cover_count(n: int, k: int, eps: float, config: GaussianCoverConfig = GaussianCoverConfig()) -> int:
    mean_step, weight_step, min_eig = _resolved(config, k, eps)
    eps_block = eps / (2 * k ** 1.5)
    total = 0
    for st in config.structures or block_structures(k):
        for sizes in _size_tuples(n, len(st.blocks), config.block_sizes):
            term = 1
            for b, size in zip(st.blocks, sizes):
                term *= _block_count(len(b), size, eps_block, mean_step, weight_step, min_eig)
                if term == 0:
                    break
            total += term
            if total > config.cap:
                return total
    return total


def _assemble_structured(k: int, st: BlockStructure, sizes, picks) -> StructuredGaussian:
    mean = np.zeros(k)
    cov = np.zeros((k, k))
    for size, (order, m, c) in zip(sizes, picks):
        free, piv = order[:-1], order[-1]
        mean[free] = m
        mean[piv] = size - m.sum()
        if free:
            cov[np.ix_(free, free)] = c
            col = -c.sum(axis=1)
            cov[free, piv] = col
            cov[piv, free] = col
            cov[piv, piv] = c.sum()
    return StructuredGaussian(GaussianParams(mean, cov), st, tuple(int(s) for s in sizes))


def enumerate_gaussian_cover(n: int, k: int, eps: float,
                             config: GaussianCoverConfig = GaussianCoverConfig()) -> Iterator[StructuredGaussian]:
    """Lazily yields structured Gaussians; refuses streams longer than the cap."""
    total = gaussian_cover_count(n, k, eps, config)
    if total > config.cap:
        raise CapExceeded(f"gaussian cover has more than {config.cap} elements")
    return _gaussian_stream(n, k, eps, config)


def _gaussian_stream(n, k, eps, config):
    mean_step, weight_step, min_eig = _resolved(config, k, eps)
    eps_block = eps / (2 * k ** 1.5)
    for st in config.structures or block_structures(k):
        for sizes in _size_tuples(n, len(st.blocks), config.block_sizes):
            opts = [_block_options(b, p, s, eps_block, mean_step, weight_step, min_eig)
                    for b, p, s in zip(st.blocks, st.pivots, sizes)]
            for picks in itertools.product(*opts):
                yield _assemble_structured(k, st, sizes, picks)


def simplex_grid(k: int, m: int) -> np.ndarray:
    """All probability vectors of length k with entries in {0, 1/m, ..., 1}, lexicographic."""
    rows = [c for c in itertools.product(range(m + 1), repeat=k - 1) if sum(c) <= m]
    arr = np.array([list(c) + [m - sum(c)] for c in rows], dtype=float)
    return arr / m


def sparse_grid_denominator(size_budget: int, k: int, eps: float) -> int:
    # rounding each row to multiples of 1/m moves at most k/(2m) in TV
    return math.ceil(k * size_budget / (2 * eps))


def enumerate_sparse_cover(size_budget: int, k: int, eps: float, step: float | None = None,
                           cap: int = DEFAULT_COVER_CAP) -> Iterator[PmdParams]:
    m = sparse_grid_denominator(size_budget, k, eps) if step is None else int(round(1 / step))
    rows = simplex_grid(k, m)
    total = len(rows) ** size_budget
    if total > cap:
        raise CapExceeded(f"sparse cover has {total} elements (cap {cap})")

    def stream():
        for idx in itertools.product(range(len(rows)), repeat=size_budget):
            yield PmdParams(rows[list(idx)])

    return stream()


# ------------------------------------------------- Shapley-Folkman LP


def profile_set(n: int, d: int, cap: int = DEFAULT_PROFILE_CAP) -> ProfileSet:
    """Profiles of CRVs on d free coordinates plus a pivot, probabilities in (1/n)Z."""
    size = math.comb(n + d, d)
    if size > cap:
        raise LpTooLarge(f"{size} profiles exceed the cap {cap}")
    probs = simplex_grid(d + 1, n)
    means = probs[:, :d]
    covs = np.einsum("mi,ij->mij", means, np.eye(d)) - np.einsum("mi,mj->mij", means, means)
    return ProfileSet(probs, means, covs)


def _ellipsoid_projection(d: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Euclidean projection of d onto {x : sum x_i^2 / r_i^2 <= 1} (axis aligned, r_i >= 0)."""
    pos = radii > 0
    inside = np.sum(d[pos] ** 2 / radii[pos] ** 2) if pos.any() else 0.0
    if inside <= 1 and not np.any(np.abs(d[~pos]) > 0):
        return d.copy()
    if not pos.any():
        return np.zeros_like(d)
    r2 = radii ** 2

    def g(lam):
        return float(np.sum(r2 * d ** 2 / (r2 + lam) ** 2)) - 1.0

    if g(0.0) <= 0:
        # only the degenerate axes are outside; the projection just zeroes them
        out = d.copy()
        out[~pos] = 0.0
        return out
    hi = float(radii.max() * np.linalg.norm(d)) + 1.0
    lam = brentq(g, 0.0, hi, xtol=1e-14, rtol=1e-14)
    return r2 * d / (r2 + lam)


class _Oracles:
    """Separation for the mean and covariance closeness constraints."""

    def __init__(self, target: MomentProfilePoint, Sigma_ref: np.ndarray, eps1: float, eps2: float, k: int):
        self.mu = target.mean
        self.Sigma = target.cov
        self.ref = np.asarray(Sigma_ref, dtype=float)
        self.eps1, self.eps2, self.k = eps1, eps2, k
        w, U = np.linalg.eigh((self.ref + self.ref.T) / 2)
        self.U = U
        self.radii = eps1 * np.sqrt(np.clip(w, 0.0, None))
        A = eps2 * self.ref + k * np.eye(len(w))
        wa, Ua = np.linalg.eigh(A)
        self.A = A
        self.A_isqrt = Ua @ np.diag(wa ** -0.5) @ Ua.T

    def mean_slack(self, v: np.ndarray) -> float:
        return self.eps1 * math.sqrt(max(v @ self.ref @ v, 0.0)) + math.sqrt(self.k) * float(np.linalg.norm(v))

    def mean_cut(self, mu_hat: np.ndarray) -> np.ndarray | None:
        diff = self.mu - mu_hat
        local = self.U.T @ diff
        proj = _ellipsoid_projection(local, self.radii)
        gap = float(np.linalg.norm(local - proj))
        if gap <= math.sqrt(self.k) * (1 + ORACLE_TOL) + ORACLE_TOL:
            return None
        return self.U @ ((local - proj) / gap)

    def cov_cut(self, Sigma_hat: np.ndarray) -> tuple[np.ndarray, float] | None:
        rel = self.A_isqrt @ (self.Sigma - Sigma_hat) @ self.A_isqrt
        w, V = np.linalg.eigh((rel + rel.T) / 2)
        j = int(np.argmax(np.abs(w)))
        if abs(w[j]) <= 1 + ORACLE_TOL:
            return None
        v = self.A_isqrt @ V[:, j]
        return v / np.linalg.norm(v), float(np.sign(w[j]))


def _solve(c, A_ub, b_ub, A_eq, b_eq):
    return linprog(c, A_ub=A_ub if len(A_ub) else None, b_ub=b_ub if len(b_ub) else None,
                   A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds")


def conv_membership_lp(target: MomentProfilePoint, M: ProfileSet, n: int, eps1: float, eps2: float,
                       Sigma_ref=None, max_cuts: int = MAX_CUTS) -> LpSolution:
    """Aggregate weights y >= 0 with sum n whose profile sum meets both closeness constraints.

    Per-summand weights x_{i,m} = y_m / n give the same aggregate, so only
    the |M| aggregate variables are solved for.
    """
    d = M.dim
    if target.dim != d:
        raise DimensionMismatch("target and profile set have different dimensions")
    ref = target.cov if Sigma_ref is None else np.asarray(Sigma_ref, dtype=float)
    orc = _Oracles(target, ref, eps1, eps2, d)
    means, covs = M.means, M.covs
    rows, rhs = [], []

    def add_mean(v):
        rows.append(-(means @ v))
        rhs.append(orc.mean_slack(v) - float(v @ orc.mu))

    def add_cov(v, s):
        quad = np.einsum("i,mij,j->m", v, covs, v)
        rows.append(-s * quad)
        rhs.append(float(v @ orc.A @ v) - s * float(v @ orc.Sigma @ v))

    for i in range(d):
        e = np.eye(d)[i]
        add_mean(e)
        add_mean(-e)
        add_cov(e, 1.0)
        add_cov(e, -1.0)
    base = len(rows)
    A_eq = np.ones((1, len(M)))
    c = np.zeros(len(M))
    while True:
        res = _solve(c, np.array(rows), np.array(rhs), A_eq, [float(n)])
        if res.status == 2:
            raise Infeasible("no point of the hull meets the closeness constraints")
        if res.status != 0:
            raise SolverIterationLimit(f"LP solver stopped with status {res.status}: {res.message}")
        y = np.clip(res.x, 0.0, None)
        mu_hat = y @ means
        Sigma_hat = np.einsum("m,mij->ij", y, covs)
        cut_m = orc.mean_cut(mu_hat)
        cut_c = orc.cov_cut(Sigma_hat)
        if cut_m is None and cut_c is None:
            return LpSolution(y, mu_hat, Sigma_hat, len(rows) - base)
        if len(rows) - base >= max_cuts:
            raise SolverIterationLimit(f"still violated after {max_cuts} cuts")
        if cut_m is not None:
            add_mean(cut_m)
        if cut_c is not None:
            add_cov(*cut_c)


def _membership(flat: np.ndarray, residual: np.ndarray, count: int) -> np.ndarray | None:
    A_eq = np.vstack([np.ones(len(flat)), flat.T])
    b_eq = np.concatenate([[float(count)], residual])
    res = _solve(np.zeros(len(flat)), [], [], A_eq, b_eq)
    if res.status != 0:
        return None
    return np.clip(res.x, 0.0, None)


def sf_peel(weights, M: ProfileSet, n: int) -> GmdParams:
    """Greedy Shapley-Folkman rounding of a hull point into n integral profiles.

    Each peeled profile keeps the residual inside the (n - i)-fold hull sum,
    checked by an equality LP; the last d^2 + d rows go to the profile whose
    mean is nearest to the residual mean per remaining row.
    """
    y = np.asarray(weights, dtype=float)
    d = M.dim
    flat = M.flat()
    residual = y @ flat
    tail = d * d + d
    picks: list[int] = []
    witness = y.copy()
    remaining = n
    while remaining > tail:
        order = np.argsort(-witness, kind="stable")
        for m in order:
            if witness[m] <= 0:
                break
            nxt = _membership(flat, residual - flat[m], remaining - 1)
            if nxt is not None:
                picks.append(int(m))
                residual = residual - flat[m]
                witness = nxt
                remaining -= 1
                break
        else:
            raise PeelStuck(f"no profile keeps the residual in the hull with {remaining} rows left")
    while remaining > 0:
        target = residual[:d] / remaining
        dist = np.linalg.norm(M.means - target, axis=1)
        m = int(np.argmin(dist))
        picks.append(m)
        residual = residual - flat[m]
        remaining -= 1
    rows = M.probs[picks]
    return GmdParams(np.ascontiguousarray(rows[:, :d]), d)


def gmd_moments(gmd: GmdParams) -> MomentProfilePoint:
    P = gmd.matrix
    mean = P.sum(axis=0)
    return MomentProfilePoint(mean, np.diag(mean) - P.T @ P)


def sf_bounds_violations(target: MomentProfilePoint, out: MomentProfilePoint, eps1: float, eps2: float,
                         k: int, directions: np.ndarray) -> int:
    """Directions breaking either closeness bound with the peel slack terms."""
    S = target.cov
    bad = 0
    for v in directions:
        nv = float(np.linalg.norm(v))
        vs = float(v @ S @ v)
        mean_ok = abs(v @ (target.mean - out.mean)) <= eps1 * math.sqrt(max(vs, 0.0)) + 3 * k ** 2.5 * nv + 1e-9
        cov_ok = abs(v @ (S - out.cov) @ v) <= eps2 * vs + 3 * k ** 3 * nv ** 2 + 1e-9
        bad += not (mean_ok and cov_ok)
    return bad


def properize_block(mean: np.ndarray, cov: np.ndarray, size: int, eps1: float, eps2: float,
                    profile_cap: int = DEFAULT_PROFILE_CAP) -> np.ndarray:
    """Rows (pivot last) of a size-row GMD close to the block's discretized Gaussian."""
    d = len(mean)
    if size == 0:
        return np.zeros((0, d + 1))
    if d == 0:
        return np.ones((size, 1))
    rounded = np.rint(mean)
    if not np.any(np.abs(cov) > 1e-12) and np.allclose(mean, rounded) and rounded.min() >= 0 \
            and rounded.sum() <= size:
        rows = np.zeros((size, d + 1))
        r = 0
        for j, c in enumerate(rounded.astype(int)):
            rows[r:r + c, j] = 1.0
            r += c
        rows[r:, d] = 1.0
        return rows
    M = profile_set(size, d, profile_cap)
    sol = conv_membership_lp(MomentProfilePoint(mean, cov), M, size, eps1, eps2)
    gmd = sf_peel(sol.weights, M, size)
    return gmd.to_pmd().matrix


def properize(element: CoverElement, n: int, eps: float, min_block_eig: float = 0.0,
              profile_cap: int = DEFAULT_PROFILE_CAP) -> PmdParams:
    """One (n, k)-PMD near the element: Gaussian blocks properized, sparse rows appended."""
    parts = []
    k = None
    if element.sparse is not None:
        k = element.sparse.k
    if element.gaussian is not None:
        sg = element.gaussian
        k = sg.params.k
        eps1, eps2 = eps / k, eps / (2 * k ** 1.5)
        for block, piv, size in zip(sg.structure.blocks, sg.structure.pivots, sg.block_sums):
            free = [i for i in block if i != piv]
            mean = sg.params.mean[free]
            cov = sg.params.cov[np.ix_(free, free)]
            if free and np.any(np.abs(cov) > 1e-12) and np.linalg.eigvalsh(cov).min() < min_block_eig:
                raise PremiseViolated(f"block {block} has minimum eigenvalue below {min_block_eig}")
            local = properize_block(mean, cov, int(size), eps1, eps2, profile_cap)
            rows = np.zeros((len(local), k))
            rows[:, free + [piv]] = local
            parts.append(rows)
    if element.sparse is not None:
        if element.sparse.k != k:
            raise DimensionMismatch("sparse and Gaussian parts have different k")
        parts.append(element.sparse.matrix)
    if k is None:
        raise DimensionMismatch("element has neither a Gaussian nor a sparse part")
    matrix = np.vstack(parts) if parts else np.zeros((0, k))
    if len(matrix) != n:
        raise DimensionMismatch(f"element accounts for {len(matrix)} rows, expected {n}")
    return validate_params(matrix)
