"""Discretized Gaussians, block-structured roundings and Gaussian distance bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg, optimize, special

from .errors import (
    BudgetTooSmall,
    DimensionMismatch,
    InconsistentBlocks,
    NotPSD,
    NullspaceMismatch,
    PremiseViolated,
    Singular,
)
from .pmd_core import SampleBatch

PSD_TOL = -1e-8
RANGE_RTOL = 1e-9


@dataclass(frozen=True)
class GaussianParams:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (len(mean), len(mean)):
            raise DimensionMismatch("covariance shape does not match mean")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-10:
            raise NotPSD("covariance is not symmetric")
        cov = (cov + cov.T) / 2
        if len(cov) and np.linalg.eigvalsh(cov).min() < PSD_TOL * max(1.0, np.abs(cov).max()):
            raise NotPSD("covariance has a negative eigenvalue")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def k(self) -> int:
        return len(self.mean)

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_json(cls, data) -> "GaussianParams":
        return cls(np.asarray(data["mean"], dtype=float), np.asarray(data["cov"], dtype=float))


@dataclass(frozen=True)
class BlockStructure:
    blocks: tuple[tuple[int, ...], ...]
    pivots: tuple[int, ...]

    def validate(self, k: int) -> None:
        seen = sorted(i for b in self.blocks for i in b)
        if seen != list(range(k)):
            raise InconsistentBlocks("blocks must partition the coordinates")
        if len(self.pivots) != len(self.blocks):
            raise InconsistentBlocks("need one pivot per block")
        for b, p in zip(self.blocks, self.pivots):
            if p not in b:
                raise InconsistentBlocks(f"pivot {p} is not inside block {b}")


@dataclass(frozen=True)
class StructuredGaussian:
    params: GaussianParams
    structure: BlockStructure
    block_sums: tuple[int, ...] | None = None

    def __post_init__(self):
        k = self.params.k
        self.structure.validate(k)
        owner = np.empty(k, dtype=int)
        for b, block in enumerate(self.structure.blocks):
            owner[list(block)] = b
        cross = owner[:, None] != owner[None, :]
        if np.any(np.abs(self.params.cov[cross]) > 1e-10):
            raise InconsistentBlocks("covariance couples different blocks")
        sums = tuple(int(round_half_away(self.params.mean[list(b)].sum())) for b in self.structure.blocks)
        if self.block_sums is None:
            object.__setattr__(self, "block_sums", sums)
        elif tuple(int(x) for x in self.block_sums) != sums:
            raise InconsistentBlocks(f"block sums {self.block_sums} disagree with rounded block means {sums}")

    def to_json(self) -> dict:
        return {
            "gaussian": self.params.to_json(),
            "blocks": [list(b) for b in self.structure.blocks],
            "pivots": list(self.structure.pivots),
            "block_sums": list(self.block_sums),
        }

    @classmethod
    def from_json(cls, data) -> "StructuredGaussian":
        structure = BlockStructure(tuple(tuple(int(i) for i in b) for b in data["blocks"]),
                                   tuple(int(p) for p in data["pivots"]))
        sums = data.get("block_sums")
        return cls(GaussianParams.from_json(data["gaussian"]), structure,
                   None if sums is None else tuple(int(s) for s in sums))


@dataclass(frozen=True)
class CellMasses:
    masses: dict
    half_width: float
    exact: bool


@dataclass(frozen=True)
class SpectralCertificate:
    certified: bool
    eps: float
    mean_ratio: float
    cov_ratio: float
    mean_limit: float
    cov_limit: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def round_half_away(x):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def pivoted_cholesky(cov: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Factor L with cov = L L^T for PSD input, stopping at numerical rank."""
    a = np.array(cov, dtype=float)
    k = len(a)
    diag = np.diag(a).copy()
    scale = max(diag.max(initial=0.0), 1e-300)
    perm = np.arange(k)
    L = np.zeros((k, k))
    rank = 0
    for j in range(k):
        p = j + int(np.argmax(diag[perm[j:]]))
        if diag[perm[p]] <= rtol * scale:
            break
        perm[[j, p]] = perm[[p, j]]
        pj = perm[j]
        L[pj, j] = math.sqrt(diag[pj])
        rest = perm[j + 1:]
        L[rest, j] = (a[rest, pj] - L[rest, :j] @ L[pj, :j]) / L[pj, j]
        diag[rest] -= L[rest, j] ** 2
        rank += 1
    return L[:, :rank]


def _factor(cov: np.ndarray) -> np.ndarray:
    cov = np.array(cov, dtype=float)
    if len(cov) == 0:
        return np.zeros((0, 0))
    w, v = np.linalg.eigh(cov)
    if w.min() < PSD_TOL * max(1.0, np.abs(cov).max()):
        raise NotPSD("covariance has a negative eigenvalue")
    if w.min() < 0:
        # clamp tiny negative eigenvalues before factoring
        cov = (v * np.maximum(w, 0.0)) @ v.T
    return pivoted_cholesky(cov)


def _draw(g: GaussianParams, count: int, rng: np.random.Generator) -> np.ndarray:
    L = _factor(g.cov)
    z = rng.standard_normal((count, L.shape[1]))
    return g.mean + z @ L.T


def sample_discretized(g: GaussianParams, count: int, seed: int) -> SampleBatch:
    rng = np.random.default_rng(seed)
    x = round_half_away(_draw(g, count, rng))
    return SampleBatch(x.astype(np.int64), seed)


def sample_structured(sg: StructuredGaussian, count: int, seed: int) -> SampleBatch:
    """Round non-pivot coordinates; each pivot absorbs its block's rounding error."""
    rng = np.random.default_rng(seed)
    k = sg.params.k
    free = [i for b, p in zip(sg.structure.blocks, sg.structure.pivots) for i in b if i != p]
    out = np.zeros((count, k), dtype=np.int64)
    if free:
        sub = GaussianParams(sg.params.mean[free], sg.params.cov[np.ix_(free, free)])
        out[:, free] = round_half_away(_draw(sub, count, rng)).astype(np.int64)
    for block, pivot, total in zip(sg.structure.blocks, sg.structure.pivots, sg.block_sums):
        others = [i for i in block if i != pivot]
        out[:, pivot] = total - out[:, others].sum(axis=1)
    return SampleBatch(out, seed)


def discretized_normal_1d(mu: float, var: float, lo: int, hi: int) -> np.ndarray:
    """Exact masses P(round(Y) = z) for z in lo..hi and Y ~ N(mu, var)."""
    z = np.arange(lo, hi + 1, dtype=float)
    if var <= 0:
        return (z == round_half_away(mu)).astype(float)
    s = math.sqrt(2.0 * var)
    upper = special.ndtr((z + 0.5 - mu) / math.sqrt(var))
    lower = special.ndtr((z - 0.5 - mu) / math.sqrt(var))
    # use the complementary tail where it is more accurate
    right = z - mu > 0
    masses = np.where(right,
                      0.5 * (special.erfc((z - 0.5 - mu) / s) - special.erfc((z + 0.5 - mu) / s)),
                      upper - lower)
    return np.maximum(masses, 0.0)


def mc_half_width(budget: int, delta: float) -> float:
    return 2.0 * math.sqrt(math.log(2.0 / delta) / (2.0 * budget))


def cell_pmf(g: GaussianParams, cells: Iterable[Sequence[int]], mc_budget: int,
             seed: int = 0, delta: float = 0.05) -> CellMasses:
    """Masses of the rounded Gaussian on the requested cells.

    Diagonal covariance uses the exact product of normal cell masses;
    otherwise a Monte-Carlo estimate with a Hoeffding half-width per cell.
    """
    if mc_budget < 10_000:
        raise BudgetTooSmall("mc_budget must be at least 1e4")
    cells = [tuple(int(x) for x in c) for c in cells]
    off = g.cov - np.diag(np.diag(g.cov))
    if not np.any(off):
        masses = {}
        for c in cells:
            p = 1.0
            for i, z in enumerate(c):
                p *= discretized_normal_1d(g.mean[i], g.cov[i, i], z, z)[0]
            masses[c] = p
        return CellMasses({c: float(p) for c, p in masses.items()}, 0.0, True)
    batch = sample_discretized(g, mc_budget, seed)
    counts: dict = {}
    for row in map(tuple, batch.points.tolist()):
        counts[row] = counts.get(row, 0) + 1
    masses = {c: counts.get(c, 0) / mc_budget for c in cells}
    return CellMasses(masses, mc_half_width(mc_budget, delta), False)


def min_eigenvalue(cov, exclude_ones: bool = False) -> float:
    cov = np.asarray(cov, dtype=float)
    if exclude_ones:
        k = len(cov)
        # orthonormal basis of the complement of the all-ones vector
        basis = np.linalg.qr(np.eye(k) - 1.0 / k)[0][:, : k - 1]
        cov = basis.T @ cov @ basis
    if len(cov) == 0:
        return 0.0
    return float(np.linalg.eigvalsh((cov + cov.T) / 2).min())


def tv_bound_gauss_pair(g1: GaussianParams, g2: GaussianParams, alpha: float | None = None) -> float:
    """||dmu|| / sqrt(2 pi s2) + k alpha / (sqrt(2 pi e) (s2 - alpha)), s2 the least eigenvalue of cov1."""
    if g1.k != g2.k:
        raise DimensionMismatch("Gaussians have different dimensions")
    gap = float(np.max(np.abs(g1.cov - g2.cov)))
    if alpha is None:
        alpha = gap
    if gap > alpha + 1e-15:
        raise PremiseViolated(f"entrywise covariance gap {gap} exceeds alpha={alpha}")
    s2 = min_eigenvalue(g1.cov)
    if alpha > s2 or s2 <= 0:
        raise PremiseViolated(f"alpha={alpha} must not exceed the least eigenvalue {s2}")
    shift = float(np.linalg.norm(g1.mean - g2.mean)) / math.sqrt(2 * math.pi * s2)
    if alpha == 0:
        return shift
    if alpha == s2:
        return math.inf
    return shift + g1.k * alpha / (math.sqrt(2 * math.pi * math.e) * (s2 - alpha))


def _common_range(c1: np.ndarray, c2: np.ndarray) -> tuple[np.ndarray, bool]:
    """Orthonormal basis of range(c1 + c2) and whether both ranks agree with it."""
    w, v = np.linalg.eigh(c1 + c2)
    top = max(w.max(initial=0.0), 1e-300)
    basis = v[:, w > RANGE_RTOL * top]
    r = basis.shape[1]

    def rank(c):
        if r == 0:
            return 0
        ww = np.linalg.eigvalsh(basis.T @ c @ basis)
        return int(np.sum(ww > RANGE_RTOL * top))

    return basis, rank(c1) == r and rank(c2) == r


def _outside(basis: np.ndarray, vec: np.ndarray) -> float:
    return float(np.linalg.norm(vec - basis @ (basis.T @ vec)))


def tv_bound_spectral(g1: GaussianParams, g2: GaussianParams, eps: float) -> SpectralCertificate:
    """Check |v.dmu| <= eps s_v and |v.dSigma v| <= eps s_v^2 / (2 sqrt k) for every v.

    s_v^2 is the larger of the two variances along v.  The mean term is the
    support function of the intersection of two ellipsoids, evaluated by a
    convex one-dimensional search; the covariance term follows from the
    extreme generalized eigenvalues of the pair.
    """
    if g1.k != g2.k:
        raise DimensionMismatch("Gaussians have different dimensions")
    k = g1.k
    basis, same = _common_range(g1.cov, g2.cov)
    if not same:
        raise NullspaceMismatch("covariances have different null spaces")
    dmu = g2.mean - g1.mean
    mean_limit = eps
    cov_limit = eps / (2.0 * math.sqrt(k))
    if _outside(basis, dmu) > 1e-9 * (1.0 + np.linalg.norm(dmu)):
        return SpectralCertificate(False, eps, math.inf, 0.0, mean_limit, cov_limit)
    r = basis.shape[1]
    if r == 0:
        return SpectralCertificate(True, eps, 0.0, 0.0, mean_limit, cov_limit)
    a = basis.T @ g1.cov @ basis
    b = basis.T @ g2.cov @ basis
    d = basis.T @ dmu

    def quad(t):
        m = t * a + (1 - t) * b
        return float(d @ np.linalg.solve(m, d))

    if np.any(d):
        res = optimize.minimize_scalar(quad, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-10})
        mean_ratio = math.sqrt(max(0.0, min(res.fun, quad(0.0), quad(1.0))))
    else:
        mean_ratio = 0.0
    lam = linalg.eigh(b, a, eigvals_only=True)
    cov_ratio = float(max(0.0, 1.0 - 1.0 / lam.max(), 1.0 - lam.min()))
    slack = 1e-12
    ok = mean_ratio <= mean_limit + slack and cov_ratio <= cov_limit + slack
    return SpectralCertificate(bool(ok), eps, mean_ratio, cov_ratio, mean_limit, cov_limit)


def kl_gaussians(g1: GaussianParams, g2: GaussianParams) -> float:
    """KL(N1 || N2) on the common range of the two covariances."""
    if g1.k != g2.k:
        raise DimensionMismatch("Gaussians have different dimensions")
    w, v = np.linalg.eigh(g1.cov + g2.cov)
    top = max(w.max(initial=0.0), 1e-300)
    basis = v[:, w > RANGE_RTOL * top]
    dmu = g2.mean - g1.mean
    if _outside(basis, dmu) > 1e-9 * (1.0 + np.linalg.norm(dmu)):
        return math.inf
    if basis.shape[1] == 0:
        return 0.0
    a = basis.T @ g1.cov @ basis
    b = basis.T @ g2.cov @ basis
    if np.linalg.eigvalsh(b).min() <= RANGE_RTOL * top:
        raise Singular("second covariance is singular on the common range")
    d = basis.T @ dmu
    lam = linalg.eigh(a, b, eigvals_only=True)
    if lam.min() <= 0:
        return math.inf
    return 0.5 * (float(d @ np.linalg.solve(b, d)) + float(np.sum(lam - np.log(lam) - 1.0)))


def pinsker_tv(kl: float) -> float:
    return math.sqrt(kl / 2.0)


def _logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    r = len(mean)
    chol = np.linalg.cholesky(cov)
    z = linalg.solve_triangular(chol, (x - mean).T, lower=True)
    return -0.5 * np.sum(z * z, axis=0) - np.log(np.diag(chol)).sum() - 0.5 * r * math.log(2 * math.pi)


def mc_tv_gaussians(g1: GaussianParams, g2: GaussianParams, budget: int, seed: int,
                    delta: float = 0.05) -> tuple[float, float]:
    """Monte-Carlo TV between two continuous Gaussians, E_P[(1 - q/p)^+].

    Returns the estimate and a Hoeffding half-width at level delta.
    Distributions on different affine subspaces are at distance 1.
    """
    basis, same = _common_range(g1.cov, g2.cov)
    hw = math.sqrt(math.log(2.0 / delta) / (2.0 * budget))
    dmu = g2.mean - g1.mean
    if not same or _outside(basis, dmu) > 1e-9 * (1.0 + np.linalg.norm(dmu)):
        return 1.0, hw
    if basis.shape[1] == 0:
        return 0.0, hw
    a = basis.T @ g1.cov @ basis
    b = basis.T @ g2.cov @ basis
    m1 = basis.T @ g1.mean
    m2 = basis.T @ g2.mean
    rng = np.random.default_rng(seed)
    x = m1 + rng.standard_normal((budget, len(m1))) @ np.linalg.cholesky(a).T
    log_ratio = _logpdf(x, m2, b) - _logpdf(x, m1, a)
    vals = np.clip(1.0 - np.exp(np.minimum(log_ratio, 50.0)), 0.0, 1.0)
    return float(vals.mean()), hw
