"""Fourier transforms of PMDs and a Fourier-LP learner.

Transforms use the convention F(xi) = E[exp(i pi xi . z)], so every lattice
distribution has a transform with period 2 in each coordinate.  Learning
works in GMD coordinates (last PMD coordinate dropped): the hypothesis is a
rounded Gaussian plus a sparse density on a cube, one candidate per moment
guess, and a Scheffe tournament picks the winner.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.signal import convolve

from .errors import (
    CapExceeded,
    DimensionMismatch,
    Failure,
    Infeasible,
    LpTooLarge,
    NoFeasibleGuess,
    SolverIterationLimit,
    TooFewSamples,
)
from .gaussian import GaussianParams, discretized_normal_1d, round_half_away, sample_discretized
from .pmd_core import LatticeDistribution, PmdParams, SampleBatch

DEFAULT_DELTA = 0.01
DEFAULT_RADIUS_CONSTANT = 4.0
DEFAULT_GRID_CAP = 200_000
DEFAULT_SUPPORT_CAP = 20_000
POISSON_TERMS = 3
GAUSS_SIGMAS = 10.0


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class FourierPoint:
    xi: np.ndarray

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if np.any(np.abs(xi) > 1 + 1e-12):
            raise DimensionMismatch("Fourier points must lie in [-1, 1]^k")
        object.__setattr__(self, "xi", xi)


@dataclass(frozen=True)
class ZetaPoint:
    zeta: np.ndarray
    anchor: np.ndarray


@dataclass(frozen=True)
class FourierEstimates:
    points: np.ndarray
    values: np.ndarray
    half_width: float


@dataclass(frozen=True)
class EffectiveSupport:
    mean: np.ndarray
    cov: np.ndarray
    r: float

    def contains(self, z) -> bool:
        return bool(self.contains_many(np.atleast_2d(np.asarray(z, dtype=float)))[0])

    def contains_many(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if not np.any(self.cov):
            return np.all(Z == round_half_away(self.mean), axis=1)
        w, U = np.linalg.eigh(self.cov)
        keep = w > 1e-12 * w.max()
        diff = (Z - self.mean) @ U
        off = np.abs(diff[:, ~keep]).max(axis=1, initial=0.0) <= 1e-9
        quad = np.sum(diff[:, keep] ** 2 / w[keep], axis=1)
        return off & (quad <= self.r * (1 + 1e-12))

    def count_bound(self) -> float:
        k = len(self.mean)
        sig = np.sqrt(np.clip(np.linalg.eigvalsh(self.cov), 0.0, None)) if k else np.zeros(0)
        return float(np.prod(2 * sig * math.sqrt(k * self.r) + 1))


@dataclass(frozen=True)
class FourierGrid:
    v1: np.ndarray
    v2: np.ndarray
    step1: float
    step2: float


@dataclass(frozen=True)
class SparseDensity:
    T: int
    probs: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.min(initial=0.0) < -1e-9 or abs(p.sum() - 1.0) > 1e-6:
            raise DimensionMismatch("sparse density must lie on the simplex")
        p = np.clip(p, 0.0, None)
        object.__setattr__(self, "probs", p / p.sum())

    @property
    def dim(self) -> int:
        return self.probs.ndim

    def to_json(self) -> dict:
        return {"T": self.T, "probs": self.probs.tolist(), "residual": self.residual}

    @classmethod
    def from_json(cls, data) -> "SparseDensity":
        return cls(int(data["T"]), np.asarray(data["probs"], dtype=float), float(data.get("residual", 0.0)))


@dataclass(frozen=True)
class LearnedHypothesis:
    gaussian: GaussianParams
    sparse: SparseDensity
    n: int
    provenance: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.gaussian.k + 1

    def to_json(self) -> dict:
        return {"gaussian": self.gaussian.to_json(), "sparse": self.sparse.to_json(), "n": self.n,
                "provenance": self.provenance}

    @classmethod
    def from_json(cls, data) -> "LearnedHypothesis":
        return cls(GaussianParams.from_json(data["gaussian"]), SparseDensity.from_json(data["sparse"]),
                   int(data["n"]), dict(data.get("provenance", {})))


@dataclass(frozen=True)
class LearnConfig:
    radius_constant: float = DEFAULT_RADIUS_CONSTANT
    delta: float = DEFAULT_DELTA
    holdout: float = 0.2
    fractions: tuple[float, ...] = (0.5, 0.25)
    v1_step: float | None = None
    v2_step: float | None = None
    grid_cap: int = DEFAULT_GRID_CAP
    support_cap: int = DEFAULT_SUPPORT_CAP
    seed: int = 0


# ------------------------------------------------------------ transforms


def _xi_array(xi) -> np.ndarray:
    if isinstance(xi, FourierPoint):
        return xi.xi
    return np.asarray(xi, dtype=float)


def pmd_fourier(params: PmdParams, xi) -> complex | np.ndarray:
    """prod_i sum_j p_ij exp(i pi xi_j); xi may be a single point or a (P, k) batch."""
    x = _xi_array(xi)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != params.k:
        raise DimensionMismatch("xi has the wrong dimension")
    factors = params.matrix @ np.exp(1j * np.pi * x.T)
    out = np.prod(factors, axis=0)
    return complex(out[0]) if single else out


def lattice_fourier(dist: LatticeDistribution, xi) -> np.ndarray:
    x = np.atleast_2d(_xi_array(xi))
    return np.exp(1j * np.pi * x @ dist.points().T.astype(float)) @ dist.probs()


def zeta_map(xi) -> ZetaPoint:
    x = _xi_array(xi)
    anchor = np.where(x > 0.5, 1, np.where(x < -0.5, -1, 0))
    zeta = (x - anchor) * np.where(anchor != 0, -1.0, 1.0)
    return ZetaPoint(zeta, anchor.astype(int))


def _zeta_batch(X: np.ndarray) -> np.ndarray:
    anchor = np.where(X > 0.5, 1, np.where(X < -0.5, -1, 0))
    return (X - anchor) * np.where(anchor != 0, -1.0, 1.0)


def fourier_decay_bound(Sigma, xi) -> float | np.ndarray:
    """exp(-zeta^T Sigma zeta / 5), an upper bound on the squared transform modulus."""
    x = _xi_array(xi)
    Z = _zeta_batch(np.atleast_2d(x))
    q = np.einsum("pi,ij,pj->p", Z, np.asarray(Sigma, dtype=float), Z)
    out = np.exp(-q / 5)
    return float(out[0]) if x.ndim == 1 else out


def crv_decay_bound(p: Sequence[float], xi) -> float:
    """1 - zeta^T Sigma zeta / 5 for a single CRV with probabilities p."""
    p = np.asarray(p, dtype=float)
    cov = np.diag(p) - np.outer(p, p)
    z = zeta_map(xi).zeta
    return float(1 - z @ cov @ z / 5)


def lipschitz_bound(Sigma, mu, xi, xi2) -> float:
    """pi * sqrt(d^T (Sigma + mu mu^T) d) with d = xi - xi2, from |exp(it) - 1| <= |t| and Jensen."""
    d = _xi_array(xi) - _xi_array(xi2)
    mu = np.asarray(mu, dtype=float)
    second = np.asarray(Sigma, dtype=float) + np.outer(mu, mu)
    return float(np.pi * math.sqrt(max(d @ second @ d, 0.0)))


def centered_lipschitz_bound(Sigma, gap: float, step) -> float:
    """Transform gap after a step, for two laws with equal mean and covariance."""
    s = _xi_array(step)
    return float(gap + 2 * np.pi * math.sqrt(max(s @ np.asarray(Sigma, dtype=float) @ s, 0.0)))


def fourier_half_width(count: int, n_points: int, delta: float = DEFAULT_DELTA) -> float:
    return math.sqrt(2 * math.log(4 * max(n_points, 1) / delta) / count)


def empirical_fourier(samples: SampleBatch, points, delta: float = DEFAULT_DELTA) -> FourierEstimates:
    if samples.count < 1:
        raise TooFewSamples("need at least one sample")
    P = np.atleast_2d(np.array([_xi_array(p) for p in points]) if isinstance(points, list) else points)
    pts, counts = np.unique(samples.points, axis=0, return_counts=True)
    w = counts / samples.count
    values = np.empty(len(P), dtype=complex)
    for start in range(0, len(P), 4096):
        block = P[start:start + 4096]
        values[start:start + 4096] = np.exp(1j * np.pi * block @ pts.T.astype(float)) @ w
    return FourierEstimates(P, values, fourier_half_width(samples.count, len(P), delta))


# ------------------------------------------------------- support & grids


def support_radius(eps: float, k: int, constant: float = DEFAULT_RADIUS_CONSTANT) -> float:
    return constant * (math.log(1 / eps) + math.log(k))


def effective_support(mu, Sigma, eps: float, constant: float = DEFAULT_RADIUS_CONSTANT) -> EffectiveSupport:
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    return EffectiveSupport(mu, np.asarray(Sigma, dtype=float).reshape(len(mu), len(mu)),
                            support_radius(eps, max(len(mu), 1), constant))


def shrink_covariance(Sigma_hat, eps: float) -> np.ndarray:
    """Eigenvalues scaled by 1 - 3 eps; those below eps are zeroed."""
    w, U = np.linalg.eigh(np.asarray(Sigma_hat, dtype=float))
    w = np.where(w < eps, 0.0, (1 - 3 * eps) * w)
    return (U * w) @ U.T


def base_spacing(eps: float, k: int) -> float:
    return eps / (k ** (2 * k) * 6 ** k)


def fine_spacing(eps: float, k: int) -> float:
    return eps ** (2 * k) / (k ** (2 * k) * 6 ** k)


def v1_count_bound(r: float, eps: float, k: int) -> float:
    return (math.sqrt(r) * k ** (2 * k) * 6 ** k / eps) ** k


def _anchor_quads(X: np.ndarray, Sigma: np.ndarray) -> np.ndarray:
    """zeta^T Sigma zeta for every anchor z in {-1,0,1}^k; shape (3^k, P)."""
    k = X.shape[1]
    out = []
    for z in itertools.product((-1, 0, 1), repeat=k):
        z = np.array(z, dtype=float)
        Y = (X - z) * np.where(z != 0, -1.0, 1.0)
        out.append(np.einsum("pi,ij,pj->p", Y, Sigma, Y))
    return np.array(out)


def build_grid(Sigma_tilde, eps: float, r: float, Sigma_G=None, v2_step: float | None = None,
               cap: int = DEFAULT_GRID_CAP, v1_step: float | None = None) -> FourierGrid:
    S = np.atleast_2d(np.asarray(Sigma_tilde, dtype=float))
    k = len(S)
    h1 = base_spacing(eps, k) if v1_step is None else v1_step
    w, V = np.linalg.eigh(S)
    sig = np.sqrt(np.clip(w, 0.0, None))
    axes = V / np.maximum(1.0, sig)
    reach = [int(math.ceil(math.sqrt(k) * max(1.0, s) / h1)) for s in sig]
    total = math.prod(2 * m + 1 for m in reach)
    if total > cap:
        raise CapExceeded(f"base grid would have {total} points (cap {cap})")
    ranges = [np.arange(-m, m + 1) for m in reach]
    alpha = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, k).astype(float)
    X = (alpha * h1) @ axes.T
    X = X[np.all(np.abs(X) <= 1 + 1e-12, axis=1)]
    if np.any(S):
        X = X[(_anchor_quads(X, S) <= r).any(axis=0)]
    v1 = X
    v2 = np.zeros((0, k))
    h2 = fine_spacing(eps, k) if v2_step is None else v2_step
    if Sigma_G is not None and np.any(Sigma_G):
        per_axis = int(math.floor(2 / h2)) + 1
        if per_axis ** k > cap:
            raise CapExceeded(f"fine grid would have {per_axis ** k} points (cap {cap})")
        axis = -1 + h2 * np.arange(per_axis)
        Y = np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)
        SG = np.asarray(Sigma_G, dtype=float)
        inner = (_anchor_quads(Y, SG) <= r / 2).any(axis=0)
        outer = (_anchor_quads(Y, S) > r).all(axis=0) if np.any(S) else np.zeros(len(Y), bool)
        v2 = Y[inner & outer]
    return FourierGrid(v1, v2, h1, h2)


# ------------------------------------------------------ Gaussian factor


def gaussian_fourier(g: GaussianParams, X: np.ndarray) -> np.ndarray:
    """Transform of the rounded Gaussian.

    Rounding is the integer sampling of the density convolved with a unit
    box, so Poisson summation gives sum_m phi(pi (xi - 2m)) prod sinc, with
    phi the continuous characteristic function; |m_j| <= 3 terms are kept.
    """
    X = np.atleast_2d(X)
    mu, S = g.mean, g.cov
    if not np.any(S):
        return np.exp(1j * np.pi * X @ round_half_away(mu))
    out = np.zeros(len(X), dtype=complex)
    k = X.shape[1]
    for m in itertools.product(range(-POISSON_TERMS, POISSON_TERMS + 1), repeat=k):
        W = np.pi * (X - 2 * np.array(m, dtype=float))
        phi = np.exp(1j * W @ mu - 0.5 * np.einsum("pi,ij,pj->p", W, S, W))
        out += phi * np.prod(np.sinc(W / (2 * np.pi)), axis=1)
    return out


# ------------------------------------------------------------- the LP


def _cube(T: int, k: int) -> np.ndarray:
    return np.array(list(itertools.product(range(T + 1), repeat=k)), dtype=float)


def learn_sparse_lp(gaussian_guess: GaussianParams, mean_S, cov_S, estimates: FourierEstimates,
                    grid: FourierGrid, T: int, tol: float, cap: int = DEFAULT_SUPPORT_CAP) -> SparseDensity:
    """Sparse density on [0, T]^k fitting the estimated transform.

    The LP minimises the largest real/imaginary residual t at the V1
    points subject to the simplex, V2 decay and exact moment constraints;
    the guess is rejected when t exceeds tol.
    """
    k = gaussian_guess.k
    if (T + 1) ** k > cap:
        raise LpTooLarge(f"{(T + 1) ** k} support points exceed the cap {cap}")
    alpha = _cube(T, k)
    A = len(alpha)
    mean_S = np.atleast_1d(np.asarray(mean_S, dtype=float))
    cov_S = np.asarray(cov_S, dtype=float).reshape(k, k)
    g = gaussian_fourier(gaussian_guess, grid.v1)
    theta = np.pi * grid.v1 @ alpha.T
    c, s = np.cos(theta), np.sin(theta)
    re_rows = g.real[:, None] * c - g.imag[:, None] * s
    im_rows = g.real[:, None] * s + g.imag[:, None] * c
    est = estimates.values
    ones = np.ones((len(grid.v1), 1))
    blocks = [np.hstack([re_rows, -ones]), np.hstack([-re_rows, -ones]),
              np.hstack([im_rows, -ones]), np.hstack([-im_rows, -ones])]
    rhs = [est.real, -est.real, est.imag, -est.imag]
    if len(grid.v2):
        theta2 = np.pi * grid.v2 @ alpha.T
        Z2 = _zeta_batch(grid.v2)
        cap2 = np.exp(-np.einsum("pi,ij,pj->p", Z2, cov_S, Z2) / 5)
        zeros = np.zeros((len(grid.v2), 1))
        for rows in (np.cos(theta2), -np.cos(theta2), np.sin(theta2), -np.sin(theta2)):
            blocks.append(np.hstack([rows, zeros]))
            rhs.append(cap2)
    A_ub = np.vstack(blocks)
    b_ub = np.concatenate(rhs)
    centered = alpha - mean_S
    iu = np.triu_indices(k)
    eq = [np.ones(A)] + [alpha[:, i] for i in range(k)] + [centered[:, i] * centered[:, j] for i, j in zip(*iu)]
    A_eq = np.hstack([np.array(eq), np.zeros((len(eq), 1))])
    b_eq = np.concatenate([[1.0], mean_S, cov_S[iu]])
    cost = np.zeros(A + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, 1)] * A + [(0, None)], method="highs")
    if res.status == 2:
        raise Infeasible("moment constraints cannot be met on the cube")
    if res.status != 0:
        raise SolverIterationLimit(f"LP solver stopped with status {res.status}: {res.message}")
    t = float(res.x[-1])
    if t > tol:
        raise Infeasible(f"best transform residual {t:.4g} exceeds {tol:.4g}")
    return SparseDensity(T, res.x[:A].reshape((T + 1,) * k), t)


# ------------------------------------------------- Plancherel & PMFs


@dataclass(frozen=True)
class PlancherelReport:
    bound: float
    mass_outside: float
    mean_square: float
    parseval_lhs: float
    parseval_rhs: float


def _periodic_average(dist_points: np.ndarray, weights: np.ndarray, per_axis: int) -> float:
    """Average of |sum_z w_z exp(i pi xi.z)|^2 over a uniform grid of [-1,1)^k."""
    k = dist_points.shape[1]
    axis = -1 + 2 * (np.arange(per_axis) + 0.5) / per_axis
    grid = np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)
    total = 0.0
    for start in range(0, len(grid), 8192):
        block = grid[start:start + 8192]
        vals = np.exp(1j * np.pi * block @ dist_points.T.astype(float)) @ weights
        total += float(np.sum(np.abs(vals) ** 2))
    return total / len(grid)


def plancherel_tv_bound(F: LatticeDistribution, H: LatticeDistribution, S, per_axis: int | None = None
                        ) -> PlancherelReport:
    """eps + sqrt(|S|) * sqrt(mean of |F^ - H^|^2 over [-1,1]^k).

    The mean (not the plain integral, which is 2^k times larger) equals the
    squared l2 distance.  With at least span+1 midpoints per axis the grid
    average is exact, because |F^ - H^|^2 is a trigonometric polynomial.
    """
    S = {tuple(int(x) for x in s) for s in S}
    keys = sorted(set(F.support) | set(H.support))
    pts = np.array(keys, dtype=np.int64).reshape(len(keys), F.dimension)
    diff = np.array([F.prob(p) - H.prob(p) for p in keys])
    span = int((pts.max(axis=0) - pts.min(axis=0)).max(initial=0))
    m = per_axis if per_axis is not None else span + 1
    mean_sq = _periodic_average(pts, diff, m)
    outside = max(sum(p for z, p in F.support.items() if z not in S),
                  sum(p for z, p in H.support.items() if z not in S))
    rhs = float(np.sum(diff ** 2))
    return PlancherelReport(outside + math.sqrt(len(S)) * math.sqrt(mean_sq), outside, mean_sq, mean_sq, rhs)


def parseval_check(dist: LatticeDistribution, per_axis: int) -> tuple[float, float]:
    lhs = _periodic_average(dist.points(), dist.probs(), per_axis)
    return lhs, float(np.sum(dist.probs() ** 2))


def _gaussian_box_pmf(g: GaussianParams, seed: int, budget: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
    """Offset and dense masses of the rounded Gaussian on a box of +-10 sigma."""
    k = g.k
    sd = np.sqrt(np.clip(np.diag(g.cov), 0.0, None))
    lo = np.floor(g.mean - GAUSS_SIGMAS * sd - 1).astype(int)
    hi = np.ceil(g.mean + GAUSS_SIGMAS * sd + 1).astype(int)
    off = g.cov - np.diag(np.diag(g.cov))
    if not np.any(off):
        box = discretized_normal_1d(g.mean[0], g.cov[0, 0], lo[0], hi[0])
        for i in range(1, k):
            box = np.multiply.outer(box, discretized_normal_1d(g.mean[i], g.cov[i, i], lo[i], hi[i]))
        return lo, box / box.sum()
    pts = sample_discretized(g, budget, seed).points
    lo = pts.min(axis=0)
    shape = tuple(pts.max(axis=0) - lo + 1)
    box = np.zeros(shape)
    np.add.at(box, tuple((pts - lo).T), 1.0)
    return lo, box / budget


def hypothesis_gmd_pmf(h: LearnedHypothesis, seed: int = 0) -> LatticeDistribution:
    lo, gbox = _gaussian_box_pmf(h.gaussian, seed)
    total = convolve(gbox, h.sparse.probs, method="direct")
    total = np.clip(total, 0.0, None)
    idx = np.argwhere(total > 1e-15)
    probs = total[tuple(idx.T)]
    return LatticeDistribution.from_arrays(idx + lo, probs / probs.sum())


def hypothesis_pmf(h: LearnedHypothesis, seed: int = 0) -> LatticeDistribution:
    """PMF in PMD coordinates; the last coordinate is n minus the others."""
    g = hypothesis_gmd_pmf(h, seed)
    pts = g.points()
    full = np.hstack([pts, h.n - pts.sum(axis=1, keepdims=True)])
    return LatticeDistribution.from_arrays(full, g.probs())


def sample_hypothesis(h: LearnedHypothesis, count: int, seed: int) -> SampleBatch:
    """Independent draws of the rounded Gaussian and the sparse part, added."""
    rng = np.random.default_rng(seed)
    g = sample_discretized(h.gaussian, count, int(rng.integers(2 ** 63))).points
    flat = h.sparse.probs.reshape(-1)
    cells = rng.choice(len(flat), size=count, p=flat)
    s = np.stack(np.unravel_index(cells, h.sparse.probs.shape), axis=1)
    x = g + s
    full = np.hstack([x, h.n - x.sum(axis=1, keepdims=True)])
    return SampleBatch(full.astype(np.int64), seed)


# ------------------------------------------------------------ tournament


@dataclass(frozen=True)
class TournamentResult:
    index: int
    scores: np.ndarray
    eta: float


def tournament_select(samples: SampleBatch, hypotheses: Sequence[LatticeDistribution], eps: float,
                      delta: float = DEFAULT_DELTA) -> TournamentResult:
    """Minimum-distance Scheffe selection.

    For each pair the Scheffe set is {z : H_i(z) > H_j(z)}; the winner
    minimises its worst gap to the empirical frequency of those sets.
    Failure is declared when even the winner's gap exceeds eps + eta, which
    cannot happen (with probability 1 - delta) if some hypothesis is eps-close.
    """
    N = len(hypotheses)
    if N == 0:
        raise Failure("no hypotheses to select from")
    pts, counts = np.unique(samples.points, axis=0, return_counts=True)
    freq = counts / samples.count
    keys = set()
    for h in hypotheses:
        keys |= set(h.support)
    keys |= set(map(tuple, pts.tolist()))
    keys = sorted(keys)
    index = {key: i for i, key in enumerate(keys)}
    M = np.zeros((N, len(keys)))
    for i, h in enumerate(hypotheses):
        for z, p in h.support.items():
            M[i, index[z]] = p
    emp = np.zeros(len(keys))
    emp[[index[tuple(p)] for p in pts.tolist()]] = freq
    eta = math.sqrt(math.log(2 * max(N * N, 1) / delta) / (2 * samples.count))
    scores = np.zeros(N)
    for i in range(N):
        worst = 0.0
        for j in range(N):
            if i == j:
                continue
            W = M[i] > M[j]
            worst = max(worst, abs(M[i, W].sum() - emp[W].sum()))
        scores[i] = worst
    best = int(np.argmin(scores))
    if scores[best] > eps + eta:
        raise Failure(f"best Scheffe gap {scores[best]:.4g} exceeds {eps + eta:.4g}")
    return TournamentResult(best, scores, eta)


# --------------------------------------------------------------- pipeline


def _split(samples: SampleBatch, holdout: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    order = rng.permutation(samples.count)
    cut = samples.count - max(1, int(round(holdout * samples.count)))
    return samples.points[order[:cut]], samples.points[order[cut:]]


def _guesses(X: np.ndarray, eps: float, r: float, fractions: Sequence[float]):
    """(label, gaussian, sparse mean, sparse cov, T) candidates from the fitting samples."""
    d = X.shape[1]
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / len(X)
    lo = X.min(axis=0)
    T = int((X.max(axis=0) - lo).max())
    yield "sparse", GaussianParams(lo.astype(float), np.zeros((d, d))), mean - lo, cov, T
    shrunk = shrink_covariance(cov, eps)
    for f in fractions:
        cov_S = f * shrunk
        cov_G = cov - cov_S
        if np.linalg.eigvalsh(cov_G).min() < 0 or not np.any(cov_S):
            continue
        T_f = max(1, int(math.ceil(2 * math.sqrt(r * np.linalg.eigvalsh(cov_S).max()))))
        mean_S = np.full(d, T_f / 2.0)
        yield f"split-{f:g}", GaussianParams(mean - mean_S, cov_G), mean_S, cov_S, T_f


def learn_pmd(samples: SampleBatch, k: int, eps: float, config: LearnConfig = LearnConfig()) -> LearnedHypothesis:
    """Fit one candidate per moment guess, then run the tournament on held-out samples."""
    if k < 2 or samples.points.shape[1] != k:
        raise DimensionMismatch("samples must be PMD points with k >= 2 coordinates")
    if samples.count < 10:
        raise TooFewSamples("need at least 10 samples")
    sums = samples.points.sum(axis=1)
    n = int(sums[0])
    if np.any(sums != n):
        raise DimensionMismatch("samples do not share a common row sum")
    d = k - 1
    fit, held = _split(samples, config.holdout, config.seed)
    fit, held = fit[:, :d], held[:, :d]
    r = support_radius(eps, k, config.radius_constant)
    mean = fit.mean(axis=0)
    cov = (fit - mean).T @ (fit - mean) / len(fit)
    shrunk = shrink_covariance(cov, eps)
    candidates = []
    for label, g, mean_S, cov_S, T in _guesses(fit, eps, r, config.fractions):
        try:
            grid = build_grid(shrunk, eps, r, g.cov, config.v2_step, config.grid_cap, config.v1_step)
            est = empirical_fourier(SampleBatch(fit, config.seed), grid.v1, config.delta)
            tol = max(grid.step1, est.half_width) * (2 if np.any(g.cov) else 1)
            sparse = learn_sparse_lp(g, mean_S, cov_S, est, grid, T, tol, config.support_cap)
        except (Infeasible, CapExceeded, LpTooLarge, SolverIterationLimit):
            continue
        candidates.append(LearnedHypothesis(g, sparse, n, {"guess": label, "T": T, "residual": sparse.residual}))
    if not candidates:
        raise NoFeasibleGuess("every moment guess was rejected")
    pmfs = [hypothesis_gmd_pmf(h, config.seed) for h in candidates]
    result = tournament_select(SampleBatch(held, config.seed), pmfs, eps, config.delta)
    winner = candidates[result.index]
    prov = dict(winner.provenance)
    prov.update({"candidates": len(candidates), "score": float(result.scores[result.index])})
    return LearnedHypothesis(winner.gaussian, winner.sparse, n, prov)
