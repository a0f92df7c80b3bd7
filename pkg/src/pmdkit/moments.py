"""Means, covariances and multisymmetric polynomial identities of PMDs."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import AlphaTooLarge, DimensionMismatch, NotPSD, TooFewSamples
from .pmd_core import LatticeDistribution, PmdParams, SampleBatch

SYM_TOL = 1e-10
PSD_TOL = -1e-8

# Frozen constant C in sum_beta |gamma_beta| <= 2^(C k) prod_j alpha_j!.
# Calibrated over every alpha with |alpha|_1 <= 6 and 2 <= k <= 4; the worst
# case is alpha = (6, 0), ratio 4683/720 = 6.504, giving C = log2(6.504)/2 = 1.350.
COEFF_BOUND_CONSTANT = 1.36


@dataclass(frozen=True)
class MomentProfile:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (len(self.mean), len(self.mean)):
            raise DimensionMismatch("covariance shape does not match mean")
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYM_TOL:
            raise NotPSD("covariance is not symmetric")
        if len(cov) and np.linalg.eigvalsh((cov + cov.T) / 2).min() < PSD_TOL:
            raise NotPSD("covariance has a negative eigenvalue")

    @property
    def k(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph on k nodes stored as a symmetric zero-diagonal weight matrix."""

    weights: np.ndarray

    def laplacian(self) -> np.ndarray:
        w = self.weights
        return np.diag(w.sum(axis=1)) - w

    def edges(self) -> list[tuple[int, int, float]]:
        k = len(self.weights)
        return [(i, j, float(self.weights[i, j])) for i in range(k) for j in range(i + 1, k) if self.weights[i, j] > 0]


def mean_cov(params: PmdParams) -> MomentProfile:
    p = params.matrix
    mean = p.sum(axis=0)
    cov = np.diag(mean) - p.T @ p
    return MomentProfile(mean, cov)


def laplacian_graph(params: PmdParams) -> WeightedGraph:
    w = params.matrix.T @ params.matrix
    np.fill_diagonal(w, 0.0)
    return WeightedGraph(w)


def raw_moment(dist: LatticeDistribution, alpha: Sequence[int]) -> float:
    alpha = np.asarray(alpha, dtype=int)
    if alpha.shape != (dist.dimension,):
        raise DimensionMismatch("multi-index length differs from the dimension")
    pts = dist.points().astype(float)
    return float(dist.probs() @ np.prod(pts ** alpha, axis=1))


def _as_alpha(matrix: np.ndarray, alpha: Sequence[int]) -> tuple[np.ndarray, tuple[int, ...]]:
    m = np.asarray(matrix, dtype=float)
    a = tuple(int(x) for x in alpha)
    if len(a) == m.shape[1] + 1 and a[-1] == 0:
        a = a[:-1]
    if len(a) != m.shape[1]:
        raise DimensionMismatch(f"multi-index of length {len(alpha)} for {m.shape[1]} columns")
    if any(x < 0 for x in a):
        raise DimensionMismatch("multi-index entries must be nonnegative")
    return m, a


def _matrix_of(P) -> np.ndarray:
    return P.matrix if hasattr(P, "matrix") else np.asarray(P, dtype=float)


def elementary_multisym(P, alpha: Sequence[int]) -> float:
    """Coefficient of prod_j t_j^alpha_j in prod_i (1 + sum_j t_j P[i, j])."""
    m, a = _as_alpha(_matrix_of(P), alpha)
    if sum(a) > m.shape[0]:
        raise AlphaTooLarge(f"|alpha| = {sum(a)} exceeds the {m.shape[0]} rows")
    active = [j for j, x in enumerate(a) if x > 0]
    dims = tuple(a[j] + 1 for j in active)
    coef = np.zeros(dims)
    coef[(0,) * len(dims)] = 1.0
    for row in m:
        nxt = coef.copy()
        for axis, j in enumerate(active):
            src = [slice(None)] * len(dims)
            dst = [slice(None)] * len(dims)
            src[axis] = slice(0, dims[axis] - 1)
            dst[axis] = slice(1, dims[axis])
            nxt[tuple(dst)] += row[j] * coef[tuple(src)]
        coef = nxt
    return float(coef[tuple(d - 1 for d in dims)])


def power_sum(P, alpha: Sequence[int]) -> float:
    m, a = _as_alpha(_matrix_of(P), alpha)
    terms = np.ones(m.shape[0])
    for j, x in enumerate(a):
        if x:
            terms *= m[:, j] ** x
    return float(terms.sum())


def multinomial(alpha: Sequence[int]) -> int:
    out = math.factorial(sum(alpha))
    for x in alpha:
        out //= math.factorial(x)
    return out


def _sub_indices(alpha: tuple[int, ...]):
    return itertools.product(*(range(x + 1) for x in alpha))


def dalbec_residual(P, alpha: Sequence[int]) -> float:
    """Left side of the Newton-type identity linking E_alpha and P_alpha."""
    m, a = _as_alpha(_matrix_of(P), alpha)
    norm = sum(a)
    if norm < 1:
        raise AlphaTooLarge("the identity needs |alpha| >= 1")
    total = norm * (elementary_multisym(m, a) if norm <= m.shape[0] else 0.0)
    for beta in _sub_indices(a):
        gamma = tuple(x - y for x, y in zip(a, beta))
        nb, ng = sum(beta), sum(gamma)
        if nb == 0 or ng == 0:
            continue
        e_gamma = elementary_multisym(m, gamma) if ng <= m.shape[0] else 0.0
        total += (-1) ** nb * multinomial(beta) * power_sum(m, beta) * e_gamma
    total += (-1) ** norm * multinomial(a) * power_sum(m, a)
    return float(total)


@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


def moment_elementary_coeffs(alpha: Sequence[int]) -> dict[tuple[int, ...], int]:
    """Integer coefficients gamma with M_alpha = sum_beta gamma_beta E_beta.

    Each coordinate power expands into falling factorials,
    z^a = sum_b S(a, b) b! C(z, b), and a product of binomials of disjoint
    row sets has expectation E_beta.
    """
    a = tuple(int(x) for x in alpha)
    ranges = [range(1, x + 1) if x > 0 else range(0, 1) for x in a]
    out = {}
    for beta in itertools.product(*ranges):
        g = 1
        for x, y in zip(a, beta):
            g *= stirling2(x, y) * math.factorial(y)
        out[beta] = g
    return out


def moment_from_elementary(P, alpha: Sequence[int]) -> float:
    m = _matrix_of(P)
    a = tuple(int(x) for x in alpha)
    if len(a) == m.shape[1] + 1 and a[-1] == 0:
        a = a[:-1]
    total = 0.0
    for beta, g in moment_elementary_coeffs(a).items():
        if sum(beta) <= m.shape[0]:
            total += g * elementary_multisym(m, beta)
    return total


def coeff_bound_ratio(alpha: Sequence[int]) -> float:
    """sum_beta |gamma_beta| divided by prod_j alpha_j!."""
    coeffs = moment_elementary_coeffs(alpha)
    lead = math.prod(math.factorial(x) for x in alpha)
    return sum(abs(g) for g in coeffs.values()) / lead


def coeff_bound(alpha: Sequence[int], k: int, constant: float = COEFF_BOUND_CONSTANT) -> float:
    return 2.0 ** (constant * k) * math.prod(math.factorial(x) for x in alpha)


def tv_lower_bound_from_moment_gap(m: int, alpha: Sequence[int], delta: float) -> float:
    if delta < 0 or m < 1:
        raise DimensionMismatch("need delta >= 0 and m >= 1")
    return delta * float(m) ** (-sum(alpha))


def empirical_moments(samples: SampleBatch) -> MomentProfile:
    if samples.count < 2:
        raise TooFewSamples("need at least two samples")
    x = samples.points.astype(float)
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, ddof=1).reshape(x.shape[1], x.shape[1])
    return MomentProfile(mean, (cov + cov.T) / 2)
