"""Categorical random vectors, their sums and explicit lattice distributions.

A parameter matrix has one row per summand; row ``i`` is the distribution of
the ``i``-th categorical vector over the ``k`` basis directions.  The sum of
the ``n`` independent draws is a vector of counts that adds up to ``n``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    BadC,
    BadPivot,
    DimensionMismatch,
    NegativeEntry,
    RowSumViolation,
    SupportTooLarge,
    ValidationError,
    ZeroDirection,
)

ROW_SUM_TOL = 1e-9
MASS_TOL = 1e-9
PRUNE_BELOW = 1e-15
MAX_MASS_LOSS = 1e-10
DEFAULT_SUPPORT_CAP = 5_000_000


@dataclass(frozen=True)
class PmdParams:
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    @property
    def rows(self) -> list[list[float]]:
        return self.matrix.tolist()

    def to_json(self) -> dict:
        return {"k": self.k, "rows": self.rows}


@dataclass(frozen=True)
class GmdParams:
    """Parameter matrix with the pivot column removed; rows sum to at most 1."""

    matrix: np.ndarray
    pivot: int

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def k(self) -> int:
        return self.matrix.shape[1] + 1

    @property
    def rows(self) -> list[list[float]]:
        return self.matrix.tolist()

    def to_pmd(self) -> PmdParams:
        stay = 1.0 - self.matrix.sum(axis=1, keepdims=True)
        full = np.insert(self.matrix, self.pivot, stay[:, 0], axis=1)
        return PmdParams(np.clip(full, 0.0, 1.0))


@dataclass(frozen=True)
class LatticeDistribution:
    """Finite map from integer points to probabilities."""

    support: Mapping[tuple, float]
    dimension: int

    def __post_init__(self):
        total = 0.0
        for point, p in self.support.items():
            if len(point) != self.dimension:
                raise DimensionMismatch(f"point {point} has wrong dimension")
            if p < 0:
                raise NegativeEntry(f"negative probability at {point}")
            total += p
        if abs(total - 1.0) > MASS_TOL:
            raise ValidationError(f"total mass {total} is not 1")

    @classmethod
    def from_arrays(cls, points: np.ndarray, probs: np.ndarray, tol: float = 0.0):
        points = np.asarray(points, dtype=np.int64)
        support: dict[tuple, float] = {}
        for pt, p in zip(map(tuple, points.tolist()), np.asarray(probs, dtype=float)):
            if p > tol:
                support[pt] = support.get(pt, 0.0) + float(p)
        return cls(support, points.shape[1])

    def points(self) -> np.ndarray:
        keys = sorted(self.support)
        return np.array(keys, dtype=np.int64).reshape(len(keys), self.dimension)

    def probs(self) -> np.ndarray:
        return np.array([self.support[key] for key in sorted(self.support)])

    def prob(self, point: Sequence[int]) -> float:
        return self.support.get(tuple(int(x) for x in point), 0.0)

    def to_records(self) -> list[dict]:
        return [{"point": list(key), "p": self.support[key]} for key in sorted(self.support)]

    @classmethod
    def from_records(cls, records: Iterable[Mapping]):
        records = list(records)
        if not records:
            raise ValidationError("empty distribution")
        support = {}
        for rec in records:
            key = tuple(int(x) for x in rec["point"])
            support[key] = support.get(key, 0.0) + float(rec["p"])
        return cls(support, len(next(iter(support))))


@dataclass(frozen=True)
class SampleBatch:
    points: np.ndarray
    seed: int
    count: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "count", int(self.points.shape[0]))
        self.points.setflags(write=False)

    def to_json(self) -> dict:
        return {"seed": self.seed, "count": self.count, "points": self.points.tolist()}

    @classmethod
    def from_json(cls, data: Mapping) -> "SampleBatch":
        pts = np.asarray(data["points"], dtype=np.int64)
        if pts.ndim != 2:
            raise ValidationError("points must be a list of integer vectors")
        return cls(pts, int(data.get("seed", 0)))


@dataclass(frozen=True)
class Distribution1D:
    """Finitely supported distribution on the real line, values sorted."""

    values: np.ndarray
    probs: np.ndarray

    def cdf(self, x) -> np.ndarray:
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def cdf_left(self, x) -> np.ndarray:
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="left")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    @property
    def mean(self) -> float:
        return float(self.values @ self.probs)

    @property
    def variance(self) -> float:
        return float(((self.values - self.mean) ** 2) @ self.probs)


def validate_params(matrix) -> PmdParams:
    m = np.array(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 2:
        raise DimensionMismatch("parameter matrix must be n x k with n >= 1, k >= 2")
    if not np.all(np.isfinite(m)):
        raise ValidationError("parameter matrix has non-finite entries")
    if np.any(m < 0):
        raise NegativeEntry("parameter matrix has a negative entry")
    sums = m.sum(axis=1)
    bad = np.abs(sums - 1.0) > ROW_SUM_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise RowSumViolation(f"row {i} sums to {sums[i]!r}")
    return PmdParams(m)


def params_from_json(data: Mapping) -> PmdParams:
    try:
        rows = data["rows"]
        k = int(data["k"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed parameter JSON: {exc}") from exc
    params = validate_params(rows)
    if params.k != k:
        raise DimensionMismatch(f"declared k={k} but rows have length {params.k}")
    return params


def _support_bound(n: int, d: int) -> int:
    return (n + 1) ** d


def gmd_dense_pmf(matrix: np.ndarray, cap: int = DEFAULT_SUPPORT_CAP) -> tuple[np.ndarray, float]:
    """Dense PMF of a GMD over the cube {0..n}^d plus the pruned mass.

    Rows are folded in one at a time; entries below ``PRUNE_BELOW`` are
    dropped after each step and their total is returned.
    """
    matrix = np.asarray(matrix, dtype=float)
    n, d = matrix.shape
    if d == 0:
        return np.ones(()), 0.0
    if _support_bound(n, d) > cap:
        raise SupportTooLarge(f"support bound (n+1)^{d} = {_support_bound(n, d)} exceeds cap {cap}")
    pmf = np.zeros((n + 1,) * d)
    pmf[(0,) * d] = 1.0
    lost = 0.0
    for i, row in enumerate(matrix):
        stay = max(0.0, 1.0 - float(row.sum()))
        # only the cube {0..i}^d can be occupied before this row
        live = tuple(slice(0, i + 1) for _ in range(d))
        cur = pmf[live].copy()
        grow = tuple(slice(0, i + 2) for _ in range(d))
        nxt = np.zeros((i + 2,) * d)
        nxt[tuple(slice(0, i + 1) for _ in range(d))] += stay * cur
        for j, q in enumerate(row):
            if q == 0.0:
                continue
            target = [slice(0, i + 1)] * d
            target[j] = slice(1, i + 2)
            nxt[tuple(target)] += q * cur
        small = nxt < PRUNE_BELOW
        lost += float(nxt[small].sum())
        nxt[small] = 0.0
        pmf[grow] = nxt
    return pmf, lost


def _dense_to_lattice(pmf: np.ndarray, n: int, pivot: int, k: int) -> LatticeDistribution:
    idx = np.argwhere(pmf > 0)
    probs = pmf[tuple(idx.T)]
    pivot_vals = n - idx.sum(axis=1)
    full = np.insert(idx, pivot, pivot_vals, axis=1)
    return LatticeDistribution.from_arrays(full, probs)


def exact_pmf(params: PmdParams, cap: int = DEFAULT_SUPPORT_CAP) -> LatticeDistribution:
    """PMF of the sum of the categorical rows, by sequential convolution."""
    pivot = params.k - 1
    pmf, lost = gmd_dense_pmf(np.delete(params.matrix, pivot, axis=1), cap)
    if lost > MAX_MASS_LOSS:
        raise ValidationError(f"pruned mass {lost} exceeds {MAX_MASS_LOSS}")
    return _dense_to_lattice(pmf, params.n, pivot, params.k)


def gmd_pmf(gmd: GmdParams, cap: int = DEFAULT_SUPPORT_CAP) -> LatticeDistribution:
    """PMF of a GMD on its k-1 retained coordinates."""
    pmf, lost = gmd_dense_pmf(gmd.matrix, cap)
    if lost > MAX_MASS_LOSS:
        raise ValidationError(f"pruned mass {lost} exceeds {MAX_MASS_LOSS}")
    idx = np.argwhere(pmf > 0)
    return LatticeDistribution.from_arrays(idx, pmf[tuple(idx.T)])


def sample_pmd(params: PmdParams, count: int, seed: int) -> SampleBatch:
    """Draw ``count`` i.i.d. PMD samples with a PCG64 generator seeded by ``seed``."""
    if count < 1:
        raise ValidationError("count must be positive")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(params.matrix, axis=1)
    cum[:, -1] = 1.0
    points = np.zeros((count, params.k), dtype=np.int64)
    rows = np.arange(count)
    for i in range(params.n):
        u = rng.random(count)
        choice = np.searchsorted(cum[i], u, side="right")
        np.minimum(choice, params.k - 1, out=choice)
        points[rows, choice] += 1
    return SampleBatch(points, seed)


def tv_distance(a: LatticeDistribution, b: LatticeDistribution) -> float:
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"dimensions {a.dimension} and {b.dimension} differ")
    keys = set(a.support) | set(b.support)
    total = sum(abs(a.support.get(x, 0.0) - b.support.get(x, 0.0)) for x in keys)
    return min(1.0, 0.5 * total)


def project_direction(dist: LatticeDistribution, v: Sequence[float]) -> Distribution1D:
    v = np.asarray(v, dtype=float)
    if v.shape != (dist.dimension,):
        raise DimensionMismatch("direction has wrong length")
    if not np.any(v):
        raise ZeroDirection("direction must be nonzero")
    vals = dist.points() @ v
    probs = dist.probs()
    # group values that agree to 12 decimals so atoms merge
    keys = np.round(vals, 12)
    uniq, inv = np.unique(keys, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inv, probs)
    return Distribution1D(uniq + 0.0, merged)


CdfLike = Union[Distribution1D, Callable[[np.ndarray], np.ndarray]]


def kolmogorov_distance_1d(a: CdfLike, b: CdfLike, grid: Sequence[float] | None = None) -> float:
    """Sup distance between two CDFs.

    Discrete inputs are compared at every atom, including the left limits,
    so the supremum is exact when at least one side is discrete.  Two
    continuous CDFs need an explicit ``grid``.
    """
    atoms = []
    for side in (a, b):
        if isinstance(side, Distribution1D):
            atoms.append(side.values)
    if grid is not None:
        atoms.append(np.asarray(grid, dtype=float))
    if not atoms:
        raise ValidationError("two continuous CDFs need an evaluation grid")
    xs = np.unique(np.concatenate(atoms))

    def right(side):
        return side.cdf(xs) if isinstance(side, Distribution1D) else np.asarray(side(xs), dtype=float)

    def left(side):
        return side.cdf_left(xs) if isinstance(side, Distribution1D) else np.asarray(side(xs), dtype=float)

    gap = np.max(np.abs(right(a) - right(b)))
    gap = max(gap, np.max(np.abs(left(a) - left(b))))
    return float(gap)


def gmd_from_pmd(params: PmdParams, pivot: int) -> GmdParams:
    if not 0 <= pivot < params.k:
        raise BadPivot(f"pivot {pivot} outside [0,{params.k})")
    return GmdParams(np.delete(params.matrix, pivot, axis=1), pivot)


def round_params(params: PmdParams, c: float) -> PmdParams:
    """Zero every entry in (0, c) and move that mass to the row's largest entry."""
    if not 0 < c <= 1.0 / (2 * params.k):
        raise BadC(f"c={c} must lie in (0, 1/(2k)] = (0, {1.0 / (2 * params.k)}]")
    m = params.matrix.copy()
    for row in m:
        small = (row > 0) & (row < c)
        if not np.any(small):
            continue
        moved = row[small].sum()
        row[small] = 0.0
        row[int(np.argmax(row))] += moved
    return PmdParams(m)


def rounding_tv_bound(c: float, k: int) -> float:
    """Bound 10 * sqrt(c) * k^2.5 * sqrt(log(1/(ck))) on the rounding error."""
    return 10.0 * math.sqrt(c) * k ** 2.5 * math.sqrt(max(0.0, math.log(1.0 / (c * k))))


def round_params_report(params: PmdParams, c: float, cap: int = DEFAULT_SUPPORT_CAP) -> dict:
    rounded = round_params(params, c)
    tv = tv_distance(exact_pmf(params, cap), exact_pmf(rounded, cap))
    return {"params": rounded, "tv": tv, "bound": rounding_tv_bound(c, params.k)}


def dumps(obj) -> str:
    """Canonical JSON used for every report so equal inputs give equal bytes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
