"""Explicit-constant CLT bounds and an empirical harness comparing a PMD with
the discretized Gaussian that matches its first two moments."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import BadOrder, PremiseViolated, SupportTooLarge, ZeroVariance
from .gaussian import GaussianParams, discretized_normal_1d, min_eigenvalue, sample_discretized
from .moments import mean_cov
from .pmd_core import (
    DEFAULT_SUPPORT_CAP,
    Distribution1D,
    PmdParams,
    gmd_dense_pmf,
    kolmogorov_distance_1d,
    sample_pmd,
    validate_params,
)

BERRY_ESSEEN_CONSTANT = 0.56
EXACT_FLOOR = 1e-12
TAIL_SIGMAS = 12.0


@dataclass(frozen=True)
class CltReport:
    k: int
    n: int
    sigma2: float
    empirical_tv: float
    half_width: float
    size_free_bound: float
    vv_bound: float
    mc_budget: int
    seed: int
    method: str
    C: float = 1.0

    def to_json(self) -> dict:
        return asdict(self)


def size_free_bound(k: int, sigma: float, C: float = 1.0) -> float:
    if sigma <= 0:
        raise ZeroVariance("sigma must be positive")
    return min(1.0, C * k ** 3.5 * sigma ** -0.1)


def _vv_raw(k: int, sigma: float, n: int) -> float:
    return k ** (4.0 / 3.0) * sigma ** (-1.0 / 3.0) * 2.2 * (3.1 + 0.83 * math.log(n)) ** (2.0 / 3.0)


def vv_bound(k: int, sigma: float, n: int) -> float:
    """Valiant-Valiant bound with natural logarithm, capped at 1."""
    if sigma <= 0 or n < 1:
        raise ZeroVariance("need sigma > 0 and n >= 1")
    return min(1.0, _vv_raw(k, sigma, n))


def crossover_sigma(k: int, n: int, C: float = 1.0) -> float:
    """sigma at which the uncapped size-free and VV bounds coincide.

    Their ratio size_free / vv grows like sigma^(7/30), so the VV bound is
    the smaller one for every sigma beyond the returned value.
    """
    ratio = k ** (4.0 / 3.0) * 2.2 * (3.1 + 0.83 * math.log(n)) ** (2.0 / 3.0) / (C * k ** 3.5)
    return ratio ** (30.0 / 7.0)


def berry_esseen_bound(sigmas2: Sequence[float], rhos: Sequence[float]) -> float:
    total = float(np.sum(sigmas2))
    if total <= 0:
        raise ZeroVariance("total variance must be positive")
    return BERRY_ESSEEN_CONSTANT * float(np.sum(rhos)) / total ** 1.5


def bernoulli_moments(p: float) -> tuple[float, float]:
    """Variance and third absolute central moment of a Bernoulli(p)."""
    var = p * (1 - p)
    return var, var * (p * p + (1 - p) ** 2)


def binomial_dk(n: int, p: float) -> float:
    """Exact Kolmogorov distance between centered Binomial(n, p) and its normal match."""
    var = n * p * (1 - p)
    support = np.arange(n + 1)
    dist = Distribution1D(support - n * p, stats.binom.pmf(support, n, p))
    return kolmogorov_distance_1d(dist, lambda x: stats.norm.cdf(x, scale=math.sqrt(var)))


def projection_dk_bounds(kind: str, k: int, sigma: float) -> float:
    if sigma <= 0:
        raise ZeroVariance("sigma must be positive")
    if kind == "gmd":
        return 1.0 / sigma
    if kind == "discretized":
        return math.sqrt(k) / (math.sqrt(2 * math.pi) * sigma)
    raise ValueError(f"unknown kind {kind!r}")


def variance_gap_lb(sigma_x: float, sigma_y: float) -> float:
    if not 0 <= sigma_y < sigma_x:
        raise BadOrder("need 0 <= sigma_y < sigma_x")
    return max(0.0, 0.5 - (sigma_y / sigma_x) ** (2.0 / 3.0))


def sparse_shift_bound(m: int, k: int, sigma: float) -> float:
    if sigma <= 0 or m < 0:
        raise ZeroVariance("need sigma > 0 and m >= 0")
    return m * math.sqrt(k) / (math.sqrt(2 * math.pi) * sigma)


def param_closeness(kind: str, **inputs) -> dict:
    """Mean/variance closeness implied by a small Kolmogorov or TV distance."""
    if kind == "univariate":
        alpha, sigma1 = inputs["alpha"], inputs["sigma1"]
        if not 0 < alpha < 1:
            raise PremiseViolated("alpha must lie in (0, 1)")
        return {"mean": alpha * sigma1, "variance": 3 * alpha * sigma1 ** 2}
    if kind == "kd":
        alpha, k, sigma, sigma_v = inputs["alpha"], inputs["k"], inputs["sigma"], inputs["sigma_v"]
        slack = alpha + 2 * math.sqrt(k) / sigma
        if slack > 0.1:
            raise PremiseViolated(f"alpha + 2 sqrt(k)/sigma = {slack} exceeds 1/10")
        return {"mean": 10 * slack * sigma_v, "covariance": 30 * slack * sigma_v ** 2}
    raise ValueError(f"unknown kind {kind!r}")


def _exact_gaussian_box(mean: np.ndarray, var: np.ndarray, n: int) -> tuple[np.ndarray, list[int], float]:
    """Product of exact 1-d cell masses on a box that contains {0..n}^d."""
    los, masses, inside = [], [], 1.0
    for mu, v in zip(mean, var):
        s = math.sqrt(max(v, 0.0))
        lo = int(min(0, math.floor(mu - TAIL_SIGMAS * s) - 1))
        hi = int(max(n, math.ceil(mu + TAIL_SIGMAS * s) + 1))
        m = discretized_normal_1d(mu, v, lo, hi)
        los.append(lo)
        masses.append(m)
        inside *= float(m.sum())
    box = masses[0]
    for m in masses[1:]:
        box = np.multiply.outer(box, m)
    return box, los, max(0.0, 1.0 - inside)


def _histogram(points: np.ndarray) -> dict:
    uniq, counts = np.unique(points, axis=0, return_counts=True)
    total = counts.sum()
    return {tuple(u): c / total for u, c in zip(uniq.tolist(), counts)}


def _mc_tv(p: dict, q_hat: dict, budget: int, delta: float) -> tuple[float, float]:
    keys = set(p) | set(q_hat)
    tv = 0.5 * float(sum(abs(p.get(x, 0.0) - q_hat.get(x, 0.0)) for x in keys))
    spread = 0.5 * sum(math.sqrt(q / budget) for q in q_hat.values())
    return tv, spread + math.sqrt(math.log(2.0 / delta) / (2.0 * budget))


def clt_experiment(params: PmdParams, mc_budget: int = 100_000, seed: int = 0, C: float = 1.0,
                   cap: int = DEFAULT_SUPPORT_CAP, delta: float = 0.05) -> CltReport:
    """TV between a PMD and the rounded Gaussian with the same mean and covariance.

    The last coordinate is the pivot, so both sides live on the remaining
    k-1 coordinates.  Diagonal covariances (always the case for k=2) use
    exact cell masses; otherwise the Gaussian side is sampled.
    """
    k, n = params.k, params.n
    prof = mean_cov(params)
    mean = prof.mean[:-1]
    cov = prof.cov[:-1, :-1]
    sigma2 = max(0.0, min_eigenvalue(cov))
    sigma = math.sqrt(sigma2)
    sf = size_free_bound(k, sigma, C) if sigma > 0 else 1.0
    vv = vv_bound(k, sigma, n) if sigma > 0 else 1.0

    try:
        pmf, lost = gmd_dense_pmf(params.matrix[:, :-1], cap)
    except SupportTooLarge:
        pmf = None
    if pmf is None:
        p_hat = _histogram(sample_pmd(params, mc_budget, seed + 1).points[:, :-1])
        q_hat = _histogram(sample_discretized(GaussianParams(mean, cov), mc_budget, seed).points)
        tv_a, hw_a = _mc_tv(p_hat, q_hat, mc_budget, delta / 2)
        _, hw_b = _mc_tv(q_hat, p_hat, mc_budget, delta / 2)
        return CltReport(k, n, sigma2, min(1.0, tv_a), hw_a + hw_b, sf, vv, mc_budget, seed, "sampled", C)

    diagonal = not np.any(cov - np.diag(np.diag(cov)))
    if diagonal:
        box, los, outside = _exact_gaussian_box(mean, np.diag(cov), n)
        sl = tuple(slice(-lo, -lo + n + 1) for lo in los)
        diff = box.copy()
        diff[sl] -= pmf
        tv = 0.5 * (float(np.abs(diff).sum()) + outside)
        return CltReport(k, n, sigma2, min(1.0, tv), EXACT_FLOOR + lost, sf, vv, mc_budget, seed, "exact", C)

    idx = np.argwhere(pmf > 0)
    p = {tuple(i): float(pmf[tuple(i)]) for i in idx.tolist()}
    q_hat = _histogram(sample_discretized(GaussianParams(mean, cov), mc_budget, seed).points)
    tv, hw = _mc_tv(p, q_hat, mc_budget, delta)
    return CltReport(k, n, sigma2, min(1.0, tv), hw, sf, vv, mc_budget, seed, "mc", C)


def fair_binomial(n: int, p: float = 0.5) -> PmdParams:
    return validate_params(np.tile([p, 1.0 - p], (n, 1)))


def clt_sweep(ns: Sequence[int], p: float = 0.5, mc_budget: int = 100_000, seed: int = 0,
              C: float = 1.0) -> list[CltReport]:
    return [clt_experiment(fair_binomial(n, p), mc_budget, seed, C) for n in ns]


SWEEP_FIELDS = ["n", "k", "sigma2", "empirical_tv", "half_width", "size_free_bound", "vv_bound",
                "mc_budget", "seed", "method"]


def sweep_csv(reports: Sequence[CltReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        row = r.to_json()
        writer.writerow({f: (repr(row[f]) if isinstance(row[f], float) else row[f]) for f in SWEEP_FIELDS})
    return buf.getvalue()
