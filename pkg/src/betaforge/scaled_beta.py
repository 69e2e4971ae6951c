"""Scaled Beta distributions on a price interval [min, max].

Density, mean, the closed-form median approximation, a quadrature-based
numeric median, sampling, and the mean/median estimator that recovers the
two shape parameters from four summary statistics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

EPS_QS = 1e-9
SHAPE_CAP = 1e6


class ErrorKind(str, enum.Enum):
    ZERO_RANGE = "ZeroRange"
    STATS_OUT_OF_ORDER = "StatsOutOfOrder"
    SYMMETRIC_UNDERDETERMINED = "SymmetricUnderdetermined"
    INCONSISTENT_STATS = "InconsistentStats"
    OUT_OF_DOMAIN = "OutOfDomain"


class EstimationError(ValueError):
    """Raised when summary statistics cannot be turned into valid shapes."""

    def __init__(self, kind: ErrorKind, message: str = ""):
        self.kind = ErrorKind(kind)
        super().__init__(f"{self.kind.value}: {message}" if message else self.kind.value)


@dataclass(frozen=True)
class SummaryStats:
    min_price: float
    max_price: float
    mean_price: float
    median_price: float

    @property
    def is_degenerate(self) -> bool:
        return self.max_price == self.min_price

    def check_order(self) -> None:
        lo, hi = self.min_price, self.max_price
        if not (lo <= self.median_price <= hi and lo <= self.mean_price <= hi):
            raise EstimationError(
                ErrorKind.STATS_OUT_OF_ORDER,
                f"need min <= mean, median <= max, got {self}",
            )


@dataclass(frozen=True)
class ScaledStats:
    s: float  # scaled mean
    q: float  # scaled median


@dataclass(frozen=True)
class ScaledBetaParams:
    alpha: float
    beta: float
    support_min: float = 0.0
    support_max: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"shapes must be positive, got {self.alpha}, {self.beta}")
        if not math.isfinite(self.alpha) or not math.isfinite(self.beta):
            raise ValueError("shapes must be finite")
        if not self.support_max > self.support_min:
            raise ValueError("support_max must exceed support_min")

    @property
    def width(self) -> float:
        return self.support_max - self.support_min


def scale_stats(stats: SummaryStats) -> ScaledStats:
    """Map mean and median onto [0, 1] using the observed min/max."""
    if stats.is_degenerate:
        raise EstimationError(ErrorKind.ZERO_RANGE, "max equals min")
    stats.check_order()
    width = stats.max_price - stats.min_price
    s = (stats.mean_price - stats.min_price) / width
    q = (stats.median_price - stats.min_price) / width
    for name, v in (("mean", s), ("median", q)):
        if v <= 0.0 or v >= 1.0:
            raise EstimationError(ErrorKind.OUT_OF_DOMAIN, f"scaled {name} on boundary: {v}")
    return ScaledStats(s=s, q=q)


def estimate_alpha_beta(
    scaled: ScaledStats,
    support: tuple[float, float] = (0.0, 1.0),
    eps: float = EPS_QS,
    cap: float = SHAPE_CAP,
) -> ScaledBetaParams:
    """Solve the mean equation and the approximate median equation for (alpha, beta).

    alpha = s(2q-1) / (3(q-s)),  beta = (1-s)(2q-1) / (3(q-s)).
    """
    s, q = scaled.s, scaled.q
    if not (0.0 < s < 1.0 and 0.0 < q < 1.0):
        raise EstimationError(ErrorKind.OUT_OF_DOMAIN, f"s={s}, q={q} outside (0, 1)")
    d = q - s
    if abs(d) < eps:
        if abs(q - 0.5) < eps:
            raise EstimationError(ErrorKind.SYMMETRIC_UNDERDETERMINED, "mean == median == midpoint")
        raise EstimationError(ErrorKind.INCONSISTENT_STATS, f"mean == median but q={q} != 0.5")
    num = 2.0 * q - 1.0
    alpha = s * num / (3.0 * d)
    beta = (1.0 - s) * num / (3.0 * d)
    if not (alpha > 0.0 and beta > 0.0) or not (math.isfinite(alpha) and math.isfinite(beta)):
        raise EstimationError(ErrorKind.OUT_OF_DOMAIN, f"non-positive shapes from s={s}, q={q}")
    return ScaledBetaParams(min(alpha, cap), min(beta, cap), support[0], support[1])


def estimate_from_stats(stats: SummaryStats, **kwargs) -> ScaledBetaParams:
    return estimate_alpha_beta(
        scale_stats(stats), support=(stats.min_price, stats.max_price), **kwargs
    )


def beta_mean(params: ScaledBetaParams) -> float:
    a, b = params.alpha, params.beta
    return params.support_min + a / (a + b) * params.width


def beta_median_approx(params: ScaledBetaParams) -> float:
    a, b = params.alpha, params.beta
    return params.support_min + params.width * (a - 1.0 / 3.0) / (a + b - 2.0 / 3.0)


def forward_stats(params: ScaledBetaParams) -> SummaryStats:
    """Summary statistics implied by ``params`` (mean exact, median approximate)."""
    return SummaryStats(
        min_price=params.support_min,
        max_price=params.support_max,
        mean_price=beta_mean(params),
        median_price=beta_median_approx(params),
    )


def _log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def pdf(params: ScaledBetaParams, x: float) -> float:
    """Density at ``x``; zero outside the support.

    At an endpoint the limit is returned: ``inf`` where the matching shape is
    below one, zero where it is above one.
    """
    lo, hi, w = params.support_min, params.support_max, params.width
    a, b = params.alpha, params.beta
    if x < lo or x > hi:
        return 0.0
    if x == lo or x == hi:
        shape = a if x == lo else b
        other = b if x == lo else a
        if shape < 1.0:
            return math.inf
        if shape > 1.0:
            return 0.0
        # shape == 1: (w)^(other-1) / w^(a+b-1) / B = 1 / (w B)
        return math.exp(-_log_beta(a, b)) / w
    log_f = (
        (a - 1.0) * math.log(x - lo)
        + (b - 1.0) * math.log(hi - x)
        - (a + b - 1.0) * math.log(w)
        - _log_beta(a, b)
    )
    return math.exp(log_f)


def _unit_cdf(a: float, b: float, t: float) -> float:
    # algebraic weights absorb the endpoint singularities of t^(a-1)(1-t)^(b-1)
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    if t > 0.5:
        return 1.0 - _unit_cdf(b, a, 1.0 - t)
    val, _ = integrate.quad(
        lambda u: (1.0 - u) ** (b - 1.0),
        0.0,
        t,
        weight="alg",
        wvar=(a - 1.0, 0.0),
        epsabs=1e-14,
        epsrel=1e-12,
        limit=200,
    )
    return min(1.0, max(0.0, val * math.exp(-_log_beta(a, b))))


def cdf(params: ScaledBetaParams, x: float) -> float:
    """CDF by adaptive quadrature of the density."""
    t = (x - params.support_min) / params.width
    return _unit_cdf(params.alpha, params.beta, t)


def numeric_median(params: ScaledBetaParams, tol: float = 1e-10) -> float:
    """Median by bisection on the quadrature CDF, to ``tol`` in price units."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = params.support_min, params.support_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cdf(params, mid) < 0.5:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sample(params: ScaledBetaParams, count: int, seed: int, tol: float = 1e-12) -> np.ndarray:
    """Inverse-CDF samples: vectorized bisection on the regularized incomplete Beta."""
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    lo = np.zeros(count)
    hi = np.ones(count)
    a, b = params.alpha, params.beta
    n_iter = int(math.ceil(math.log2(1.0 / tol)))
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = special.betainc(a, b, mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    t = 0.5 * (lo + hi)
    return params.support_min + params.width * t
