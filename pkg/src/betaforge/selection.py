"""Split-feature selection probabilities under the score-proportional model.

A node draws ``m`` of the features uniformly without replacement and the
winner is picked with probability proportional to its score. This module
gives the exact enumeration, the closed-form approximation, a Monte Carlo
check, the dilution odds for two features, and the zero-variance planner.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

MAX_ENUMERATION = 25


@dataclass(frozen=True)
class ScoreProfile:
    scores: tuple[float, ...]  # informative scores; zero-variance ones are appended
    m: int
    n_zv: int = 0

    def __post_init__(self):
        r = np.asarray(self.scores, dtype=np.float64)
        if r.ndim != 1 or r.size == 0:
            raise ValueError("scores must be a non-empty vector")
        if (r < 0).any() or not (r > 0).any():
            raise ValueError("scores must be non-negative with at least one positive")
        if self.n_zv < 0:
            raise ValueError("n_zv must be non-negative")
        if not 1 <= self.m <= self.n_total:
            raise ValueError(f"m={self.m} must lie in [1, {self.n_total}]")

    @property
    def n(self) -> int:
        return len(self.scores)

    @property
    def n_total(self) -> int:
        return len(self.scores) + self.n_zv

    def all_scores(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.scores, float), np.zeros(self.n_zv)])


def exact_selection_probs(profile: ScoreProfile) -> np.ndarray:
    """Average of r_j / sum_S r over every m-subset S, by enumeration.

    A subset whose scores are all zero splits its win uniformly.
    """
    n = profile.n_total
    if n > MAX_ENUMERATION:
        raise ValueError(f"enumeration limited to {MAX_ENUMERATION} features, got {n}")
    r = profile.all_scores()
    m = profile.m
    acc = np.zeros(n)
    n_subsets = 0
    for subset in itertools.combinations(range(n), m):
        s = list(subset)
        total = r[s].sum()
        if total > 0:
            acc[s] += r[s] / total
        else:
            acc[s] += 1.0 / m
        n_subsets += 1
    return acc / n_subsets


def approx_selection_probs(profile: ScoreProfile) -> np.ndarray:
    """(m / n_eff) r_j / (r_j + (m-1) r_mean), r_mean over all n_eff scores."""
    r = profile.all_scores()
    n_eff = profile.n_total
    m = profile.m
    r_mean = r.mean()
    return (m / n_eff) * r / (r + (m - 1) * r_mean)


@dataclass(frozen=True)
class MonteCarloResult:
    probs: np.ndarray
    stderr: np.ndarray
    trials: int


def monte_carlo_selection(
    profile: ScoreProfile,
    trials: int,
    seed: int,
    block: int = 100_000,
) -> MonteCarloResult:
    """Simulate candidate draws and score-proportional winners.

    Trials run in blocks, each with its own seed derived from ``seed`` and the
    block index, so the result does not depend on how blocks are scheduled.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    r = profile.all_scores()
    n, m = r.size, profile.m
    wins = np.zeros(n, dtype=np.int64)
    done = 0
    for b in itertools.count():
        if done >= trials:
            break
        k = min(block, trials - done)
        rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
        subsets = np.argsort(rng.random((k, n)), axis=1)[:, :m]
        sr = r[subsets]
        totals = sr.sum(axis=1)
        # rows with all-zero scores pick uniformly
        zero = totals == 0
        weights = np.where(zero[:, None], 1.0, sr)
        cum = np.cumsum(weights, axis=1)
        u = rng.random(k) * cum[:, -1]
        pos = (cum <= u[:, None]).sum(axis=1)
        pos = np.minimum(pos, m - 1)
        winners = subsets[np.arange(k), pos]
        wins += np.bincount(winners, minlength=n)
        done += k
    p = wins / trials
    se = np.sqrt(p * (1.0 - p) / trials)
    return MonteCarloResult(p, se, trials)


@dataclass(frozen=True)
class DilutionReport:
    a: float
    b: float
    m: int
    r_bar: float
    n: int
    n_zv: int
    K: float
    K_t: float
    odds_before: float
    odds_after: float


def odds_ratio(a: float, b: float, K: float) -> float:
    return (a / b) * (b + K) / (a + K)


def dilution_odds(a: float, b: float, m: int, r_bar: float, n: int, n_zv: int) -> DilutionReport:
    """Selection odds of a stronger (a) over a weaker (b) feature, before and after dilution."""
    if not a > b:
        raise ValueError("need a > b")
    if not b > 0:
        raise ValueError("need b > 0")
    if m < 2:
        raise ValueError("need m >= 2")
    if n < 1 or n_zv < 0:
        raise ValueError("need n >= 1 and n_zv >= 0")
    K = (m - 1) * r_bar
    K_t = (m - 1) * n * r_bar / (n + n_zv)
    return DilutionReport(a, b, m, r_bar, n, n_zv, K, K_t, odds_ratio(a, b, K), odds_ratio(a, b, K_t))


@dataclass(frozen=True)
class PlanResult:
    target: float
    m: int
    n: int
    n_zv: int
    achieved: float
    error: float


def plan_n_zv(target: float, m: int, n: int) -> PlanResult:
    """Zero-variance count whose m / (n + n_zv) lands closest to ``target``.

    Checks floor and ceil of m/target - n; ties go to the smaller count.
    """
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    if not 0 < target <= m / n:
        raise ValueError(f"target must lie in (0, {m / n}]")
    exact = m / target - n
    candidates = sorted({max(0, math.floor(exact)), max(0, math.ceil(exact))})
    best = min(candidates, key=lambda k: (abs(m / (n + k) - target), k))
    achieved = m / (n + best)
    return PlanResult(target, m, n, best, achieved, abs(achieved - target))


def gamma_lattice(m: int, n: int, max_zv: int) -> list[tuple[int, float]]:
    return [(k, m / (n + k)) for k in range(max_zv + 1)]


@dataclass(frozen=True)
class CandidateCountEstimate:
    B: float
    L: float
    m: int
    n: int
    expected_count: float


def expected_candidate_count(B: float, L: float, m: int, n: int) -> float:
    """Expected appearances of one feature in candidate sets: B * L * m / n."""
    if min(B, L, m) < 0 or n <= 0:
        raise ValueError("B, L, m must be non-negative and n positive")
    return B * L * m / n


def candidate_count_estimate(B: float, L: float, m: int, n: int) -> CandidateCountEstimate:
    return CandidateCountEstimate(B, L, m, n, expected_candidate_count(B, L, m, n))
