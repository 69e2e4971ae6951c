"""Paired two-arm forest experiments, sign tests and max_features sweeps."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .features import (
    LabeledDataset,
    augment_zero_variance,
    build_alpha_beta,
    build_basic,
    matched_profile_pair,
    synth_generate,
)
from .forest import ForestConfig, train

log = logging.getLogger(__name__)


def derive_seed(*keys: int) -> int:
    """Deterministic 32-bit seed from integer keys."""
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray


def split_train_test(ds: LabeledDataset, ratio: float = 0.8, seed: int = 0) -> SplitIndices:
    """Stratified split: each class keeps round(ratio * N_c) rows for training."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in (0, 1):
        rows = np.flatnonzero(ds.y == c)
        n_train = int(round(ratio * rows.size))
        if rows.size < 2 or not 1 <= n_train <= rows.size - 1:
            raise ValueError(
                f"class {c} has {rows.size} rows; cannot split at ratio {ratio}"
            )
        perm = rng.permutation(rows)
        train_idx.append(perm[:n_train])
        test_idx.append(perm[n_train:])
    return SplitIndices(np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx)))


@dataclass
class PairwiseOutcome:
    pair_id: str
    accuracy_a: float
    accuracy_b: float
    verdict: str  # arm b relative to arm a
    diagnostics_a: dict
    diagnostics_b: dict
    split_seed: int
    forest_seed: int
    n_train: int
    n_test: int
    m: int

    def to_dict(self) -> dict:
        return asdict(self)


def _check_aligned(a: LabeledDataset, b: LabeledDataset) -> None:
    if a.n_rows != b.n_rows or not np.array_equal(a.y, b.y):
        raise ValueError("arms differ in row count or labels")
    if a.row_ids and b.row_ids and a.row_ids != b.row_ids:
        raise ValueError("arms list rows in a different order")


def verdict_of(acc_a: float, acc_b: float) -> str:
    if acc_b > acc_a:
        return "better"
    if acc_b < acc_a:
        return "worse"
    return "tie"


def _accuracy(model, X, y) -> float:
    return float((model.predict(X) == y).mean())


def run_pairwise(
    arm_a: LabeledDataset,
    arm_b: LabeledDataset,
    config: ForestConfig,
    split_seed: int,
    pair_id: str = "",
    ratio: float = 0.8,
    tree_jobs: int = 1,
) -> PairwiseOutcome:
    """Train both arms on identical train/test rows with the same forest seed."""
    _check_aligned(arm_a, arm_b)
    split = split_train_test(arm_a, ratio, split_seed)
    accs, diags = [], []
    for arm in (arm_a, arm_b):
        model, diag = train(
            arm.X[split.train], arm.y[split.train], config, arm.feature_names, n_jobs=tree_jobs
        )
        accs.append(_accuracy(model, arm.X[split.test], arm.y[split.test]))
        diags.append(diag.to_dict())
    return PairwiseOutcome(
        pair_id=pair_id or "/".join(arm_a.labels),
        accuracy_a=accs[0],
        accuracy_b=accs[1],
        verdict=verdict_of(accs[0], accs[1]),
        diagnostics_a=diags[0],
        diagnostics_b=diags[1],
        split_seed=split_seed,
        forest_seed=config.seed,
        n_train=int(split.train.size),
        n_test=int(split.test.size),
        m=config.max_features,
    )


@dataclass(frozen=True)
class SignTestReport:
    n_better: int
    n_worse: int
    n_tie: int
    n_effective: int
    mu: float
    sigma: float
    z: float
    p_one_sided: float

    def to_dict(self) -> dict:
        return asdict(self)


def sign_test(n_better: int, n_worse: int, n_tie: int = 0) -> SignTestReport:
    """Normal-approximation sign test with continuity correction, one-sided."""
    if n_better < 0 or n_worse < 0:
        raise ValueError("counts must be non-negative")
    n_eff = n_better + n_worse
    if n_eff < 1:
        raise ValueError("no untied pairs; the sign test is undefined")
    mu = n_eff * 0.5
    sigma = math.sqrt(n_eff * 0.25)
    z = (n_better - 0.5 - mu) / sigma
    p = 0.5 * math.erfc(z / math.sqrt(2.0))
    return SignTestReport(n_better, n_worse, n_tie, n_eff, mu, sigma, z, p)


def sign_test_outcomes(outcomes: Sequence[PairwiseOutcome]) -> SignTestReport:
    counts = {"better": 0, "worse": 0, "tie": 0}
    for o in outcomes:
        counts[o.verdict] += 1
    return sign_test(counts["better"], counts["worse"], counts["tie"])


@dataclass(frozen=True)
class PairSpec:
    pair_id: str
    arm_a: LabeledDataset
    arm_b: LabeledDataset


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_pairs(
    pairs: Sequence[PairSpec],
    config: ForestConfig,
    experiment_seed: int,
    ratio: float = 0.8,
    threads: int = 1,
) -> list[PairwiseOutcome]:
    """Run every pair; pair i splits with a seed derived from (experiment_seed, i)."""

    def one(item):
        i, spec = item
        return run_pairwise(
            spec.arm_a, spec.arm_b, config, derive_seed(experiment_seed, i), spec.pair_id, ratio
        )

    return _map(one, list(enumerate(pairs)), threads)


@dataclass
class SweepRecord:
    m: int
    arm: str
    mean_accuracy: float
    mean_depth: float
    mean_variety: float
    mean_correlation: float
    aggregate_usage: list[float]
    n_pairs: int


@dataclass
class SweepResult:
    m_values: list[int]
    records: list[SweepRecord]
    outcomes: dict[int, list[PairwiseOutcome]] = field(default_factory=dict)
    skipped: list[int] = field(default_factory=list)

    def accuracy(self, arm: str) -> dict[int, float]:
        return {r.m: r.mean_accuracy for r in self.records if r.arm == arm}

    def best(self, arm: str) -> tuple[int, float]:
        acc = self.accuracy(arm)
        m = max(acc, key=lambda k: (acc[k], -k))
        return m, acc[m]


def _mean_usage(diags: Sequence[dict]) -> list[float]:
    width = max(len(d["aggregate_usage"]) for d in diags)
    total = np.zeros(width)
    for d in diags:
        u = np.asarray(d["aggregate_usage"], dtype=np.float64)
        total[: u.size] += u
    return (total / len(diags)).tolist()


def sweep_m(
    pairs: Sequence[PairSpec],
    m_values: Sequence[int],
    config: ForestConfig,
    experiment_seed: int,
    ratio: float = 0.8,
    threads: int = 1,
) -> SweepResult:
    """Run all pairs at each ``max_features`` value; one record per (m, arm)."""
    min_width = min(min(p.arm_a.width, p.arm_b.width) for p in pairs)
    result = SweepResult(m_values=[], records=[])
    for m in m_values:
        if m > min_width or m < 1:
            log.warning("skipping m=%d: outside [1, %d]", m, min_width)
            result.skipped.append(m)
            continue
        cfg = replace(config, max_features=m)
        outs = run_pairs(pairs, cfg, experiment_seed, ratio, threads)
        result.m_values.append(m)
        result.outcomes[m] = outs
        for arm in ("a", "b"):
            accs = [getattr(o, f"accuracy_{arm}") for o in outs]
            diags = [getattr(o, f"diagnostics_{arm}") for o in outs]
            rhos = [d["avg_cosine_correlation"] for d in diags]
            rhos = [r for r in rhos if not math.isnan(r)]
            result.records.append(SweepRecord(
                m=m,
                arm=arm,
                mean_accuracy=float(np.mean(accs)),
                mean_depth=float(np.mean([d["mean_depth"] for d in diags])),
                mean_variety=float(np.mean([d["variety_mean"] for d in diags])),
                mean_correlation=float(np.mean(rhos)) if rhos else math.nan,
                aggregate_usage=_mean_usage(diags),
                n_pairs=len(outs),
            ))
    return result


# -- dataset families --------------------------------------------------------


def digits_pairs(source, n_zv: int = 20, ordered: bool = False, fill: float = 1.0) -> list[PairSpec]:
    """Arm a = pixel subset, arm b = the same plus ``n_zv`` constant columns."""
    out = []
    for a, b in source.pairs(ordered=ordered):
        ds = source.pair_dataset(a, b)
        out.append(PairSpec(f"{a}v{b}", ds, augment_zero_variance(ds, n_zv, fill)))
    return out


def synthetic_ticket_pairs(
    n_pairs: int,
    seed: int,
    events_per_artist: int = 40,
    noise: float = 0.002,
    n_zv: int = 0,
) -> list[PairSpec]:
    """Basic vs alpha/beta arms for artist pairs with matched support and mean priors.

    With ``n_zv > 0`` arm a is the alpha/beta set and arm b its zero-variance
    augmentation instead.
    """
    out = []
    for i in range(n_pairs):
        pa, pb = matched_profile_pair(i, seed, events_per_artist)
        corpus = synth_generate([pa, pb], seed=derive_seed(seed, i), noise=noise)
        basic = build_basic(corpus.by_artist(), (pa.name, pb.name))
        ab = build_alpha_beta(basic)
        if n_zv:
            out.append(PairSpec(f"pair{i:03d}", ab, augment_zero_variance(ab, n_zv)))
        else:
            out.append(PairSpec(f"pair{i:03d}", basic, ab))
    return out
