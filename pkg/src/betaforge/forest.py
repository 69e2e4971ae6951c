"""Instrumented binary random forest.

Gini splits at midpoints between consecutive distinct values, bootstrap rows
per tree, ``max_features`` candidates drawn per node. Every tree records how
often it split on each feature and how deep it grew, which feeds the
variety and correlation diagnostics.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numba
import numpy as np
from scipy.spatial.distance import pdist

# splits whose impurity decrease is within rounding of zero count as invalid
GAIN_EPS = 1e-12
TIE_EPS = 1e-12  # gains this close count as tied, so rounding cannot reorder ties
POLICIES = ("extend_until_valid", "leaf")


class SingleClassError(ValueError):
    pass


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 100
    max_features: int = 2
    max_depth: int = 100
    class_weight: str = "balanced"
    seed: int = 42
    no_valid_split_policy: str = "extend_until_valid"

    def validate(self, n_features: int | None = None) -> None:
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_features < 1:
            raise ValueError("max_features must be >= 1")
        if n_features is not None and self.max_features > n_features:
            raise ValueError(f"max_features={self.max_features} exceeds {n_features} features")
        if self.class_weight not in ("balanced", "none"):
            raise ValueError(f"class_weight must be 'balanced' or 'none', got {self.class_weight!r}")
        if self.no_valid_split_policy not in POLICIES:
            raise ValueError(f"unknown no_valid_split_policy {self.no_valid_split_policy!r}")


def gini(w0: float, w1: float) -> float:
    """Two-class Gini impurity 2p(1-p) with p = w0 / (w0 + w1)."""
    total = w0 + w1
    if w0 < 0 or w1 < 0:
        raise ValueError("class weights must be non-negative")
    if total <= 0:
        raise ValueError("class weight totals are both zero")
    p = w0 / total
    return 2.0 * p * (1.0 - p)


@numba.njit(cache=True, nogil=True)
def _scan_features(X, idx, w, y, feats):
    """Best (feature, threshold, gain) over ``feats``; the earliest of tied gains wins."""
    n = idx.shape[0]
    W = 0.0
    W0 = 0.0
    for k in range(n):
        r = idx[k]
        W += w[r]
        if y[r] == 0:
            W0 += w[r]
    p = W0 / W
    g_parent = 2.0 * p * (1.0 - p)

    best_f = -1
    best_t = 0.0
    best_gain = -np.inf
    xs = np.empty(n)
    for j in range(feats.shape[0]):
        f = feats[j]
        for k in range(n):
            xs[k] = X[idx[k], f]
        order = np.argsort(xs, kind="mergesort")
        wl = 0.0
        w0l = 0.0
        for k in range(n - 1):
            r = idx[order[k]]
            wl += w[r]
            if y[r] == 0:
                w0l += w[r]
            a = xs[order[k]]
            b = xs[order[k + 1]]
            if b <= a:
                continue
            wr = W - wl
            w0r = W0 - w0l
            pl = w0l / wl
            pr = w0r / wr
            child = (wl * 2.0 * pl * (1.0 - pl) + wr * 2.0 * pr * (1.0 - pr)) / W
            gain = g_parent - child
            if gain > best_gain + TIE_EPS:
                best_gain = gain
                best_f = f
                t = a + (b - a) * 0.5
                if t >= b:
                    t = a
                best_t = t
    return best_f, best_t, best_gain


class Split(NamedTuple):
    feature: int
    threshold: float
    gain: float


def best_split(X, y, weights, candidates: Sequence[int]) -> Split | None:
    """Weighted-Gini best split among ``candidates``, or None if no split helps.

    Ties go to the lower feature index, then the lower threshold.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    if X.shape[0] < 2:
        return None
    idx = np.arange(X.shape[0], dtype=np.int64)
    feats = np.array(sorted(candidates), dtype=np.int64)
    f, t, gain = _scan_features(X, idx, w, y, feats)
    if f < 0 or gain <= GAIN_EPS:
        return None
    return Split(int(f), float(t), float(gain))


@dataclass
class Tree:
    """Array-backed binary tree; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (nodes, 2) class probabilities
    depth: int
    usage: np.ndarray  # split count per feature

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_splits(self) -> int:
        return int((self.feature >= 0).sum())

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "depth": self.depth,
            "usage": self.usage.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.array(d["feature"], dtype=np.int64),
            threshold=np.array(d["threshold"], dtype=np.float64),
            left=np.array(d["left"], dtype=np.int64),
            right=np.array(d["right"], dtype=np.int64),
            value=np.array(d["value"], dtype=np.float64).reshape(-1, 2),
            depth=int(d["depth"]),
            usage=np.array(d["usage"], dtype=np.int64),
        )


def tree_seed(master_seed: int, tree_index: int) -> np.random.SeedSequence:
    """Per-tree seed: a SeedSequence keyed on (master_seed, tree_index)."""
    return np.random.SeedSequence([master_seed, tree_index])


def class_weights(y: np.ndarray, mode: str) -> np.ndarray:
    """Per-class weights; 'balanced' gives N / (2 N_c) on the full training set."""
    if mode == "none":
        return np.ones(2)
    counts = np.bincount(y, minlength=2).astype(np.float64)
    return y.shape[0] / (2.0 * counts)


def _grow_tree(X, y, row_weight, config: ForestConfig, tree_index: int) -> Tree:
    n_rows, n_feat = X.shape
    rng = np.random.default_rng(tree_seed(config.seed, tree_index))
    boot = rng.integers(0, n_rows, size=n_rows)
    counts = np.bincount(boot, minlength=n_rows)
    rows = np.flatnonzero(counts).astype(np.int64)
    w = counts * row_weight  # zero for rows not drawn

    m = config.max_features
    extend = config.no_valid_split_policy == "extend_until_valid"
    feature, threshold, left, right, value = [], [], [], [], []
    usage = np.zeros(n_feat, dtype=np.int64)
    max_depth_seen = 0

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append((0.0, 0.0))
        return len(feature) - 1

    stack = [(new_node(), rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        max_depth_seen = max(max_depth_seen, depth)
        wy = w[idx]
        w0 = float(wy[y[idx] == 0].sum())
        w1 = float(wy.sum()) - w0
        value[node] = (w0 / (w0 + w1), w1 / (w0 + w1))
        if w0 == 0.0 or w1 == 0.0 or depth >= config.max_depth or idx.shape[0] < 2:
            continue
        perm = rng.permutation(n_feat)
        f, t, gain = _scan_features(X, idx, w, y, np.sort(perm[:m]))
        if (f < 0 or gain <= GAIN_EPS) and extend:
            for extra in perm[m:]:
                f, t, gain = _scan_features(X, idx, w, y, np.array([extra], dtype=np.int64))
                if f >= 0 and gain > GAIN_EPS:
                    break
        if f < 0 or gain <= GAIN_EPS:
            continue
        go_left = X[idx, f] <= t
        feature[node] = int(f)
        threshold[node] = float(t)
        usage[f] += 1
        l_node, r_node = new_node(), new_node()
        left[node], right[node] = l_node, r_node
        # right pushed first so the left subtree is numbered first
        stack.append((r_node, idx[~go_left], depth + 1))
        stack.append((l_node, idx[go_left], depth + 1))

    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64).reshape(-1, 2),
        depth=max_depth_seen,
        usage=usage,
    )


@dataclass(frozen=True)
class ForestDiagnostics:
    usage_vectors: np.ndarray  # (B, features)
    depths: np.ndarray
    mean_depth: float
    median_depth: float
    variety_sum: float
    variety_mean: float
    avg_cosine_correlation: float
    zero_usage_trees: int
    aggregate_usage: np.ndarray

    def summary(self) -> dict:
        return {
            "mean_depth": self.mean_depth,
            "median_depth": self.median_depth,
            "variety_sum": self.variety_sum,
            "variety_mean": self.variety_mean,
            "avg_cosine_correlation": self.avg_cosine_correlation,
            "zero_usage_trees": self.zero_usage_trees,
            "aggregate_usage": self.aggregate_usage.tolist(),
        }

    def to_dict(self) -> dict:
        return {
            **self.summary(),
            "usage_vectors": self.usage_vectors.tolist(),
            "depths": self.depths.tolist(),
        }


def diagnostics_variety(usage_vectors) -> tuple[float, float, float, int]:
    """Pairwise tree variety and mean cosine similarity of usage vectors.

    Returns ``(variety_sum, variety_mean, rho_bar, n_zero)`` where variety is
    the sum / mean Euclidean distance over all tree pairs of the raw count
    vectors and ``rho_bar`` averages the cosine over pairs of non-zero
    vectors (``n_zero`` trees never split and are left out).
    """
    v = np.asarray(usage_vectors, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] < 2:
        raise ValueError("need usage vectors for at least two trees")
    dists = pdist(v, metric="euclidean")
    variety_sum = float(dists.sum())
    variety_mean = variety_sum / dists.shape[0]
    norms = np.linalg.norm(v, axis=1)
    nonzero = norms > 0
    n_zero = int((~nonzero).sum())
    if nonzero.sum() >= 2:
        u = v[nonzero] / norms[nonzero, None]
        # v_i . v_j = 1 - |v_i - v_j|^2 / 2 for unit vectors
        sq = pdist(u, metric="sqeuclidean")
        rho = float(np.clip(np.mean(1.0 - 0.5 * sq), -1.0, 1.0))
    else:
        rho = math.nan
    return variety_sum, variety_mean, rho, n_zero


def compute_diagnostics(trees: Sequence[Tree]) -> ForestDiagnostics:
    usage = np.vstack([t.usage for t in trees])
    depths = np.array([t.depth for t in trees], dtype=np.int64)
    if len(trees) >= 2:
        vsum, vmean, rho, n_zero = diagnostics_variety(usage)
    else:
        vsum, vmean, rho, n_zero = 0.0, 0.0, math.nan, int((usage.sum(axis=1) == 0).sum())
    return ForestDiagnostics(
        usage_vectors=usage,
        depths=depths,
        mean_depth=float(depths.mean()),
        median_depth=float(np.median(depths)),
        variety_sum=vsum,
        variety_mean=vmean,
        avg_cosine_correlation=rho,
        zero_usage_trees=n_zero,
        aggregate_usage=usage.sum(axis=0),
    )


@dataclass
class ForestModel:
    trees: list[Tree]
    config: ForestConfig
    feature_names: tuple[str, ...] = field(default_factory=tuple)

    @property
    def n_features(self) -> int:
        return len(self.trees[0].usage)

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        total = np.zeros((X.shape[0], 2))
        for t in self.trees:
            total += t.predict_proba(X)
        return total / len(self.trees)

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        # ties resolve to class 0
        return (proba[:, 1] > proba[:, 0]).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "feature_names": list(self.feature_names),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        return cls(
            trees=[Tree.from_dict(t) for t in d["trees"]],
            config=ForestConfig(**d["config"]),
            feature_names=tuple(d["feature_names"]),
        )


def predict(model: ForestModel, x) -> tuple[int, tuple[float, float]]:
    """Soft-vote prediction for one feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict expects a single feature vector")
    proba = model.predict_proba(x[None, :])[0]
    label = 1 if proba[1] > proba[0] else 0
    return label, (float(proba[0]), float(proba[1]))


def train(X, y, config: ForestConfig, feature_names=(), n_jobs: int = 1):
    """Fit ``config.n_estimators`` trees; returns ``(ForestModel, ForestDiagnostics)``.

    Tree b draws its bootstrap and candidate features from its own seed, so
    the result does not depend on ``n_jobs``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one row per label")
    config.validate(X.shape[1])
    if len(np.unique(y)) < 2:
        raise SingleClassError("training data contains a single class")
    row_weight = class_weights(y, config.class_weight)[y]

    def fit_one(b: int) -> Tree:
        return _grow_tree(X, y, row_weight, config, b)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(fit_one, range(config.n_estimators)))
    else:
        trees = [fit_one(b) for b in range(config.n_estimators)]
    model = ForestModel(trees, config, tuple(feature_names))
    return model, compute_diagnostics(trees)


def train_dataset(ds, config: ForestConfig, n_jobs: int = 1):
    """Convenience wrapper taking a :class:`LabeledDataset`."""
    return train(ds.X, ds.y, config, ds.feature_names, n_jobs=n_jobs)
