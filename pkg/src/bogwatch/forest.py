"""Random-forest regression built on variance-reduction trees.

Bootstrap-sampled binary trees split on the (feature, threshold) pair that
most reduces the summed squared error; feature importance is the total
variance reduction credited to each feature, normalized over the forest.

Training is deterministic for a given seed and invariant to the order of
the training rows: samples are canonically sorted before any randomness is
drawn, and every tree gets its own seed-derived RNG stream.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ShapeError

LEAF = -1  # feature index marking a leaf node


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = 12
    min_leaf: int = 2
    features_per_split: int | None = None  # default ceil(sqrt(n_features))
    bootstrap: bool = True
    seed: int = 0


@dataclass
class TreeNodes:
    """Pre-order node arrays: leaves have feature == LEAF and carry value."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def add(self, feature, threshold, value) -> int:
        idx = len(self.feature)
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return idx

    def predict_one(self, x) -> float:
        i = 0
        while self.feature[i] != LEAF:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return self.value[i]


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[TreeNodes, ...]
    importances: np.ndarray  # per-feature, >= 0, sums to 1 when nonzero
    n_features: int


def _node_sse(ys: np.ndarray) -> float:
    return max(float(((ys - ys.mean()) ** 2).sum()), 0.0)


def _best_split(X, y, feat_indices, min_leaf):
    """Best (feature, threshold, score_drop) over the candidate features."""
    n = y.size
    parent_sse = _node_sse(y)
    best = None  # (sse_total, feature, threshold)
    for f in feat_indices:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total, total_sq = csum[-1], csq[-1]
        ks = np.arange(min_leaf, n - min_leaf + 1)
        if ks.size == 0:
            continue
        distinct = xs[ks - 1] < xs[ks]
        ks = ks[distinct]
        if ks.size == 0:
            continue
        left_sse = csq[ks - 1] - csum[ks - 1] ** 2 / ks
        right_n = n - ks
        right_sum = total - csum[ks - 1]
        right_sse = (total_sq - csq[ks - 1]) - right_sum**2 / right_n
        scores = np.maximum(left_sse, 0.0) + np.maximum(right_sse, 0.0)
        k_best = int(ks[np.argmin(scores)])
        score = float(scores.min())
        if best is None or score < best[0] - 1e-12:
            thresh = 0.5 * (xs[k_best - 1] + xs[k_best])
            best = (score, int(f), float(thresh))
    if best is None:
        return None
    score, f, thresh = best
    return f, thresh, parent_sse - score


def _grow_tree(X, y, cfg, rng, importances):
    nodes = TreeNodes()
    d = X.shape[1]
    mtry = cfg.features_per_split or max(1, math.ceil(math.sqrt(d)))
    mtry = min(mtry, d)

    def build(idx, depth):
        ys = y[idx]
        node = nodes.add(LEAF, 0.0, float(ys.mean()))
        if (
            ys.size < 2 * cfg.min_leaf
            or (cfg.max_depth is not None and depth >= cfg.max_depth)
            or _node_sse(ys) <= 1e-12
        ):
            return node
        feats = np.sort(rng.choice(d, size=mtry, replace=False))
        split = _best_split(X[idx], ys, feats, cfg.min_leaf)
        if split is None and mtry < d:
            # None of the sampled features separates this node; fall back to
            # the full set so distinguishable samples always get split.
            split = _best_split(X[idx], ys, np.arange(d), cfg.min_leaf)
        if split is None or split[2] <= 1e-12:
            return node
        f, thresh, drop = split
        importances[f] += drop
        go_left = X[idx, f] <= thresh
        nodes.feature[node] = f
        nodes.threshold[node] = thresh
        nodes.left[node] = build(idx[go_left], depth + 1)
        nodes.right[node] = build(idx[~go_left], depth + 1)
        return node

    build(np.arange(y.size), 0)
    return nodes


def train_random_forest(X, y, cfg: ForestConfig = ForestConfig()) -> ForestModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.size or y.size == 0:
        raise DataError(f"bad training data: X {X.shape}, y {y.shape}")
    if y.size < 2:
        raise DataError("need at least 2 samples")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise DataError("training data contains non-finite values")

    # Canonical row order: makes the fit independent of how rows arrived.
    order = np.lexsort((y,) + tuple(X[:, f] for f in range(X.shape[1] - 1, -1, -1)))
    Xc, yc = X[order], y[order]

    importances = np.zeros(X.shape[1])
    trees = []
    for t in range(cfg.n_trees):
        rng = np.random.default_rng([cfg.seed, t])
        if cfg.bootstrap:
            idx = np.sort(rng.integers(0, yc.size, yc.size))
        else:
            idx = np.arange(yc.size)
        trees.append(_grow_tree(Xc[idx], yc[idx], cfg, rng, importances))
    total = importances.sum()
    if total > 0.0:
        importances = importances / total
    importances.setflags(write=False)
    return ForestModel(trees=tuple(trees), importances=importances,
                       n_features=X.shape[1])


def predict_forest(model: ForestModel, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.n_features:
        raise ShapeError(
            f"expected {model.n_features} features, got {X.shape[1]}"
        )
    out = np.empty(X.shape[0])
    for i, row in enumerate(X):
        out[i] = sum(t.predict_one(row) for t in model.trees) / len(model.trees)
    return float(out[0]) if single else out


def rank_features(model: ForestModel, names) -> list[str]:
    """Feature names sorted by descending importance; ties keep index order."""
    names = list(names)
    if len(names) != model.n_features:
        raise ShapeError(
            f"{len(names)} names for {model.n_features} features"
        )
    order = sorted(range(len(names)), key=lambda i: (-model.importances[i], i))
    return [names[i] for i in order]


def save_forest(model: ForestModel, path, feature_names=None) -> None:
    doc = {
        "type": "forest",
        "n_features": model.n_features,
        "feature_names": list(feature_names) if feature_names else None,
        "importances": model.importances.tolist(),
        "trees": [
            {
                "feature": t.feature,
                "threshold": t.threshold,
                "left": t.left,
                "right": t.right,
                "value": t.value,
            }
            for t in model.trees
        ],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_forest(path) -> tuple[ForestModel, list[str] | None]:
    doc = json.loads(Path(path).read_text())
    if doc.get("type") != "forest":
        raise DataError(f"{path}: not a forest model file")
    trees = tuple(
        TreeNodes(
            feature=list(t["feature"]),
            threshold=[float(v) for v in t["threshold"]],
            left=list(t["left"]),
            right=list(t["right"]),
            value=[float(v) for v in t["value"]],
        )
        for t in doc["trees"]
    )
    imp = np.array(doc["importances"], dtype=np.float64)
    imp.setflags(write=False)
    model = ForestModel(trees=trees, importances=imp,
                        n_features=int(doc["n_features"]))
    return model, doc.get("feature_names")
