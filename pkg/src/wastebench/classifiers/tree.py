"""CART decision trees (Gini) and bagged random forests.

Split search is exhaustive over candidate features with thresholds at
midpoints between consecutive distinct sorted values.  A node splits
whenever it is impure, has depth and sample budget left, and any candidate
feature is non-constant; among equal-impurity splits the lowest feature
index wins, then the lowest threshold.  Samples with x <= threshold go left.
"""

from __future__ import annotations

from typing import Dict, Optional

import numpy as np

from ..image import seeded_rng

_CHUNK_CELLS = 50_000_000  # cap on n * features * classes per split-search block


def _gini(counts: np.ndarray, n: float) -> float:
    p = counts / n
    return 1.0 - float((p * p).sum())


def _best_split(xn: np.ndarray, yn: np.ndarray, n_classes: int, min_leaf: int):
    """Best (feature_local, threshold, weighted_child_impurity) or None.

    Vectorized over features: sort each column, prefix class counts, Gini of
    every admissible boundary.  Feature-major argmin keeps the tie rule.
    """
    n, f = xn.shape
    if n < 2 * min_leaf or n < 2:
        return None
    best = None  # (weighted, local_feature, threshold)
    chunk = max(1, _CHUNK_CELLS // max(1, n * n_classes))
    classes = np.arange(n_classes)
    positions = np.arange(1, n, dtype=np.float64)
    pos_ok = (positions >= min_leaf) & ((n - positions) >= min_leaf)
    for lo in range(0, f, chunk):
        cols = xn[:, lo : lo + chunk]
        order = np.argsort(cols, axis=0, kind="stable")
        xs = np.take_along_axis(cols, order, axis=0)
        ys = yn[order]  # (n, fc)
        onehot = (ys[:, :, None] == classes).astype(np.float64)
        prefix = onehot.cumsum(axis=0)
        left = prefix[:-1]  # (n-1, fc, c): left set = first i sorted samples
        right = prefix[-1][None, :, :] - left
        nl = positions[:, None]
        nr = n - nl
        gl = 1.0 - ((left / nl[:, :, None]) ** 2).sum(axis=2)
        gr = 1.0 - ((right / nr[:, :, None]) ** 2).sum(axis=2)
        weighted = (nl * gl + nr * gr) / n  # (n-1, fc)
        valid = (xs[1:] > xs[:-1]) & pos_ok[:, None]
        if not valid.any():
            continue
        weighted = np.where(valid, weighted, np.inf)
        flat = weighted.T.ravel()  # feature-major so first argmin = lowest feature
        j = int(np.argmin(flat))
        w = float(flat[j])
        if not np.isfinite(w):
            continue
        lf, pos = divmod(j, n - 1)
        thr = 0.5 * (xs[pos, lf] + xs[pos + 1, lf])
        cand = (w, lo + lf, float(thr))
        if best is None or cand[0] < best[0]:
            best = cand
        # equal impurity across chunks: earlier chunk = lower feature, keep it
    return best


class _TreeBuilder:
    def __init__(self, n_classes: int, max_depth: Optional[int], min_leaf: int,
                 max_features: Optional[int], rng: Optional[np.random.Generator]):
        self.n_classes = n_classes
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.rng = rng
        self.feature: list = []
        self.threshold: list = []
        self.left: list = []
        self.right: list = []
        self.dist: list = []
        self.count: list = []

    def _new_node(self, counts: np.ndarray, n: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.dist.append(counts / n)
        self.count.append(n)
        return len(self.feature) - 1

    def build(self, x: np.ndarray, y: np.ndarray, importances: Optional[np.ndarray]) -> Dict:
        n_root, d = x.shape
        stack = [(np.arange(n_root), 0, -1, False)]  # indices, depth, parent, is_right
        while stack:
            idx, depth, parent, is_right = stack.pop()
            yn = y[idx]
            counts = np.bincount(yn, minlength=self.n_classes).astype(np.float64)
            node = self._new_node(counts, len(idx))
            if parent >= 0:
                if is_right:
                    self.right[parent] = node
                else:
                    self.left[parent] = node
            impure = np.count_nonzero(counts) > 1
            depth_ok = self.max_depth is None or depth < self.max_depth
            if not (impure and depth_ok and len(idx) >= 2 * self.min_leaf):
                continue
            if self.max_features is None or self.max_features >= d:
                cand = np.arange(d)
            else:
                cand = np.sort(self.rng.choice(d, self.max_features, replace=False))
            found = _best_split(x[np.ix_(idx, cand)], yn, self.n_classes, self.min_leaf)
            if found is None:
                continue
            w, lf, thr = found
            feat = int(cand[lf])
            self.feature[node] = feat
            self.threshold[node] = thr
            go_left = x[idx, feat] <= thr
            if importances is not None:
                nl, nr = int(go_left.sum()), int((~go_left).sum())
                cl = np.bincount(yn[go_left], minlength=self.n_classes).astype(np.float64)
                cr = counts - cl
                drop = (len(idx) * _gini(counts, len(idx))
                        - nl * _gini(cl, nl) - nr * _gini(cr, nr)) / n_root
                importances[feat] += drop
            # push right first so the left child is materialized first
            stack.append((idx[~go_left], depth + 1, node, True))
            stack.append((idx[go_left], depth + 1, node, False))
        return {
            "feature": np.asarray(self.feature, dtype=np.int64),
            "threshold": np.asarray(self.threshold, dtype=np.float64),
            "left": np.asarray(self.left, dtype=np.int64),
            "right": np.asarray(self.right, dtype=np.int64),
            "dist": np.asarray(self.dist, dtype=np.float64),
            "count": np.asarray(self.count, dtype=np.int64),
        }


def apply_tree(tree: Dict, x: np.ndarray) -> np.ndarray:
    """Leaf node index for every row."""
    feature = np.asarray(tree["feature"], dtype=np.int64)
    threshold = np.asarray(tree["threshold"], dtype=np.float64)
    left = np.asarray(tree["left"], dtype=np.int64)
    right = np.asarray(tree["right"], dtype=np.int64)
    node = np.zeros(len(x), dtype=np.int64)
    while True:
        internal = feature[node] >= 0
        if not internal.any():
            return node
        sel = np.flatnonzero(internal)
        f = feature[node[sel]]
        go_left = x[sel, f] <= threshold[node[sel]]
        node[sel] = np.where(go_left, left[node[sel]], right[node[sel]])


def tree_dist(tree: Dict, x: np.ndarray) -> np.ndarray:
    return np.asarray(tree["dist"], dtype=np.float64)[apply_tree(tree, x)]


def fit(spec: Dict, x: np.ndarray, y: np.ndarray, n_classes: int, seed: int) -> Dict:
    builder = _TreeBuilder(n_classes, int(spec["max_depth"]), int(spec["min_leaf"]), None, None)
    return {"tree": builder.build(x, y, None)}


def score(params: Dict, x: np.ndarray, n_classes: int, hyper: Dict) -> np.ndarray:
    return tree_dist(params["tree"], x)


def fit_forest(spec: Dict, x: np.ndarray, y: np.ndarray, n_classes: int, seed: int) -> Dict:
    n, d = x.shape
    n_trees = int(spec["trees"])
    max_depth = spec["max_depth"]
    max_depth = None if max_depth is None else int(max_depth)
    min_leaf = int(spec["min_leaf"])
    max_features = max(1, int(np.sqrt(d)))
    importances = np.zeros(d)
    trees = []
    oob_sum = np.zeros((n, n_classes))
    oob_hits = np.zeros(n, dtype=np.int64)
    for t in range(n_trees):
        rng = seeded_rng(seed, t)
        boot = rng.integers(0, n, n)
        builder = _TreeBuilder(n_classes, max_depth, min_leaf, max_features, rng)
        tree = builder.build(x[boot], y[boot], importances)
        trees.append(tree)
        outside = np.ones(n, dtype=bool)
        outside[boot] = False
        if outside.any():
            oob_sum[outside] += tree_dist(tree, x[outside])
            oob_hits[outside] += 1
    importances /= n_trees
    covered = oob_hits > 0
    oob_accuracy = (
        float(np.mean(np.argmax(oob_sum[covered], axis=1) == y[covered])) if covered.any() else None
    )
    return {"trees": trees, "importances": importances, "oob_accuracy": oob_accuracy}


def score_forest(params: Dict, x: np.ndarray, n_classes: int, hyper: Dict) -> np.ndarray:
    trees = params["trees"]
    acc = np.zeros((len(x), n_classes))
    for tree in trees:
        acc += tree_dist(tree, x)
    return acc / len(trees)
