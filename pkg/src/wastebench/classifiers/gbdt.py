"""Gradient-boosted decision trees with softmax coupling and histogram splits.

One regression tree per class per round fits the softmax gradient
(g = p - y, h = p(1 - p)); leaf values are damped Newton steps
-G / (H + reg_lambda) scaled by the learning rate.  Features are quantized
once into at most 256 quantile bins; node histograms of (g, h, count) are
built per feature and the smaller sibling is always computed first so the
larger one comes from parent - sibling subtraction.  Growth is either
level-wise to a depth cap or leaf-wise (best gain first) to a leaf cap.
The full-data training loss is recorded after every round.
"""

from __future__ import annotations

import heapq
from typing import Dict, List, Optional

import numpy as np

MIN_GAIN = 1e-12


def _bin_edges(col: np.ndarray, bins: int) -> np.ndarray:
    """Interior bin edges (ascending) for one feature column."""
    uniq = np.unique(col)
    if len(uniq) <= bins:
        return (uniq[:-1] + uniq[1:]) * 0.5
    qs = np.linspace(0.0, 1.0, bins + 1)[1:-1]
    return np.unique(np.quantile(col, qs))


def quantize(x: np.ndarray, bins: int):
    """Per-feature quantile binning: (bin matrix uint8, list of edge arrays)."""
    n, d = x.shape
    edges: List[np.ndarray] = []
    binned = np.empty((n, d), dtype=np.uint8)
    for f in range(d):
        e = _bin_edges(x[:, f], bins)
        edges.append(e)
        binned[:, f] = np.searchsorted(e, x[:, f], side="right").astype(np.uint8)
    return binned, edges


class _HistTreeBuilder:
    """Grows one regression tree on pre-binned features."""

    def __init__(self, binned: np.ndarray, g: np.ndarray, h: np.ndarray,
                 edges: List[np.ndarray], reg_lambda: float, bins: int):
        self.binned = binned
        self.g = g
        self.h = h
        self.edges = edges
        self.lam = reg_lambda
        self.bins = bins
        self.d = binned.shape[1]
        self.offsets = (np.arange(self.d, dtype=np.int64) * bins)[None, :]
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[float] = []

    def _new_node(self, g_sum: float, h_sum: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(-g_sum / (h_sum + self.lam))
        return len(self.feature) - 1

    def _histograms(self, idx: np.ndarray):
        flat = (self.binned[idx].astype(np.int64) + self.offsets).ravel()
        size = self.d * self.bins
        hg = np.bincount(flat, weights=np.repeat(self.g[idx], self.d), minlength=size)
        hh = np.bincount(flat, weights=np.repeat(self.h[idx], self.d), minlength=size)
        hn = np.bincount(flat, minlength=size)
        return hg.reshape(self.d, self.bins), hh.reshape(self.d, self.bins), hn.reshape(self.d, self.bins)

    def _best_split(self, hg, hh, hn):
        """(gain, feature, bin) maximizing the usual second-order gain, or None."""
        gl = np.cumsum(hg, axis=1)
        hl = np.cumsum(hh, axis=1)
        nl = np.cumsum(hn, axis=1)
        g_tot = gl[:, -1:]
        h_tot = hl[:, -1:]
        n_tot = nl[:, -1:]
        gr = g_tot - gl
        hr = h_tot - hl
        nr = n_tot - nl
        parent = (g_tot * g_tot) / (h_tot + self.lam)
        gain = 0.5 * ((gl * gl) / (hl + self.lam) + (gr * gr) / (hr + self.lam) - parent)
        gain = np.where((nl > 0) & (nr > 0), gain, -np.inf)
        j = int(np.argmax(gain))  # first max: lowest feature, then lowest bin
        f, b = divmod(j, self.bins)
        best = float(gain[f, b])
        if not np.isfinite(best) or best <= MIN_GAIN:
            return None
        return best, f, b

    def node_from(self, idx: np.ndarray) -> int:
        return self._new_node(float(self.g[idx].sum()), float(self.h[idx].sum()))

    def split_node(self, node: int, idx: np.ndarray, f: int, b: int):
        """Apply a found split; returns (left_idx, right_idx)."""
        go_left = self.binned[idx, f] <= b
        self.feature[node] = f
        # bin index b covers values x < edges[b]; store the raw-value threshold
        self.threshold[node] = float(self.edges[f][b])
        left_idx = idx[go_left]
        right_idx = idx[~go_left]
        return left_idx, right_idx

    def as_dict(self) -> Dict:
        return {
            "feature": np.asarray(self.feature, dtype=np.int64),
            "threshold": np.asarray(self.threshold, dtype=np.float64),
            "left": np.asarray(self.left, dtype=np.int64),
            "right": np.asarray(self.right, dtype=np.int64),
            "value": np.asarray(self.value, dtype=np.float64),
        }


def _grow_level_wise(builder: _HistTreeBuilder, idx: np.ndarray, max_depth: int) -> None:
    root = builder.node_from(idx)
    level = [(root, idx, builder._histograms(idx))]
    for depth in range(max_depth):
        nxt = []
        for node, nidx, hists in level:
            found = builder._best_split(*hists)
            if found is None:
                continue
            _, f, b = found
            li, ri = builder.split_node(node, nidx, f, b)
            ln = builder.node_from(li)
            rn = builder.node_from(ri)
            builder.left[node] = ln
            builder.right[node] = rn
            # histogram subtraction: build the smaller child, derive the other
            if len(li) <= len(ri):
                lh = builder._histograms(li)
                rh = tuple(p - q for p, q in zip(hists, lh))
            else:
                rh = builder._histograms(ri)
                lh = tuple(p - q for p, q in zip(hists, rh))
            nxt.append((ln, li, lh))
            nxt.append((rn, ri, rh))
        level = nxt
        if not level:
            break


def _grow_leaf_wise(builder: _HistTreeBuilder, idx: np.ndarray, max_leaves: int) -> None:
    root = builder.node_from(idx)
    heap: list = []
    serial = 0

    def push(node, nidx, hists):
        nonlocal serial
        found = builder._best_split(*hists)
        if found is not None:
            gain, f, b = found
            heapq.heappush(heap, (-gain, serial, node, nidx, hists, f, b))
            serial += 1

    push(root, idx, builder._histograms(idx))
    leaves = 1
    while heap and leaves < max_leaves:
        _, _, node, nidx, hists, f, b = heapq.heappop(heap)
        li, ri = builder.split_node(node, nidx, f, b)
        ln = builder.node_from(li)
        rn = builder.node_from(ri)
        builder.left[node] = ln
        builder.right[node] = rn
        if len(li) <= len(ri):
            lh = builder._histograms(li)
            rh = tuple(p - q for p, q in zip(hists, lh))
        else:
            rh = builder._histograms(ri)
            lh = tuple(p - q for p, q in zip(hists, rh))
        push(ln, li, lh)
        push(rn, ri, rh)
        leaves += 1


def _apply(tree: Dict, x: np.ndarray) -> np.ndarray:
    feature = np.asarray(tree["feature"], dtype=np.int64)
    threshold = np.asarray(tree["threshold"], dtype=np.float64)
    left = np.asarray(tree["left"], dtype=np.int64)
    right = np.asarray(tree["right"], dtype=np.int64)
    value = np.asarray(tree["value"], dtype=np.float64)
    node = np.zeros(len(x), dtype=np.int64)
    while True:
        internal = feature[node] >= 0
        if not internal.any():
            return value[node]
        sel = np.flatnonzero(internal)
        f = feature[node[sel]]
        go_left = x[sel, f] < threshold[node[sel]]  # bin b <=> x < edges[b]
        node[sel] = np.where(go_left, left[node[sel]], right[node[sel]])


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def fit(spec: Dict, x: np.ndarray, y: np.ndarray, n_classes: int, seed: int) -> Dict:
    rounds = int(spec["rounds"])
    lr = float(spec["learning_rate"])
    growth = spec["growth"]
    max_depth = int(spec["max_depth"])
    max_leaves = int(spec["max_leaves"])
    bins = int(spec["bins"])
    lam = float(spec["reg_lambda"])
    n = len(x)
    binned, edges = quantize(x, bins)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    scores = np.zeros((n, n_classes))
    all_idx = np.arange(n)
    trees: List[List[Dict]] = []
    losses: List[float] = []
    for _ in range(rounds):
        p = _softmax_rows(scores)
        g = p - onehot
        h = p * (1.0 - p)
        round_trees: List[Dict] = []
        for k in range(n_classes):
            builder = _HistTreeBuilder(binned, g[:, k], h[:, k], edges, lam, bins)
            if growth == "level_wise":
                _grow_level_wise(builder, all_idx, max_depth)
            else:
                _grow_leaf_wise(builder, all_idx, max_leaves)
            tree = builder.as_dict()
            round_trees.append(tree)
            scores[:, k] += lr * _apply(tree, x)
        trees.append(round_trees)
        p_now = _softmax_rows(scores)
        p_t = np.clip(p_now[np.arange(n), y], 1e-12, 1.0)
        losses.append(float(-np.log(p_t).mean()))
    return {"trees": trees, "losses": np.asarray(losses), "n_rounds": rounds}


def raw_scores(params: Dict, x: np.ndarray, n_classes: int) -> np.ndarray:
    lr_rounds = params["trees"]
    out = np.zeros((len(x), n_classes))
    for round_trees in lr_rounds:
        for k, tree in enumerate(round_trees):
            out[:, k] += _apply(tree, x)
    return out


def score(params: Dict, x: np.ndarray, n_classes: int, hyper: Dict) -> np.ndarray:
    lr = float(hyper["learning_rate"])
    return _softmax_rows(lr * raw_scores(params, x, n_classes))
