"""Pure-numpy tree kernels: the fallback backend.

These mirror the compiled kernels in ``_ckernels.pyx`` operation for
operation. Both backends must produce bit-identical trees, so every
floating-point reduction here is expressed through ``np.cumsum`` (a strictly
sequential accumulation, unlike ``np.sum``'s pairwise scheme) and candidate
scans keep the compiled code's first-maximum tie behavior via ``argmax``.
Feature subsets are drawn with the same splitmix64 stream in both backends.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_SM64_GAMMA = 0x9E3779B97F4A7C15
_SM64_MIX1 = 0xBF58476D1CE4E5B9
_SM64_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Tiny deterministic PRNG used for per-node feature subsets.

    Implemented identically (64-bit wrapping arithmetic) in the compiled
    backend, so both draw the same subsets in the same node order.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _SM64_GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _SM64_MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _SM64_MIX2) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        return self.next_u64() % n


def draw_feature_subset(rng: SplitMix64, n_features: int, mtry: int) -> np.ndarray:
    """Partial Fisher-Yates draw of ``mtry`` distinct features, sorted ascending."""
    pool = list(range(n_features))
    for i in range(mtry):
        j = i + rng.below(n_features - i)
        pool[i], pool[j] = pool[j], pool[i]
    return np.array(sorted(pool[:mtry]), dtype=np.int64)


def _midpoint(a: float, b: float) -> float:
    thr = (a + b) / 2.0
    # Adjacent doubles can round the midpoint up to b; fall back to a so the
    # <= threshold rule reproduces the scanned partition exactly.
    if thr == b:
        thr = a
    return thr


def _best_split_regression(x: np.ndarray, yv: np.ndarray, s: float, ss: float,
                           imp: float, min_leaf: int):
    """Best SSE-reduction split of one feature. Returns (gain, threshold)."""
    n = x.size
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = yv[order]
    ls = np.cumsum(ys)
    lss = np.cumsum(ys * ys)
    k = np.arange(1, n, dtype=np.float64)
    lsk = ls[:-1]
    lssk = lss[:-1]
    left_sse = lssk - lsk * lsk / k
    rs = s - lsk
    rss = ss - lssk
    nk = n - k
    right_sse = rss - rs * rs / nk
    gain = imp - left_sse - right_sse
    valid = (xs[:-1] != xs[1:]) & (k >= min_leaf) & (nk >= min_leaf)
    if not valid.any():
        return -np.inf, 0.0
    gain = np.where(valid, gain, -np.inf)
    b = int(np.argmax(gain))
    return float(gain[b]), _midpoint(float(xs[b]), float(xs[b + 1]))


def _best_split_classification(x: np.ndarray, yc: np.ndarray, counts: np.ndarray,
                               imp: float, min_leaf: int, n_classes: int):
    """Best Gini-reduction split of one feature (count-weighted impurity)."""
    n = x.size
    order = np.argsort(x, kind="stable")
    xs = x[order]
    onehot = (yc[order][:, None] == np.arange(n_classes)[None, :]).astype(np.float64)
    lc = np.cumsum(onehot, axis=0)[:-1]  # left class counts at boundary k=1..n-1
    # All count arithmetic is integer-valued, hence exact in float64.
    lsq = np.einsum("ij,ij->i", lc, lc)
    rc = counts[None, :].astype(np.float64) - lc
    rsq = np.einsum("ij,ij->i", rc, rc)
    k = np.arange(1, n, dtype=np.float64)
    nk = n - k
    gain = imp - (k - lsq / k) - (nk - rsq / nk)
    valid = (xs[:-1] != xs[1:]) & (k >= min_leaf) & (nk >= min_leaf)
    if not valid.any():
        return -np.inf, 0.0
    gain = np.where(valid, gain, -np.inf)
    b = int(np.argmax(gain))
    return float(gain[b]), _midpoint(float(xs[b]), float(xs[b + 1]))


def grow_tree(X: np.ndarray, y: np.ndarray, n_classes: int, rows: np.ndarray,
              min_split: int, min_leaf: int, max_depth: int, min_gain: float,
              mtry: int, seed: int):
    """Grow one binary tree by greedy recursive partitioning.

    Parameters
    ----------
    X : (n, p) float64, C-contiguous feature matrix.
    y : float64 targets (regression) or float64-encoded class indices.
    n_classes : 0 for regression, else the number of class levels.
    rows : int64 training row positions, duplicates allowed (bootstrap).
    min_split, min_leaf, max_depth : stopping rules; root depth is 0.
    min_gain : absolute impurity-reduction floor (cp x root impurity).
    mtry : features considered per node; >= p disables subsetting.
    seed : per-tree seed for the feature-subset stream.

    Returns
    -------
    (feature, threshold, left, right, n_samples, value) parallel node arrays
    in depth-first, left-child-first order; ``feature == -1`` marks leaves.
    ``value`` is (n_nodes,) leaf/node means for regression and
    (n_nodes, n_classes) class proportions for classification.
    """
    n_features = X.shape[1]
    cap = 2 * rows.size + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    n_samples = np.zeros(cap, dtype=np.int32)
    if n_classes > 0:
        value = np.zeros((cap, n_classes), dtype=np.float64)
        yc = y.astype(np.int64)
    else:
        value = np.zeros(cap, dtype=np.float64)
    rng = SplitMix64(seed)
    use_subset = mtry < n_features

    n_nodes = 1
    stack = [(0, rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        n = node_rows.size
        n_samples[node] = n

        if n_classes > 0:
            yn = yc[node_rows]
            counts = np.bincount(yn, minlength=n_classes).astype(np.float64)
            value[node] = counts / n
            imp = n - float(np.dot(counts, counts)) / n
            pure = np.count_nonzero(counts) <= 1
        else:
            yn = y[node_rows]
            cs = np.cumsum(yn)
            css = np.cumsum(yn * yn)
            s = float(cs[-1])
            ss = float(css[-1])
            value[node] = s / n
            imp = ss - s * s / n
            pure = float(np.min(yn)) == float(np.max(yn))

        if pure or n < min_split or n < 2 * min_leaf or depth >= max_depth:
            continue

        if use_subset:
            feats = draw_feature_subset(rng, n_features, mtry)
        else:
            feats = np.arange(n_features, dtype=np.int64)

        best_gain = -np.inf
        best_feat = -1
        best_thr = 0.0
        for j in feats:
            x = X[node_rows, j]
            if n_classes > 0:
                gain, thr = _best_split_classification(x, yn, counts, imp, min_leaf, n_classes)
            else:
                gain, thr = _best_split_regression(x, yn, s, ss, imp, min_leaf)
            if gain > best_gain:
                best_gain, best_feat, best_thr = gain, int(j), thr

        if not (best_gain > 0.0 and best_gain >= min_gain):
            continue

        mask = X[node_rows, best_feat] <= best_thr
        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = left_id
        right[node] = right_id
        stack.append((right_id, node_rows[~mask], depth + 1))
        stack.append((left_id, node_rows[mask], depth + 1))

    sel = slice(0, n_nodes)
    return (feature[sel].copy(), threshold[sel].copy(), left[sel].copy(),
            right[sel].copy(), n_samples[sel].copy(), value[sel].copy())


def tree_apply(feature: np.ndarray, threshold: np.ndarray, left: np.ndarray,
               right: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Route every row of X to its leaf; returns leaf node ids."""
    n = X.shape[0]
    cur = np.zeros(n, dtype=np.int32)
    while True:
        feat = feature[cur]
        active = np.nonzero(feat >= 0)[0]
        if active.size == 0:
            return cur
        nodes = cur[active]
        xv = X[active, feat[active]]
        go_left = xv <= threshold[nodes]
        cur[active] = np.where(go_left, left[nodes], right[nodes])
