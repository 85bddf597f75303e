"""Tree container and the CART / random-forest / GBM builders.

All tree growth funnels through the kernel backend (compiled or pure numpy,
see ``kernels``); this module owns the sampling schemes, seed derivation and
serialization. Every randomized step draws from a SeedSequence derived from
the caller's seed, so results are independent of scheduling and identical
across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sentiscope.models import kernels

# Effectively unlimited depth for forest trees ("grown deep").
DEEP_DEPTH = 1 << 20


@dataclass(frozen=True)
class Tree:
    """Binary tree as parallel node arrays, depth-first left-first order.

    ``feature[i] == -1`` marks a leaf. ``value`` holds the node mean for
    regression trees and the class-proportion row for classification trees;
    ``n_samples`` is the training-row count that reached each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_samples: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def is_classifier(self) -> bool:
        return self.value.ndim == 2

    def apply(self, X: np.ndarray) -> np.ndarray:
        return kernels.tree_apply(self.feature, self.threshold, self.left, self.right,
                                  np.ascontiguousarray(X, dtype=np.float64))

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        """Leaf value per row: floats (regression) or proportion rows."""
        return self.value[self.apply(X)]

    def to_nested(self) -> dict:
        """Nested node objects for the JSON model format."""

        def build(i: int) -> dict:
            if self.feature[i] < 0:
                node: dict = {"n": int(self.n_samples[i])}
                if self.is_classifier:
                    node["proportions"] = [float(v) for v in self.value[i]]
                else:
                    node["value"] = float(self.value[i])
                return node
            return {
                "feature": int(self.feature[i]),
                "threshold": float(self.threshold[i]),
                "n": int(self.n_samples[i]),
                "left": build(int(self.left[i])),
                "right": build(int(self.right[i])),
            }

        return build(0)

    @staticmethod
    def from_nested(node: dict) -> "Tree":
        """Rebuild the parallel arrays, reproducing the builder's node order.

        Internal-node values are not serialized (predictions never read
        them), so they come back as zeros.
        """
        first = _first_leaf(node)
        is_classifier = "proportions" in first
        n_classes = len(first["proportions"]) if is_classifier else 0
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        n_samples: list[int] = []
        value: list = []

        def alloc(d: dict) -> int:
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            n_samples.append(int(d["n"]))
            if is_classifier:
                value.append([float(v) for v in d.get("proportions", [0.0] * n_classes)])
            else:
                value.append(float(d.get("value", 0.0)))
            return i

        stack = [(alloc(node), node)]
        while stack:
            i, d = stack.pop()
            if "feature" not in d:
                continue
            feature[i] = int(d["feature"])
            threshold[i] = float(d["threshold"])
            li = alloc(d["left"])
            ri = alloc(d["right"])
            left[i] = li
            right[i] = ri
            stack.append((ri, d["right"]))
            stack.append((li, d["left"]))

        return Tree(
            feature=np.asarray(feature, dtype=np.int32),
            threshold=np.asarray(threshold, dtype=np.float64),
            left=np.asarray(left, dtype=np.int32),
            right=np.asarray(right, dtype=np.int32),
            n_samples=np.asarray(n_samples, dtype=np.int32),
            value=np.asarray(value, dtype=np.float64),
        )


def _first_leaf(node: dict) -> dict:
    while "feature" in node:
        node = node["left"]
    return node


def _grow(X, y, n_classes, rows, min_split, min_leaf, max_depth, min_gain, mtry, seed) -> Tree:
    arrays = kernels.grow_tree(X, y, n_classes, rows, int(min_split), int(min_leaf),
                               int(max_depth), float(min_gain), int(mtry), int(seed))
    return Tree(*arrays)


def _root_impurity(y: np.ndarray, n_classes: int) -> float:
    # Matches the kernel's own root computation (cumsum is sequential, like
    # the compiled accumulation loop), so cp thresholds agree bit-for-bit.
    n = y.shape[0]
    if n_classes > 0:
        counts = np.bincount(y.astype(np.int64), minlength=n_classes).astype(np.float64)
        return n - float(np.dot(counts, counts)) / n
    s = float(np.cumsum(y)[-1])
    ss = float(np.cumsum(y * y)[-1])
    return ss - s * s / n


def build_cart(X: np.ndarray, y: np.ndarray, n_classes: int, min_split: int = 20,
               min_leaf: int = 7, max_depth: int = 30, cp: float = 0.01) -> Tree:
    """Grow a single CART tree on all rows and all features.

    ``cp`` is the minimum fraction of the root impurity a split must remove;
    0 disables the pruning rule.
    """
    rows = np.arange(X.shape[0], dtype=np.int64)
    min_gain = cp * _root_impurity(y, n_classes) if cp > 0 else 0.0
    return _grow(X, y, n_classes, rows, min_split, min_leaf, max_depth,
                 min_gain, X.shape[1], seed=0)


def _tree_seeds(seed: int, index: int) -> tuple[np.random.Generator, int]:
    sampler = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index, 0])))
    kernel_seed = int(np.random.SeedSequence([seed, index, 1]).generate_state(1, dtype=np.uint64)[0])
    return sampler, kernel_seed


def build_forest(X: np.ndarray, y: np.ndarray, n_classes: int, tree_count: int,
                 mtry: int, min_node: int = 5, sample_mode: str = "bootstrap",
                 seed: int = 0) -> list[Tree]:
    """Grow ``tree_count`` deep trees on bootstrap samples.

    Each tree gets its own sampling generator and feature-subset seed derived
    from (seed, tree index), so the forest is reproducible and trees could be
    grown in any order. ``sample_mode='full'`` trains every tree on all rows
    without resampling (used for single-tree equivalence checks).
    """
    if sample_mode not in ("bootstrap", "full"):
        raise ValueError(f"unknown sample_mode {sample_mode!r}")
    n = X.shape[0]
    trees = []
    for t in range(tree_count):
        sampler, kernel_seed = _tree_seeds(seed, t)
        if sample_mode == "bootstrap":
            rows = np.sort(sampler.integers(0, n, size=n)).astype(np.int64)
        else:
            rows = np.arange(n, dtype=np.int64)
        trees.append(_grow(X, y, n_classes, rows, min_split=min_node, min_leaf=1,
                           max_depth=DEEP_DEPTH, min_gain=0.0, mtry=mtry,
                           seed=kernel_seed))
    return trees


def build_gbm(X: np.ndarray, y: np.ndarray, tree_count: int, depth: int = 3,
              shrinkage: float = 0.1, subsample: float = 0.5, min_split: int = 2,
              min_leaf: int = 1, seed: int = 0) -> tuple[float, list[tuple[Tree, float]]]:
    """Squared-error gradient boosting: F0 = mean(y), then shrunken residual trees.

    Each round fits a depth-limited tree to the current residuals on a row
    subsample drawn without replacement (fraction ``subsample``; 1 means all
    rows). Returns the initial value and the (tree, scale) list.
    """
    n = X.shape[0]
    f0 = float(np.mean(y))
    current = np.full(n, f0, dtype=np.float64)
    trees: list[tuple[Tree, float]] = []
    for m in range(tree_count):
        residual = y - current
        if subsample >= 1.0:
            rows = np.arange(n, dtype=np.int64)
        else:
            sampler, _ = _tree_seeds(seed, m)
            take = max(1, int(subsample * n))
            rows = np.sort(sampler.permutation(n)[:take]).astype(np.int64)
        tree = _grow(X, residual, 0, rows, min_split=min_split, min_leaf=min_leaf,
                     max_depth=depth, min_gain=0.0, mtry=X.shape[1], seed=0)
        current = current + shrinkage * tree.predict_value(X)
        trees.append((tree, shrinkage))
    return f0, trees
