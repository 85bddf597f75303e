"""Uniform fit/predict facade over the four learners.

A ModelSpec names the algorithm, task and hyperparameters; fit() dispatches
to the matching trainer and returns a TrainedModel whose predictions are
reproducible bit for bit from (spec, data, seed). Models serialize to a
versioned JSON document that restores an equivalent predictor exactly.

Classification notes: class levels are the sorted distinct target strings,
and every tie (vote, argmax) resolves to the lowest level. GBM classification
trains one squared-error booster per level on one-hot targets and decodes by
argmax; its per-level scores are raw booster outputs, not proportions.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence, Union

import numpy as np

from sentiscope.models import knn as _knn
from sentiscope.models import trees as _trees
from sentiscope.models.trees import DEEP_DEPTH, Tree

ALGORITHMS = ("knn", "cart", "random_forest", "gbm")
TASKS = ("regression", "classification")

MODEL_FORMAT = "sentiscope-model/1"


@dataclass(frozen=True)
class KnnParams:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class CartParams:
    min_split: int = 20
    min_leaf: int = 7
    max_depth: int = 30
    cp: float = 0.01

    def __post_init__(self):
        if self.min_split < 2:
            raise ValueError("min_split must be at least 2")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must not be negative")
        if not 0.0 <= self.cp:
            raise ValueError("cp must not be negative")


@dataclass(frozen=True)
class ForestParams:
    tree_count: int = 500
    # None = task default: max(1, p // 3) regression, max(1, isqrt(p)) classification.
    mtry: Union[int, None] = None
    min_node: int = 5
    sample_mode: str = "bootstrap"

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValueError("tree_count must be at least 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be at least 1")
        if self.min_node < 1:
            raise ValueError("min_node must be at least 1")
        if self.sample_mode not in ("bootstrap", "full"):
            raise ValueError(f"unknown sample_mode {self.sample_mode!r}")


@dataclass(frozen=True)
class GbmParams:
    # tree_count=0 is legal: the model predicts the training mean.
    tree_count: int = 100
    depth: int = 3
    shrinkage: float = 0.1
    subsample: float = 0.5
    min_split: int = 2
    min_leaf: int = 1

    def __post_init__(self):
        if self.tree_count < 0:
            raise ValueError("tree_count must not be negative")
        if self.depth < 0:
            raise ValueError("depth must not be negative")
        if not 0.0 < self.shrinkage <= 1.0:
            raise ValueError("shrinkage must be in (0, 1]")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must be in (0, 1]")
        if self.min_split < 2:
            raise ValueError("min_split must be at least 2")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be at least 1")


_PARAM_TYPES = {
    "knn": KnnParams,
    "cart": CartParams,
    "random_forest": ForestParams,
    "gbm": GbmParams,
}

Hyperparameters = Union[KnnParams, CartParams, ForestParams, GbmParams]


@dataclass(frozen=True)
class ModelSpec:
    algorithm: str
    task: str
    hyperparameters: Hyperparameters = None  # type: ignore[assignment]
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.hyperparameters is None:
            object.__setattr__(self, "hyperparameters", _PARAM_TYPES[self.algorithm]())
        elif not isinstance(self.hyperparameters, _PARAM_TYPES[self.algorithm]):
            raise ValueError(
                f"{self.algorithm} expects {_PARAM_TYPES[self.algorithm].__name__}, "
                f"got {type(self.hyperparameters).__name__}")

    @staticmethod
    def make(algorithm: str, task: str, seed: int = 0, **overrides) -> "ModelSpec":
        """Spec with default hyperparameters, selectively overridden."""
        if algorithm not in _PARAM_TYPES:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        return ModelSpec(algorithm=algorithm, task=task, seed=seed,
                         hyperparameters=_PARAM_TYPES[algorithm](**overrides))


@dataclass(frozen=True)
class GbmBooster:
    initial: float
    trees: tuple  # of (Tree, scale) pairs


@dataclass(frozen=True)
class TrainedModel:
    spec: ModelSpec
    feature_names: tuple
    structure: object
    class_levels: Union[tuple, None] = None

    def predict(self, X, columns=None):
        return predict(self, X, columns=columns)


@dataclass(frozen=True)
class ClassPrediction:
    """Predicted level per row plus the per-level score matrix."""

    labels: tuple
    scores: np.ndarray
    class_levels: tuple

    @property
    def codes(self) -> np.ndarray:
        index = {lv: i for i, lv in enumerate(self.class_levels)}
        return np.asarray([index[lb] for lb in self.labels], dtype=np.int64)


def _check_features(X, feature_names=None, columns=None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D numeric table")
    if columns is not None and feature_names is not None:
        if tuple(columns) != tuple(feature_names):
            raise ValueError(
                f"feature columns {list(columns)!r} do not match the model's "
                f"{list(feature_names)!r}")
    if feature_names is not None and X.shape[1] != len(feature_names):
        raise ValueError(f"expected {len(feature_names)} feature columns, got {X.shape[1]}")
    if X.size and not np.isfinite(X).all():
        raise ValueError("features contain missing or non-finite values")
    return X


def _encode_target(spec: ModelSpec, target) -> tuple[np.ndarray, Union[tuple, None]]:
    if spec.task == "regression":
        y = np.ascontiguousarray(target, dtype=np.float64)
        if y.ndim != 1:
            raise ValueError("target must be a single column")
        if y.size and not np.isfinite(y).all():
            raise ValueError("target contains missing or non-finite values")
        return y, None
    labels = [str(v) for v in target]
    levels = tuple(sorted(set(labels)))
    if len(levels) < 2:
        raise ValueError("classification target must have at least 2 levels")
    index = {lv: i for i, lv in enumerate(levels)}
    codes = np.asarray([index[lb] for lb in labels], dtype=np.float64)
    return codes, levels


def _default_mtry(task: str, p: int) -> int:
    if task == "classification":
        return max(1, math.isqrt(p))
    return max(1, p // 3)


def fit(spec: ModelSpec, X, target, feature_names: Sequence[str]) -> TrainedModel:
    """Train the model named by spec on a numeric feature table."""
    X = _check_features(X, feature_names=tuple(feature_names))
    if X.shape[0] == 0:
        raise ValueError("cannot fit on empty data")
    y, levels = _encode_target(spec, target)
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"target length {y.shape[0]} does not match {X.shape[0]} rows")
    n_classes = len(levels) if levels else 0
    hp = spec.hyperparameters

    if spec.algorithm == "knn":
        structure: object = _knn.fit_knn(X, y, hp.k)
    elif spec.algorithm == "cart":
        structure = _trees.build_cart(X, y, n_classes, min_split=hp.min_split,
                                      min_leaf=hp.min_leaf, max_depth=hp.max_depth,
                                      cp=hp.cp)
    elif spec.algorithm == "random_forest":
        mtry = hp.mtry if hp.mtry is not None else _default_mtry(spec.task, X.shape[1])
        structure = tuple(_trees.build_forest(
            X, y, n_classes, tree_count=hp.tree_count, mtry=min(mtry, X.shape[1]),
            min_node=hp.min_node, sample_mode=hp.sample_mode, seed=spec.seed))
    else:
        if spec.task == "regression":
            structure = _fit_booster(X, y, hp, spec.seed)
        else:
            # One booster per level; each round's row subsample is shared
            # across levels because all boosters derive it from the same seed.
            structure = tuple(
                _fit_booster(X, (y == k).astype(np.float64), hp, spec.seed)
                for k in range(n_classes))

    return TrainedModel(spec=spec, feature_names=tuple(feature_names),
                        structure=structure, class_levels=levels)


def _fit_booster(X, y, hp: GbmParams, seed: int) -> GbmBooster:
    f0, pairs = _trees.build_gbm(X, y, tree_count=hp.tree_count, depth=hp.depth,
                                 shrinkage=hp.shrinkage, subsample=hp.subsample,
                                 min_split=hp.min_split, min_leaf=hp.min_leaf,
                                 seed=seed)
    return GbmBooster(initial=f0, trees=tuple(pairs))


def _booster_scores(booster: GbmBooster, X: np.ndarray) -> np.ndarray:
    out = np.full(X.shape[0], booster.initial, dtype=np.float64)
    for tree, scale in booster.trees:
        out += scale * tree.predict_value(X)
    return out


def predict(model: TrainedModel, X, columns=None):
    """Scores for X: floats (regression) or a ClassPrediction (classification)."""
    X = _check_features(X, feature_names=model.feature_names, columns=columns)
    spec = model.spec
    n = X.shape[0]

    if spec.task == "regression":
        if spec.algorithm == "knn":
            return _knn.predict_knn_regression(model.structure, X)
        if spec.algorithm == "cart":
            return model.structure.predict_value(X)
        if spec.algorithm == "random_forest":
            out = np.zeros(n, dtype=np.float64)
            for tree in model.structure:
                out += tree.predict_value(X)
            return out / len(model.structure)
        return _booster_scores(model.structure, X)

    levels = model.class_levels
    K = len(levels)
    if spec.algorithm == "knn":
        codes, scores = _knn.predict_knn_classification(model.structure, X, K)
    elif spec.algorithm == "cart":
        scores = model.structure.predict_value(X)
        codes = scores.argmax(axis=1)
    elif spec.algorithm == "random_forest":
        votes = np.zeros((n, K), dtype=np.float64)
        rows = np.arange(n)
        for tree in model.structure:
            votes[rows, tree.predict_value(X).argmax(axis=1)] += 1.0
        codes = votes.argmax(axis=1)
        scores = votes / len(model.structure)
    else:
        scores = np.column_stack([_booster_scores(b, X) for b in model.structure]) \
            if K else np.zeros((n, 0))
        codes = scores.argmax(axis=1)
    labels = tuple(levels[c] for c in codes)
    return ClassPrediction(labels=labels, scores=scores, class_levels=levels)


def regression_cart_like_forest(X, y) -> Tree:
    """Single CART grown with forest leaf rules (deep, no cp pruning)."""
    return _trees.build_cart(np.ascontiguousarray(X, dtype=np.float64),
                             np.ascontiguousarray(y, dtype=np.float64), 0,
                             min_split=5, min_leaf=1, max_depth=DEEP_DEPTH, cp=0.0)


# --- serialization ---------------------------------------------------------

def _floats(a) -> list:
    return [float(v) for v in a]


def model_to_doc(model: TrainedModel) -> dict:
    spec = model.spec
    doc: dict = {
        "format": MODEL_FORMAT,
        "spec": {
            "algorithm": spec.algorithm,
            "task": spec.task,
            "seed": int(spec.seed),
            "hyperparameters": asdict(spec.hyperparameters),
        },
        "feature_names": list(model.feature_names),
        "class_levels": list(model.class_levels) if model.class_levels else None,
    }
    s = model.structure
    if spec.algorithm == "knn":
        doc["structure"] = {
            "mean": _floats(s.mean),
            "scale": _floats(s.scale),
            "train_x": [_floats(row) for row in s.train_x],
            "train_y": _floats(s.train_y),
        }
    elif spec.algorithm == "cart":
        doc["structure"] = {"tree": s.to_nested()}
    elif spec.algorithm == "random_forest":
        doc["structure"] = {"trees": [t.to_nested() for t in s]}
    else:
        boosters = [s] if spec.task == "regression" else list(s)
        encoded = [{"initial": b.initial,
                    "trees": [{"scale": float(sc), "tree": t.to_nested()} for t, sc in b.trees]}
                   for b in boosters]
        doc["structure"] = encoded[0] if spec.task == "regression" else {"classes": encoded}
    return doc


def _booster_from_doc(d: dict) -> GbmBooster:
    return GbmBooster(initial=float(d["initial"]),
                      trees=tuple((Tree.from_nested(e["tree"]), float(e["scale"]))
                                  for e in d["trees"]))


def model_from_doc(doc: dict) -> TrainedModel:
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} document (format={doc.get('format')!r})"
                         if isinstance(doc, dict) else "not a model document")
    sd = doc["spec"]
    spec = ModelSpec(algorithm=sd["algorithm"], task=sd["task"], seed=int(sd["seed"]),
                     hyperparameters=_PARAM_TYPES[sd["algorithm"]](**sd["hyperparameters"]))
    sdoc = doc["structure"]
    if spec.algorithm == "knn":
        structure: object = _knn.KnnFit(
            k=spec.hyperparameters.k,
            mean=np.asarray(sdoc["mean"], dtype=np.float64),
            scale=np.asarray(sdoc["scale"], dtype=np.float64),
            train_x=np.asarray(sdoc["train_x"], dtype=np.float64).reshape(
                len(sdoc["train_y"]), len(sdoc["mean"])),
            train_y=np.asarray(sdoc["train_y"], dtype=np.float64),
        )
    elif spec.algorithm == "cart":
        structure = Tree.from_nested(sdoc["tree"])
    elif spec.algorithm == "random_forest":
        structure = tuple(Tree.from_nested(t) for t in sdoc["trees"])
    elif spec.task == "regression":
        structure = _booster_from_doc(sdoc)
    else:
        structure = tuple(_booster_from_doc(d) for d in sdoc["classes"])
    levels = doc.get("class_levels")
    return TrainedModel(spec=spec, feature_names=tuple(doc["feature_names"]),
                        structure=structure,
                        class_levels=tuple(levels) if levels else None)


def save_model(model: TrainedModel, path_or_file) -> None:
    """Write the versioned JSON form; loading it restores bit-identical predictions."""
    doc = model_to_doc(model)
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            fh.write(text)


def load_model(path_or_file) -> TrainedModel:
    if hasattr(path_or_file, "read"):
        doc = json.load(path_or_file)
    else:
        with open(path_or_file, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    return model_from_doc(doc)
