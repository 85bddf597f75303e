"""Repeated k-fold benchmarking of the model suite.

A ResamplingPlan fixes every fold assignment up front (shuffled round-robin
per repeat), so a benchmark is fully determined by (specs, data, plan): each
resample trains with a seed derived from the plan seed, and results come out
identical no matter the execution order.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np

from sentiscope.models.api import ModelSpec, TrainedModel, fit, predict


@dataclass(frozen=True)
class ResamplingPlan:
    fold_count: int
    repeat_count: int
    seed: int
    # assignments[repeat][row] = fold id in 0..fold_count-1
    assignments: np.ndarray

    @property
    def row_count(self) -> int:
        return int(self.assignments.shape[1])


@dataclass(frozen=True)
class AlgorithmResult:
    algorithm: str
    # one value per (repeat, fold), sorted by (repeat, fold)
    values: tuple
    mean: float
    sd: float


@dataclass(frozen=True)
class BenchmarkResult:
    task: str
    metric: str
    fold_count: int
    repeat_count: int
    per_algorithm: tuple
    no_information_rate: Union[float, None] = None

    def algorithm(self, name: str) -> AlgorithmResult:
        for a in self.per_algorithm:
            if a.algorithm == name:
                return a
        raise ValueError(f"no results for algorithm {name!r}")

    def to_json_dict(self) -> dict:
        doc: dict = {
            "task": self.task,
            "metric": self.metric,
            "fold_count": self.fold_count,
            "repeat_count": self.repeat_count,
            "per_algorithm": [
                {"algorithm": a.algorithm, "values": list(a.values),
                 "mean": a.mean, "sd": a.sd}
                for a in self.per_algorithm
            ],
        }
        if self.no_information_rate is not None:
            doc["no_information_rate"] = self.no_information_rate
        return doc

    def to_csv_text(self) -> str:
        """Long format: algorithm, repeat, fold, metric, value."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["algorithm", "repeat", "fold", "metric", "value"])
        for a in self.per_algorithm:
            i = 0
            for rep in range(self.repeat_count):
                for fold in range(self.fold_count):
                    w.writerow([a.algorithm, rep, fold, self.metric, repr(a.values[i])])
                    i += 1
        return buf.getvalue()


class BenchmarkError(RuntimeError):
    """A resample failed; carries which (algorithm, repeat, fold) it was."""

    def __init__(self, algorithm: str, repeat: int, fold: int, cause: Exception):
        super().__init__(f"{algorithm} failed at repeat {repeat}, fold {fold}: {cause}")
        self.algorithm = algorithm
        self.repeat = repeat
        self.fold = fold
        self.cause = cause


def make_plan(row_count: int, k: int, r: int, seed: int) -> ResamplingPlan:
    """Per repeat: shuffle the rows, deal them round-robin into k folds."""
    if k < 2:
        raise ValueError("fold count k must be at least 2")
    if r < 1:
        raise ValueError("repeat count r must be at least 1")
    if row_count < k:
        raise ValueError(f"need at least k={k} rows, got {row_count}")
    assignments = np.empty((r, row_count), dtype=np.int32)
    for rep in range(r):
        rng = np.random.default_rng(np.random.SeedSequence([seed, rep]))
        perm = rng.permutation(row_count)
        for i, row in enumerate(perm):
            assignments[rep, row] = i % k
    return ResamplingPlan(fold_count=k, repeat_count=r, seed=seed,
                          assignments=assignments)


def rmse(predictions, truths) -> float:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError("predictions and truths must be equal-length vectors")
    if p.size == 0:
        raise ValueError("empty input")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def accuracy(predicted_levels, true_levels) -> float:
    pred = list(predicted_levels)
    true = list(true_levels)
    if len(pred) != len(true):
        raise ValueError("predictions and truths must have equal length")
    if not pred:
        raise ValueError("empty input")
    hits = sum(1 for a, b in zip(pred, true) if a == b)
    return hits / len(pred)


def no_information_rate(true_levels) -> float:
    true = list(true_levels)
    if not true:
        raise ValueError("empty input")
    counts: dict = {}
    for v in true:
        counts[v] = counts.get(v, 0) + 1
    return max(counts.values()) / len(true)


def _resample_seed(plan_seed: int, repeat: int, fold: int) -> int:
    state = np.random.SeedSequence([plan_seed, repeat, fold]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def run_benchmark(specs: Sequence[ModelSpec], features: np.ndarray, target,
                  feature_names: Sequence[str], plan: ResamplingPlan) -> BenchmarkResult:
    """Train/evaluate every spec on every (repeat, fold) of the plan.

    The held-in rows (all folds but one) train the model, the held-out fold
    is scored with the task metric. Each spec's own seed is replaced by a
    seed derived from (plan seed, repeat, fold), shared by all algorithms of
    that resample.
    """
    if not specs:
        raise ValueError("no model specs given")
    tasks = {s.task for s in specs}
    if len(tasks) != 1:
        raise ValueError(f"specs must share one task, got {sorted(tasks)}")
    task = tasks.pop()
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.shape[0] != plan.row_count:
        raise ValueError(f"plan covers {plan.row_count} rows, features have {X.shape[0]}")
    if task == "regression":
        y = np.asarray(target, dtype=np.float64)
        metric = "rmse"
    else:
        y = np.asarray([str(v) for v in target], dtype=object)
        metric = "accuracy"
    if y.shape[0] != X.shape[0]:
        raise ValueError("target length does not match feature rows")

    per_algorithm = []
    for spec in specs:
        values = []
        for rep in range(plan.repeat_count):
            fold_of = plan.assignments[rep]
            for fold in range(plan.fold_count):
                evaluate = fold_of == fold
                train = ~evaluate
                seeded = replace(spec, seed=_resample_seed(plan.seed, rep, fold))
                try:
                    model = fit(seeded, X[train], y[train], feature_names)
                    if task == "regression":
                        values.append(rmse(predict(model, X[evaluate]), y[evaluate]))
                    else:
                        pred = predict(model, X[evaluate])
                        values.append(accuracy(pred.labels, y[evaluate]))
                except Exception as exc:  # noqa: BLE001 - tagged and re-raised
                    if isinstance(exc, BenchmarkError):
                        raise
                    raise BenchmarkError(spec.algorithm, rep, fold, exc) from exc
        arr = np.asarray(values, dtype=np.float64)
        per_algorithm.append(AlgorithmResult(
            algorithm=spec.algorithm, values=tuple(float(v) for v in values),
            mean=float(np.mean(arr)), sd=float(np.std(arr, ddof=1))))

    nir = no_information_rate(y.tolist()) if task == "classification" else None
    return BenchmarkResult(task=task, metric=metric, fold_count=plan.fold_count,
                           repeat_count=plan.repeat_count,
                           per_algorithm=tuple(per_algorithm),
                           no_information_rate=nir)


def save_result(result: BenchmarkResult, json_path, csv_path) -> None:
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(result.to_json_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(result.to_csv_text())
