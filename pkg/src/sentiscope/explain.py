"""Model-agnostic explainers over any scalar score function.

An Explainer pairs a score function with the background table that defines
all expectations. On top of it:

- permutation_importance: loss increase when one feature column is shuffled,
  averaged over B derived-seed permutations. Importance is the mean of the
  per-permutation loss differences, so a feature the score provably ignores
  comes out exactly 0.
- breakdown: greedy additive attribution. Features are ordered by descending
  single-feature effect, then overwritten into the background cumulatively;
  each step's contribution is the change in mean prediction, and intercept
  plus contributions reproduce the instance score (local accuracy).
- average_breakdowns: feature-name-aligned mean of several breakdowns. The
  averaged report keeps additivity, but its per-step distribution samples
  are concatenations for display only; their means no longer equal the
  averaged cumulatives (the instance-level invariant does not survive
  averaging).
- ceteris_paribus / mean_ceteris_paribus: what-if profiles over one feature,
  anchored exactly at the instance's own value and prediction.

All operations are pure and deterministic given their seeds.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from sentiscope.benchmark import accuracy, rmse


def one_minus_accuracy(predictions, truths) -> float:
    return 1.0 - accuracy(predictions, truths)


LOSSES: dict = {"rmse": rmse, "one-minus-accuracy": one_minus_accuracy}


@dataclass(frozen=True)
class Explainer:
    score: Callable
    background: np.ndarray
    feature_names: tuple
    baseline: float


def make_explainer(score: Callable, background, feature_names) -> Explainer:
    """Fix the background table and pre-compute the baseline (mean score)."""
    bg = np.ascontiguousarray(background, dtype=np.float64)
    names = tuple(feature_names)
    if bg.ndim != 2 or bg.shape[1] != len(names):
        raise ValueError(f"background must be 2-D with {len(names)} columns")
    if bg.shape[0] == 0:
        raise ValueError("background must not be empty")
    scores = np.asarray(score(bg), dtype=np.float64)
    if scores.shape != (bg.shape[0],):
        raise ValueError("score function must return one real per row")
    return Explainer(score=score, background=bg, feature_names=names,
                     baseline=float(np.mean(scores)))


def _check_instance(ex: Explainer, instance) -> np.ndarray:
    row = np.asarray(instance, dtype=np.float64).reshape(-1)
    if row.shape[0] != len(ex.feature_names):
        raise ValueError(f"instance has {row.shape[0]} values, "
                         f"expected {len(ex.feature_names)}")
    return row


def _cap_sample(values: np.ndarray, cap: int) -> tuple:
    """Deterministic evenly-strided subsample of at most cap values."""
    n = values.shape[0]
    if n <= cap:
        return tuple(float(v) for v in values)
    idx = np.floor(np.linspace(0, n, cap, endpoint=False)).astype(np.int64)
    return tuple(float(v) for v in values[idx])


# --- permutation importance --------------------------------------------------

@dataclass(frozen=True)
class ImportanceReport:
    loss: str
    baseline_loss: float
    feature_names: tuple
    permuted_losses: tuple  # per feature: B loss values
    mean_permuted_loss: tuple
    importance: tuple
    permutations: int
    seed: int

    def sorted_by_importance(self) -> "ImportanceReport":
        order = np.argsort(-np.asarray(self.importance), kind="stable")
        pick = lambda t: tuple(t[i] for i in order)  # noqa: E731
        return ImportanceReport(
            loss=self.loss, baseline_loss=self.baseline_loss,
            feature_names=pick(self.feature_names),
            permuted_losses=pick(self.permuted_losses),
            mean_permuted_loss=pick(self.mean_permuted_loss),
            importance=pick(self.importance),
            permutations=self.permutations, seed=self.seed)

    def to_json_dict(self) -> dict:
        return {
            "loss": self.loss,
            "baseline_loss": self.baseline_loss,
            "permutations": self.permutations,
            "seed": self.seed,
            "features": [
                {"feature": f, "permuted_losses": list(pl), "mean_permuted_loss": m,
                 "importance": imp}
                for f, pl, m, imp in zip(self.feature_names, self.permuted_losses,
                                         self.mean_permuted_loss, self.importance)
            ],
        }

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["feature", "permutation", "permuted_loss", "baseline_loss",
                    "importance"])
        for f, pl, imp in zip(self.feature_names, self.permuted_losses,
                              self.importance):
            for b, lv in enumerate(pl):
                w.writerow([f, b, repr(lv), repr(self.baseline_loss), repr(imp)])
        return buf.getvalue()


def permutation_importance(ex: Explainer, eval_set, loss: str = "rmse",
                           permutations: int = 10, seed: int = 0) -> ImportanceReport:
    """Mean loss change when each feature column is permuted B times.

    Permutation b of feature j uses a seed derived from (seed, j, b), so any
    subset of the work could be redone independently with the same outcome.
    """
    if permutations < 1:
        raise ValueError("permutations must be at least 1")
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}; choose from {sorted(LOSSES)}")
    features, truths = eval_set
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(ex.feature_names):
        raise ValueError(f"eval features must be 2-D with {len(ex.feature_names)} columns")
    if X.shape[0] == 0:
        raise ValueError("eval set must not be empty")
    truths = list(truths)
    if len(truths) != X.shape[0]:
        raise ValueError("truth length does not match eval rows")
    loss_fn = LOSSES[loss]
    baseline_loss = float(loss_fn(ex.score(X), truths))

    per_losses = []
    per_mean = []
    per_importance = []
    for j in range(X.shape[1]):
        losses = []
        diffs = []
        for b in range(permutations):
            rng = np.random.default_rng(np.random.SeedSequence([seed, j, b]))
            perm = rng.permutation(X.shape[0])
            Xp = X.copy()
            Xp[:, j] = X[perm, j]
            lv = float(loss_fn(ex.score(Xp), truths))
            losses.append(lv)
            diffs.append(lv - baseline_loss)
        per_losses.append(tuple(losses))
        per_mean.append(float(np.mean(losses)))
        # Mean of differences, not difference of means: an ignored feature
        # yields all-zero differences and therefore an exact 0.
        per_importance.append(float(np.mean(diffs)))

    return ImportanceReport(loss=loss, baseline_loss=baseline_loss,
                            feature_names=ex.feature_names,
                            permuted_losses=tuple(per_losses),
                            mean_permuted_loss=tuple(per_mean),
                            importance=tuple(per_importance),
                            permutations=permutations, seed=seed)


# --- breakdown ----------------------------------------------------------------

@dataclass(frozen=True)
class BreakdownStep:
    feature: str
    value: float
    contribution: float
    cumulative: float
    distribution: tuple


@dataclass(frozen=True)
class BreakdownReport:
    instance_id: str
    intercept: float
    steps: tuple
    final_prediction: float
    # the explainer's feature enumeration, kept for tie rules and averaging
    feature_order: tuple

    def contribution_of(self, feature: str) -> float:
        for s in self.steps:
            if s.feature == feature:
                return s.contribution
        raise ValueError(f"no step for feature {feature!r}")

    def to_json_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "intercept": self.intercept,
            "final_prediction": self.final_prediction,
            "steps": [
                {"feature": s.feature, "value": s.value,
                 "contribution": s.contribution, "cumulative": s.cumulative,
                 "distribution": list(s.distribution)}
                for s in self.steps
            ],
        }

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["step", "feature", "value", "contribution", "cumulative"])
        w.writerow([0, "(intercept)", "", repr(self.intercept), repr(self.intercept)])
        for i, s in enumerate(self.steps, start=1):
            w.writerow([i, s.feature, repr(s.value), repr(s.contribution),
                        repr(s.cumulative)])
        w.writerow([len(self.steps) + 1, "(final)", "",
                    repr(self.final_prediction), repr(self.final_prediction)])
        return buf.getvalue()


def single_feature_deltas(ex: Explainer, instance) -> np.ndarray:
    """Mean-score change when one feature alone is set to the instance's value."""
    row = _check_instance(ex, instance)
    deltas = np.empty(len(ex.feature_names), dtype=np.float64)
    for j in range(len(ex.feature_names)):
        W = ex.background.copy()
        W[:, j] = row[j]
        deltas[j] = float(np.mean(ex.score(W))) - ex.baseline
    return deltas


def breakdown(ex: Explainer, instance, max_distribution_sample: int = 1000,
              instance_id: str = "", order=None) -> BreakdownReport:
    """Greedy additive attribution of one instance's prediction.

    Step order is descending |single-feature delta| with ties on the feature
    enumeration order; ``order`` (a permutation of feature indices) forces a
    different walk, which for additive scores must not change any
    contribution. Contributions are changes in the mean prediction as
    features are overwritten cumulatively; the stored distribution sample is
    capped, but every mean is computed before capping.
    """
    if max_distribution_sample < 1:
        raise ValueError("max_distribution_sample must be at least 1")
    row = _check_instance(ex, instance)
    if order is None:
        deltas = single_feature_deltas(ex, row)
        order = np.argsort(-np.abs(deltas), kind="stable")
    else:
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(len(ex.feature_names))):
            raise ValueError("order must be a permutation of the feature indices")
    W = ex.background.copy()
    previous = ex.baseline
    steps = []
    for j in order:
        W[:, j] = row[j]
        preds = np.asarray(ex.score(W), dtype=np.float64)
        mean = float(np.mean(preds))
        steps.append(BreakdownStep(
            feature=ex.feature_names[j], value=float(row[j]),
            contribution=mean - previous, cumulative=mean,
            distribution=_cap_sample(preds, max_distribution_sample)))
        previous = mean
    final = float(np.asarray(ex.score(row[None, :]), dtype=np.float64)[0])
    return BreakdownReport(instance_id=instance_id, intercept=ex.baseline,
                           steps=tuple(steps), final_prediction=final,
                           feature_order=ex.feature_names)


def average_breakdowns(reports: Sequence[BreakdownReport],
                       max_distribution_sample: int = 1000,
                       instance_id: str = "") -> BreakdownReport:
    """Feature-name-aligned arithmetic mean of several breakdown reports.

    Steps are re-ordered by descending |averaged contribution|; cumulatives
    are rebuilt from the averaged contributions, so additivity carries over.
    Distribution samples are concatenated per feature and re-capped; they
    describe the pooled predictions, not the averaged cumulative.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to average")
    first = reports[0]
    for r in reports[1:]:
        if r.feature_order != first.feature_order:
            raise ValueError("reports explain different feature sets")
        if r.intercept != first.intercept:
            raise ValueError("reports have different intercepts")
    names = first.feature_order
    by_name = [{s.feature: s for s in r.steps} for r in reports]
    avg_contribution = {}
    avg_value = {}
    pooled = {}
    for name in names:
        steps = [m[name] for m in by_name]
        avg_contribution[name] = float(np.mean([s.contribution for s in steps]))
        avg_value[name] = float(np.mean([s.value for s in steps]))
        concat = np.concatenate([np.asarray(s.distribution) for s in steps]) \
            if steps else np.empty(0)
        pooled[name] = _cap_sample(concat, max_distribution_sample)
    order = np.argsort(-np.abs(np.asarray([avg_contribution[n] for n in names])),
                       kind="stable")
    cumulative = first.intercept
    steps_out = []
    for j in order:
        name = names[j]
        cumulative = cumulative + avg_contribution[name]
        steps_out.append(BreakdownStep(
            feature=name, value=avg_value[name],
            contribution=avg_contribution[name], cumulative=cumulative,
            distribution=pooled[name]))
    final = float(np.mean([r.final_prediction for r in reports]))
    if not instance_id:
        instance_id = "mean(" + ",".join(r.instance_id for r in reports) + ")"
    return BreakdownReport(instance_id=instance_id, intercept=first.intercept,
                           steps=tuple(steps_out), final_prediction=final,
                           feature_order=names)


# --- ceteris paribus -----------------------------------------------------------

@dataclass(frozen=True)
class CPProfile:
    instance_id: str
    feature: str
    grid: tuple
    predictions: tuple
    anchor: tuple  # (instance feature value, instance prediction)

    def to_json_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "feature": self.feature,
            "grid": list(self.grid),
            "predictions": list(self.predictions),
            "anchor": {"value": self.anchor[0], "prediction": self.anchor[1]},
        }

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["feature", "grid_value", "prediction", "is_anchor"])
        for g, p in zip(self.grid, self.predictions):
            w.writerow([self.feature, repr(g), repr(p),
                        1 if g == self.anchor[0] else 0])
        return buf.getvalue()


def _feature_index(ex: Explainer, feature: str) -> int:
    try:
        return ex.feature_names.index(feature)
    except ValueError:
        raise ValueError(f"unknown feature {feature!r}") from None


def _profile_grid(ex: Explainer, j: int, grid_size: int,
                  anchor_value: float) -> np.ndarray:
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    col = ex.background[:, j]
    pts = np.linspace(float(col.min()), float(col.max()), grid_size)
    pts = np.unique(pts)  # a constant column collapses to one point
    if anchor_value not in pts:
        pts = np.insert(pts, int(np.searchsorted(pts, anchor_value)), anchor_value)
    return pts


def ceteris_paribus(ex: Explainer, instance, feature: str, grid_size: int = 101,
                    instance_id: str = "") -> CPProfile:
    """Score of the instance as one feature sweeps an equidistant grid over
    the background range; the instance's own value is always a grid point."""
    row = _check_instance(ex, instance)
    j = _feature_index(ex, feature)
    pts = _profile_grid(ex, j, grid_size, float(row[j]))
    rows = np.tile(row, (pts.shape[0], 1))
    rows[:, j] = pts
    preds = np.asarray(ex.score(rows), dtype=np.float64)
    anchor_i = int(np.nonzero(pts == row[j])[0][0])
    return CPProfile(instance_id=instance_id, feature=feature,
                     grid=tuple(float(v) for v in pts),
                     predictions=tuple(float(v) for v in preds),
                     anchor=(float(row[j]), float(preds[anchor_i])))


def mean_ceteris_paribus(ex: Explainer, instances, feature: str,
                         grid_size: int = 101, instance_id: str = "") -> CPProfile:
    """Pointwise average of several instances' profiles on one shared grid.

    The anchor is the group's mean feature value with the averaged prediction
    at that grid point, so the anchor invariant holds by construction.
    """
    M = np.ascontiguousarray(instances, dtype=np.float64)
    if M.ndim != 2 or M.shape[1] != len(ex.feature_names) or M.shape[0] == 0:
        raise ValueError("instances must be a nonempty table matching feature_names")
    j = _feature_index(ex, feature)
    anchor_value = float(np.mean(M[:, j]))
    pts = _profile_grid(ex, j, grid_size, anchor_value)
    total = np.zeros(pts.shape[0], dtype=np.float64)
    for row in M:
        rows = np.tile(row, (pts.shape[0], 1))
        rows[:, j] = pts
        total += np.asarray(ex.score(rows), dtype=np.float64)
    preds = total / M.shape[0]
    anchor_i = int(np.nonzero(pts == anchor_value)[0][0])
    return CPProfile(instance_id=instance_id, feature=feature,
                     grid=tuple(float(v) for v in pts),
                     predictions=tuple(float(v) for v in preds),
                     anchor=(anchor_value, float(preds[anchor_i])))
