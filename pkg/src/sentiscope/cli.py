"""Command-line front end: prepare, extract, stats, benchmark, train, explain, synth.

One JSON config drives everything; any leaf can be overridden on the command
line with ``--set dotted.path=value``. Every command writes its artifacts under
``<out>/<command>/`` next to a manifest listing the produced files and the
effective config, and nothing written contains a timestamp, so identical
config + inputs give a byte-identical output tree.

Exit codes: 0 success, 1 computation error, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys

import numpy as np

from sentiscope import data as dt
from sentiscope import explain as ex
from sentiscope.benchmark import make_plan, run_benchmark, save_result
from sentiscope.figures import FigureSpec, save_figure
from sentiscope.lexicon import SENTIMENT_LABELS, TOKEN_NORMALIZED, extract_corpus, \
    parse_lexicon
from sentiscope.models.api import ALGORITHMS, TASKS, ModelSpec, fit, load_model, \
    predict, save_model

ENV_SEED = "SENTISCOPE_SEED"

DEFAULTS: dict = {
    "seed": 0,
    "paths": {
        "input": "reviews.csv",
        "lexicon": "lexicon.tsv",
        "out": "out",
        # optional override: use this feature CSV instead of <out>/extract/train.csv
        "features": None,
        "holdout": None,
    },
    "columns": {"text": "reviews.text", "rating": "reviews.rating"},
    "screening": {
        "uniform_threshold": 0.999,
        "missing_threshold": 0.10,
        "technical": list(dt.TECHNICAL_COLUMNS),
    },
    "extract": {"mode": TOKEN_NORMALIZED, "holdout": 100},
    "stats": {"bins": 30},
    "resampling": {"k": 5, "r": 5},
    "models": {"knn": {}, "cart": {}, "random_forest": {}, "gbm": {}},
    "benchmark": {"task": "regression"},
    "train": {"algorithm": "random_forest", "task": "regression"},
    "explain": {
        "mode": "importance",
        "selection": {"1": 5, "5": 5},
        "permutations": 10,
        "grid_size": 101,
        "distribution_cap": 1000,
        "background_rows": 500,
        "importance_rows": 2000,
    },
    "synth": {"n": 2000},
}


class UsageError(Exception):
    """Bad invocation or config; maps to exit code 2."""


# --- config handling ------------------------------------------------------------

# dict-valued leaves holding user data, not nested settings: a config file
# value replaces the default wholesale instead of merging into it (otherwise
# default keys could never be removed, e.g. explaining only one rating).
_ATOMIC_LEAVES = (("explain", "selection"),)


def _deep_merge(base: dict, override: dict, _path: tuple = ()) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = _path + (key,)
        if (isinstance(value, dict) and isinstance(out.get(key), dict)
                and here not in _ATOMIC_LEAVES):
            out[key] = _deep_merge(out[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_set(entry: str):
    if "=" not in entry:
        raise UsageError(f"--set needs key=value, got {entry!r}")
    key, raw = entry.split("=", 1)
    path = key.split(".")
    if not all(path):
        raise UsageError(f"--set has an empty path segment: {entry!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def _apply_set(cfg: dict, path: list, value) -> None:
    if path[0] not in DEFAULTS:
        raise UsageError(f"unknown config key {path[0]!r}")
    node = cfg
    for part in path[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[path[-1]] = value


def load_config(path, set_entries) -> dict:
    """default < config file < SENTISCOPE_SEED < --set."""
    file_cfg: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}")
        except json.JSONDecodeError as err:
            raise UsageError(f"config file is not valid JSON: {err}")
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        for key in file_cfg:
            if key not in DEFAULTS:
                raise UsageError(f"unknown config key {key!r}")
    cfg = _deep_merge(DEFAULTS, file_cfg)
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            cfg["seed"] = int(env)
        except ValueError:
            raise UsageError(f"{ENV_SEED} must be an integer, got {env!r}")
    for entry in set_entries or []:
        path_, value = _parse_set(entry)
        _apply_set(cfg, path_, value)
    if not isinstance(cfg["seed"], int):
        raise UsageError(f"seed must be an integer, got {cfg['seed']!r}")
    return cfg


# --- shared plumbing ------------------------------------------------------------

def _command_dir(cfg: dict, command: str) -> str:
    out = os.path.join(cfg["paths"]["out"], command)
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path: str, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _features_path(cfg: dict) -> str:
    override = cfg["paths"].get("features")
    if override:
        return override
    return os.path.join(cfg["paths"]["out"], "extract", "train.csv")


def _holdout_path(cfg: dict) -> str:
    override = cfg["paths"].get("holdout")
    if override:
        return override
    return os.path.join(cfg["paths"]["out"], "extract", "holdout.csv")


def _load_features(path) -> tuple:
    """(dataset, sentiment column names); requires the rating column."""
    if not os.path.exists(path):
        raise UsageError(f"feature CSV not found: {path} (run extract first)")
    ds = dt.from_csv(path, target_column=None)
    names = [n for n in SENTIMENT_LABELS if n in ds.names]
    if not names:
        raise UsageError(f"{path} has no sentiment columns")
    if "rating" not in ds.names:
        raise UsageError(f"{path} has no rating column")
    return ds, names


def _stride_rows(n: int, cap: int) -> np.ndarray:
    """Evenly strided row subset, deterministic, order preserving."""
    if n <= cap:
        return np.arange(n)
    return np.floor(np.linspace(0, n, cap, endpoint=False)).astype(np.int64)


def _class_codes(labels, levels) -> np.ndarray:
    index = {lab: i for i, lab in enumerate(levels)}
    return np.asarray([index[lab] for lab in labels], dtype=np.float64)


def _score_and_loss(model) -> tuple:
    """Scalar score function + matching loss name for the model's task."""
    if model.spec.task == "regression":
        return (lambda X: predict(model, X)), "rmse"

    def score(X):
        return _class_codes(predict(model, X).labels, model.class_levels)

    return score, "one-minus-accuracy"


def _targets_for(model, ds: dt.TabularDataset) -> np.ndarray:
    """Evaluation targets in the same space as the model's score function."""
    ratings = ds.column("rating")
    if model.spec.task == "regression":
        return ds.numeric("rating")
    labels = dt.to_class_target(ratings).values
    return _class_codes(labels, model.class_levels)


# --- commands ---------------------------------------------------------------------

def cmd_prepare(cfg: dict) -> list:
    ds = dt.from_csv(cfg["paths"]["input"],
                     kinds={cfg["columns"]["text"]: "text"})
    ds, rep_tech = dt.drop_technical(ds, cfg["screening"]["technical"])
    ds, rep_uni = dt.screen_uniform(ds, cfg["screening"]["uniform_threshold"])
    ds, rep_miss = dt.screen_missing(ds, cfg["screening"]["missing_threshold"])
    report = dt.ScreeningReport.merged(rep_tech, rep_uni, rep_miss)
    out = _command_dir(cfg, "prepare")
    dt.to_csv(ds, os.path.join(out, "cleaned.csv"))
    _write_json(os.path.join(out, "screening_report.json"), report.to_json_dict())
    return ["cleaned.csv", "screening_report.json"]


def cmd_extract(cfg: dict) -> list:
    cleaned = os.path.join(cfg["paths"]["out"], "prepare", "cleaned.csv")
    if not os.path.exists(cleaned):
        raise UsageError(f"cleaned CSV not found: {cleaned} (run prepare first)")
    text_col = cfg["columns"]["text"]
    rating_col = cfg["columns"]["rating"]
    ds = dt.from_csv(cleaned, kinds={text_col: "text"})
    for needed in (text_col, rating_col):
        if needed not in ds.names:
            raise UsageError(f"column {needed!r} not in {cleaned}")
    with open(cfg["paths"]["lexicon"], "rb") as fh:
        lex = parse_lexicon(fh)
    docs = ["" if v is None else str(v) for v in ds.column(text_col).values]
    corpus = extract_corpus(docs, lex, cfg["extract"]["mode"])
    keep = np.nonzero(corpus.token_counts > 0)[0]
    raw = ds.column(rating_col)
    kept = dt.Column(raw.name, raw.kind, tuple(raw.values[i] for i in keep))
    labels = dt.to_class_target(kept)  # validates integral 1..5 ratings
    rating_values = tuple(float(s) for s in labels.values)
    columns = [dt.Column(name, "numeric", tuple(float(v) for v in corpus.features[keep, j]))
               for j, name in enumerate(SENTIMENT_LABELS)]
    columns.append(dt.Column("rating", "numeric", rating_values))
    features = dt.TabularDataset(columns=tuple(columns), target_column="rating")
    train, holdout = dt.split_holdout(features, cfg["extract"]["holdout"], cfg["seed"])
    out = _command_dir(cfg, "extract")
    dt.to_csv(train, os.path.join(out, "train.csv"))
    dt.to_csv(holdout, os.path.join(out, "holdout.csv"))
    return ["train.csv", "holdout.csv"]


def cmd_stats(cfg: dict) -> list:
    ds, names = _load_features(_features_path(cfg))
    bins = cfg["stats"]["bins"]
    hists = [dt.histogram(ds, n, bins) for n in names]
    corr = dt.correlation_matrix(ds, list(names) + ["rating"])
    out = _command_dir(cfg, "stats")
    produced = save_figure(FigureSpec("histogram_grid", hists,
                                      title="sentiment distributions"), out, "features")
    produced += save_figure(FigureSpec("correlation_heatmap", corr,
                                       title="feature correlations"), out, "features")
    return produced


def _model_specs(cfg: dict, task: str, algorithms) -> list:
    specs = []
    for algo in algorithms:
        overrides = cfg["models"].get(algo, {})
        try:
            specs.append(ModelSpec.make(algo, task, seed=cfg["seed"], **overrides))
        except (TypeError, ValueError) as err:
            raise UsageError(f"bad model config for {algo!r}: {err}")
    return specs


def cmd_benchmark(cfg: dict) -> list:
    task = cfg["benchmark"]["task"]
    if task not in TASKS:
        raise UsageError(f"unknown task {task!r}")
    ds, names = _load_features(_features_path(cfg))
    X = ds.feature_matrix(names)
    if task == "regression":
        target = ds.numeric("rating")
    else:
        target = dt.to_class_target(ds.column("rating")).values
    specs = _model_specs(cfg, task, ALGORITHMS)
    plan = make_plan(ds.row_count, k=cfg["resampling"]["k"],
                     r=cfg["resampling"]["r"], seed=cfg["seed"])
    result = run_benchmark(specs, X, target, names, plan)
    out = _command_dir(cfg, "benchmark")
    save_result(result, os.path.join(out, "result.json"),
                os.path.join(out, "result.csv"))
    produced = save_figure(FigureSpec("benchmark_box", result,
                                      title=f"{task}: {result.metric} over resamples"),
                           out, task)
    return ["result.json", "result.csv"] + produced


def cmd_train(cfg: dict) -> list:
    algorithm = cfg["train"]["algorithm"]
    task = cfg["train"]["task"]
    if algorithm not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {algorithm!r}")
    if task not in TASKS:
        raise UsageError(f"unknown task {task!r}")
    ds, names = _load_features(_features_path(cfg))
    X = ds.feature_matrix(names)
    if task == "regression":
        target = ds.numeric("rating")
    else:
        target = dt.to_class_target(ds.column("rating")).values
    spec = _model_specs(cfg, task, [algorithm])[0]
    model = fit(spec, X, target, names)
    out = _command_dir(cfg, "train")
    save_model(model, os.path.join(out, "model.json"))
    return ["model.json"]


def _load_model_and_explainer(cfg: dict):
    model_path = os.path.join(cfg["paths"]["out"], "train", "model.json")
    if not os.path.exists(model_path):
        raise UsageError(f"model not found: {model_path} (run train first)")
    model = load_model(model_path)
    train_ds, names = _load_features(_features_path(cfg))
    if list(names) != list(model.feature_names):
        raise UsageError("feature CSV columns do not match the trained model")
    X = train_ds.feature_matrix(names)
    score, loss = _score_and_loss(model)
    background = X[_stride_rows(X.shape[0], cfg["explain"]["background_rows"])]
    explainer = ex.make_explainer(score, background, names)
    return model, explainer, train_ds, X, loss


def _importance_report(cfg, model, explainer, train_ds, X, loss):
    rows = _stride_rows(X.shape[0], cfg["explain"]["importance_rows"])
    targets = _targets_for(model, train_ds)[rows]
    return ex.permutation_importance(
        explainer, (X[rows], targets), loss=loss,
        permutations=cfg["explain"]["permutations"], seed=cfg["seed"])


def _selected_holdout_rows(cfg: dict):
    """((label, row indices) groups, holdout dataset, feature names).

    Per group: the first N holdout rows, in document order, whose ground-truth
    rating matches; fewer than requested is an error naming the shortfall."""
    path = _holdout_path(cfg)
    if not os.path.exists(path):
        raise UsageError(f"holdout CSV not found: {path} (run extract first)")
    holdout, names = _load_features(path)
    labels = dt.to_class_target(holdout.column("rating")).values
    selection = cfg["explain"]["selection"]
    groups = []
    for key in sorted(selection, key=str):
        want = selection[key]
        if not isinstance(want, int) or want < 1:
            raise UsageError(f"selection count for rating {key!r} must be a "
                             f"positive integer")
        rows = [i for i, lab in enumerate(labels) if lab == str(key)][:want]
        if len(rows) < want:
            raise ValueError(
                f"holdout has only {len(rows)} instances with rating {key}, "
                f"but {want} were requested")
        groups.append((str(key), rows))
    return groups, holdout, names


def cmd_explain(cfg: dict) -> list:
    mode = cfg["explain"]["mode"]
    if mode not in ("importance", "breakdown", "whatif"):
        raise UsageError(f"unknown explain mode {mode!r}")
    model, explainer, train_ds, X, loss = _load_model_and_explainer(cfg)
    out = _command_dir(cfg, "explain")
    produced = []

    if mode == "importance":
        report = _importance_report(cfg, model, explainer, train_ds, X, loss)
        _write_json(os.path.join(out, "importance.json"), report.to_json_dict())
        with open(os.path.join(out, "importance.csv"), "w", encoding="utf-8",
                  newline="") as fh:
            fh.write(report.to_csv_text())
        produced += ["importance.json", "importance.csv"]
        produced += save_figure(
            FigureSpec("importance_bar", report.sorted_by_importance(),
                       title="permutation importance (training split)"),
            out, "training")
        return produced

    groups, holdout, names = _selected_holdout_rows(cfg)
    holdout_X = holdout.feature_matrix(names)
    cap = cfg["explain"]["distribution_cap"]

    if mode == "breakdown":
        for label, rows in groups:
            reports = []
            for i in rows:
                rep = ex.breakdown(explainer, holdout_X[i], max_distribution_sample=cap,
                                   instance_id=f"holdout-{i}-rating-{label}")
                name = f"breakdown_rating{label}_row{i}"
                _write_json(os.path.join(out, name + ".json"), rep.to_json_dict())
                with open(os.path.join(out, name + ".csv"), "w", encoding="utf-8",
                          newline="") as fh:
                    fh.write(rep.to_csv_text())
                produced += [name + ".json", name + ".csv"]
                reports.append(rep)
            avg = ex.average_breakdowns(reports, max_distribution_sample=cap,
                                        instance_id=f"rating-{label}-mean")
            name = f"breakdown_rating{label}_mean"
            _write_json(os.path.join(out, name + ".json"), avg.to_json_dict())
            with open(os.path.join(out, name + ".csv"), "w", encoding="utf-8",
                      newline="") as fh:
                fh.write(avg.to_csv_text())
            produced += [name + ".json", name + ".csv"]
            title = f"average breakdown, rating {label}"
            produced += save_figure(FigureSpec("breakdown_waterfall", avg, title=title),
                                    out, f"rating{label}_mean")
            produced += save_figure(FigureSpec("breakdown_violin", avg, title=title),
                                    out, f"rating{label}_mean")
        return produced

    # whatif: averaged profiles for the top-4 features by global importance
    importance = _importance_report(cfg, model, explainer, train_ds, X, loss)
    top = importance.sorted_by_importance().feature_names[:4]
    _write_json(os.path.join(out, "whatif_importance.json"),
                importance.to_json_dict())
    produced.append("whatif_importance.json")
    for label, rows in groups:
        instances = holdout_X[np.asarray(rows, dtype=np.int64)]
        for feature in top:
            prof = ex.mean_ceteris_paribus(
                explainer, instances, feature,
                grid_size=cfg["explain"]["grid_size"],
                instance_id=f"rating-{label}-mean")
            produced += save_figure(
                FigureSpec("cp_profile", prof,
                           title=f"what-if: {feature}, rating {label}"),
                out, f"rating{label}_{feature}")
    return produced


def cmd_synth(cfg: dict) -> list:
    ds = dt.generate_synthetic_reviews(cfg["synth"]["n"], cfg["seed"])
    out = _command_dir(cfg, "synth")
    dt.to_csv(ds, os.path.join(out, "synthetic.csv"))
    return ["synthetic.csv"]


_COMMANDS = {
    "prepare": cmd_prepare,
    "extract": cmd_extract,
    "stats": cmd_stats,
    "benchmark": cmd_benchmark,
    "train": cmd_train,
    "explain": cmd_explain,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sentiscope",
        description="Review-sentiment modelling and explanation pipeline.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override a config leaf, e.g. --set resampling.k=10")
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 2 if err.code else 0
    try:
        cfg = load_config(args.config, args.overrides)
        handler = _COMMANDS[args.command]
        produced = handler(cfg)
        manifest = {"command": args.command, "produced": sorted(produced),
                    "config": cfg}
        _write_json(os.path.join(_command_dir(cfg, args.command), "manifest.json"),
                    manifest)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (FileNotFoundError, PermissionError, IsADirectoryError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # computation failure
        print(f"error: {err}", file=sys.stderr)
        return 1
    for name in sorted(produced):
        print(os.path.join(cfg["paths"]["out"], args.command, name))
    return 0


if __name__ == "__main__":
    sys.exit(main())
