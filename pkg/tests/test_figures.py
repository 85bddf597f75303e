import csv
import io
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from sentiscope import explain as ex
from sentiscope import figures as fig
from sentiscope.benchmark import make_plan, run_benchmark, save_result
from sentiscope.data import correlation_matrix, from_csv, histogram
from sentiscope.models.api import ModelSpec

SVG_NS = "{http://www.w3.org/2000/svg}"


def _ids(root):
    return [el.get("data-id") for el in root.iter() if el.get("data-id")]


def _parse(payload_bytes):
    return ET.fromstring(payload_bytes)


@pytest.fixture(scope="module")
def dataset():
    rng = np.random.default_rng(4)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["u", "v", "rating"])
    for _ in range(40):
        a = rng.normal()
        w.writerow([f"{a:.4f}", f"{a + rng.normal():.4f}",
                    str(rng.integers(1, 6))])
    return from_csv(io.StringIO(buf.getvalue()))


@pytest.fixture(scope="module")
def linear_ex():
    bg = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    return ex.make_explainer(lambda X: 2.0 * X[:, 0] + 3.0 * X[:, 1], bg,
                             ("a", "b"))


@pytest.fixture(scope="module")
def bench_result():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((60, 3))
    y = X[:, 0] + 0.1 * rng.standard_normal(60)
    specs = [ModelSpec.make("knn", "regression"),
             ModelSpec.make("cart", "regression")]
    plan = make_plan(60, k=2, r=2, seed=3)
    return run_benchmark(specs, X, y, ("p", "q", "r"), plan)


def test_histogram_grid_structure(dataset):
    hists = [histogram(dataset, name, 6) for name in ("u", "v")]
    spec = fig.FigureSpec("histogram_grid", hists, title="features")
    payload = fig.emit_figure(spec)
    root = _parse(payload)
    assert root.tag == f"{SVG_NS}svg"
    bars = [i for i in _ids(root) if i.startswith("bar:")]
    assert len(bars) == 12  # 2 columns x 6 bins
    assert "bar:u:0" in bars and "bar:v:5" in bars
    assert fig.emit_figure(spec) == payload  # byte determinism


def test_histogram_sidecars_roundtrip(dataset):
    hists = [histogram(dataset, "u", 4)]
    spec = fig.FigureSpec("histogram_grid", hists)
    csv_b, json_b = fig.emit_sidecar(spec)
    rows = list(csv.reader(io.StringIO(csv_b.decode())))
    assert rows[0] == ["column", "bin", "left_edge", "right_edge", "count"]
    assert len(rows) == 5
    # repr round-trip keeps the exact bin edges
    assert float(rows[1][2]) == hists[0].edges[0]
    doc = json.loads(json_b)
    assert [h["column"] for h in doc["histograms"]] == ["u"]


def test_heatmap_cells_and_constant_flag(dataset):
    corr = correlation_matrix(dataset, ("u", "v", "rating"))
    spec = fig.FigureSpec("correlation_heatmap", corr)
    root = _parse(fig.emit_figure(spec))
    cells = [i for i in _ids(root) if i.startswith("cell:")]
    assert len(cells) == 9
    assert "cell:u:v" in cells
    csv_b, json_b = fig.emit_sidecar(spec)
    rows = list(csv.reader(io.StringIO(csv_b.decode())))
    assert rows[0] == ["row", "column", "correlation"]
    uv = next(r for r in rows[1:] if r[:2] == ["u", "v"])
    i, j = corr.labels.index("u"), corr.labels.index("v")
    assert float(uv[2]) == corr.values[i][j]


def test_benchmark_box_marks(bench_result):
    spec = fig.FigureSpec("benchmark_box", bench_result, title="rmse")
    root = _parse(fig.emit_figure(spec))
    ids = _ids(root)
    for algo in ("knn", "cart"):
        assert f"box:{algo}" in ids
        assert f"median:{algo}" in ids
        assert f"whisker:{algo}:low" in ids
        assert f"whisker:{algo}:high" in ids
    assert "nir" not in ids  # regression result has no rate line


def test_importance_bar_order_preserved(linear_ex):
    bg = np.asarray(linear_ex.background)
    rep = ex.permutation_importance(
        linear_ex, (bg, 2.0 * bg[:, 0] + 3.0 * bg[:, 1]),
        permutations=2, seed=1).sorted_by_importance()
    spec = fig.FigureSpec("importance_bar", rep)
    root = _parse(fig.emit_figure(spec))
    bars = [i for i in _ids(root) if i.startswith("bar:")]
    assert bars == [f"bar:{name}" for name in rep.feature_names]


def test_waterfall_shape(linear_ex):
    rep = ex.breakdown(linear_ex, np.array([2.0, 0.0]), instance_id="w")
    spec = fig.FigureSpec("breakdown_waterfall", rep)
    root = _parse(fig.emit_figure(spec))
    ids = _ids(root)
    bars = [i for i in ids if i.startswith("bar:")]
    # one intercept bar plus exactly one bar per feature
    assert bars[0] == "bar:(intercept)"
    assert sorted(bars[1:]) == ["bar:a", "bar:b"]
    assert "marker:final" in ids


def test_violin_per_step_and_constant_fallback(linear_ex):
    rep = ex.breakdown(linear_ex, np.array([2.0, 0.0]))
    spec = fig.FigureSpec("breakdown_violin", rep)
    root = _parse(fig.emit_figure(spec))
    ids = _ids(root)
    assert "violin:a" in ids and "violin:b" in ids
    assert "mean:a" in ids and "mean:b" in ids
    assert "marker:final" in ids
    # constant distributions (single background row) draw the thin-rect fallback
    solo = ex.make_explainer(lambda X: X[:, 0], np.array([[1.0, 1.0]]),
                             ("a", "b"))
    rep1 = ex.breakdown(solo, np.array([3.0, 1.0]))
    root1 = _parse(fig.emit_figure(fig.FigureSpec("breakdown_violin", rep1)))
    rects = [el for el in root1.iter(f"{SVG_NS}rect")
             if (el.get("data-id") or "").startswith("violin:")]
    assert rects  # fallback used instead of a KDE path


def test_violin_sidecar_lists_samples(linear_ex):
    rep = ex.breakdown(linear_ex, np.array([2.0, 0.0]))
    csv_b, json_b = fig.emit_sidecar(fig.FigureSpec("breakdown_violin", rep))
    rows = list(csv.reader(io.StringIO(csv_b.decode())))
    assert rows[0] == ["step", "feature", "sample", "prediction"]
    got = [float(r[3]) for r in rows[1:] if r[1] == rep.steps[0].feature]
    assert got == list(rep.steps[0].distribution)
    doc = json.loads(json_b)
    assert doc["intercept"] == rep.intercept


def test_cp_profile_polyline_and_anchor(linear_ex):
    prof = ex.ceteris_paribus(linear_ex, np.array([1.0, 1.0]), "a",
                              grid_size=5)
    spec = fig.FigureSpec("cp_profile", prof)
    root = _parse(fig.emit_figure(spec))
    ids = _ids(root)
    assert "profile:a" in ids
    assert "anchor" in ids
    polys = [el for el in root.iter(f"{SVG_NS}polyline")
             if el.get("data-id") == "profile:a"]
    assert len(polys[0].get("points").split()) == len(prof.grid)


def test_all_kinds_well_formed_and_deterministic(dataset, linear_ex,
                                                 bench_result):
    rep = ex.breakdown(linear_ex, np.array([2.0, 0.0]))
    bg = np.asarray(linear_ex.background)
    imp = ex.permutation_importance(
        linear_ex, (bg, 2.0 * bg[:, 0] + 3.0 * bg[:, 1]),
        permutations=2, seed=1)
    prof = ex.ceteris_paribus(linear_ex, np.array([1.0, 1.0]), "a")
    payloads = {
        "histogram_grid": [histogram(dataset, "u", 5)],
        "correlation_heatmap": correlation_matrix(dataset, ("u", "v")),
        "benchmark_box": bench_result,
        "importance_bar": imp,
        "breakdown_waterfall": rep,
        "breakdown_violin": rep,
        "cp_profile": prof,
    }
    assert set(payloads) == set(fig.KINDS)
    for kind, payload in payloads.items():
        spec = fig.FigureSpec(kind, payload)
        first = fig.emit_figure(spec)
        assert first.startswith(b"<?xml")
        _parse(first)  # raises if not well-formed
        assert fig.emit_figure(spec) == first
        csv_b, json_b = fig.emit_sidecar(spec)
        assert fig.emit_sidecar(spec) == (csv_b, json_b)
        json.loads(json_b)


def test_spec_validation(linear_ex):
    rep = ex.breakdown(linear_ex, np.array([2.0, 0.0]))
    with pytest.raises(ValueError, match="unknown figure kind"):
        fig.FigureSpec("pie", rep)
    with pytest.raises(ValueError, match="empty"):
        fig.emit_figure(fig.FigureSpec("histogram_grid", []))
    with pytest.raises(ValueError, match="empty"):
        fig.emit_sidecar(fig.FigureSpec("histogram_grid", []))
    with pytest.raises(ValueError):
        fig.FigureSpec("breakdown_waterfall", rep, width=0)


def test_save_figure_names_files(tmp_path, linear_ex):
    rep = ex.breakdown(linear_ex, np.array([2.0, 0.0]))
    spec = fig.FigureSpec("breakdown_waterfall", rep)
    names = fig.save_figure(spec, tmp_path, "rating5_mean")
    assert names == ["breakdown_waterfall_rating5_mean.svg",
                     "breakdown_waterfall_rating5_mean.csv",
                     "breakdown_waterfall_rating5_mean.json"]
    for name in names:
        assert (tmp_path / name).stat().st_size > 0
    svg = (tmp_path / names[0]).read_bytes()
    assert svg == fig.emit_figure(spec)


def test_benchmark_box_sidecar_matches_save_result(tmp_path, bench_result):
    csv_b, json_b = fig.emit_sidecar(
        fig.FigureSpec("benchmark_box", bench_result))
    save_result(bench_result, tmp_path / "r.json", tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_bytes() == csv_b
    assert json.loads(json_b) == json.loads((tmp_path / "r.json").read_bytes())
