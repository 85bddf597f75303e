"""Deterministic SVG rendering of the report types, with CSV/JSON sidecars.

Every data mark carries a data-id attribute so tests can assert structure
(one bar per feature, one violin per step, ...). Rendering is a pure
function of the FigureSpec: fixed fonts, fixed palette, no timestamps, so
identical specs produce identical bytes. Sidecars carry every rendered
number at full precision (repr round-trip).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from xml.etree import ElementTree as ET

import numpy as np

from sentiscope.benchmark import BenchmarkResult
from sentiscope.data import CorrelationMatrix, HistogramData
from sentiscope.explain import BreakdownReport, CPProfile, ImportanceReport

KINDS = ("histogram_grid", "correlation_heatmap", "benchmark_box",
         "importance_bar", "breakdown_waterfall", "breakdown_violin",
         "cp_profile")

_FONT = "monospace"
_AXIS = "#444444"
_BAR = "#4878a8"
_POS = "#2a7e43"
_NEG = "#b23a3a"
_MARK = "#1a1a1a"


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    payload: object
    title: str = ""
    width: int = 720
    height: int = 480

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("figure dimensions must be positive")


def _f(v: float) -> str:
    """Fixed pixel-coordinate formatting."""
    return f"{v:.2f}"


def _svg_root(spec: FigureSpec) -> ET.Element:
    root = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg",
        "width": str(spec.width), "height": str(spec.height),
        "viewBox": f"0 0 {spec.width} {spec.height}",
    })
    ET.SubElement(root, "rect", {"x": "0", "y": "0", "width": str(spec.width),
                                 "height": str(spec.height), "fill": "#ffffff"})
    if spec.title:
        _text(root, spec.width / 2, 18, spec.title, size=13, anchor="middle")
    return root


def _text(parent, x, y, s, size=11, anchor="start", color=_AXIS, data_id=None):
    at = {"x": _f(x), "y": _f(y), "font-family": _FONT,
          "font-size": str(size), "fill": color, "text-anchor": anchor}
    if data_id:
        at["data-id"] = data_id
    el = ET.SubElement(parent, "text", at)
    el.text = s
    return el


def _line(parent, x1, y1, x2, y2, color=_AXIS, width=1.0, data_id=None, dash=None):
    at = {"x1": _f(x1), "y1": _f(y1), "x2": _f(x2), "y2": _f(y2),
          "stroke": color, "stroke-width": _f(width)}
    if dash:
        at["stroke-dasharray"] = dash
    if data_id:
        at["data-id"] = data_id
    return ET.SubElement(parent, "line", at)


def _rect(parent, x, y, w, h, fill=_BAR, data_id=None):
    at = {"x": _f(x), "y": _f(y), "width": _f(max(w, 0.0)), "height": _f(max(h, 0.0)),
          "fill": fill}
    if data_id:
        at["data-id"] = data_id
    return ET.SubElement(parent, "rect", at)


def _polyline(parent, points, color=_BAR, width=1.5, data_id=None):
    pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in points)
    at = {"points": pts, "fill": "none", "stroke": color, "stroke-width": _f(width)}
    if data_id:
        at["data-id"] = data_id
    return ET.SubElement(parent, "polyline", at)


def _path(parent, d, fill=_BAR, data_id=None):
    at = {"d": d, "fill": fill, "stroke": "none"}
    if data_id:
        at["data-id"] = data_id
    return ET.SubElement(parent, "path", at)


class _Scale:
    """Linear data->pixel map."""

    def __init__(self, lo: float, hi: float, p0: float, p1: float):
        if hi == lo:
            hi = lo + 1.0
        self.lo, self.hi, self.p0, self.p1 = lo, hi, p0, p1

    def __call__(self, v: float) -> float:
        return self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)


def _padded(lo: float, hi: float, frac: float = 0.05):
    span = hi - lo
    if span == 0:
        span = abs(hi) if hi else 1.0
    return lo - frac * span, hi + frac * span


# --- per-kind renderers -------------------------------------------------------

def _render_histogram_grid(spec: FigureSpec, root: ET.Element) -> None:
    hists = list(spec.payload)
    if not hists:
        raise ValueError("empty payload: no histograms")
    cols = math.ceil(math.sqrt(len(hists)))
    rows = math.ceil(len(hists) / cols)
    top, pad = 30.0, 10.0
    pw = (spec.width - pad * (cols + 1)) / cols
    ph = (spec.height - top - pad * (rows + 1)) / rows
    for i, h in enumerate(hists):
        if not isinstance(h, HistogramData) or len(h.counts) == 0:
            raise ValueError("empty payload: histogram without bins")
        r, c = divmod(i, cols)
        x0 = pad + c * (pw + pad)
        y0 = top + pad + r * (ph + pad)
        _text(root, x0 + pw / 2, y0 + 10, h.column, size=10, anchor="middle")
        area_top, area_bot = y0 + 16, y0 + ph - 14
        xs = _Scale(h.edges[0], h.edges[-1], x0, x0 + pw)
        peak = max(max(h.counts), 1)
        ys = _Scale(0, peak, area_bot, area_top)
        for b, count in enumerate(h.counts):
            left, right = xs(h.edges[b]), xs(h.edges[b + 1])
            _rect(root, left, ys(count), max(right - left - 0.5, 0.5),
                  area_bot - ys(count), data_id=f"bar:{h.column}:{b}")
        _line(root, x0, area_bot, x0 + pw, area_bot)
        _text(root, x0, y0 + ph - 3, repr(float(h.edges[0]))[:8], size=8)
        _text(root, x0 + pw, y0 + ph - 3, repr(float(h.edges[-1]))[:8],
              size=8, anchor="end")


def _heat_color(v: float) -> str:
    # -1 blue to 0 white to +1 red
    v = min(1.0, max(-1.0, v))
    if v >= 0:
        r, g, b = 255, round(255 * (1 - v * 0.75)), round(255 * (1 - v * 0.75))
    else:
        r, g, b = round(255 * (1 + v * 0.75)), round(255 * (1 + v * 0.75)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def _render_heatmap(spec: FigureSpec, root: ET.Element) -> None:
    m: CorrelationMatrix = spec.payload
    labels = list(m.labels)
    if not labels:
        raise ValueError("empty payload: no columns")
    n = len(labels)
    left, top = 110.0, 70.0
    size = min((spec.width - left - 20) / n, (spec.height - top - 20) / n)
    starred = {c for c in m.constant_columns}
    for i, lab in enumerate(labels):
        shown = lab + ("*" if lab in starred else "")
        _text(root, left - 6, top + i * size + size / 2 + 3, shown, size=9,
              anchor="end")
        _text(root, left + i * size + size / 2, top - 6, shown, size=9,
              anchor="middle")
    for i in range(n):
        for j in range(n):
            v = float(m.values[i][j])
            x, y = left + j * size, top + i * size
            _rect(root, x, y, size - 1, size - 1, fill=_heat_color(v),
                  data_id=f"cell:{labels[i]}:{labels[j]}")
            if size >= 24:
                _text(root, x + (size - 1) / 2, y + size / 2 + 3, f"{v:.2f}",
                      size=8, anchor="middle", color="#222222")


def _render_benchmark_box(spec: FigureSpec, root: ET.Element) -> None:
    res: BenchmarkResult = spec.payload
    algos = list(res.per_algorithm)
    if not algos or any(len(a.values) == 0 for a in algos):
        raise ValueError("empty payload: no benchmark values")
    left, right, top, bottom = 70.0, 20.0, 40.0, 50.0
    all_values = [v for a in algos for v in a.values]
    lo, hi = _padded(min(all_values + ([res.no_information_rate]
                                       if res.no_information_rate is not None else [])),
                     max(all_values))
    ys = _Scale(lo, hi, spec.height - bottom, top)
    slot = (spec.width - left - right) / len(algos)
    _line(root, left, top, left, spec.height - bottom)
    for t in np.linspace(lo, hi, 5):
        _line(root, left - 3, ys(t), left, ys(t))
        _text(root, left - 6, ys(t) + 3, f"{t:.3f}", size=9, anchor="end")
    _text(root, 14, (top + spec.height - bottom) / 2, res.metric, size=10)
    if res.no_information_rate is not None:
        _line(root, left, ys(res.no_information_rate), spec.width - right,
              ys(res.no_information_rate), color=_NEG, dash="4 3", data_id="nir")
    for i, a in enumerate(algos):
        cx = left + slot * (i + 0.5)
        vals = np.asarray(a.values, dtype=np.float64)
        q1, med, q3 = (float(np.percentile(vals, q)) for q in (25, 50, 75))
        vmin, vmax = float(vals.min()), float(vals.max())
        bw = slot * 0.4
        _line(root, cx, ys(vmin), cx, ys(q1), data_id=f"whisker:{a.algorithm}:low")
        _line(root, cx, ys(q3), cx, ys(vmax), data_id=f"whisker:{a.algorithm}:high")
        _rect(root, cx - bw / 2, ys(q3), bw, ys(q1) - ys(q3),
              fill="#a8c4dd", data_id=f"box:{a.algorithm}")
        _line(root, cx - bw / 2, ys(med), cx + bw / 2, ys(med), color=_MARK,
              width=1.5, data_id=f"median:{a.algorithm}")
        _text(root, cx, spec.height - bottom + 16, a.algorithm, size=10,
              anchor="middle")


def _render_importance_bar(spec: FigureSpec, root: ET.Element) -> None:
    rep: ImportanceReport = spec.payload
    if not rep.feature_names:
        raise ValueError("empty payload: no features")
    left, right, top, bottom = 120.0, 20.0, 40.0, 30.0
    n = len(rep.feature_names)
    lo = min(0.0, min(rep.importance))
    hi = max(0.0, max(rep.importance))
    lo, hi = _padded(lo, hi)
    xs = _Scale(lo, hi, left, spec.width - right)
    slot = (spec.height - top - bottom) / n
    _line(root, xs(0.0), top, xs(0.0), spec.height - bottom)
    for i, (name, imp) in enumerate(zip(rep.feature_names, rep.importance)):
        y = top + slot * i + slot * 0.15
        h = slot * 0.7
        x0, x1 = xs(min(0.0, imp)), xs(max(0.0, imp))
        _rect(root, x0, y, x1 - x0, h, data_id=f"bar:{name}")
        _text(root, left - 6, y + h / 2 + 3, name, size=9, anchor="end")
    _text(root, (left + spec.width - right) / 2, spec.height - 8,
          f"importance ({rep.loss} increase, B={rep.permutations})",
          size=9, anchor="middle")


def _render_waterfall(spec: FigureSpec, root: ET.Element) -> None:
    rep: BreakdownReport = spec.payload
    if not rep.steps:
        raise ValueError("empty payload: no steps")
    left, right, top, bottom = 150.0, 20.0, 40.0, 30.0
    levels = [rep.intercept] + [s.cumulative for s in rep.steps] + [rep.final_prediction]
    lo, hi = _padded(min(levels), max(levels))
    xs = _Scale(lo, hi, left, spec.width - right)
    rows = 1 + len(rep.steps)
    slot = (spec.height - top - bottom) / (rows + 1)
    # intercept bar, drawn from the axis floor to the baseline
    y = top + slot * 0.15
    _rect(root, xs(lo), y, xs(rep.intercept) - xs(lo), slot * 0.7,
          fill="#9aa7b8", data_id="bar:(intercept)")
    _text(root, left - 6, y + slot * 0.45, "intercept", size=9, anchor="end")
    prev = rep.intercept
    for i, s in enumerate(rep.steps):
        y = top + slot * (i + 1) + slot * 0.15
        color = _POS if s.contribution >= 0 else _NEG
        x0, x1 = xs(min(prev, s.cumulative)), xs(max(prev, s.cumulative))
        _rect(root, x0, y, max(x1 - x0, 0.8), slot * 0.7, fill=color,
              data_id=f"bar:{s.feature}")
        label = f"{s.feature}={_short(s.value)}"
        _text(root, left - 6, y + slot * 0.45, label, size=9, anchor="end")
        prev = s.cumulative
    fy0 = top + slot * rows
    _line(root, xs(rep.final_prediction), top, xs(rep.final_prediction),
          fy0 + slot * 0.85, color=_MARK, width=1.5, dash="5 3",
          data_id="marker:final")
    _text(root, xs(rep.final_prediction), fy0 + slot,
          f"final={_short(rep.final_prediction)}", size=9, anchor="middle")


def _short(v: float) -> str:
    return f"{v:.4g}"


def _silverman_bandwidth(x: np.ndarray) -> float:
    n = x.shape[0]
    if n < 2:
        return 0.0
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * n ** (-0.2)


def _kde(x: np.ndarray, at: np.ndarray, bw: float) -> np.ndarray:
    z = (at[:, None] - x[None, :]) / bw
    return np.exp(-0.5 * z * z).sum(axis=1) / (x.shape[0] * bw * math.sqrt(2 * math.pi))


def _render_violin(spec: FigureSpec, root: ET.Element) -> None:
    rep: BreakdownReport = spec.payload
    if not rep.steps:
        raise ValueError("empty payload: no steps")
    left, right, top, bottom = 60.0, 20.0, 40.0, 60.0
    samples = [np.asarray(s.distribution, dtype=np.float64) for s in rep.steps]
    if any(s.size == 0 for s in samples):
        raise ValueError("empty payload: step without distribution sample")
    allv = np.concatenate(samples + [np.asarray([rep.final_prediction])])
    lo, hi = _padded(float(allv.min()), float(allv.max()))
    ys = _Scale(lo, hi, spec.height - bottom, top)
    slot = (spec.width - left - right) / len(samples)
    _line(root, left, top, left, spec.height - bottom)
    for t in np.linspace(lo, hi, 5):
        _line(root, left - 3, ys(t), left, ys(t))
        _text(root, left - 6, ys(t) + 3, f"{t:.2f}", size=9, anchor="end")
    _line(root, left, ys(rep.final_prediction), spec.width - right,
          ys(rep.final_prediction), color=_MARK, dash="5 3", data_id="marker:final")
    for i, (s, x) in enumerate(zip(rep.steps, samples)):
        cx = left + slot * (i + 0.5)
        half = slot * 0.38
        bw = _silverman_bandwidth(x)
        if bw > 0:
            at = np.linspace(float(x.min()) - 3 * bw, float(x.max()) + 3 * bw, 41)
            dens = _kde(x, at, bw)
            w = dens / dens.max() * half
            right_side = [(cx + wi, ys(v)) for v, wi in zip(at, w)]
            left_side = [(cx - wi, ys(v)) for v, wi in zip(at[::-1], w[::-1])]
            d = "M " + " L ".join(f"{_f(px)} {_f(py)}" for px, py in
                                  right_side + left_side) + " Z"
            _path(root, d, fill="#a8c4dd", data_id=f"violin:{s.feature}")
        else:
            v = float(x[0])
            _rect(root, cx - half, ys(v) - 1.0, half * 2, 2.0, fill="#a8c4dd",
                  data_id=f"violin:{s.feature}")
        _line(root, cx - half, ys(s.cumulative), cx + half, ys(s.cumulative),
              color=_MARK, data_id=f"mean:{s.feature}")
        _text(root, cx, spec.height - bottom + 14, s.feature, size=8,
              anchor="middle")
    _text(root, (left + spec.width - right) / 2, spec.height - 10,
          "prediction distribution per breakdown step", size=9, anchor="middle")


def _render_cp_profile(spec: FigureSpec, root: ET.Element) -> None:
    prof: CPProfile = spec.payload
    if not prof.grid:
        raise ValueError("empty payload: no grid points")
    left, right, top, bottom = 70.0, 20.0, 40.0, 50.0
    gx = np.asarray(prof.grid, dtype=np.float64)
    gy = np.asarray(prof.predictions, dtype=np.float64)
    xlo, xhi = _padded(float(gx.min()), float(gx.max()))
    ylo, yhi = _padded(float(gy.min()), float(gy.max()))
    xs = _Scale(xlo, xhi, left, spec.width - right)
    ys = _Scale(ylo, yhi, spec.height - bottom, top)
    _line(root, left, spec.height - bottom, spec.width - right,
          spec.height - bottom)
    _line(root, left, top, left, spec.height - bottom)
    for t in np.linspace(xlo, xhi, 5):
        _text(root, xs(t), spec.height - bottom + 14, f"{t:.3g}", size=9,
              anchor="middle")
    for t in np.linspace(ylo, yhi, 5):
        _text(root, left - 6, ys(t) + 3, f"{t:.3g}", size=9, anchor="end")
    _polyline(root, list(zip(xs(gx), ys(gy))), data_id=f"profile:{prof.feature}")
    ax, ay = prof.anchor
    ET.SubElement(root, "circle", {
        "cx": _f(xs(ax)), "cy": _f(ys(ay)), "r": "4", "fill": _NEG,
        "data-id": "anchor"})
    _text(root, (left + spec.width - right) / 2, spec.height - 8,
          prof.feature, size=10, anchor="middle")


_RENDERERS = {
    "histogram_grid": _render_histogram_grid,
    "correlation_heatmap": _render_heatmap,
    "benchmark_box": _render_benchmark_box,
    "importance_bar": _render_importance_bar,
    "breakdown_waterfall": _render_waterfall,
    "breakdown_violin": _render_violin,
    "cp_profile": _render_cp_profile,
}


def emit_figure(spec: FigureSpec) -> bytes:
    """Render a FigureSpec as standalone SVG bytes."""
    root = _svg_root(spec)
    _RENDERERS[spec.kind](spec, root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


# --- sidecars -------------------------------------------------------------------

def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue().encode("utf-8")


def emit_sidecar(spec: FigureSpec):
    """(CSV bytes, JSON bytes) carrying every rendered number exactly."""
    kind, payload = spec.kind, spec.payload
    if kind == "histogram_grid":
        hists = list(payload)
        if not hists or any(len(h.counts) == 0 for h in hists):
            raise ValueError("empty payload: no histograms")
        rows = []
        for h in hists:
            for b, count in enumerate(h.counts):
                rows.append([h.column, b, repr(float(h.edges[b])),
                             repr(float(h.edges[b + 1])), count])
        csv_b = _csv_bytes(["column", "bin", "left_edge", "right_edge", "count"], rows)
        doc = {"histograms": [h.to_json_dict() for h in hists]}
    elif kind == "correlation_heatmap":
        if not payload.labels:
            raise ValueError("empty payload: no columns")
        labels = list(payload.labels)
        rows = [[labels[i], labels[j], repr(float(payload.values[i][j]))]
                for i in range(len(labels)) for j in range(len(labels))]
        csv_b = _csv_bytes(["row", "column", "correlation"], rows)
        doc = payload.to_json_dict()
    elif kind == "benchmark_box":
        if not payload.per_algorithm or any(len(a.values) == 0
                                            for a in payload.per_algorithm):
            raise ValueError("empty payload: no benchmark values")
        csv_b = payload.to_csv_text().encode("utf-8")
        doc = payload.to_json_dict()
    elif kind == "importance_bar":
        if not payload.feature_names:
            raise ValueError("empty payload: no features")
        csv_b = payload.to_csv_text().encode("utf-8")
        doc = payload.to_json_dict()
    elif kind == "breakdown_waterfall":
        if not payload.steps:
            raise ValueError("empty payload: no steps")
        csv_b = payload.to_csv_text().encode("utf-8")
        doc = payload.to_json_dict()
    elif kind == "breakdown_violin":
        if not payload.steps:
            raise ValueError("empty payload: no steps")
        rows = []
        for i, s in enumerate(payload.steps, start=1):
            for k, v in enumerate(s.distribution):
                rows.append([i, s.feature, k, repr(float(v))])
        csv_b = _csv_bytes(["step", "feature", "sample", "prediction"], rows)
        doc = payload.to_json_dict()
    else:
        if not payload.grid:
            raise ValueError("empty payload: no grid points")
        csv_b = payload.to_csv_text().encode("utf-8")
        doc = payload.to_json_dict()
    json_b = (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")
    return csv_b, json_b


def save_figure(spec: FigureSpec, directory, slug: str) -> list:
    """Write <kind>_<slug>.svg/.csv/.json under directory; returns the names."""
    import os

    base = f"{spec.kind}_{slug}"
    svg = emit_figure(spec)
    csv_b, json_b = emit_sidecar(spec)
    names = []
    for ext, blob in (("svg", svg), ("csv", csv_b), ("json", json_b)):
        name = f"{base}.{ext}"
        with open(os.path.join(directory, name), "wb") as fh:
            fh.write(blob)
        names.append(name)
    return names
