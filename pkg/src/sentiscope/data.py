"""Tabular dataset handling: CSV ingestion, column screening, descriptive
statistics, holdout splitting, and the synthetic review generator used by
tests and benchmarks.

Datasets are immutable; every operation returns a new dataset plus, for the
screening steps, a report of what was dropped and why. Missing cells are
empty CSV strings on disk and None (or NaN for numeric access) in memory.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from sentiscope.lexicon import SENTIMENT_LABELS

KINDS = ("numeric", "categorical", "text")

# Column names the source schema marks as identifiers, timestamps or URLs;
# they carry no modeling signal and are dropped before screening.
TECHNICAL_COLUMNS = (
    "id", "dateAdded", "dateUpdated", "keys", "reviews.date", "reviews.dateSeen",
    "reviews.sourceURLs", "reviews.username", "sourceURLs", "websites",
)


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    values: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown column kind {self.kind!r}")

    def non_missing(self) -> list:
        if self.kind == "numeric":
            return [v for v in self.values if v is not None and not math.isnan(v)]
        return [v for v in self.values if v is not None]

    def missing_count(self) -> int:
        return len(self.values) - len(self.non_missing())


@dataclass(frozen=True)
class TabularDataset:
    columns: tuple
    target_column: Union[str, None] = None

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("column names must be unique")
        lengths = {len(c.values) for c in self.columns}
        if len(lengths) > 1:
            raise ValueError("all columns must have the same length")
        if self.target_column is not None and self.target_column not in names:
            raise ValueError(f"target column {self.target_column!r} does not exist")

    @property
    def row_count(self) -> int:
        return len(self.columns[0].values) if self.columns else 0

    @property
    def names(self) -> tuple:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise ValueError(f"no column named {name!r}")

    def numeric(self, name: str) -> np.ndarray:
        """Column as float64 with NaN in missing cells."""
        c = self.column(name)
        if c.kind != "numeric":
            raise ValueError(f"column {name!r} is {c.kind}, not numeric")
        return np.asarray([np.nan if v is None else v for v in c.values], dtype=np.float64)

    def feature_matrix(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.numeric(n) for n in names]) if names else \
            np.empty((self.row_count, 0))

    def take(self, row_indices) -> "TabularDataset":
        """New dataset with the given rows, in the order given."""
        idx = list(row_indices)
        cols = tuple(Column(c.name, c.kind, tuple(c.values[i] for i in idx))
                     for c in self.columns)
        return TabularDataset(columns=cols, target_column=self.target_column)

    def without(self, names) -> "TabularDataset":
        drop = set(names)
        target = self.target_column if self.target_column not in drop else None
        return TabularDataset(
            columns=tuple(c for c in self.columns if c.name not in drop),
            target_column=target)


@dataclass(frozen=True)
class ScreeningReport:
    dropped_uniform: tuple = ()
    dropped_missing: tuple = ()
    dropped_technical: tuple = ()
    not_found: tuple = ()
    kept: tuple = ()

    @staticmethod
    def merged(*reports: "ScreeningReport") -> "ScreeningReport":
        """Combine sequential screening stages; kept = the last stage's kept."""
        out = ScreeningReport(kept=reports[-1].kept if reports else ())
        for r in reports:
            out = ScreeningReport(
                dropped_uniform=out.dropped_uniform + r.dropped_uniform,
                dropped_missing=out.dropped_missing + r.dropped_missing,
                dropped_technical=out.dropped_technical + r.dropped_technical,
                not_found=out.not_found + r.not_found,
                kept=out.kept)
        return out

    def to_json_dict(self) -> dict:
        return {
            "dropped_uniform": [{"column": c, "modal_fraction": f}
                                for c, f in self.dropped_uniform],
            "dropped_missing": [{"column": c, "missing_fraction": f}
                                for c, f in self.dropped_missing],
            "dropped_technical": list(self.dropped_technical),
            "not_found": list(self.not_found),
            "kept": list(self.kept),
        }


@dataclass(frozen=True)
class HistogramData:
    column: str
    edges: tuple
    counts: tuple

    def to_json_dict(self) -> dict:
        return {"column": self.column, "edges": list(self.edges),
                "counts": list(self.counts)}


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple
    values: np.ndarray
    constant_columns: tuple = ()

    def to_json_dict(self) -> dict:
        return {"labels": list(self.labels),
                "values": [[float(v) for v in row] for row in self.values],
                "constant_columns": list(self.constant_columns)}


# --- CSV I/O ----------------------------------------------------------------

def _parse_cell(s: str) -> Union[float, None]:
    try:
        v = float(s)
    except ValueError:
        return None
    return v


def from_csv(path_or_file, kinds: Union[dict, None] = None,
             target_column: Union[str, None] = None) -> TabularDataset:
    """Read an RFC-4180 CSV with header row. Empty cells are missing.

    A column is numeric when every non-empty cell parses as a float;
    ``kinds`` overrides inference per column name (e.g. {'reviews.text': 'text'}).
    """
    if hasattr(path_or_file, "read"):
        rows = list(csv.reader(path_or_file))
    else:
        with open(path_or_file, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("CSV has no header row")
    header, body = rows[0], rows[1:]
    if len(set(header)) != len(header):
        raise ValueError("duplicate column names in CSV header")
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise ValueError(f"row {i + 1} has {len(row)} cells, expected {len(header)}")
    kinds = kinds or {}
    columns = []
    for j, name in enumerate(header):
        raw = [row[j] for row in body]
        kind = kinds.get(name)
        if kind is None:
            non_empty = [s for s in raw if s != ""]
            numeric = bool(non_empty) and all(_parse_cell(s) is not None for s in non_empty)
            kind = "numeric" if numeric else "categorical"
        if kind == "numeric":
            vals = tuple(None if s == "" else _parse_cell(s) for s in raw)
            if any(v is None and s != "" for v, s in zip(vals, raw)):
                raise ValueError(f"column {name!r} declared numeric but has non-numeric cells")
        else:
            vals = tuple(None if s == "" else s for s in raw)
        columns.append(Column(name=name, kind=kind, values=vals))
    return TabularDataset(columns=tuple(columns), target_column=target_column)


def _format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def to_csv(ds: TabularDataset, path_or_file) -> None:
    """Write RFC-4180 CSV; missing cells become empty strings."""

    def write(fh):
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(ds.names)
        for i in range(ds.row_count):
            row = []
            for c in ds.columns:
                v = c.values[i]
                if v is None or (c.kind == "numeric" and math.isnan(v)):
                    row.append("")
                elif c.kind == "numeric":
                    row.append(_format_number(v))
                else:
                    row.append(v)
            w.writerow(row)

    if hasattr(path_or_file, "write"):
        write(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            write(fh)


# --- screening ---------------------------------------------------------------

def screen_uniform(ds: TabularDataset, threshold: float = 0.999):
    """Drop near-constant columns.

    Categorical/text: modal-value fraction among non-missing cells >= threshold.
    Numeric: exactly one distinct non-missing value. All-missing columns are
    left for the missingness screen.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    dropped = []
    for c in ds.columns:
        present = c.non_missing()
        if not present:
            continue
        if c.kind == "numeric":
            if len(set(present)) == 1:
                dropped.append((c.name, 1.0))
        else:
            top = max(present.count(v) for v in set(present))
            fraction = top / len(present)
            if fraction >= threshold:
                dropped.append((c.name, fraction))
    names = [n for n, _ in dropped]
    out = ds.without(names)
    return out, ScreeningReport(dropped_uniform=tuple(dropped), kept=out.names)


def screen_missing(ds: TabularDataset, threshold: float = 0.10):
    """Drop columns whose missing fraction is strictly greater than threshold."""
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must be in [0, 1)")
    dropped = []
    n = ds.row_count
    for c in ds.columns:
        fraction = c.missing_count() / n if n else 0.0
        if fraction > threshold:
            dropped.append((c.name, fraction))
    names = [n_ for n_, _ in dropped]
    out = ds.without(names)
    return out, ScreeningReport(dropped_missing=tuple(dropped), kept=out.names)


def drop_technical(ds: TabularDataset, names: Iterable[str]):
    """Drop the listed columns; names that do not exist are noted, not errors."""
    names = list(names)
    have = set(ds.names)
    hit = tuple(n for n in names if n in have)
    miss = tuple(n for n in names if n not in have)
    out = ds.without(hit)
    return out, ScreeningReport(dropped_technical=hit, not_found=miss, kept=out.names)


# --- descriptive statistics ---------------------------------------------------

def frequency_table(ds: TabularDataset, column: str, top_k: int):
    """Top-k values of a categorical/text column with percentages of
    non-missing rows, descending; ties broken lexicographically."""
    c = ds.column(column)
    if c.kind == "numeric":
        raise ValueError(f"column {column!r} is numeric; frequency_table needs categorical/text")
    present = c.non_missing()
    if top_k <= 0:
        return []
    counts: dict = {}
    for v in present:
        counts[v] = counts.get(v, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    total = len(present)
    return [(v, 100.0 * k / total) for v, k in ranked[:top_k]]


def histogram(ds: TabularDataset, column: str, bin_count: int) -> HistogramData:
    """Equal-width bins over [min, max] of the non-missing values; the last
    bin is right-closed. A constant column gets its range widened by one ulp
    per bin so the edges stay strictly increasing."""
    if bin_count < 1:
        raise ValueError("bin_count must be at least 1")
    x = ds.numeric(column)
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise ValueError(f"column {column!r} has no non-missing values")
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        hi = lo + float(np.spacing(max(abs(lo), 1.0))) * bin_count
    counts, edges = np.histogram(x, bins=bin_count, range=(lo, hi))
    return HistogramData(column=column, edges=tuple(float(e) for e in edges),
                         counts=tuple(int(c) for c in counts))


def correlation_matrix(ds: TabularDataset, columns: Sequence[str]) -> CorrelationMatrix:
    """Pairwise-complete Pearson correlations.

    A column that is constant over a pair's complete rows contributes 0 for
    that pair (never NaN); globally constant columns are flagged. Diagonal is
    always 1."""
    names = list(columns)
    if len(names) < 2:
        raise ValueError("need at least 2 columns")
    data = {n: ds.numeric(n) for n in names}
    p = len(names)
    values = np.eye(p, dtype=np.float64)
    constant = []
    for n in names:
        x = data[n]
        x = x[np.isfinite(x)]
        if x.size and np.all(x == x[0]):
            constant.append(n)
    for i in range(p):
        for j in range(i + 1, p):
            xi, xj = data[names[i]], data[names[j]]
            mask = np.isfinite(xi) & np.isfinite(xj)
            if int(mask.sum()) < 2:
                raise ValueError(
                    f"fewer than 2 complete rows for {names[i]!r} vs {names[j]!r}")
            a, b = xi[mask], xj[mask]
            if np.all(a == a[0]) or np.all(b == b[0]):
                r = 0.0
            else:
                r = float(np.corrcoef(a, b)[0, 1])
                r = min(1.0, max(-1.0, r))
            values[i, j] = values[j, i] = r
    return CorrelationMatrix(labels=tuple(names), values=values,
                             constant_columns=tuple(constant))


# --- splitting and targets -----------------------------------------------------

def split_holdout(ds: TabularDataset, n: int, seed: int):
    """Uniform sample of n rows without replacement -> (train, holdout);
    both parts keep the original row order."""
    if not 0 < n < ds.row_count:
        raise ValueError(f"holdout size {n} must be in 1..{ds.row_count - 1}")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    pick = np.sort(rng.choice(ds.row_count, size=n, replace=False))
    mask = np.zeros(ds.row_count, dtype=bool)
    mask[pick] = True
    train = ds.take(np.nonzero(~mask)[0])
    holdout = ds.take(pick)
    return train, holdout


def to_class_target(ratings: Column) -> Column:
    """Integral ratings 1..5 as a categorical column with levels '1'..'5'."""
    out = []
    for i, v in enumerate(ratings.values):
        if v is None or (isinstance(v, float) and math.isnan(v)):
            raise ValueError(f"row {i}: rating is missing")
        f = float(v)
        if f != int(f) or not 1 <= int(f) <= 5:
            raise ValueError(f"row {i}: rating {v!r} is not an integer in 1..5")
        out.append(str(int(f)))
    return Column(name=ratings.name, kind="categorical", values=tuple(out))


# --- synthetic data -------------------------------------------------------------

# Rating thresholds on the standard-normal latent score, placed at the
# cumulative class fractions (.07, .15, .27, .52) so the top class holds 48%.
_RATING_CUTS = np.array([-1.4757910281791706, -1.0364333894937898,
                         -0.6128129910166272, 0.05015358346473367])

# Per-feature recipe: (loading on the latent quality, mean, sd, floor?).
# Loadings are calibrated so sentiment-rating correlations land near the
# 0.3..0.4 band (anticipation and surprise stay near zero), and floored
# features keep a visible point mass at exactly 0.
_SYNTH_RECIPE = {
    "anger": (-0.48, 0.010, 0.030, True),
    "anticipation": (0.04, 0.055, 0.016, False),
    "disgust": (-0.48, 0.008, 0.028, True),
    "fear": (-0.47, 0.012, 0.032, True),
    "joy": (0.47, 0.065, 0.020, False),
    "sadness": (-0.47, 0.011, 0.031, True),
    "surprise": (0.04, 0.006, 0.020, True),
    "trust": (0.455, 0.075, 0.022, False),
    "negative": (-0.49, 0.020, 0.036, True),
    "positive": (0.49, 0.110, 0.030, False),
}


def generate_synthetic_reviews(n: int, seed: int) -> TabularDataset:
    """Schema-compatible stand-in corpus: 10 sentiment columns + rating.

    One latent quality factor drives both the rating (via thresholds placed
    to give a ~48% majority class) and every informative sentiment column.
    joy/positive/trust come out bell-shaped; the negative emotions are
    floored at 0 with a decaying tail; anticipation and surprise carry no
    rating signal. Deterministic per seed.
    """
    if n < 10:
        raise ValueError("n must be at least 10")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    quality = rng.standard_normal(n)
    # Unit-variance latent rating score, mostly quality-driven so that
    # nearest-neighbour votes on the features stay competitive with the NIR.
    z = 0.88 * quality + math.sqrt(1.0 - 0.88 ** 2) * rng.standard_normal(n)
    rating = 1.0 + np.searchsorted(_RATING_CUTS, z, side="right")

    columns = []
    for label in SENTIMENT_LABELS:
        loading, mu, sd, _floored = _SYNTH_RECIPE[label]
        noise = rng.standard_normal(n)
        x = mu + sd * (loading * quality + math.sqrt(1.0 - loading ** 2) * noise)
        # Scores are non-negative; for the floored features the clamp bites
        # often (point mass at 0), for the bell-shaped ones almost never.
        x = np.maximum(x, 0.0)
        columns.append(Column(name=label, kind="numeric",
                              values=tuple(float(v) for v in x)))
    columns.append(Column(name="rating", kind="numeric",
                          values=tuple(float(v) for v in rating)))
    return TabularDataset(columns=tuple(columns), target_column="rating")
