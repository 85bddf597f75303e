"""Word-emotion lexicon parsing and sentiment feature extraction.

The lexicon format is the tab-separated word/label/flag layout used by the
NRC word-emotion association corpus: one ``word<TAB>label<TAB>flag`` triple
per line, flag 1 marking an association. Documents are tokenized into
lowercase alphabetic runs and mapped to a 10-dimensional score vector, one
score per label (eight basic emotions plus the two valences).
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

SENTIMENT_LABELS: tuple[str, ...] = (
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "sadness",
    "surprise",
    "trust",
    "negative",
    "positive",
)

BASIC_EMOTIONS: tuple[str, ...] = SENTIMENT_LABELS[:8]
VALENCES: tuple[str, ...] = SENTIMENT_LABELS[8:]

RAW_COUNT = "raw-count"
TOKEN_NORMALIZED = "token-normalized"

_LABEL_INDEX = {label: i for i, label in enumerate(SENTIMENT_LABELS)}

# Lowercase letter runs, optionally chained by internal apostrophes
# ("don't" stays whole, "go-back" splits). \d and _ are excluded from \w
# so the class matches letters only, including non-ASCII ones.
_TOKEN_RE = re.compile(r"[^\W\d_]+(?:'[^\W\d_]+)*")


class LexiconParseError(ValueError):
    """Raised for a malformed lexicon line; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class Lexicon:
    """Immutable word -> label-set mapping.

    Keys are lowercase, non-empty and whitespace-free; every stored label
    set is non-empty. ``association_count`` is the total number of
    (word, label) pairs.
    """

    associations: Mapping[str, frozenset[str]]

    def __post_init__(self):
        object.__setattr__(self, "associations", MappingProxyType(dict(self.associations)))

    @property
    def association_count(self) -> int:
        return sum(len(labels) for labels in self.associations.values())

    def labels_for(self, word: str) -> frozenset[str]:
        return self.associations.get(word, frozenset())

    def to_tsv(self) -> bytes:
        """Serialize back to flag=1 lines, words and labels in sorted order."""
        lines = []
        for word in sorted(self.associations):
            for label in sorted(self.associations[word], key=_LABEL_INDEX.__getitem__):
                lines.append(f"{word}\t{label}\t1\n")
        return "".join(lines).encode("utf-8")


def parse_lexicon(source: bytes | str | IO[bytes]) -> Lexicon:
    """Parse an NRC-format TSV stream into a :class:`Lexicon`.

    Only flag=1 pairs are kept; words are lowercased and duplicate pairs
    collapse. Blank lines are skipped. A line with the wrong field count,
    an unknown label, a whitespace-broken word, or a flag outside {0, 1}
    raises :class:`LexiconParseError` naming the offending line.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read().decode("utf-8")

    associations: dict[str, set[str]] = {}
    for number, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise LexiconParseError(number, f"expected 3 tab-separated fields, got {len(fields)}")
        word, label, flag = fields
        word = word.strip().lower()
        if not word or any(ch.isspace() for ch in word):
            raise LexiconParseError(number, f"invalid word field {fields[0]!r}")
        if label not in _LABEL_INDEX:
            raise LexiconParseError(number, f"unknown label {label!r}")
        if flag == "1":
            associations.setdefault(word, set()).add(label)
        elif flag != "0":
            raise LexiconParseError(number, f"flag must be 0 or 1, got {flag!r}")
    return Lexicon({word: frozenset(labels) for word, labels in associations.items()})


@dataclass(frozen=True)
class SentimentVector:
    """Per-label scores for one document, aligned with SENTIMENT_LABELS."""

    scores: tuple[float, ...]
    token_count: int
    mode: str

    def score(self, label: str) -> float:
        return self.scores[_LABEL_INDEX[label]]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(SENTIMENT_LABELS, self.scores))


def tokenize(text: str) -> list[str]:
    """Split text into lowercase alphabetic tokens, keeping internal apostrophes."""
    return _TOKEN_RE.findall(text.lower())


def extract_sentiments(
    tokens: Sequence[str], lexicon: Lexicon, mode: str = TOKEN_NORMALIZED
) -> SentimentVector:
    """Count label occurrences over a token sequence (bag of words).

    Every occurrence of a word counts once per label it maps to. In
    token-normalized mode the raw counts are divided by the token count;
    an empty sequence yields all-zero scores.
    """
    if mode not in (RAW_COUNT, TOKEN_NORMALIZED):
        raise ValueError(f"unknown mode {mode!r}")
    counts = [0.0] * len(SENTIMENT_LABELS)
    for token in tokens:
        for label in lexicon.labels_for(token):
            counts[_LABEL_INDEX[label]] += 1.0
    n = len(tokens)
    if mode == TOKEN_NORMALIZED and n > 0:
        counts = [c / n for c in counts]
    return SentimentVector(scores=tuple(counts), token_count=n, mode=mode)


@dataclass(frozen=True)
class CorpusFeatures:
    """Feature table from :func:`extract_corpus`: one row per document."""

    features: np.ndarray  # (n_documents, 10), column order = SENTIMENT_LABELS
    token_counts: np.ndarray  # (n_documents,) int

    @property
    def empty_rows(self) -> np.ndarray:
        """Indices of documents that produced no tokens (flagged for removal)."""
        return np.nonzero(self.token_counts == 0)[0]

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SENTIMENT_LABELS)
        for row in self.features:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue().encode("utf-8")


def extract_corpus(
    documents: Iterable[str], lexicon: Lexicon, mode: str = TOKEN_NORMALIZED
) -> CorpusFeatures:
    """Tokenize and score every document; rows are independent of each other."""
    rows = []
    token_counts = []
    for doc in documents:
        vec = extract_sentiments(tokenize(doc), lexicon, mode)
        rows.append(vec.scores)
        token_counts.append(vec.token_count)
    features = np.asarray(rows, dtype=np.float64).reshape(len(token_counts), len(SENTIMENT_LABELS))
    return CorpusFeatures(features=features, token_counts=np.asarray(token_counts, dtype=np.int64))
