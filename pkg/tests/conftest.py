"""Shared fixtures: a reference lexicon TSV and a raw review CSV.

Both are generated deterministically so tests that compare artifact bytes
stay reproducible. The lexicon carries a realistic core vocabulary plus a
synthetic tail summing to exactly 13901 word-label associations; the review
table carries technical, uniform, and gappy columns so every screening
stage has something to do.
"""

import csv
import io

import numpy as np
import pytest

CORE_VOCAB = {
    "excellent": ("joy", "positive", "trust"),
    "amazing": ("joy", "positive", "surprise"),
    "love": ("joy", "positive", "trust"),
    "great": ("positive",),
    "wonderful": ("joy", "positive", "trust", "anticipation"),
    "perfect": ("joy", "positive", "trust"),
    "happy": ("anticipation", "joy", "positive", "trust"),
    "comfortable": ("positive", "trust"),
    "recommend": ("positive", "trust"),
    "quality": ("positive", "trust"),
    "soft": ("positive",),
    "beautiful": ("joy", "positive"),
    "easy": ("positive",),
    "fast": ("anticipation", "joy", "positive", "surprise"),
    "durable": ("positive", "trust"),
    "reliable": ("positive", "trust"),
    "pleased": ("joy", "positive"),
    "satisfied": ("joy", "positive", "trust"),
    "sturdy": ("positive", "trust"),
    "value": ("positive", "trust"),
    "gift": ("anticipation", "joy", "positive", "surprise", "trust"),
    "enjoy": ("anticipation", "joy", "positive", "trust"),
    "bright": ("anticipation", "joy", "positive", "trust"),
    "terrible": ("anger", "disgust", "fear", "negative", "sadness"),
    "awful": ("anger", "disgust", "fear", "negative", "sadness"),
    "broken": ("anger", "fear", "negative", "sadness"),
    "waste": ("disgust", "negative"),
    "defective": ("anger", "disgust", "negative", "sadness"),
    "cheap": ("negative",),
    "slow": ("negative", "sadness"),
    "disappointed": ("anger", "disgust", "negative", "sadness"),
    "horrible": ("anger", "disgust", "fear", "negative"),
    "useless": ("negative", "sadness"),
    "poor": ("anger", "disgust", "negative", "sadness"),
    "flimsy": ("negative",),
    "worst": ("anger", "disgust", "fear", "negative", "sadness"),
    "angry": ("anger", "disgust", "negative"),
    "hate": ("anger", "disgust", "fear", "negative", "sadness"),
    "garbage": ("disgust", "negative"),
    "fail": ("anger", "fear", "negative", "sadness"),
    "worry": ("anticipation", "fear", "negative", "sadness"),
    "sudden": ("surprise",),
    "unexpected": ("surprise",),
    "hope": ("anticipation", "joy", "positive", "surprise", "trust"),
    "wait": ("anticipation",),
}

_ALL_LABELS = ("anger", "anticipation", "disgust", "fear", "joy",
               "sadness", "surprise", "trust", "negative", "positive")

TARGET_ASSOCIATIONS = 13901

POSITIVE_WORDS = [w for w, ls in sorted(CORE_VOCAB.items()) if "positive" in ls]
NEGATIVE_WORDS = [w for w, ls in sorted(CORE_VOCAB.items()) if "negative" in ls]
FILLER_WORDS = ("the", "a", "this", "that", "it", "was", "is", "for", "my",
                "with", "and", "but", "tablet", "battery", "screen", "kids",
                "bought", "use", "daily", "came", "box", "price", "store",
                "week", "month", "time", "device", "cover", "case", "charge")


def lexicon_tsv_bytes() -> bytes:
    """NRC-format TSV with exactly TARGET_ASSOCIATIONS flag=1 pairs.

    Core words get a full 10-label block (flag 0 lines included, which the
    parser must skip); the synthetic tail tops the count up.
    """
    lines = []
    count = 0
    for word in sorted(CORE_VOCAB):
        labels = set(CORE_VOCAB[word])
        for label in _ALL_LABELS:
            flag = 1 if label in labels else 0
            lines.append(f"{word}\t{label}\t{flag}")
            count += flag
    i = 0
    while count < TARGET_ASSOCIATIONS:
        take = min(3, TARGET_ASSOCIATIONS - count)
        word = f"zq{i:05d}"
        for label in _ALL_LABELS[:take]:
            lines.append(f"{word}\t{label}\t1")
        count += take
        i += 1
    lines.append("")
    return "\n".join(lines).encode("utf-8")


_POS_SHARE = {1: 0.02, 2: 0.06, 3: 0.12, 4: 0.22, 5: 0.34}
_NEG_SHARE = {1: 0.30, 2: 0.22, 3: 0.12, 4: 0.05, 5: 0.02}


def _review_text(rating: int, rng) -> str:
    n = int(rng.integers(15, 41))
    p_pos, p_neg = _POS_SHARE[rating], _NEG_SHARE[rating]
    words = []
    for _ in range(n):
        u = rng.random()
        if u < p_pos:
            pool = POSITIVE_WORDS
        elif u < p_pos + p_neg:
            pool = NEGATIVE_WORDS
        else:
            pool = FILLER_WORDS
        w = pool[int(rng.integers(len(pool)))]
        if rng.random() < 0.02:
            w = w.upper()
        words.append(w)
    return " ".join(words) + "."


def reviews_csv_bytes(n: int, seed: int) -> bytes:
    """Raw review table in the source schema: technical columns, a fully
    uniform country, a gappy postalCode, text, and integral ratings."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    ratings = rng.choice([1, 2, 3, 4, 5], size=n,
                         p=[0.10, 0.10, 0.15, 0.17, 0.48])
    header = ["id", "dateAdded", "dateUpdated", "keys", "name", "brand",
              "categories", "primaryCategories", "country", "postalCode",
              "reviews.date", "reviews.dateSeen", "reviews.rating",
              "reviews.sourceURLs", "reviews.text", "reviews.username",
              "sourceURLs", "websites"]
    names = ["Fire Tablet", "Kindle Reader", "Echo Speaker", "Battery Pack"]
    brands = ["Amazon", "AmazonBasics"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for i in range(n):
        r = int(ratings[i])
        text = _review_text(r, rng)
        if i % 97 == 0:
            text = "!!! ??? 123"  # no alphabetic tokens; dropped at extraction
        w.writerow([
            f"AV{i:06d}",
            f"2016-{(i % 12) + 1:02d}-03T00:00:00Z",
            f"2017-{(i % 12) + 1:02d}-09T00:00:00Z",
            f"key{i}",
            names[i % len(names)],
            brands[i % len(brands)],
            "Electronics,Computers",
            "Office Supplies" if i == 0 else "Electronics",
            "US",
            "" if rng.random() < 0.18 else f"{98000 + (i % 50):05d}",
            f"2016-{(i % 12) + 1:02d}-01T00:00:00Z",
            f"2017-{(i % 12) + 1:02d}-02T00:00:00Z",
            str(r),
            f"https://example.com/r/{i}",
            text,
            f"user{i % 211}",
            f"https://example.com/p/{i % 7}",
            f"https://example.com/w/{i % 7}",
        ])
    return buf.getvalue().encode("utf-8")


@pytest.fixture(scope="session")
def lexicon_bytes() -> bytes:
    return lexicon_tsv_bytes()


@pytest.fixture(scope="session")
def lexicon_path(tmp_path_factory, lexicon_bytes):
    path = tmp_path_factory.mktemp("lexicon") / "lexicon.tsv"
    path.write_bytes(lexicon_bytes)
    return path


@pytest.fixture(scope="session")
def reviews_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("reviews") / "reviews.csv"
    path.write_bytes(reviews_csv_bytes(400, seed=11))
    return path
