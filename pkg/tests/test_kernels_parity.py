"""The compiled and pure-Python kernels must agree bit for bit.

Forest and boosting determinism across installs hinges on this: a model
grown with one backend must serialize and predict identically under the
other. The cases sweep duplicate-heavy features, mtry subsets, class
targets, degenerate single-row/constant inputs, and pruning thresholds.
"""

import numpy as np
import pytest

from sentiscope.models import pykernels
from sentiscope.models.kernels import compiled_available

if compiled_available():
    from sentiscope.models import _ckernels
else:  # pragma: no cover - exercised only on extension-free installs
    _ckernels = None

needs_compiled = pytest.mark.skipif(
    not compiled_available(), reason="compiled kernels are not built")


def _grow_both(X, y, n_classes, rows, min_split, min_leaf, max_depth,
               min_gain, mtry, seed):
    args = (np.ascontiguousarray(X, dtype=np.float64),
            np.ascontiguousarray(y, dtype=np.float64),
            n_classes,
            np.ascontiguousarray(rows, dtype=np.int64),
            min_split, min_leaf, max_depth, min_gain, mtry, seed)
    return pykernels.grow_tree(*args), _ckernels.grow_tree(*args)


def _assert_identical(py, cc):
    names = ("feature", "threshold", "left", "right", "n_samples", "value")
    for name, a, b in zip(names, py, cc):
        a, b = np.asarray(a), np.asarray(b)
        assert a.dtype == b.dtype, name
        assert a.shape == b.shape, name
        assert np.array_equal(a, b), name


@needs_compiled
def test_splitmix_streams_match():
    for seed in (0, 1, 2 ** 63, 2 ** 64 - 1, 123456789):
        rng = pykernels.SplitMix64(seed)
        want = [rng.next_u64() for _ in range(64)]
        got = list(_ckernels.splitmix_stream(seed, 64))
        assert got == want, seed


@needs_compiled
@pytest.mark.parametrize("case", range(60))
def test_random_trees_bit_identical(case):
    rng = np.random.default_rng(np.random.SeedSequence([777, case]))
    n = int(rng.integers(2, 140))
    p = int(rng.integers(1, 8))
    X = rng.standard_normal((n, p))
    if case % 3 == 0:  # heavy duplicate values stress tie handling
        X = np.round(X * 2.0) / 2.0
    if case % 2 == 0:
        n_classes = int(rng.integers(2, 5))
        y = rng.integers(0, n_classes, size=n).astype(np.float64)
    else:
        n_classes = 0
        y = X[:, 0] + rng.standard_normal(n) * 0.3
    if case % 4 == 0:
        rows = np.sort(rng.integers(0, n, size=n)).astype(np.int64)  # bootstrap
    else:
        rows = np.arange(n, dtype=np.int64)
    mtry = int(rng.integers(1, p + 1))
    min_split = int(rng.integers(2, 8))
    min_leaf = int(rng.integers(1, 4))
    max_depth = int(rng.integers(1, 25))
    min_gain = float(rng.choice([0.0, 1e-6, 0.05]))
    seed = int(rng.integers(0, 2 ** 63))
    py, cc = _grow_both(X, y, n_classes, rows, min_split, min_leaf,
                        max_depth, min_gain, mtry, seed)
    _assert_identical(py, cc)
    # leaf routing agrees on fresh query rows too
    Q = np.ascontiguousarray(rng.standard_normal((32, p)))
    leaves_py = pykernels.tree_apply(*(np.asarray(a) for a in py[:4]), Q)
    leaves_cc = _ckernels.tree_apply(*(np.asarray(a) for a in cc[:4]), Q)
    assert np.array_equal(np.asarray(leaves_py), np.asarray(leaves_cc))


@needs_compiled
def test_degenerate_inputs_bit_identical():
    cases = [
        # single row
        (np.array([[1.0, 2.0]]), np.array([3.0]), 0, np.array([0])),
        # constant feature matrix
        (np.ones((10, 2)), np.arange(10, dtype=np.float64), 0, np.arange(10)),
        # all targets identical
        (np.random.default_rng(1).standard_normal((12, 3)),
         np.full(12, 2.5), 0, np.arange(12)),
        # one class only present in the rows subset
        (np.random.default_rng(2).standard_normal((8, 2)),
         np.zeros(8), 2, np.arange(8)),
    ]
    for X, y, n_classes, rows in cases:
        py, cc = _grow_both(X, y, n_classes, rows, 2, 1, 30, 0.0,
                            X.shape[1], 99)
        _assert_identical(py, cc)


@needs_compiled
def test_feature_subsets_match():
    for seed in (0, 5, 1 << 40):
        py_rng = pykernels.SplitMix64(seed)
        want = [list(pykernels.draw_feature_subset(py_rng, 10, 4))
                for _ in range(20)]
        # the compiled backend consumes its stream identically, so growing a
        # tree with mtry < p on both sides (covered above) plus the raw
        # stream equality pins the subset logic; replay the python draw here
        # with a fresh generator to guard against accidental state reuse
        py_rng2 = pykernels.SplitMix64(seed)
        again = [list(pykernels.draw_feature_subset(py_rng2, 10, 4))
                 for _ in range(20)]
        assert want == again
        for subset in want:
            assert subset == sorted(subset)
            assert len(set(subset)) == 4


def test_python_backend_env_override(monkeypatch):
    # selection is import-time; exercise the selector function directly
    import importlib

    import sentiscope.models.kernels as kernels_mod

    monkeypatch.setenv("SENTISCOPE_BACKEND", "python")
    reloaded = importlib.reload(kernels_mod)
    try:
        assert reloaded.active_backend() == "python"
        monkeypatch.setenv("SENTISCOPE_BACKEND", "nonsense")
        with pytest.raises(ValueError):
            importlib.reload(kernels_mod)
    finally:
        monkeypatch.delenv("SENTISCOPE_BACKEND")
        importlib.reload(kernels_mod)
