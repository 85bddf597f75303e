"""Time the compiled tree kernels against the pure-Python fallback.

Both backends grow bit-identical trees; this script only measures the speed
gap on a few representative shapes and verifies the outputs match while it
is at it. Run from a checkout or an installed package:

    python3 benchmarks/compare_backends.py [--repeats 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sentiscope.models import pykernels
from sentiscope.models.kernels import compiled_available

SHAPES = (
    # rows, features, mtry, task
    (2000, 10, 3, "regression"),
    (2000, 10, 3, "classification"),
    (8000, 10, 10, "regression"),
    (500, 50, 7, "regression"),
)


def _dataset(rows: int, features: int, task: str, seed: int):
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    X = np.ascontiguousarray(rng.standard_normal((rows, features)))
    if task == "classification":
        y = rng.integers(0, 5, size=rows).astype(np.float64)
        n_classes = 5
    else:
        y = X[:, 0] * 2.0 + rng.standard_normal(rows)
        n_classes = 0
    return X, np.ascontiguousarray(y), n_classes


def _grow(kernel, X, y, n_classes, mtry, seed):
    rows = np.arange(X.shape[0], dtype=np.int64)
    return kernel(X, y, n_classes, rows, 5, 1, 1 << 20, 0.0, mtry, seed)


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3,
                        help="timings keep the best of this many runs")
    args = parser.parse_args()

    if not compiled_available():
        print("compiled backend is not built (SENTISCOPE_NO_EXT install?); "
              "nothing to compare")
        return 1
    from sentiscope.models import _ckernels

    header = f"{'shape':>28} {'python':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for rows, features, mtry, task in SHAPES:
        X, y, n_classes = _dataset(rows, features, task, seed=rows + features)
        py = _grow(pykernels.grow_tree, X, y, n_classes, mtry, seed=9)
        cc = _grow(_ckernels.grow_tree, X, y, n_classes, mtry, seed=9)
        for a, b in zip(py, cc):
            if not np.array_equal(np.asarray(a), np.asarray(b)):
                raise SystemExit(f"backend outputs differ on {rows}x{features}")
        t_py = _time(lambda: _grow(pykernels.grow_tree, X, y, n_classes, mtry, 9),
                     args.repeats)
        t_cc = _time(lambda: _grow(_ckernels.grow_tree, X, y, n_classes, mtry, 9),
                     args.repeats)
        shape = f"{rows}x{features} mtry={mtry} {task[:5]}"
        print(f"{shape:>28} {t_py:>9.3f}s {t_cc:>9.3f}s {t_py / t_cc:>7.1f}x")
    print("\noutputs verified identical on every shape")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
