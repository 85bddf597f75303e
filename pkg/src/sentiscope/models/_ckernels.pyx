# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tree kernels: the fast backend.

Operation-for-operation mirror of ``pykernels.py``. Summation orders, the
stable sort key (value, position), the first-maximum candidate scan, the
splitmix64 feature-subset stream, and the stack discipline all match the
pure-numpy code so both backends grow bit-identical trees.
"""

import numpy as np

from libc.stdlib cimport free, malloc, qsort
from libc.stdint cimport int32_t, int64_t, uint64_t


cdef struct SortPair:
    double value
    int32_t index


cdef int _cmp_pair(const void* a, const void* b) noexcept nogil:
    cdef const SortPair* pa = <const SortPair*> a
    cdef const SortPair* pb = <const SortPair*> b
    if pa.value < pb.value:
        return -1
    if pa.value > pb.value:
        return 1
    if pa.index < pb.index:
        return -1
    if pa.index > pb.index:
        return 1
    return 0


cdef inline uint64_t _sm64_next(uint64_t* state) noexcept nogil:
    cdef uint64_t z
    state[0] = state[0] + (<uint64_t> 0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> 30)) * (<uint64_t> 0xBF58476D1CE4E5B9)
    z = (z ^ (z >> 27)) * (<uint64_t> 0x94D049BB133111EB)
    return z ^ (z >> 31)


cdef inline double _midpoint(double a, double b) noexcept nogil:
    cdef double thr = (a + b) / 2.0
    if thr == b:  # adjacent doubles: keep the <= rule consistent with the scan
        thr = a
    return thr


def splitmix_stream(object seed, int count):
    """Expose the splitmix64 stream for backend-parity tests."""
    cdef uint64_t state = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef int i
    out = np.empty(count, dtype=np.uint64)
    cdef uint64_t[::1] ov = out
    for i in range(count):
        ov[i] = _sm64_next(&state)
    return out


def grow_tree(double[:, ::1] X, double[::1] y, int n_classes, int64_t[::1] rows,
              int min_split, int min_leaf, int max_depth, double min_gain,
              int mtry, object seed):
    """Grow one binary tree; see pykernels.grow_tree for the contract."""
    cdef Py_ssize_t n_root = rows.shape[0]
    cdef int n_features = <int> X.shape[1]
    cdef Py_ssize_t cap = 2 * n_root + 1
    cdef int K = n_classes if n_classes > 0 else 1

    feature_arr = np.full(cap, -1, dtype=np.int32)
    threshold_arr = np.zeros(cap, dtype=np.float64)
    left_arr = np.full(cap, -1, dtype=np.int32)
    right_arr = np.full(cap, -1, dtype=np.int32)
    n_samples_arr = np.zeros(cap, dtype=np.int32)
    value_arr = np.zeros((cap, K), dtype=np.float64)

    cdef int32_t[::1] feature = feature_arr
    cdef double[::1] threshold = threshold_arr
    cdef int32_t[::1] left = left_arr
    cdef int32_t[::1] right = right_arr
    cdef int32_t[::1] n_samples = n_samples_arr
    cdef double[:, ::1] value = value_arr

    cdef uint64_t rng_state = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef bint use_subset = mtry < n_features

    cdef SortPair* pairs = <SortPair*> malloc(n_root * sizeof(SortPair))
    cdef double* yvbuf = <double*> malloc(n_root * sizeof(double))
    cdef double* ysrt = <double*> malloc(n_root * sizeof(double))
    cdef int64_t* cnt = <int64_t*> malloc(K * sizeof(int64_t))
    cdef int64_t* lc = <int64_t*> malloc(K * sizeof(int64_t))
    cdef int64_t* pool = <int64_t*> malloc(n_features * sizeof(int64_t))
    if pairs == NULL or yvbuf == NULL or ysrt == NULL or cnt == NULL or lc == NULL or pool == NULL:
        free(pairs); free(yvbuf); free(ysrt); free(cnt); free(lc); free(pool)
        raise MemoryError()

    cdef Py_ssize_t n_nodes = 1
    cdef list stack = [(0, np.asarray(rows).copy(), 0)]

    cdef Py_ssize_t node, n, i, b, kcnt
    cdef int depth, j, c, f, fi, nsub, best_feat, tmp_i
    cdef int64_t[::1] r
    cdef int64_t sq, lsq, rsq, diff, jdraw
    cdef double s, ss, imp, v, yy, ls, lss, dk, dnk
    cdef double left_sse, right_sse, rs, rss_, gain
    cdef double best_gain, best_thr, fbest_gain
    cdef Py_ssize_t fb
    cdef bint pure
    cdef double ymin, ymax

    try:
        while stack:
            node_tuple = stack.pop()
            node = node_tuple[0]
            rows_obj = node_tuple[1]
            depth = node_tuple[2]
            r = rows_obj
            n = r.shape[0]
            n_samples[node] = <int32_t> n

            for i in range(n):
                yvbuf[i] = y[r[i]]

            if n_classes > 0:
                for c in range(K):
                    cnt[c] = 0
                for i in range(n):
                    cnt[<int> yvbuf[i]] += 1
                sq = 0
                kcnt = 0
                for c in range(K):
                    value[node, c] = (<double> cnt[c]) / (<double> n)
                    sq += cnt[c] * cnt[c]
                    if cnt[c] > 0:
                        kcnt += 1
                imp = (<double> n) - (<double> sq) / (<double> n)
                pure = kcnt <= 1
                s = 0.0
                ss = 0.0
            else:
                s = 0.0
                ss = 0.0
                ymin = yvbuf[0]
                ymax = yvbuf[0]
                for i in range(n):
                    v = yvbuf[i]
                    s += v
                    ss += v * v
                    if v < ymin:
                        ymin = v
                    if v > ymax:
                        ymax = v
                value[node, 0] = s / (<double> n)
                imp = ss - s * s / (<double> n)
                pure = ymin == ymax

            if pure or n < min_split or n < 2 * min_leaf or depth >= max_depth:
                continue

            if use_subset:
                for j in range(n_features):
                    pool[j] = j
                for fi in range(mtry):
                    jdraw = fi + <int64_t> (_sm64_next(&rng_state) % (<uint64_t> (n_features - fi)))
                    pool[fi], pool[jdraw] = pool[jdraw], pool[fi]
                # insertion sort keeps the scan in ascending feature order
                for fi in range(1, mtry):
                    jdraw = pool[fi]
                    tmp_i = fi - 1
                    while tmp_i >= 0 and pool[tmp_i] > jdraw:
                        pool[tmp_i + 1] = pool[tmp_i]
                        tmp_i -= 1
                    pool[tmp_i + 1] = jdraw
                nsub = mtry
            else:
                for j in range(n_features):
                    pool[j] = j
                nsub = n_features

            best_gain = -np.inf
            best_feat = -1
            best_thr = 0.0

            for fi in range(nsub):
                f = <int> pool[fi]
                for i in range(n):
                    pairs[i].value = X[r[i], f]
                    pairs[i].index = <int32_t> i
                qsort(pairs, n, sizeof(SortPair), _cmp_pair)
                for i in range(n):
                    ysrt[i] = yvbuf[pairs[i].index]

                fbest_gain = -np.inf
                fb = -1
                if n_classes > 0:
                    for c in range(K):
                        lc[c] = 0
                    for b in range(n - 1):
                        lc[<int> ysrt[b]] += 1
                        if pairs[b].value == pairs[b + 1].value:
                            continue
                        if b + 1 < min_leaf or n - b - 1 < min_leaf:
                            continue
                        lsq = 0
                        rsq = 0
                        for c in range(K):
                            lsq += lc[c] * lc[c]
                            diff = cnt[c] - lc[c]
                            rsq += diff * diff
                        dk = <double> (b + 1)
                        dnk = <double> (n - b - 1)
                        gain = imp - (dk - (<double> lsq) / dk) - (dnk - (<double> rsq) / dnk)
                        if gain > fbest_gain:
                            fbest_gain = gain
                            fb = b
                else:
                    ls = 0.0
                    lss = 0.0
                    for b in range(n - 1):
                        yy = ysrt[b]
                        ls += yy
                        lss += yy * yy
                        if pairs[b].value == pairs[b + 1].value:
                            continue
                        if b + 1 < min_leaf or n - b - 1 < min_leaf:
                            continue
                        dk = <double> (b + 1)
                        dnk = <double> (n - b - 1)
                        left_sse = lss - ls * ls / dk
                        rs = s - ls
                        rss_ = ss - lss
                        right_sse = rss_ - rs * rs / dnk
                        gain = imp - left_sse - right_sse
                        if gain > fbest_gain:
                            fbest_gain = gain
                            fb = b

                if fb >= 0 and fbest_gain > best_gain:
                    best_gain = fbest_gain
                    best_feat = f
                    best_thr = _midpoint(pairs[fb].value, pairs[fb + 1].value)

            if not (best_gain > 0.0 and best_gain >= min_gain):
                continue

            kcnt = 0
            for i in range(n):
                if X[r[i], best_feat] <= best_thr:
                    kcnt += 1
            left_rows = np.empty(kcnt, dtype=np.int64)
            right_rows = np.empty(n - kcnt, dtype=np.int64)
            _partition(X, r, best_feat, best_thr, left_rows, right_rows)

            feature[node] = best_feat
            threshold[node] = best_thr
            left[node] = <int32_t> n_nodes
            right[node] = <int32_t> (n_nodes + 1)
            stack.append((n_nodes + 1, right_rows, depth + 1))
            stack.append((n_nodes, left_rows, depth + 1))
            n_nodes += 2
    finally:
        free(pairs)
        free(yvbuf)
        free(ysrt)
        free(cnt)
        free(lc)
        free(pool)

    value_out = value_arr[:n_nodes].copy()
    if n_classes == 0:
        value_out = value_out[:, 0].copy()
    return (feature_arr[:n_nodes].copy(), threshold_arr[:n_nodes].copy(),
            left_arr[:n_nodes].copy(), right_arr[:n_nodes].copy(),
            n_samples_arr[:n_nodes].copy(), value_out)


cdef void _partition(double[:, ::1] X, int64_t[::1] r, int best_feat, double best_thr,
                     int64_t[::1] left_rows, int64_t[::1] right_rows) noexcept nogil:
    cdef Py_ssize_t i, li = 0, ri = 0
    for i in range(r.shape[0]):
        if X[r[i], best_feat] <= best_thr:
            left_rows[li] = r[i]
            li += 1
        else:
            right_rows[ri] = r[i]
            ri += 1


def tree_apply(int32_t[::1] feature, double[::1] threshold, int32_t[::1] left,
               int32_t[::1] right, double[:, ::1] X):
    """Route every row of X to its leaf; returns leaf node ids."""
    cdef Py_ssize_t n = X.shape[0]
    out = np.empty(n, dtype=np.int32)
    cdef int32_t[::1] ov = out
    cdef Py_ssize_t i
    cdef int32_t node
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            ov[i] = node
    return out
