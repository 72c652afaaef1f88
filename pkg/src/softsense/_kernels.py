"""Compiled inner loops for regression-tree growth and evaluation.

Trees are stored as flat parallel arrays in depth-first preorder (left child
before right). ``feature[i] == -1`` marks a leaf.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

# Relative slack under which two split gains are considered tied.
GAIN_RTOL = 1e-12


@njit(cache=True, nogil=True)
def _next_u64(state):
    # splitmix64
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def _randbelow(state, k):
    return int(np.float64(_next_u64(state) >> _S11) * _INV53 * k)


@njit(cache=True, nogil=True)
def _draw_features(state, p, m, perm):
    for i in range(p):
        perm[i] = i
    for i in range(m):
        j = i + _randbelow(state, p - i)
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    out = perm[:m].copy()
    out.sort()
    return out


@njit(cache=True, nogil=True)
def _segment_stats(y, rows):
    m = rows.shape[0]
    total = 0.0
    lo = y[rows[0]]
    hi = lo
    for i in range(m):
        v = y[rows[i]]
        total += v
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    mean = total / m
    sse = 0.0
    for i in range(m):
        d = y[rows[i]] - mean
        sse += d * d
    return mean, sse, lo == hi


@njit(cache=True, nogil=True)
def _scan(X, y, rows, f, mean, min_leaf, tol, best_f, best_t, best_gain):
    # rows are sorted by X[:, f]; residuals are taken about the node mean
    m = rows.shape[0]
    total = 0.0
    for i in range(m):
        total += y[rows[i]] - mean
    s_left = 0.0
    for i in range(m - 1):
        s_left += y[rows[i]] - mean
        n_left = i + 1
        n_right = m - n_left
        if n_right < min_leaf:
            break
        if n_left < min_leaf:
            continue
        v0 = X[rows[i], f]
        v1 = X[rows[i + 1], f]
        if v0 == v1:
            continue
        s_right = total - s_left
        gain = s_left * s_left / n_left + s_right * s_right / n_right - total * total / m
        if gain > best_gain + tol:
            best_gain = gain
            best_f = f
            thr = 0.5 * (v0 + v1)
            if thr >= v1:
                thr = v0
            best_t = thr
    return best_f, best_t, best_gain


@njit(cache=True, nogil=True)
def _expand(order, counts, n):
    p = order.shape[0]
    sorted_rows = np.empty((p, n), dtype=np.int64)
    for f in range(p):
        k = 0
        for r in order[f]:
            for _ in range(counts[r]):
                sorted_rows[f, k] = r
                k += 1
    return sorted_rows


@njit(cache=True, nogil=True)
def find_split(X, y, order, counts, candidates, min_leaf):
    """Best (feature, threshold, gain, sse) for the multiset of rows in ``counts``.

    Candidates are scanned in ascending order and thresholds ascending within a
    feature; a later candidate wins only when it beats the incumbent by more
    than ``GAIN_RTOL * sse``. Returns feature -1 when nothing qualifies.
    """
    n = counts.sum()
    sorted_rows = _expand(order, counts, n)
    mean, sse, pure = _segment_stats(y, sorted_rows[0])
    best_f = -1
    best_t = 0.0
    best_gain = 0.0
    if pure:
        return best_f, best_t, best_gain, sse
    tol = GAIN_RTOL * sse
    for c in range(candidates.shape[0]):
        f = candidates[c]
        best_f, best_t, best_gain = _scan(
            X, y, sorted_rows[f], f, mean, min_leaf, tol, best_f, best_t, best_gain
        )
    return best_f, best_t, best_gain, sse


@njit(cache=True, nogil=True)
def grow(X, y, order, counts, min_split, min_leaf, max_depth, mtry, seed):
    """Grow one tree on the row multiset given by ``counts``.

    ``order[f]`` is a stable argsort of ``X[:, f]``. ``mtry < X.shape[1]``
    draws that many candidate features per node from a splitmix64 stream
    started at ``seed``.
    """
    p = X.shape[1]
    n = counts.sum()
    sorted_rows = _expand(order, counts, n)
    cap = 2 * n - 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)
    sse_arr = np.zeros(cap)
    gain_arr = np.zeros(cap)

    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    perm = np.empty(p, dtype=np.int64)
    all_features = np.arange(p)
    goes_left = np.zeros(X.shape[0], dtype=np.bool_)
    scratch = np.empty(n, dtype=np.int64)

    depth_cap = min(max_depth, n) + 2
    st_start = np.empty(depth_cap, dtype=np.int64)
    st_end = np.empty(depth_cap, dtype=np.int64)
    st_depth = np.empty(depth_cap, dtype=np.int64)
    st_parent = np.empty(depth_cap, dtype=np.int64)
    st_is_left = np.empty(depth_cap, dtype=np.bool_)
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    st_parent[0] = -1
    st_is_left[0] = False
    top = 1
    n_nodes = 0
    while top > 0:
        top -= 1
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        parent = st_parent[top]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if st_is_left[top]:
                left[parent] = node
            else:
                right[parent] = node
        mean, sse, pure = _segment_stats(y, sorted_rows[0, start:end])
        m = end - start
        value[node] = mean
        count[node] = m
        sse_arr[node] = sse
        if m < min_split or depth >= max_depth or pure:
            continue
        if mtry < p:
            cands = _draw_features(state, p, mtry, perm)
        else:
            cands = all_features
        tol = GAIN_RTOL * sse
        best_f = -1
        best_t = 0.0
        best_gain = 0.0
        for c in range(cands.shape[0]):
            f = cands[c]
            best_f, best_t, best_gain = _scan(
                X, y, sorted_rows[f, start:end], f, mean, min_leaf, tol,
                best_f, best_t, best_gain,
            )
        if best_f < 0:
            continue
        feature[node] = best_f
        threshold[node] = best_t
        gain_arr[node] = best_gain
        seg = sorted_rows[best_f, start:end]
        for i in range(m):
            r = seg[i]
            goes_left[r] = X[r, best_f] <= best_t
        nl = 0
        for f in range(p):
            nl = 0
            nr = 0
            for i in range(start, end):
                r = sorted_rows[f, i]
                if goes_left[r]:
                    sorted_rows[f, start + nl] = r
                    nl += 1
                else:
                    scratch[nr] = r
                    nr += 1
            for i in range(nr):
                sorted_rows[f, start + nl + i] = scratch[i]
        mid = start + nl
        # right pushed first so the left subtree is numbered first
        st_start[top] = mid
        st_end[top] = end
        st_depth[top] = depth + 1
        st_parent[top] = node
        st_is_left[top] = False
        top += 1
        st_start[top] = start
        st_end[top] = mid
        st_depth[top] = depth + 1
        st_parent[top] = node
        st_is_left[top] = True
        top += 1
    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        count[:n_nodes].copy(),
        sse_arr[:n_nodes].copy(),
        gain_arr[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def predict(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out
