"""Hot inner loops, each with a numba-compiled and a pure-numpy flavour.

The public names (``topk_rows``, ``louvain_local_move``, ``grow_tree``,
``pair_counts``) point at one flavour, chosen once at import time by
:data:`netsel._accel.USE_NUMBA`. The ``*_nb`` / ``*_np`` variants stay
importable so tests and the benchmark can run both side by side.

Randomness inside kernels comes from a Park-Miller generator seeded by the
caller. Its arithmetic stays below 2**47, so compiled and interpreted code
walk the exact same stream.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

PM_MODULUS = 2147483647
PM_MULTIPLIER = 48271


def pm_seed(seed: int) -> int:
    return int(seed) % (PM_MODULUS - 1) + 1


# --------------------------------------------------------------------------
# top-k per row
# --------------------------------------------------------------------------


def _topk_rows_loop(S, k, self_col):
    # bounded insertion scan: columns arrive in increasing order and only a
    # strictly larger value moves ahead, so ties keep the lower column id
    r, c = S.shape
    out = np.empty((r, k), np.int64)
    if k == 0:
        return out
    val = np.empty(k, np.float64)
    for i in range(r):
        filled = 0
        for j in range(c):
            if j == self_col[i]:
                continue
            v = S[i, j]
            if filled == k and not v > val[k - 1]:
                continue
            pos = filled if filled < k else k - 1
            while pos > 0 and val[pos - 1] < v:
                val[pos] = val[pos - 1]
                out[i, pos] = out[i, pos - 1]
                pos -= 1
            val[pos] = v
            out[i, pos] = j
            if filled < k:
                filled += 1
    return out


_topk_rows_nb = njit(cache=True, nogil=True)(_topk_rows_loop)


def _topk_rows_np(S, k, self_col):
    S = np.array(S, dtype=np.float64, copy=True)
    rows = np.flatnonzero(self_col >= 0)
    S[rows, self_col[rows]] = -np.inf
    order = np.argsort(-S, axis=1, kind="stable")
    return np.ascontiguousarray(order[:, :k]).astype(np.int64)


def topk_rows_nb(S, k, self_col):
    return _topk_rows_nb(np.ascontiguousarray(S, dtype=np.float64), int(k),
                         np.ascontiguousarray(self_col, dtype=np.int64))


def topk_rows_np(S, k, self_col):
    return _topk_rows_np(S, int(k), np.asarray(self_col, dtype=np.int64))


# --------------------------------------------------------------------------
# Louvain local moving
# --------------------------------------------------------------------------


def _louvain_move_loop(indptr, indices, weights, strength, comm, order, m2, tol):
    n = indptr.shape[0] - 1
    tot = np.zeros(n, np.float64)
    for i in range(n):
        tot[comm[i]] += strength[i]
    link = np.zeros(n, np.float64)
    seen = np.full(n, -1, np.int64)
    touched = np.empty(n, np.int64)
    moved = False
    while True:
        moves = 0
        for i in order:
            ci = comm[i]
            nt = 0
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j == i:
                    continue
                c = comm[j]
                if seen[c] != i:
                    seen[c] = i
                    link[c] = 0.0
                    touched[nt] = c
                    nt += 1
                link[c] += weights[p]
            ki = strength[i]
            tot[ci] -= ki
            own = link[ci] if seen[ci] == i else 0.0
            best = ci
            best_gain = own - tot[ci] * ki / m2
            for q in range(nt):
                c = touched[q]
                gain = link[c] - tot[c] * ki / m2
                if gain > best_gain + tol:
                    best = c
                    best_gain = gain
            tot[best] += ki
            comm[i] = best
            if best != ci:
                moves += 1
            # reset so a later visit of the same node id rebuilds its links
            for q in range(nt):
                seen[touched[q]] = -1
        if moves == 0:
            break
        moved = True
    return comm, moved


_louvain_move_nb = njit(cache=True, nogil=True)(_louvain_move_loop)


def louvain_local_move_nb(indptr, indices, weights, strength, comm, order, m2, tol):
    return _louvain_move_nb(indptr, indices, weights, strength, comm.copy(), order, float(m2), float(tol))


def louvain_local_move_np(indptr, indices, weights, strength, comm, order, m2, tol):
    # node moves are inherently sequential; the fallback is the interpreted loop
    return _louvain_move_loop(indptr, indices, weights, strength, comm.copy(), order, float(m2), float(tol))


# --------------------------------------------------------------------------
# decision tree growth (weighted Gini, exact rational split comparison)
# --------------------------------------------------------------------------


def _grow_tree_loop(X, y, w, max_depth, mtry, seed):
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    counts = np.zeros((cap, 2), np.int64)

    m = 0
    for s in range(n):
        if w[s] > 0:
            m += 1
    rows = np.empty(m, np.int64)
    q = 0
    for s in range(n):
        if w[s] > 0:
            rows[q] = s
            q += 1

    mtry = min(mtry, d)
    perm = np.arange(d)
    state = seed
    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 1
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = m
    st_depth[0] = 0
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        depth = st_depth[sp]
        c0 = 0
        c1 = 0
        for q in range(lo, hi):
            s = rows[q]
            if y[s] == 1:
                c1 += w[s]
            else:
                c0 += w[s]
        counts[node, 0] = c0
        counts[node, 1] = c1
        if depth >= max_depth or c0 == 0 or c1 == 0 or hi - lo < 2 or mtry == 0:
            continue
        best_num = c0 * c0 + c1 * c1
        best_den = c0 + c1
        best_f = -1
        best_t = 0.0
        for t in range(mtry):
            state = (state * 48271) % 2147483647
            j = t + state % (d - t)
            tmp = perm[t]
            perm[t] = perm[j]
            perm[j] = tmp
        size = hi - lo
        vals = np.empty(size, np.float64)
        for t in range(mtry):
            f = perm[t]
            for q in range(size):
                vals[q] = X[rows[lo + q], f]
            o = np.argsort(vals)
            l0 = 0
            l1 = 0
            for q in range(size - 1):
                s = rows[lo + o[q]]
                if y[s] == 1:
                    l1 += w[s]
                else:
                    l0 += w[s]
                v = vals[o[q]]
                vn = vals[o[q + 1]]
                if vn > v:
                    r0 = c0 - l0
                    r1 = c1 - l1
                    nl = l0 + l1
                    nr = r0 + r1
                    num = (l0 * l0 + l1 * l1) * nr + (r0 * r0 + r1 * r1) * nl
                    den = nl * nr
                    if num * best_den > best_num * den:
                        best_num = num
                        best_den = den
                        best_f = f
                        best_t = (v + vn) / 2.0
        if best_f < 0:
            continue
        buf = rows[lo:hi].copy()
        mid = lo
        for s in buf:
            if X[s, best_f] <= best_t:
                rows[mid] = s
                mid += 1
        k2 = mid
        for s in buf:
            if X[s, best_f] > best_t:
                rows[k2] = s
                k2 += 1
        feature[node] = best_f
        threshold[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp] = n_nodes + 1
        st_lo[sp] = mid
        st_hi[sp] = hi
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = n_nodes
        st_lo[sp] = lo
        st_hi[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1
        n_nodes += 2
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes],
            right[:n_nodes], counts[:n_nodes])


_grow_tree_nb = njit(cache=True, nogil=True)(_grow_tree_loop)


def _first_rational_max(num, den):
    q = int(np.argmax(num / den))
    while True:
        greater = num * den[q] > num[q] * den
        if not greater.any():
            break
        q = int(np.argmax(greater))
    return int(np.argmax(num * den[q] == num[q] * den))


def _grow_tree_np(X, y, w, max_depth, mtry, seed):
    n, d = X.shape
    feature, threshold, left, right, counts = [], [], [], [], []
    rows = np.flatnonzero(w > 0)
    pos = (y == 1)
    w1 = np.where(pos, w, 0).astype(np.int64)
    w0 = np.where(pos, 0, w).astype(np.int64)
    mtry = min(mtry, d)
    perm = np.arange(d)
    state = seed

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((0, 0))
        return len(feature) - 1

    stack = [(new_node(), rows, 0)]
    while stack:
        node, seg, depth = stack.pop()
        c0 = int(w0[seg].sum())
        c1 = int(w1[seg].sum())
        counts[node] = (c0, c1)
        if depth >= max_depth or c0 == 0 or c1 == 0 or seg.size < 2 or mtry == 0:
            continue
        best_num, best_den = c0 * c0 + c1 * c1, c0 + c1
        best_f, best_t = -1, 0.0
        for t in range(mtry):
            state = (state * PM_MULTIPLIER) % PM_MODULUS
            j = t + state % (d - t)
            perm[t], perm[j] = perm[j], perm[t]
        a0, a1 = w0[seg], w1[seg]
        for f in perm[:mtry]:
            vals = X[seg, f]
            o = np.argsort(vals, kind="stable")
            sv = vals[o]
            ok = sv[1:] > sv[:-1]
            if not ok.any():
                continue
            l0 = np.cumsum(a0[o])[:-1][ok]
            l1 = np.cumsum(a1[o])[:-1][ok]
            r0, r1 = c0 - l0, c1 - l1
            nl, nr = l0 + l1, r0 + r1
            num = (l0 * l0 + l1 * l1) * nr + (r0 * r0 + r1 * r1) * nl
            den = nl * nr
            q = _first_rational_max(num, den)
            if int(num[q]) * best_den > best_num * int(den[q]):
                best_num, best_den = int(num[q]), int(den[q])
                best_f = int(f)
                best_t = (sv[:-1][ok][q] + sv[1:][ok][q]) / 2.0
        if best_f < 0:
            continue
        go_left = X[seg, best_f] <= best_t
        feature[node] = best_f
        threshold[node] = best_t
        lnode = new_node()
        rnode = new_node()
        left[node], right[node] = lnode, rnode
        stack.append((rnode, seg[~go_left], depth + 1))
        stack.append((lnode, seg[go_left], depth + 1))
    return (np.array(feature, np.int64), np.array(threshold, np.float64),
            np.array(left, np.int64), np.array(right, np.int64),
            np.array(counts, np.int64).reshape(-1, 2))


def _tree_args(X, y, w, max_depth, mtry, seed):
    return (np.ascontiguousarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64),
            np.asarray(w, dtype=np.int64), int(max_depth), int(mtry), pm_seed(seed))


def grow_tree_nb(X, y, w, max_depth, mtry, seed):
    return _grow_tree_nb(*_tree_args(X, y, w, max_depth, mtry, seed))


def grow_tree_np(X, y, w, max_depth, mtry, seed):
    return _grow_tree_np(*_tree_args(X, y, w, max_depth, mtry, seed))


# --------------------------------------------------------------------------
# Kendall pair counts
# --------------------------------------------------------------------------


def _pair_counts_loop(x, y):
    n = x.shape[0]
    con = 0
    dis = 0
    tie_x = 0
    tie_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0:
                tie_x += 1
            if dy == 0:
                tie_y += 1
            if dx == 0 or dy == 0:
                continue
            if (dx > 0) == (dy > 0):
                con += 1
            else:
                dis += 1
    return con, dis, tie_x, tie_y


_pair_counts_nb = njit(cache=True, nogil=True)(_pair_counts_loop)


def _pair_counts_np(x, y):
    iu = np.triu_indices(x.shape[0], 1)
    sx = np.sign(x[:, None] - x[None, :])[iu]
    sy = np.sign(y[:, None] - y[None, :])[iu]
    prod = sx * sy
    return (int((prod > 0).sum()), int((prod < 0).sum()),
            int((sx == 0).sum()), int((sy == 0).sum()))


def pair_counts_nb(x, y):
    con, dis, tx, ty = _pair_counts_nb(np.asarray(x, np.float64), np.asarray(y, np.float64))
    return int(con), int(dis), int(tx), int(ty)


def pair_counts_np(x, y):
    return _pair_counts_np(np.asarray(x, np.float64), np.asarray(y, np.float64))


if USE_NUMBA:
    topk_rows = topk_rows_nb
    louvain_local_move = louvain_local_move_nb
    grow_tree = grow_tree_nb
    pair_counts = pair_counts_nb
else:
    topk_rows = topk_rows_np
    louvain_local_move = louvain_local_move_np
    grow_tree = grow_tree_np
    pair_counts = pair_counts_np
