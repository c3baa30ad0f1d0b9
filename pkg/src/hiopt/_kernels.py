"""Hot loops: optimistic tree traversal, xi replay, 1-D greedy packing.

The tree is stored struct-of-arrays; node ``j`` has geometry rows
``lo[j], hi[j], rep[j]`` and bookkeeping ``depth, parent, slot, pulls,
sums, expanded``.  Leaves are additionally kept in per-depth heaps so that
the argmax at one depth is a lookup.  ``(h, i)``
addresses are never materialized here (they overflow int64 past depth ~40
for K=3); ties are broken by comparing ancestor paths instead.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import ENABLED, POINT_FUNCTION, as_kernel_function, jit, jit_signature

_INITIAL_NODES = 64
_INITIAL_HEAP = 16


def _index_less_py(a, b, parent, slot):
    # a, b at the same depth; True iff index(a) < index(b)
    while parent[a] != parent[b]:
        a = parent[a]
        b = parent[b]
    return slot[a] < slot[b]


_index_less = jit(_index_less_py)


def _b_value_py(pulls, total, log_term):
    if pulls == 0:
        return np.inf
    return total / pulls + math.sqrt(log_term / (2.0 * pulls))


_b_value = jit(_b_value_py)


# Leaves of each depth sit in an indexed binary max-heap ordered by
# (b-value, lowest index), so the per-depth argmax is the heap root and each
# update costs O(log m).  All heaps share one pool; depth h owns
# pool[start[h] : start[h] + hcap[h]] and hpos[j] is leaf j's heap slot.


def _better_py(a, b, bval, parent, slot):
    if bval[a] != bval[b]:
        return bval[a] > bval[b]
    return _index_less(a, b, parent, slot)


_better = jit(_better_py)


def _sift_up_py(pool, base, pos, hpos, bval, parent, slot):
    node = pool[base + pos]
    while pos > 0:
        up = (pos - 1) // 2
        other = pool[base + up]
        if not _better(node, other, bval, parent, slot):
            break
        pool[base + pos] = other
        hpos[other] = pos
        pos = up
    pool[base + pos] = node
    hpos[node] = pos
    return pos


_sift_up = jit(_sift_up_py)


def _sift_down_py(pool, base, length, pos, hpos, bval, parent, slot):
    node = pool[base + pos]
    while True:
        c = 2 * pos + 1
        if c >= length:
            break
        if c + 1 < length and _better(pool[base + c + 1], pool[base + c], bval, parent, slot):
            c += 1
        child = pool[base + c]
        if not _better(child, node, bval, parent, slot):
            break
        pool[base + pos] = child
        hpos[child] = pos
        pos = c
    pool[base + pos] = node
    hpos[node] = pos


_sift_down = jit(_sift_down_py)


def _heap_fix_py(pool, base, length, pos, hpos, bval, parent, slot):
    # restore order after the key at ``pos`` changed either way
    pos = _sift_up(pool, base, pos, hpos, bval, parent, slot)
    _sift_down(pool, base, length, pos, hpos, bval, parent, slot)


_heap_fix = jit(_heap_fix_py)


def _grow_rows_f(a, cap):
    out = np.empty((cap, a.shape[1]), dtype=np.float64)
    out[: a.shape[0]] = a
    return out


def _grow_i(a, cap):
    out = np.empty(cap, dtype=np.int64)
    out[: a.shape[0]] = a
    return out


def _grow_f(a, cap):
    out = np.empty(cap, dtype=np.float64)
    out[: a.shape[0]] = a
    return out


def _grow_b(a, cap):
    out = np.zeros(cap, dtype=np.bool_)
    out[: a.shape[0]] = a
    return out


_grow_rows_f = jit(_grow_rows_f)
_grow_i = jit(_grow_i)
_grow_f = jit(_grow_f)
_grow_b = jit(_grow_b)


def _splittable(lo, hi, K):
    # False once K equal slabs of the longest side would collapse in float64
    d = 0
    for a in range(1, lo.shape[0]):
        if hi[a] - lo[a] > hi[d] - lo[d]:
            d = a
    width = (hi[d] - lo[d]) / K
    prev = lo[d]
    for c in range(1, K):
        edge = lo[d] + c * width
        if not edge > prev:
            return False
        prev = edge
    return hi[d] > prev


_splittable = jit(_splittable)


def _heap_reserve_py(pool, used, start, hcap, hlen, h, extra):
    """Make room for ``extra`` more entries in depth ``h``'s heap; returns (pool, used)."""
    need = hlen[h] + extra
    if need <= hcap[h]:
        return pool, used
    new_cap = max(2 * hcap[h], need, _INITIAL_HEAP)
    if used + new_cap > pool.shape[0]:
        pool = _grow_i(pool, max(2 * pool.shape[0], used + new_cap))
    old = start[h]
    for q in range(hlen[h]):
        pool[used + q] = pool[old + q]
    start[h] = used
    hcap[h] = new_cap
    return pool, used + new_cap


_heap_reserve = jit(_heap_reserve_py)


def _tree_search_py(lower, upper, K, n, thresholds, log_term, reuse, eval_on_create, f, theta, noise):
    """Run the optimistic traversal until exactly ``n`` evaluations are spent.

    ``thresholds[h]`` is the number of samples a depth-``h`` leaf needs before
    it may be expanded; ``len(thresholds) - 1`` is the depth cap.  Cells too
    thin to split in float64 are treated like cells at the cap.  The b-value
    width is ``sqrt(log_term / (2 T))`` (``log_term = 0`` gives plain means).
    Reward ``t`` is ``f(rep, theta) + noise[t]``.  With ``eval_on_create``
    every fresh child is sampled once as soon as it is created (deterministic
    SOO); otherwise children wait for their own traversal slot.
    """
    D = lower.shape[0]
    h_max = thresholds.shape[0] - 1
    mid = K // 2 if K % 2 == 1 else -1

    cap = _INITIAL_NODES
    lo = np.empty((cap, D), dtype=np.float64)
    hi = np.empty((cap, D), dtype=np.float64)
    rep = np.empty((cap, D), dtype=np.float64)
    depth = np.empty(cap, dtype=np.int64)
    parent = np.empty(cap, dtype=np.int64)
    slot = np.empty(cap, dtype=np.int64)
    pulls = np.empty(cap, dtype=np.int64)
    sums = np.empty(cap, dtype=np.float64)
    bval = np.empty(cap, dtype=np.float64)
    expanded = np.zeros(cap, dtype=np.bool_)
    hpos = np.empty(cap, dtype=np.int64)

    pool = np.empty(_INITIAL_HEAP * 4, dtype=np.int64)
    start = np.zeros(h_max + 1, dtype=np.int64)
    hcap = np.zeros(h_max + 1, dtype=np.int64)
    hlen = np.zeros(h_max + 1, dtype=np.int64)
    used = 0

    eval_node = np.empty(n, dtype=np.int64)
    eval_reward = np.empty(n, dtype=np.float64)
    ecap = 16
    exp_node = np.empty(ecap, dtype=np.int64)
    exp_time = np.empty(ecap, dtype=np.int64)
    n_exp = 0

    lo[0] = lower
    hi[0] = upper
    rep[0] = (lower + upper) / 2.0
    depth[0] = 0
    parent[0] = -1
    slot[0] = 0
    pulls[0] = 0
    sums[0] = 0.0
    bval[0] = np.inf
    pool, used = _heap_reserve(pool, used, start, hcap, hlen, 0, 1)
    pool[start[0]] = 0
    hpos[0] = 0
    hlen[0] = 1
    n_nodes = 1
    tree_depth = 0

    t = 0
    while t < n:
        b_max = -np.inf
        progressed = False
        stalled = -1
        top = min(tree_depth, h_max)
        for h in range(top + 1):
            if t >= n:
                break
            if hlen[h] == 0:
                continue
            i = pool[start[h]]
            b = bval[i]
            if b < b_max:
                continue
            if pulls[i] < thresholds[h]:
                eval_node[t] = i
                r = f(rep[i], theta) + noise[t]
                eval_reward[t] = r
                pulls[i] += 1
                sums[i] += r
                bval[i] = _b_value(pulls[i], sums[i], log_term)
                _sift_down(pool, start[h], hlen[h], 0, hpos, bval, parent, slot)
                t += 1
                progressed = True
            elif h < h_max and _splittable(lo[i], hi[i], K):
                if n_nodes + K > cap:
                    cap = max(2 * cap, n_nodes + K)
                    lo = _grow_rows_f(lo, cap)
                    hi = _grow_rows_f(hi, cap)
                    rep = _grow_rows_f(rep, cap)
                    depth = _grow_i(depth, cap)
                    parent = _grow_i(parent, cap)
                    slot = _grow_i(slot, cap)
                    pulls = _grow_i(pulls, cap)
                    sums = _grow_f(sums, cap)
                    bval = _grow_f(bval, cap)
                    expanded = _grow_b(expanded, cap)
                    hpos = _grow_i(hpos, cap)
                pool, used = _heap_reserve(pool, used, start, hcap, hlen, h + 1, K)
                if n_exp == ecap:
                    ecap *= 2
                    exp_node = _grow_i(exp_node, ecap)
                    exp_time = _grow_i(exp_time, ecap)

                # take i out of its heap before the children go in
                last = pool[start[h] + hlen[h] - 1]
                hlen[h] -= 1
                if last != i:
                    pool[start[h]] = last
                    hpos[last] = 0
                    _sift_down(pool, start[h], hlen[h], 0, hpos, bval, parent, slot)

                # split the longest side (first axis on ties) into K slabs
                d = 0
                for a in range(1, D):
                    if hi[i, a] - lo[i, a] > hi[i, d] - lo[i, d]:
                        d = a
                width = (hi[i, d] - lo[i, d]) / K
                for c in range(K):
                    j = n_nodes
                    n_nodes += 1
                    lo[j] = lo[i]
                    hi[j] = hi[i]
                    lo[j, d] = lo[i, d] + c * width
                    if c < K - 1:
                        hi[j, d] = lo[i, d] + (c + 1) * width
                    else:
                        hi[j, d] = hi[i, d]
                    if c == mid:
                        rep[j] = rep[i]
                    else:
                        rep[j] = (lo[j] + hi[j]) / 2.0
                    depth[j] = h + 1
                    parent[j] = i
                    slot[j] = c
                    expanded[j] = False
                    if reuse and c == mid:
                        pulls[j] = pulls[i]
                        sums[j] = sums[i]
                    else:
                        pulls[j] = 0
                        sums[j] = 0.0
                    bval[j] = _b_value(pulls[j], sums[j], log_term)
                    q = hlen[h + 1]
                    pool[start[h + 1] + q] = j
                    hlen[h + 1] = q + 1
                    _sift_up(pool, start[h + 1], q, hpos, bval, parent, slot)

                expanded[i] = True
                exp_node[n_exp] = i
                exp_time[n_exp] = t
                n_exp += 1
                if h + 1 > tree_depth:
                    tree_depth = h + 1
                b_max = b
                progressed = True
                if eval_on_create:
                    for j in range(n_nodes - K, n_nodes):
                        if t >= n:
                            break
                        if pulls[j] == 0:
                            eval_node[t] = j
                            r = f(rep[j], theta) + noise[t]
                            eval_reward[t] = r
                            pulls[j] = 1
                            sums[j] = r
                            bval[j] = _b_value(1, r, log_term)
                            _heap_fix(pool, start[h + 1], hlen[h + 1], hpos[j], hpos, bval, parent, slot)
                            t += 1
            elif stalled < 0:
                stalled = i
        if not progressed:
            if stalled < 0:
                break
            # every reachable leaf is saturated at the depth cap: keep sampling
            # the optimistic one so the budget is spent exactly
            i = stalled
            eval_node[t] = i
            r = f(rep[i], theta) + noise[t]
            eval_reward[t] = r
            pulls[i] += 1
            sums[i] += r
            bval[i] = _b_value(pulls[i], sums[i], log_term)
            h = depth[i]
            _heap_fix(pool, start[h], hlen[h], hpos[i], hpos, bval, parent, slot)
            t += 1

    return (
        lo[:n_nodes].copy(),
        hi[:n_nodes].copy(),
        rep[:n_nodes].copy(),
        depth[:n_nodes].copy(),
        parent[:n_nodes].copy(),
        slot[:n_nodes].copy(),
        pulls[:n_nodes].copy(),
        sums[:n_nodes].copy(),
        expanded[:n_nodes].copy(),
        eval_node[:t].copy(),
        eval_reward[:t].copy(),
        exp_node[:n_exp].copy(),
        exp_time[:n_exp].copy(),
    )


if ENABLED:
    from numba import types as _t

    _f1 = _t.float64[::1]
    _tree_search_jit = jit_signature(
        _f1, _f1, _t.int64, _t.int64, _t.int64[::1], _t.float64, _t.boolean, _t.boolean, POINT_FUNCTION, _f1, _f1
    )(_tree_search_py)
else:
    _tree_search_jit = None


def _writable(a, dtype):
    # compiled signatures take writable C-contiguous arrays only
    a = np.ascontiguousarray(a, dtype=dtype)
    return a if a.flags.writeable else a.copy()


def tree_search(lower, upper, K, n, thresholds, log_term, reuse, f, theta, noise, eval_on_create=False):
    """Dispatch to the compiled kernel when ``f`` is itself compiled."""
    args = (
        _writable(lower, np.float64),
        _writable(upper, np.float64),
        int(K),
        int(n),
        _writable(thresholds, np.int64),
        float(log_term),
        bool(reuse),
        bool(eval_on_create),
        f,
        _writable(theta, np.float64),
        _writable(noise, np.float64),
    )
    kf = as_kernel_function(f)
    if kf is not None:
        return _tree_search_jit(*args[:8], kf, *args[9:])
    return _tree_search_py(*args)


def _xi_replay_py(n_nodes, mid_child, eval_node, eval_reward, exp_node, exp_time, fvals, log_term, reuse):
    """First evaluation index at which some estimate leaves its width, or -1."""
    T = np.zeros(n_nodes, dtype=np.int64)
    S = np.zeros(n_nodes, dtype=np.float64)
    e = 0
    n_exp = exp_node.shape[0]
    for t in range(eval_node.shape[0]):
        while e < n_exp and exp_time[e] <= t:
            p = exp_node[e]
            m = mid_child[p]
            if reuse and m >= 0:
                T[m] = T[p]
                S[m] = S[p]
            e += 1
        j = eval_node[t]
        T[j] += 1
        S[j] += eval_reward[t]
        if abs(S[j] / T[j] - fvals[j]) > math.sqrt(log_term / (2.0 * T[j])):
            return t
    return -1


xi_replay = jit(_xi_replay_py)


def _greedy_pack_loop(xs, L, alpha, sep):
    # xs ascending; the nearest accepted center is always the last one
    count = 0
    last = 0.0
    for q in range(xs.shape[0]):
        x = xs[q]
        if count == 0 or L * abs(x - last) ** alpha > sep:
            count += 1
            last = x
    return count


def _greedy_pack_numpy(xs, L, alpha, sep):
    m = xs.shape[0]
    if m == 0:
        return 0
    if L == 0.0:
        return 1
    gap = (sep / L) ** (1.0 / alpha)

    def far(j, ref):
        return L * abs(xs[j] - ref) ** alpha > sep

    count = 1
    i = 0
    while True:
        ref = xs[i]
        j = int(np.searchsorted(xs, ref + gap, side="left"))
        j = max(j, i + 1)
        # snap to the exact boundary of the acceptance predicate
        while j - 1 > i and far(j - 1, ref):
            j -= 1
        while j < m and not far(j, ref):
            j += 1
        if j >= m:
            return count
        count += 1
        i = j


greedy_pack = jit(_greedy_pack_loop) if ENABLED else _greedy_pack_numpy
