# cython: boundscheck=False, wraparound=False, cdivision=True
# Compiled twins of maxsim_numpy / hac_numpy. Same merge and tie-break
# semantics; float64 accumulation throughout, left-to-right.

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    # four independent accumulators break the FP dependency chain so the
    # compiler can vectorize; summation order is fixed, hence deterministic
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t c = 0
    while c + 4 <= n:
        s0 += a[c] * b[c]
        s1 += a[c + 1] * b[c + 1]
        s2 += a[c + 2] * b[c + 2]
        s3 += a[c + 3] * b[c + 3]
        c += 4
    while c < n:
        s0 += a[c] * b[c]
        c += 1
    return (s0 + s1) + (s2 + s3)


def maxsim_score(double[:, ::1] q, double[:, ::1] d):
    cdef Py_ssize_t nq = q.shape[0], nd = d.shape[0], dim = q.shape[1]
    cdef Py_ssize_t i, j
    cdef double total = 0.0, best, s
    with nogil:
        for i in range(nq):
            best = -INFINITY
            for j in range(nd):
                s = _dot(&q[i, 0], &d[j, 0], dim)
                if s > best:
                    best = s
            total += best
    return total


def maxsim_argmax(double[:, ::1] q, double[:, ::1] d):
    cdef Py_ssize_t nq = q.shape[0], nd = d.shape[0], dim = q.shape[1]
    vals_arr = np.empty(nq, dtype=np.float64)
    idx_arr = np.empty(nq, dtype=np.int64)
    cdef double[::1] vals = vals_arr
    cdef long long[::1] idx = idx_arr
    cdef Py_ssize_t i, j
    cdef double best, s
    cdef Py_ssize_t arg
    with nogil:
        for i in range(nq):
            best = -INFINITY
            arg = 0
            for j in range(nd):
                s = _dot(&q[i, 0], &d[j, 0], dim)
                if s > best:
                    best = s
                    arg = j
            vals[i] = best
            idx[i] = arg
    return vals_arr, idx_arr


def hac_labels(double[:, ::1] tok, Py_ssize_t budget, double unit_snap):
    """Greedy centroid-linkage merge down to `budget` clusters.

    Returns an int64 label per token; a label is the cluster's smallest
    member index. Means within `unit_snap` of unit norm are kept
    undivided (same snap rule as the pure backend). Raises
    ValueError("zero-norm:<id>") when a merged centroid cancels to the
    zero vector (the wrapper maps this to ZeroNormRow).
    """
    cdef Py_ssize_t m = tok.shape[0], dim = tok.shape[1]
    labels_arr = np.arange(m, dtype=np.int64)
    if m <= budget:
        return labels_arr

    cents_arr = np.asarray(tok, dtype=np.float64).copy()
    sims_arr = np.empty((m, m), dtype=np.float64)
    best_arr = np.empty(m, dtype=np.int64)
    best_sim_arr = np.empty(m, dtype=np.float64)
    active_arr = np.ones(m, dtype=np.uint8)
    mean_arr = np.empty(dim, dtype=np.float64)

    cdef long long[::1] lab = labels_arr
    cdef double[:, ::1] cents = cents_arr
    cdef double[:, ::1] sims = sims_arr
    cdef long long[::1] best = best_arr
    cdef double[::1] best_sim = best_sim_arr
    cdef unsigned char[::1] active = active_arr
    cdef double[::1] mean = mean_arr

    cdef Py_ssize_t n_active = m
    cdef Py_ssize_t i, j, c, t, a, b, pa, pb, arg, count
    cdef double s, top, norm
    cdef Py_ssize_t err_id = -1

    with nogil:
        # initial symmetric similarity table and nearest-partner cache
        for i in range(m):
            sims[i, i] = -INFINITY
            for j in range(i + 1, m):
                s = _dot(&cents[i, 0], &cents[j, 0], dim)
                sims[i, j] = s
                sims[j, i] = s
        for i in range(m):
            top = -INFINITY
            arg = 0
            for j in range(m):
                if sims[i, j] > top:
                    top = sims[i, j]
                    arg = j
            best[i] = arg
            best_sim[i] = top

        while n_active > budget:
            # globally best pair, ties to the lexicographically smallest ids
            top = -INFINITY
            a = -1
            b = -1
            for i in range(m):
                if not active[i]:
                    continue
                if best_sim[i] < top:
                    continue
                if best[i] < i:
                    pa = best[i]
                    pb = i
                else:
                    pa = i
                    pb = best[i]
                if best_sim[i] > top or pa < a or (pa == a and pb < b):
                    top = best_sim[i]
                    a = pa
                    b = pb

            for t in range(m):
                if lab[t] == b:
                    lab[t] = a
            active[b] = 0
            n_active -= 1
            best_sim[b] = -INFINITY
            for j in range(m):
                sims[b, j] = -INFINITY
                sims[j, b] = -INFINITY

            # fresh centroid: mean over member rows in ascending token order
            for c in range(dim):
                mean[c] = 0.0
            count = 0
            for t in range(m):
                if lab[t] == a:
                    for c in range(dim):
                        mean[c] += tok[t, c]
                    count += 1
            s = 0.0
            for c in range(dim):
                mean[c] = mean[c] / count
                s += mean[c] * mean[c]
            norm = sqrt(s)
            if norm == 0.0:
                err_id = a
                break
            if norm - 1.0 <= unit_snap and 1.0 - norm <= unit_snap:
                for c in range(dim):
                    cents[a, c] = mean[c]
            else:
                for c in range(dim):
                    cents[a, c] = mean[c] / norm

            for j in range(m):
                if active[j] and j != a:
                    s = _dot(&cents[j, 0], &cents[a, 0], dim)
                    sims[a, j] = s
                    sims[j, a] = s
            sims[a, a] = -INFINITY

            if n_active <= budget:
                break

            # repair the nearest-partner cache
            for i in range(m):
                if not active[i]:
                    continue
                if i == a or best[i] == a or best[i] == b:
                    top = -INFINITY
                    arg = 0
                    for j in range(m):
                        if sims[i, j] > top:
                            top = sims[i, j]
                            arg = j
                    best[i] = arg
                    best_sim[i] = top
                else:
                    s = sims[i, a]
                    if s > best_sim[i] or (s == best_sim[i] and a < best[i]):
                        best[i] = a
                        best_sim[i] = s

    if err_id >= 0:
        raise ValueError(f"zero-norm:{err_id}")
    return labels_arr
