# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled row-set scans. Pure-NumPy equivalents live in ``_fallback``."""
import numpy as np

from libc.stdlib cimport malloc, realloc, free


cdef struct Buffer:
    int *data
    Py_ssize_t size
    Py_ssize_t cap


cdef int buf_push(Buffer *b, int *vals, int m) noexcept nogil:
    cdef Py_ssize_t newcap
    cdef int *p
    cdef int q
    if b.size + m > b.cap:
        newcap = 2 * b.cap + m
        p = <int *> realloc(b.data, newcap * sizeof(int))
        if p == NULL:
            return -1
        b.data = p
        b.cap = newcap
    for q in range(m):
        b.data[b.size + q] = vals[q]
    b.size += m
    return 0


cdef inline int next_combination(int *idx, int k, int n) noexcept nogil:
    cdef int i = k - 1
    cdef int j
    while i >= 0 and idx[i] == n - k + i:
        i -= 1
    if i < 0:
        return 0
    idx[i] += 1
    for j in range(i + 1, k):
        idx[j] = idx[j - 1] + 1
    return 1


cdef inline void select_top(double *v, int n, int m, double *topv, int *topi) noexcept nogil:
    # Keep the m largest entries in descending order; on equal values the
    # earlier (smaller) index stays ahead.
    cdef int j, p, q, filled = 0
    cdef double x
    for j in range(n):
        x = v[j]
        if filled < m:
            p = filled
            filled += 1
        elif x > topv[m - 1]:
            p = m - 1
        else:
            continue
        while p > 0 and x > topv[p - 1]:
            topv[p] = topv[p - 1]
            topi[p] = topi[p - 1]
            p -= 1
        topv[p] = x
        topi[p] = j


cdef inline void sort_small(int *a, int k) noexcept nogil:
    cdef int i, j, x
    for i in range(1, k):
        x = a[i]
        j = i - 1
        while j >= 0 and a[j] > x:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = x


def census_scan(const double[:, ::1] W, int k):
    """Scan all k-row subsets in lexicographic order.

    Returns ``(opt_rows, opt_cols, tied_rows)``: 0-based int32 arrays of the
    locally optimal submatrices found, and the row sets whose top-k column
    set is not unique (left to the caller).
    """
    cdef int n = W.shape[0]
    if k < 1 or k > n:
        raise ValueError("need 1 <= k <= n")
    cdef int m = k + 1 if k < n else k
    cdef double *cs = <double *> malloc(n * sizeof(double))
    cdef double *rs = <double *> malloc(n * sizeof(double))
    cdef double *topv = <double *> malloc(m * sizeof(double))
    cdef int *topi = <int *> malloc(m * sizeof(int))
    cdef int *idx = <int *> malloc(k * sizeof(int))
    cdef int *jsel = <int *> malloc(k * sizeof(int))
    cdef char *inrow = <char *> malloc(n * sizeof(char))
    cdef Buffer opt_r, opt_c, tied
    opt_r.data = NULL; opt_r.size = 0; opt_r.cap = 0
    opt_c.data = NULL; opt_c.size = 0; opt_c.cap = 0
    tied.data = NULL; tied.size = 0; tied.cap = 0
    cdef int i, j, q, more = 1, failed = 0
    cdef double s, min_in, max_out
    if cs == NULL or rs == NULL or topv == NULL or topi == NULL or idx == NULL \
            or jsel == NULL or inrow == NULL:
        failed = 1
    else:
        with nogil:
            for q in range(k):
                idx[q] = q
            for i in range(n):
                inrow[i] = 0
            while more:
                for j in range(n):
                    s = 0.0
                    for q in range(k):
                        s = s + W[idx[q], j]
                    cs[j] = s
                select_top(cs, n, m, topv, topi)
                if m > k and topv[k - 1] == topv[k]:
                    if buf_push(&tied, idx, k) != 0:
                        failed = 1
                        break
                else:
                    for q in range(k):
                        jsel[q] = topi[q]
                    sort_small(jsel, k)
                    for q in range(k):
                        inrow[idx[q]] = 1
                    min_in = 0.0
                    max_out = 0.0
                    for i in range(n):
                        s = 0.0
                        for q in range(k):
                            s = s + W[i, jsel[q]]
                        rs[i] = s
                    q = 0
                    for i in range(n):
                        if inrow[i]:
                            if q == 0 or rs[i] < min_in:
                                min_in = rs[i]
                            q = q + 1
                    q = 0
                    for i in range(n):
                        if not inrow[i]:
                            if q == 0 or rs[i] > max_out:
                                max_out = rs[i]
                            q = q + 1
                    if q == 0 or min_in >= max_out:
                        if buf_push(&opt_r, idx, k) != 0 or buf_push(&opt_c, jsel, k) != 0:
                            failed = 1
                            break
                    for q in range(k):
                        inrow[idx[q]] = 0
                more = next_combination(idx, k, n)
    try:
        if failed:
            raise MemoryError("census scan buffer allocation failed")
        out_r = np.empty((opt_r.size // k, k), dtype=np.int32)
        out_c = np.empty((opt_c.size // k, k), dtype=np.int32)
        out_t = np.empty((tied.size // k, k), dtype=np.int32)
        for q in range(opt_r.size):
            out_r.flat[q] = opt_r.data[q]
            out_c.flat[q] = opt_c.data[q]
        for q in range(tied.size):
            out_t.flat[q] = tied.data[q]
        return out_r, out_c, out_t
    finally:
        free(cs); free(rs); free(topv); free(topi); free(idx); free(jsel); free(inrow)
        free(opt_r.data); free(opt_c.data); free(tied.data)


def global_max_scan(const double[:, ::1] W, int k):
    """Best total over k x k submatrices, first maximum in lexicographic order.

    Returns ``(best_sum, rows, cols)`` with 0-based int arrays.
    """
    cdef int n = W.shape[0]
    if k < 1 or k > n:
        raise ValueError("need 1 <= k <= n")
    cdef double *cs = <double *> malloc(n * sizeof(double))
    cdef double *topv = <double *> malloc(k * sizeof(double))
    cdef int *topi = <int *> malloc(k * sizeof(int))
    cdef int *idx = <int *> malloc(k * sizeof(int))
    cdef int *best_r = <int *> malloc(k * sizeof(int))
    cdef int *best_c = <int *> malloc(k * sizeof(int))
    cdef int i, j, q, more = 1, have = 0
    cdef double s, tot, best = 0.0
    try:
        if cs == NULL or topv == NULL or topi == NULL or idx == NULL \
                or best_r == NULL or best_c == NULL:
            raise MemoryError("global scan allocation failed")
        with nogil:
            for q in range(k):
                idx[q] = q
            while more:
                for j in range(n):
                    s = 0.0
                    for q in range(k):
                        s = s + W[idx[q], j]
                    cs[j] = s
                select_top(cs, n, k, topv, topi)
                tot = 0.0
                for q in range(k):
                    tot = tot + topv[q]
                if not have or tot > best:
                    have = 1
                    best = tot
                    for q in range(k):
                        best_r[q] = idx[q]
                        best_c[q] = topi[q]
                more = next_combination(idx, k, n)
            sort_small(best_c, k)
        rows = np.array([best_r[q] for q in range(k)], dtype=np.intp)
        cols = np.array([best_c[q] for q in range(k)], dtype=np.intp)
        return best, rows, cols
    finally:
        free(cs); free(topv); free(topi); free(idx); free(best_r); free(best_c)
