# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled versions of the numeric hot loops in ``_kernels_py``."""

from libc.stdlib cimport malloc, free


def knapsack_dp(weights, values, long long capacity):
    cdef Py_ssize_t n = len(weights)
    cdef Py_ssize_t i, c
    cdef long long b, v, w
    cdef long long ch
    cdef long long *best = <long long *> malloc((capacity + 1) * sizeof(long long))
    cdef long long *choice = <long long *> malloc((capacity + 1) * sizeof(long long))
    cdef long long *ws = <long long *> malloc((n + 1) * sizeof(long long))
    cdef long long *vs = <long long *> malloc((n + 1) * sizeof(long long))
    if best == NULL or choice == NULL or ws == NULL or vs == NULL:
        free(best); free(choice); free(ws); free(vs)
        raise MemoryError()
    try:
        for i in range(n):
            ws[i] = weights[i]
            vs[i] = values[i]
        best[0] = 0
        choice[0] = -1
        for c in range(1, capacity + 1):
            b = best[c - 1]
            ch = -2
            for i in range(n):
                w = ws[i]
                if w <= c:
                    v = best[c - w] + vs[i]
                    if v > b:
                        b = v
                        ch = i
            best[c] = b
            choice[c] = ch
        counts = [0] * n
        c = capacity
        while c > 0:
            ch = choice[c]
            if ch == -2:
                c -= 1
            elif ch >= 0:
                counts[ch] += 1
                c -= ws[ch]
            else:
                break
        return best[capacity], counts
    finally:
        free(best); free(choice); free(ws); free(vs)


cdef long long _search(long long i, long long n, long long *sizes, long long *suffix,
                       long long *residual, long long opened, long long capacity,
                       long long best) nogil:
    cdef long long free_space = 0
    cdef long long j, k, r, s, extra, need
    cdef bint dup
    if i == n:
        return opened if opened < best else best
    for j in range(opened):
        free_space += residual[j]
    extra = suffix[i] - free_space
    need = opened
    if extra > 0:
        need += (extra + capacity - 1) // capacity
    if need >= best:
        return best
    s = sizes[i]
    for j in range(opened):
        r = residual[j]
        if r < s:
            continue
        dup = False
        for k in range(j):
            if residual[k] == r:
                dup = True
                break
        if dup:
            continue
        residual[j] = r - s
        best = _search(i + 1, n, sizes, suffix, residual, opened, capacity, best)
        residual[j] = r
        if best <= need:
            return best
    if opened + 1 < best:
        residual[opened] = capacity - s
        best = _search(i + 1, n, sizes, suffix, residual, opened + 1, capacity, best)
    return best


def bnb_min_bins(sizes, long long capacity, long long upper):
    cdef long long n = len(sizes)
    cdef long long i
    cdef long long result
    if n == 0:
        return 0
    cdef long long *sz = <long long *> malloc(n * sizeof(long long))
    cdef long long *suffix = <long long *> malloc((n + 1) * sizeof(long long))
    cdef long long *residual = <long long *> malloc((n + 1) * sizeof(long long))
    if sz == NULL or suffix == NULL or residual == NULL:
        free(sz); free(suffix); free(residual)
        raise MemoryError()
    try:
        for i in range(n):
            sz[i] = sizes[i]
        suffix[n] = 0
        for i in range(n - 1, -1, -1):
            suffix[i] = suffix[i + 1] + sz[i]
        with nogil:
            result = _search(0, n, sz, suffix, residual, 0, capacity, upper)
        return result
    finally:
        free(sz); free(suffix); free(residual)
