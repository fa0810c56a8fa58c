# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled rear-stage kernels. Same contracts as ``_pykernels``."""

from libc.stdlib cimport malloc, realloc, free, qsort

cdef long long NEG = -(1LL << 62)

ctypedef long long i64


cdef inline i64 earliest_start(Py_ssize_t i, i64 t, const i64[:] win_ptr, const i64[:] win_start,
                               const i64[:] win_end, const i64[:] dur) noexcept nogil:
    cdef i64 d = dur[i]
    cdef i64 s
    cdef Py_ssize_t w
    for w in range(win_ptr[i], win_ptr[i + 1]):
        s = win_start[w] if win_start[w] > t else t
        if s + d <= win_end[w]:
            return s
    return -1


cdef struct SortKey:
    i64 end
    i64 prof
    i64 idx


cdef int cmp_key(const void* a, const void* b) noexcept nogil:
    cdef const SortKey* x = <const SortKey*> a
    cdef const SortKey* y = <const SortKey*> b
    if x.end != y.end:
        return -1 if x.end < y.end else 1
    if x.prof != y.prof:
        return -1 if x.prof > y.prof else 1
    if x.idx != y.idx:
        return -1 if x.idx < y.idx else 1
    return 0


cdef int cmp_i64(const void* a, const void* b) noexcept nogil:
    cdef i64 x = (<const i64*> a)[0]
    cdef i64 y = (<const i64*> b)[0]
    return (x > y) - (x < y)


cdef class _Buf:
    """Growable i64 array."""
    cdef i64* data
    cdef Py_ssize_t size, cap

    def __cinit__(self, Py_ssize_t cap=64):
        self.cap = cap if cap > 0 else 1
        self.size = 0
        self.data = <i64*> malloc(self.cap * sizeof(i64))
        if self.data == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.data)

    cdef int push(self, i64 v) except -1:
        cdef i64* grown
        if self.size == self.cap:
            grown = <i64*> realloc(self.data, 2 * self.cap * sizeof(i64))
            if grown == NULL:
                raise MemoryError()
            self.data = grown
            self.cap *= 2
        self.data[self.size] = v
        self.size += 1
        return 0


def dp_solve(const i64[:] win_ptr, const i64[:] win_start, const i64[:] win_end,
             const i64[:] dur, const i64[:] prof, const i64[:, :] ct):
    cdef Py_ssize_t n = dur.shape[0]
    cdef i64 ops = 0, slack = 0, lo = 0, hi = 0, v, t, st, k, ex, px, lx
    cdef Py_ssize_t a, b, i, s, x, pos, ptr, y, n_cand, n_keep
    cdef bint first = True
    if n > 1:
        for a in range(n):
            for b in range(n):
                if a != b:
                    v = ct[a, b]
                    if first or v < lo:
                        lo = v
                    if first or v > hi:
                        hi = v
                    first = False
        slack = hi - lo

    cdef _Buf s_last = _Buf(), s_end = _Buf(), s_prof = _Buf(), s_parent = _Buf()
    s_last.push(-1); s_end.push(NEG); s_prof.push(0); s_parent.push(-1)
    cdef _Buf pool = _Buf(), fresh = _Buf()
    pool.push(0)
    cdef SortKey* cand = NULL
    cdef i64* keep = NULL
    cdef i64* best_same = <i64*> malloc((n + 1) * sizeof(i64))
    cdef i64 best_cross
    if best_same == NULL:
        raise MemoryError()
    try:
        for i in range(n):
            fresh.size = 0
            for s in range(pool.size):
                x = pool.data[s]
                ops += 1
                k = s_last.data[x]
                t = NEG if k < 0 else s_end.data[x] + ct[k, i]
                st = earliest_start(i, t, win_ptr, win_start, win_end, dur)
                if st >= 0:
                    fresh.push(s_last.size)
                    s_last.push(i)
                    s_end.push(st + dur[i])
                    s_prof.push(s_prof.data[x] + prof[i])
                    s_parent.push(x)
            if fresh.size == 0:
                continue
            n_cand = pool.size + fresh.size
            cand = <SortKey*> realloc(cand, n_cand * sizeof(SortKey))
            keep = <i64*> realloc(keep, n_cand * sizeof(i64))
            if cand == NULL or keep == NULL:
                raise MemoryError()
            for s in range(pool.size):
                x = pool.data[s]
                cand[s].end = s_end.data[x]; cand[s].prof = s_prof.data[x]; cand[s].idx = x
            for s in range(fresh.size):
                x = fresh.data[s]
                cand[pool.size + s].end = s_end.data[x]
                cand[pool.size + s].prof = s_prof.data[x]
                cand[pool.size + s].idx = x
            qsort(cand, n_cand, sizeof(SortKey), cmp_key)
            ops += n_cand
            for s in range(n + 1):
                best_same[s] = -1
            best_cross = -1
            ptr = 0
            n_keep = 0
            for pos in range(n_cand):
                x = cand[pos].idx
                if x == 0:
                    keep[n_keep] = x
                    n_keep += 1
                    continue
                ex = cand[pos].end
                while ptr < pos and cand[ptr].end + slack <= ex:
                    y = cand[ptr].idx
                    if y != 0 and cand[ptr].prof > best_cross:
                        best_cross = cand[ptr].prof
                    ptr += 1
                px = cand[pos].prof
                lx = s_last.data[x]
                if best_cross >= px or best_same[lx] >= px:
                    continue
                keep[n_keep] = x
                n_keep += 1
                if px > best_same[lx]:
                    best_same[lx] = px
            qsort(keep, n_keep, sizeof(i64), cmp_i64)
            pool.size = 0
            for s in range(n_keep):
                pool.push(keep[s])

        best = 0
        for s in range(pool.size):
            x = pool.data[s]
            if (s_prof.data[x] > s_prof.data[best]
                    or (s_prof.data[x] == s_prof.data[best]
                        and (s_end.data[x] < s_end.data[best]
                             or (s_end.data[x] == s_end.data[best] and x < best)))):
                best = x
        starts = [-1] * n
        x = best
        while x > 0:
            k = s_last.data[x]
            starts[k] = s_end.data[x] - dur[k]
            x = s_parent.data[x]
        return s_prof.data[best], starts, ops
    finally:
        free(cand)
        free(keep)
        free(best_same)


def place_in_order(const i64[:] win_ptr, const i64[:] win_start, const i64[:] win_end,
                   const i64[:] dur, const i64[:] prof, const i64[:, :] ct):
    cdef Py_ssize_t n = dur.shape[0], i
    cdef i64 last = -1, t = NEG, st, ops = 0
    starts = [-1] * n
    for i in range(n):
        ops += 1
        st = earliest_start(i, NEG if last < 0 else t + ct[last, i], win_ptr, win_start, win_end, dur)
        if st >= 0:
            starts[i] = st
            last = i
            t = st + dur[i]
    return starts, ops


def hadrt(const i64[:] win_ptr, const i64[:] win_start, const i64[:] win_end,
          const i64[:] dur, const i64[:] prof, const i64[:, :] ct, double mean_duration,
          const i64[:] fixed):
    cdef Py_ssize_t n = dur.shape[0]
    cdef i64* ps = <i64*> malloc((n + 1) * sizeof(i64))
    cdef i64* pe = <i64*> malloc((n + 1) * sizeof(i64))
    cdef i64* pt = <i64*> malloc((n + 1) * sizeof(i64))
    cdef char* remaining = <char*> malloc(n + 1)
    if ps == NULL or pe == NULL or pt == NULL or remaining == NULL:
        free(ps); free(pe); free(pt); free(remaining)
        raise MemoryError()
    cdef Py_ssize_t i, w, k, m = 0, lo_k, hi_k, mid, best, best_k, found_k, q
    cdef i64 et, ops = 0, count = 0, d, ws, we, s, best_s, found_s, found_we
    cdef double f, best_f
    starts = [-1] * n
    try:
        for i in range(n):
            remaining[i] = 1
        for i in range(n):
            if fixed[i] < 0:
                continue
            # insertion sort by (start, position)
            q = m
            while q > 0 and (ps[q - 1] > fixed[i] or (ps[q - 1] == fixed[i] and pt[q - 1] > i)):
                ps[q] = ps[q - 1]
                pe[q] = pe[q - 1]
                pt[q] = pt[q - 1]
                q -= 1
            ps[q] = fixed[i]
            pe[q] = fixed[i] + dur[i]
            pt[q] = i
            m += 1
            starts[i] = fixed[i]
            remaining[i] = 0
        count = m
        while True:
            et = NEG
            for i in range(n):
                if remaining[i]:
                    for w in range(win_ptr[i], win_ptr[i + 1]):
                        ops += 1
                        if win_end[w] > et:
                            et = win_end[w]
            best = -1
            best_f = 0.0
            best_s = 0
            best_k = 0
            for i in range(n):
                if not remaining[i]:
                    continue
                d = dur[i]
                found_s = -1
                found_we = 0
                found_k = -1
                for w in range(win_ptr[i], win_ptr[i + 1]):
                    ws = win_start[w]
                    we = win_end[w]
                    lo_k = 0
                    hi_k = m
                    while lo_k < hi_k:
                        mid = (lo_k + hi_k) // 2
                        if ps[mid] < ws:
                            lo_k = mid + 1
                        else:
                            hi_k = mid
                    for k in range(lo_k, m + 1):
                        ops += 1
                        if k == 0:
                            s = ws
                        else:
                            s = pe[k - 1] + ct[pt[k - 1], i]
                            if s < ws:
                                s = ws
                        if s + d > we:
                            break
                        if k == m or s + d + ct[i, pt[k]] <= ps[k]:
                            found_s = s
                            found_we = we
                            found_k = k
                            break
                    if found_s >= 0:
                        break
                if found_s < 0:
                    remaining[i] = 0
                    continue
                f = (count + 1) + (et - found_we) / mean_duration
                if best < 0 or f > best_f:
                    best = i
                    best_f = f
                    best_s = found_s
                    best_k = found_k
            if best < 0:
                break
            remaining[best] = 0
            starts[best] = best_s
            q = m
            while q > best_k:
                ps[q] = ps[q - 1]
                pe[q] = pe[q - 1]
                pt[q] = pt[q - 1]
                q -= 1
            ps[best_k] = best_s
            pe[best_k] = best_s + dur[best]
            pt[best_k] = best
            m += 1
            count += 1
        return starts, ops
    finally:
        free(ps); free(pe); free(pt); free(remaining)
