# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: edit distance, catalog nearest match, Plackett-Luce draw,
pairwise rank agreement. Mirrors ``_pykernels`` exactly."""

from libc.stdlib cimport malloc, free


cdef Py_ssize_t _lev(const Py_UCS4 *a, Py_ssize_t la, const Py_UCS4 *b, Py_ssize_t lb,
                     Py_ssize_t *row) nogil:
    cdef Py_ssize_t i, j, prev_diag, tmp, best, cost
    for j in range(lb + 1):
        row[j] = j
    for i in range(1, la + 1):
        prev_diag = row[0]
        row[0] = i
        for j in range(1, lb + 1):
            tmp = row[j]
            cost = 0 if a[i - 1] == b[j - 1] else 1
            best = row[j] + 1
            if row[j - 1] + 1 < best:
                best = row[j - 1] + 1
            if prev_diag + cost < best:
                best = prev_diag + cost
            row[j] = best
            prev_diag = tmp
    return row[lb]


cdef Py_UCS4 *_fill(str s, Py_UCS4 *buf):
    cdef Py_ssize_t i
    cdef Py_UCS4 c
    for i, c in enumerate(s):
        buf[i] = c
    return buf


def levenshtein(str a, str b):
    if a == b:
        return 0
    cdef Py_ssize_t la = len(a), lb = len(b)
    if la < lb:
        a, b = b, a
        la, lb = lb, la
    if lb == 0:
        return la
    cdef Py_UCS4 *ca = <Py_UCS4 *> malloc(la * sizeof(Py_UCS4))
    cdef Py_UCS4 *cb = <Py_UCS4 *> malloc(lb * sizeof(Py_UCS4))
    cdef Py_ssize_t *row = <Py_ssize_t *> malloc((lb + 1) * sizeof(Py_ssize_t))
    try:
        if ca == NULL or cb == NULL or row == NULL:
            raise MemoryError()
        _fill(a, ca)
        _fill(b, cb)
        return _lev(ca, la, cb, lb, row)
    finally:
        free(ca)
        free(cb)
        free(row)


def normalized_distance(str a, str b):
    cdef Py_ssize_t longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return levenshtein(a, b) / <double>longest


def nearest(str query, candidates):
    cdef Py_ssize_t best_idx = -1, idx, qlen = len(query), clen, longest, dist, cap
    cdef double best = 2.0, d
    cdef str s
    cands = [str(c) for c in candidates]
    cap = qlen
    for s in cands:
        if len(s) > cap:
            cap = len(s)
    cap += 1
    cdef Py_UCS4 *cq = <Py_UCS4 *> malloc(cap * sizeof(Py_UCS4))
    cdef Py_UCS4 *cc = <Py_UCS4 *> malloc(cap * sizeof(Py_UCS4))
    cdef Py_ssize_t *row = <Py_ssize_t *> malloc(cap * sizeof(Py_ssize_t))
    try:
        if cq == NULL or cc == NULL or row == NULL:
            raise MemoryError()
        _fill(query, cq)
        for idx in range(len(cands)):
            s = cands[idx]
            clen = len(s)
            longest = qlen if qlen > clen else clen
            if longest == 0:
                d = 0.0
            else:
                if (qlen - clen if qlen > clen else clen - qlen) / <double>longest >= best:
                    continue
                _fill(s, cc)
                if qlen >= clen:
                    dist = _lev(cq, qlen, cc, clen, row)
                else:
                    dist = _lev(cc, clen, cq, qlen, row)
                d = dist / <double>longest
            if d < best:
                best_idx = idx
                best = d
                if d == 0.0:
                    break
    finally:
        free(cq)
        free(cc)
        free(row)
    if best_idx < 0:
        return -1, 1.0
    return best_idx, best


def pl_draw(weights, uniforms, Py_ssize_t k):
    cdef Py_ssize_t n = len(weights), t, i, pick
    if k > n or k > len(uniforms):
        raise ValueError("k exceeds number of items or uniforms")
    cdef double *w = <double *> malloc(max(n, 1) * sizeof(double))
    cdef char *taken = <char *> malloc(max(n, 1) * sizeof(char))
    cdef double total, target, acc
    out = []
    if w == NULL or taken == NULL:
        free(w)
        free(taken)
        raise MemoryError()
    try:
        for i in range(n):
            w[i] = weights[i]
            taken[i] = 0
        for t in range(k):
            total = 0.0
            for i in range(n):
                if not taken[i]:
                    total += w[i]
            target = <double>uniforms[t] * total
            acc = 0.0
            pick = -1
            for i in range(n):
                if taken[i]:
                    continue
                acc += w[i]
                pick = i
                if acc > target:
                    break
            taken[pick] = 1
            out.append(pick)
    finally:
        free(w)
        free(taken)
    return out


def prag_count(neutral_ranks):
    cdef Py_ssize_t m = len(neutral_ranks), p, q
    cdef long count = 0, rp, rq
    cdef long *r = <long *> malloc(max(m, 1) * sizeof(long))
    if r == NULL:
        raise MemoryError()
    try:
        for p in range(m):
            r[p] = neutral_ranks[p]
        for p in range(m):
            rp = r[p]
            if rp <= 0:
                continue
            for q in range(p + 1, m):
                rq = r[q]
                if rq <= 0 or rp < rq:
                    count += 1
    finally:
        free(r)
    return count
