# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in _pykernels (same streams, same results)."""

import numpy as np
from libc.stdint cimport uint64_t, int64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double next_u(uint64_t* s) noexcept nogil:
    s[0] += GOLDEN
    return <double>(mix64(s[0]) >> 11) * (1.0 / 9007199254740992.0)


cdef int count_correct(double* p, int M, const double[::1] x, const int64_t[::1] y,
                       int* knife) noexcept nogil:
    cdef int i, j, N = x.shape[0], correct = 0
    cdef double acc, z, F
    knife[0] = 0
    for i in range(N):
        acc = 0.0
        for j in range(M):
            z = p[3 * j + 1] * x[i] + p[3 * j + 2]
            acc = acc + p[3 * j] * (z if z > 0 else 0.0)
        F = acc + p[3 * M]
        if F == 0:
            knife[0] = 1
        if (1 if F >= 0 else -1) == y[i]:
            correct += 1
    return correct


def altline_trials(x, y, int M, int n, int trials, int iters, uint64_t base):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const int64_t[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef int D = 3 * M + 1
    cdef double[::1] lo = np.full(D, -1.0)
    cdef double[::1] hi = np.full(D, 1.0)
    cdef double[::1] p = np.empty(D)
    out = np.empty(trials, dtype=np.int64)
    knives = np.empty(trials, dtype=np.uint8)
    cdef int64_t[::1] outv = out
    cdef unsigned char[::1] kv = knives
    cdef int t, it, k, j, cur, cnt, knife
    cdef uint64_t s
    cdef double u1, u2, u3, old, span, nudged
    for j in range(M):
        lo[3 * j + 1] = -n
        hi[3 * j + 1] = n
    with nogil:
        for t in range(trials):
            s = mix64(base + <uint64_t>t)
            for k in range(D):
                p[k] = lo[k] + (hi[k] - lo[k]) * next_u(&s)
            cur = count_correct(&p[0], M, xv, yv, &knife)
            for it in range(iters):
                u1 = next_u(&s)
                u2 = next_u(&s)
                u3 = next_u(&s)
                k = <int>(u1 * D)
                if k > D - 1:
                    k = D - 1
                old = p[k]
                span = hi[k] - lo[k]
                if u2 < 0.5:
                    p[k] = lo[k] + span * u3
                else:
                    nudged = old + span * 0.1 * (2.0 * u3 - 1.0)
                    if nudged < lo[k]:
                        nudged = lo[k]
                    if nudged > hi[k]:
                        nudged = hi[k]
                    p[k] = nudged
                cnt = count_correct(&p[0], M, xv, yv, &knife)
                if cnt >= cur:
                    cur = cnt
                else:
                    p[k] = old
            outv[t] = count_correct(&p[0], M, xv, yv, &knife)
            kv[t] = knife
    return out, knives


cdef inline int64_t gcd(int64_t a, int64_t b) noexcept nogil:
    if a < 0:
        a = -a
    if b < 0:
        b = -b
    while b:
        a, b = b, a % b
    return a


def coprime_trials(int n, int N, int trials, uint64_t base):
    out = np.zeros(trials, dtype=np.uint8)
    cdef unsigned char[::1] ov = out
    cdef int64_t[::1] v = np.empty(max(N, 1), dtype=np.int64)
    cdef int t, i, b, blocks = N // 4
    cdef int64_t d1, d2, r
    cdef uint64_t s
    with nogil:
        for t in range(trials):
            s = mix64(base + <uint64_t>t)
            for i in range(N):
                r = <int64_t>(next_u(&s) * n)
                if r > n - 1:
                    r = n - 1
                v[i] = 1 + r
            for b in range(blocks):
                d1 = v[4 * b] - v[4 * b + 1]
                d2 = v[4 * b + 2] - v[4 * b + 3]
                if d1 != 0 and d2 != 0 and gcd(d1, d2) == 1:
                    ov[t] = 1
                    break
    return out
