# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled subset-pair kernel; same contract as ``_robust_py``."""

NO_VIOLATION = 1 << 30


cdef extern from *:
    int __builtin_popcount(unsigned int) nogil


def subset_table(in_masks, int n, int r):
    cdef unsigned int full = (1u << n) - 1
    cdef unsigned int S, outside, m, low
    cdef int cnt, i
    cdef unsigned int[32] masks
    for i in range(n):
        masks[i] = in_masks[i]
    table = bytearray(1 << n)
    cdef unsigned char[::1] t = table
    with nogil:
        for S in range(1u << n):
            outside = full & ~S
            cnt = 0
            m = S
            while m:
                low = m & (~m + 1)
                i = __builtin_popcount(low - 1)
                if __builtin_popcount(masks[i] & outside) >= r:
                    cnt += 1
                m ^= low
            t[S] = cnt
    return table


def scan(const unsigned char[::1] table, int n, int s, unsigned int lo,
         unsigned int hi, bint stop_early):
    cdef unsigned int full = (1u << n) - 1
    cdef unsigned int S1, S2, comp, w1 = 0, w2 = 0
    cdef int c1, c2, score, best = NO_VIOLATION
    if lo < 1:
        lo = 1
    with nogil:
        for S1 in range(lo, hi):
            c1 = table[S1]
            if c1 == __builtin_popcount(S1):
                continue
            comp = full & ~S1
            S2 = comp
            while S2:
                c2 = table[S2]
                if c2 != __builtin_popcount(S2):
                    score = c1 + c2
                    if score < best:
                        best = score
                        w1 = S1
                        w2 = S2
                        if stop_early and best < s:
                            break
                S2 = (S2 - 1) & comp
            if stop_early and best < s:
                break
    return best, w1, w2
