"""Pure-Python subset-pair kernel for the robustness certifier.

Mirrors ``_robust_core.pyx`` call for call; ``msrsim.graph`` picks one of
the two at import.
"""

NO_VIOLATION = 1 << 30


def subset_table(in_masks, n, r):
    """Return |X^r_S| for every subset bitmask S of n nodes."""
    full = (1 << n) - 1
    table = [0] * (1 << n)
    for S in range(1 << n):
        outside = full & ~S
        cnt = 0
        m = S
        while m:
            low = m & -m
            i = low.bit_length() - 1
            if (in_masks[i] & outside).bit_count() >= r:
                cnt += 1
            m ^= low
        table[S] = cnt
    return table


def scan(table, n, s, lo, hi, stop_early):
    """Minimise |X_1| + |X_2| over disjoint nonempty pairs with V1 in [lo, hi).

    Pairs where either side satisfies X_S = S are skipped. Returns
    ``(best, v1, v2)``; ``best`` is NO_VIOLATION when no pair qualifies.
    With ``stop_early`` the scan returns on the first pair scoring below s.
    """
    full = (1 << n) - 1
    best, w1, w2 = NO_VIOLATION, 0, 0
    for S1 in range(max(lo, 1), hi):
        c1 = table[S1]
        if c1 == S1.bit_count():
            continue
        comp = full & ~S1
        S2 = comp
        while S2:
            c2 = table[S2]
            if c2 != S2.bit_count():
                score = c1 + c2
                if score < best:
                    best, w1, w2 = score, S1, S2
                    if stop_early and best < s:
                        return best, w1, w2
            S2 = (S2 - 1) & comp
    return best, w1, w2
