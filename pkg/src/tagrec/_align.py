"""Compiled Levenshtein alignment kernel.

Ops codes: 0 match, 1 substitute, 2 insert (hypothesis only), 3 delete
(reference only).  The backtrace walks from the end and prefers the
diagonal, then insert, then delete, whenever costs tie.

Only cells with ``|j - i| <= band`` are filled.  Any alignment of cost d
stays within ``|j - i| <= d``, so a banded result with cost <= band is the
global optimum, and since every cell on an optimal path is then inside the
band the tie-broken backtrace is identical to the full-matrix one.
"""

import numpy as np
from numba import njit

MATCH, SUBSTITUTE, INSERT, DELETE = 0, 1, 2, 3
_BIG = 1 << 30


@njit(cache=True)
def _banded(a, b, band):
    n = a.shape[0]
    m = b.shape[0]
    width = 2 * band + 1
    # row i, column j stored at dp[i, j - i + band]
    dp = np.full((n + 1, width), _BIG, dtype=np.int32)
    for j in range(0, min(m, band) + 1):
        dp[0, j + band] = j
    for i in range(1, n + 1):
        lo = max(0, i - band)
        hi = min(m, i + band)
        ai = a[i - 1]
        for j in range(lo, hi + 1):
            k = j - i + band
            if j == 0:
                dp[i, k] = i
                continue
            best = dp[i - 1, k] + (0 if ai == b[j - 1] else 1)
            if k > 0:
                v = dp[i, k - 1] + 1
                if v < best:
                    best = v
            if k + 1 < width:
                v = dp[i - 1, k + 1] + 1
                if v < best:
                    best = v
            dp[i, k] = best
    cost = dp[n, m - n + band]
    if cost > band:
        return cost, np.empty(0, dtype=np.int8)
    ops = np.empty(n + m, dtype=np.int8)
    count = 0
    i = n
    j = m
    while i > 0 or j > 0:
        k = j - i + band
        cur = dp[i, k]
        if i > 0 and j > 0:
            sub = 0 if a[i - 1] == b[j - 1] else 1
            if dp[i - 1, k] + sub == cur:
                ops[count] = MATCH if sub == 0 else SUBSTITUTE
                count += 1
                i -= 1
                j -= 1
                continue
        if j > 0 and k > 0 and dp[i, k - 1] + 1 == cur:
            ops[count] = INSERT
            count += 1
            j -= 1
            continue
        ops[count] = DELETE
        count += 1
        i -= 1
    return cost, ops[:count][::-1].copy()


@njit(cache=True)
def _distance_only(a, b):
    n = a.shape[0]
    m = b.shape[0]
    prev = np.arange(m + 1).astype(np.int32)
    cur = np.empty(m + 1, dtype=np.int32)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            v = prev[j] + 1
            if v < best:
                best = v
            v = cur[j - 1] + 1
            if v < best:
                best = v
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


def align_codes(a: np.ndarray, b: np.ndarray) -> tuple[int, np.ndarray]:
    """Minimal-cost alignment of two integer code arrays."""
    n, m = len(a), len(b)
    # a shared suffix is always matched by the diagonal-first backtrace
    suffix = 0
    limit = min(n, m)
    if limit:
        neq = np.nonzero(a[n - limit:][::-1] != b[m - limit:][::-1])[0]
        suffix = int(neq[0]) if len(neq) else limit
    a2, b2 = a[:n - suffix], b[:m - suffix]
    band = max(abs(len(a2) - len(b2)), 16)
    while True:
        cost, ops = _banded(a2, b2, band)
        if cost <= band:
            break
        band = min(band * 4, max(len(a2), len(b2)))
    if suffix:
        ops = np.concatenate([ops, np.zeros(suffix, dtype=np.int8)])
    return int(cost), ops


def distance_codes(a: np.ndarray, b: np.ndarray) -> int:
    # the banded kernel wins once inputs are long and similar
    if min(len(a), len(b)) > 64:
        return align_codes(a, b)[0]
    return int(_distance_only(a, b))
