"""Pure-Python Levenshtein DP kernel.

Fallback twin of the compiled ``_levkernel`` extension; both expose the same
``dp_table`` contract and must stay cell-for-cell identical.
"""

from __future__ import annotations

from typing import Sequence


def dp_table(a: Sequence[int], b: Sequence[int]) -> list[int]:
    """Fill the unit-cost edit-distance table for integer id sequences.

    Returns a flat row-major table of size ``(len(a)+1) * (len(b)+1)``;
    entry ``[i * (len(b)+1) + j]`` is the distance between ``a[:i]`` and
    ``b[:j]``.
    """
    n, m = len(a), len(b)
    width = m + 1
    dp = [0] * ((n + 1) * width)
    for j in range(1, width):
        dp[j] = j
    for i in range(1, n + 1):
        row = i * width
        prev = row - width
        dp[row] = i
        ai = a[i - 1]
        for j in range(1, width):
            if ai == b[j - 1]:
                dp[row + j] = dp[prev + j - 1]
            else:
                best = dp[prev + j - 1]
                if dp[prev + j] < best:
                    best = dp[prev + j]
                if dp[row + j - 1] < best:
                    best = dp[row + j - 1]
                dp[row + j] = best + 1
    return dp
