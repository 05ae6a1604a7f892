# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled Levenshtein DP kernel; behavioral twin of ``_levkernel_py``."""

from cpython cimport array
import array


def dp_table(a, b):
    """Fill the unit-cost edit-distance table for integer id sequences.

    Same contract as ``_levkernel_py.dp_table``: flat row-major
    ``array('i')`` of size ``(len(a)+1) * (len(b)+1)``.
    """
    cdef Py_ssize_t n = len(a)
    cdef Py_ssize_t m = len(b)
    cdef Py_ssize_t width = m + 1
    cdef array.array dp_arr = array.array("i", bytes(4 * (n + 1) * width))
    cdef int[::1] dp = dp_arr
    cdef array.array a_arr = array.array("i", a)
    cdef array.array b_arr = array.array("i", b)
    cdef int[::1] av = a_arr
    cdef int[::1] bv = b_arr
    cdef Py_ssize_t i, j, row, prev
    cdef int ai, best, cand

    for j in range(1, width):
        dp[j] = <int> j
    for i in range(1, n + 1):
        row = i * width
        prev = row - width
        dp[row] = <int> i
        ai = av[i - 1]
        for j in range(1, width):
            if ai == bv[j - 1]:
                dp[row + j] = dp[prev + j - 1]
            else:
                best = dp[prev + j - 1]
                cand = dp[prev + j]
                if cand < best:
                    best = cand
                cand = dp[row + j - 1]
                if cand < best:
                    best = cand
                dp[row + j] = best + 1
    return dp_arr
