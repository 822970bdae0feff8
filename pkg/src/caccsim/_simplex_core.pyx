# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled simplex pivot loop.

Mirrors ``_simplex_ref.simplex_loop`` operation for operation (same entering
rule, same lexicographic ratio test, same elimination order) so that the
compiled and the pure Python backends produce bit-identical tableaus.  Built
with -ffp-contract=off to keep multiply and subtract as separate roundings,
matching numpy.
"""

import numpy as np

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITERATION_LIMIT = 2


cdef bint _lex_less(double[:, ::1] T, double ci, double cr,
                    Py_ssize_t i, Py_ssize_t r, Py_ssize_t width) noexcept:
    cdef Py_ssize_t j
    cdef double a, b
    for j in range(width):
        a = T[i, j] / ci
        b = T[r, j] / cr
        if a != b:
            return a < b
    return False


def simplex_loop(
    double[:, ::1] T,
    long long[::1] basis,
    Py_ssize_t limit_col,
    double rc_tol,
    double piv_tol,
    double degen_tol,
    long long bland_after,
    long long max_iters,
):
    """Run pivots in place until optimal/unbounded/limit.

    Same contract as the reference kernel: returns (status, iterations).
    """
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t width = T.shape[1]
    cdef Py_ssize_t rhs = width - 1
    cdef Py_ssize_t i, j, q, r
    cdef long long iters = 0
    cdef long long degen_streak = 0
    cdef double best, rc, ratio, best_ratio, piv, f

    while iters < max_iters:
        # Entering column.
        q = -1
        if degen_streak >= bland_after:
            for j in range(limit_col):
                if T[m, j] < -rc_tol:
                    q = j
                    break
        else:
            best = 0.0
            for j in range(limit_col):
                rc = T[m, j]
                if rc < best:
                    best = rc
                    q = j
            if q >= 0 and not (T[m, q] < -rc_tol):
                q = -1
        if q < 0:
            return STATUS_OPTIMAL, iters

        # Leaving row: minimum ratio, lexicographic tie-break.
        best_ratio = 0.0
        r = -1
        for i in range(m):
            piv = T[i, q]
            if piv > piv_tol:
                ratio = T[i, rhs] / piv
                if r < 0 or ratio < best_ratio:
                    r = i
                    best_ratio = ratio
        if r < 0:
            return STATUS_UNBOUNDED, iters
        for i in range(r + 1, m):
            piv = T[i, q]
            if piv > piv_tol and T[i, rhs] / piv == best_ratio:
                if _lex_less(T, piv, T[r, q], i, r, width):
                    r = i

        if best_ratio < degen_tol:
            degen_streak += 1
        else:
            degen_streak = 0

        # Pivot: normalize row r, then eliminate the column everywhere else.
        piv = T[r, q]
        for j in range(width):
            T[r, j] /= piv
        for i in range(m + 1):
            if i == r:
                continue
            f = T[i, q]
            if f != 0.0:
                for j in range(width):
                    T[i, j] -= f * T[r, j]
        basis[r] = q
        iters += 1

    return STATUS_ITERATION_LIMIT, iters
