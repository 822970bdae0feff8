"""Pure-numpy simplex pivot loop (fallback for the compiled kernel).

Both kernels implement the exact same arithmetic on the tableau: Dantzig
entering rule (first most-negative reduced cost) with a Bland fallback after
a run of degenerate pivots, a lexicographic ratio test (ties on the minimum
ratio are broken by the first strict difference of the candidate rows scaled
by their pivot entries, which prevents cycling), and a rank-1 elimination
with the pivot row normalized first.  Keeping the operation order identical
makes the two backends produce bit-identical results.
"""

from __future__ import annotations

import numpy as np

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITERATION_LIMIT = 2


def _lex_less(T: np.ndarray, col: np.ndarray, i: int, r: int) -> bool:
    """Row i strictly lex-precedes row r after scaling by the pivot column."""
    a = T[i] / col[i]
    b = T[r] / col[r]
    diff = np.flatnonzero(a != b)
    if diff.size == 0:
        return False
    j = diff[0]
    return bool(a[j] < b[j])


def simplex_loop(
    T: np.ndarray,
    basis: np.ndarray,
    limit_col: int,
    rc_tol: float,
    piv_tol: float,
    degen_tol: float,
    bland_after: int,
    max_iters: int,
):
    """Run pivots in place until optimal/unbounded/limit.

    T is the (m+1) x width tableau with the reduced-cost row last and the
    rhs column last; basis holds the basic variable index per constraint row.
    Only columns [0, limit_col) are eligible to enter.

    Returns (status, iterations).
    """
    m = T.shape[0] - 1
    width = T.shape[1]
    rhs = width - 1
    cost = T[m]
    ratios = np.empty(m)
    scratch = np.empty_like(T)
    iters = 0
    degen_streak = 0

    while iters < max_iters:
        # Entering column.
        if degen_streak >= bland_after:
            eligible = np.flatnonzero(cost[:limit_col] < -rc_tol)
            if eligible.size == 0:
                return STATUS_OPTIMAL, iters
            q = int(eligible[0])
        else:
            q = int(np.argmin(cost[:limit_col]))
            if not (cost[q] < -rc_tol):
                return STATUS_OPTIMAL, iters

        # Leaving row: minimum ratio, lexicographic tie-break.
        col = T[:m, q]
        ok = col > piv_tol
        if not ok.any():
            return STATUS_UNBOUNDED, iters
        ratios.fill(np.inf)
        np.divide(T[:m, rhs], col, out=ratios, where=ok)
        best = ratios.min()
        cand = np.flatnonzero(ratios == best)
        r = int(cand[0])
        for i in cand[1:]:
            if _lex_less(T, col, int(i), r):
                r = int(i)

        if best < degen_tol:
            degen_streak += 1
        else:
            degen_streak = 0

        # Pivot: normalize row r, then eliminate the column everywhere else.
        # Rows with a zero factor are skipped outright (not rewritten with a
        # zero product) so both kernels leave identical bytes behind,
        # including signed zeros.
        piv = T[r, q]
        T[r] /= piv
        colfac = T[:, q].copy()
        colfac[r] = 0.0
        np.multiply(colfac[:, None], T[r][None, :], out=scratch)
        np.subtract(T, scratch, out=T, where=(colfac != 0.0)[:, None])
        basis[r] = q
        iters += 1

    return STATUS_ITERATION_LIMIT, iters
