"""Dense two-phase simplex over free-sign variables.

The public problem form is

    minimize    objective . z
    subject to  eq_lhs   z  = eq_rhs
                ineq_lhs z <= ineq_rhs

with z unrestricted in sign (the controller states and inputs are sign-free;
nonnegativity, where wanted, is expressed as an inequality row).  Internally
the solver splits z = z+ - z-, adds slacks, and runs a standard two-phase
tableau simplex: Dantzig pricing with a Bland fallback after a run of
degenerate pivots, which guards against cycling.

The pivot loop is the hot path: it runs in the compiled extension
``_simplex_core`` when available and falls back to the numpy implementation
in ``_simplex_ref``.  Set CACCSIM_PURE_PYTHON=1 to force the fallback.  The
two kernels are bit-compatible.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import _simplex_ref

if os.environ.get("CACCSIM_PURE_PYTHON"):
    _kernel = _simplex_ref
else:
    try:
        from . import _simplex_core as _kernel  # type: ignore[no-redef]
    except ImportError:
        _kernel = _simplex_ref


def backend_name() -> str:
    """Name of the active pivot-loop backend ('cython' or 'python')."""
    return "cython" if _kernel.__name__.endswith("_simplex_core") else "python"


# Tolerances: problem data here is O(1)..O(1e3) and well conditioned.
RC_TOL = 1e-9          # reduced-cost optimality tolerance
PIV_TOL = 1e-10        # minimum admissible pivot magnitude
DEGEN_TOL = 1e-9       # ratio below this counts as a degenerate pivot (stall guard)
FEAS_TOL = 1e-8        # relative feasibility tolerance


class LpStatus(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class LpProblem:
    """Dense LP in minimize form with free-sign variables."""

    num_vars: int
    objective: np.ndarray
    eq_lhs: np.ndarray
    eq_rhs: np.ndarray
    ineq_lhs: np.ndarray
    ineq_rhs: np.ndarray
    names: Optional[list] = None

    def __post_init__(self):
        n = self.num_vars
        self.objective = np.asarray(self.objective, dtype=float).reshape(n)
        self.eq_lhs = np.asarray(self.eq_lhs, dtype=float).reshape(-1, n)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).reshape(-1)
        self.ineq_lhs = np.asarray(self.ineq_lhs, dtype=float).reshape(-1, n)
        self.ineq_rhs = np.asarray(self.ineq_rhs, dtype=float).reshape(-1)
        if self.eq_lhs.shape[0] != self.eq_rhs.shape[0]:
            raise ValueError("equality lhs/rhs row mismatch")
        if self.ineq_lhs.shape[0] != self.ineq_rhs.shape[0]:
            raise ValueError("inequality lhs/rhs row mismatch")
        for arr in (self.objective, self.eq_lhs, self.eq_rhs, self.ineq_lhs, self.ineq_rhs):
            if arr.size and not np.isfinite(arr).all():
                raise ValueError("LP data must be finite")

    @staticmethod
    def empty(num_vars: int, objective) -> "LpProblem":
        z = np.zeros((0, num_vars))
        return LpProblem(num_vars, np.asarray(objective, dtype=float), z, np.zeros(0), z.copy(), np.zeros(0))


@dataclass
class LpSolution:
    status: LpStatus
    z: np.ndarray
    objective_value: float
    iterations: int


@dataclass
class SolutionReport:
    """Exact constraint residuals at a candidate point."""

    eq_residuals: np.ndarray    # eq_lhs z - eq_rhs (signed)
    ineq_residuals: np.ndarray  # ineq_lhs z - ineq_rhs (signed; <= 0 feasible)

    @property
    def max_eq_violation(self) -> float:
        return float(np.abs(self.eq_residuals).max()) if self.eq_residuals.size else 0.0

    @property
    def max_ineq_violation(self) -> float:
        return float(self.ineq_residuals.max()) if self.ineq_residuals.size else 0.0


def check_solution(p: LpProblem, z) -> SolutionReport:
    """Residual report for ``z``; never mutates the problem."""
    z = np.asarray(z, dtype=float).reshape(p.num_vars)
    eq = p.eq_lhs @ z - p.eq_rhs if p.eq_lhs.size else np.zeros(p.eq_lhs.shape[0])
    ineq = p.ineq_lhs @ z - p.ineq_rhs if p.ineq_lhs.size else np.zeros(p.ineq_lhs.shape[0])
    return SolutionReport(eq_residuals=eq, ineq_residuals=ineq)


def solve(p: LpProblem, max_iters: int = 20000) -> LpSolution:
    """Two-phase simplex solve; deterministic for identical problem data."""
    n = p.num_vars
    m_ineq = p.ineq_lhs.shape[0]
    m_eq = p.eq_lhs.shape[0]
    m = m_ineq + m_eq

    if m == 0:
        # Unconstrained: bounded only if the objective is zero.
        if np.any(p.objective != 0.0):
            return LpSolution(LpStatus.UNBOUNDED, np.zeros(n), -np.inf, 0)
        return LpSolution(LpStatus.OPTIMAL, np.zeros(n), 0.0, 0)

    # Equilibrate: column scaling over the structural variables, then row
    # scaling.  The raw problems mix scales across six orders of magnitude
    # and an unscaled tableau loses feasibility digits in degenerate runs.
    A = np.vstack([p.ineq_lhs, p.eq_lhs])
    b = np.concatenate([p.ineq_rhs, p.eq_rhs])
    col_s = np.abs(A).max(axis=0)
    col_s[col_s == 0.0] = 1.0
    A = A / col_s
    row_s = np.abs(A).max(axis=1)
    row_s[row_s == 0.0] = 1.0
    A = A / row_s[:, None]
    b = b / row_s

    # Split free variables: y = y+ - y- with y = col_s * z.
    A_split = np.hstack([A, -A])
    n_split = 2 * n

    # Slack columns for the inequality rows.
    slack = np.zeros((m, m_ineq))
    slack[:m_ineq, :] = np.eye(m_ineq)

    body = np.hstack([A_split, slack])
    rhs = b.copy()

    # Normalize to rhs >= 0; flipped inequality rows lose their unit slack.
    neg = rhs < 0.0
    body[neg] *= -1.0
    rhs[neg] *= -1.0

    # Artificial columns for every row that has no admissible basic slack.
    needs_art = np.ones(m, dtype=bool)
    needs_art[:m_ineq] = neg[:m_ineq]
    art_rows = np.flatnonzero(needs_art)
    n_art = art_rows.size
    art = np.zeros((m, n_art))
    art[art_rows, np.arange(n_art)] = 1.0

    n_real = n_split + m_ineq
    width = n_real + n_art + 1
    T = np.zeros((m + 1, width))
    T[:m, :n_real] = body
    T[:m, n_real:n_real + n_art] = art
    T[:m, -1] = rhs

    basis = np.empty(m, dtype=np.int64)
    basis[:m_ineq] = n_split + np.arange(m_ineq)
    basis[art_rows] = n_real + np.arange(n_art)

    bland_after = 3 * max(n, 1)
    total_iters = 0

    # Phase 1: minimize the sum of artificials.
    if n_art:
        T[m] = -T[art_rows].sum(axis=0)
        T[m, n_real:n_real + n_art] = 0.0
        code, it = _kernel.simplex_loop(
            T, basis, n_real, RC_TOL, PIV_TOL, DEGEN_TOL, bland_after, max_iters
        )
        total_iters += it
        if code == _simplex_ref.STATUS_ITERATION_LIMIT:
            return LpSolution(LpStatus.ITERATION_LIMIT, np.zeros(n), np.nan, total_iters)
        # Residual infeasibility is the value still carried by basic
        # artificials (the cost-row cell drifts with the rank-1 updates).
        art_basic = basis >= n_real
        phase1_obj = float(T[:m, -1][art_basic].sum()) if art_basic.any() else 0.0
        scale = 1.0 + (np.abs(b).max() if b.size else 0.0)
        if phase1_obj > FEAS_TOL * scale:
            return LpSolution(LpStatus.INFEASIBLE, np.zeros(n), np.nan, total_iters)
        # Drive remaining basic artificials out on any usable real column.
        for r in np.flatnonzero(basis >= n_real):
            cols = np.flatnonzero(np.abs(T[r, :n_real]) > PIV_TOL)
            if cols.size:
                _pivot(T, basis, int(r), int(cols[0]))
                total_iters += 1
        # Compact: drop artificial columns that are no longer basic.
        keep = np.ones(width, dtype=bool)
        for j in range(n_real, width - 1):
            if j not in basis:
                keep[j] = False
        if not keep.all():
            old_idx = np.flatnonzero(keep)
            remap = -np.ones(width, dtype=np.int64)
            remap[old_idx] = np.arange(old_idx.size)
            T = np.ascontiguousarray(T[:, keep])
            basis = remap[basis]
            width = T.shape[1]

    # Phase 2: restore the true objective (in scaled variables) as reduced
    # costs.
    c_scaled = p.objective / col_s
    cost = np.zeros(width)
    cost[:n] = c_scaled
    cost[n:n_split] = -c_scaled
    T[m] = cost
    T[m, -1] = 0.0
    for r in range(m):
        cb = cost[basis[r]]
        if cb != 0.0:
            T[m] -= cb * T[r]

    code, it = _kernel.simplex_loop(
        T, basis, n_real, RC_TOL, PIV_TOL, DEGEN_TOL, bland_after, max_iters - total_iters
    )
    total_iters += it
    if code == _simplex_ref.STATUS_UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, np.zeros(n), -np.inf, total_iters)
    if code == _simplex_ref.STATUS_ITERATION_LIMIT:
        return LpSolution(LpStatus.ITERATION_LIMIT, np.zeros(n), np.nan, total_iters)

    full = np.zeros(width - 1)
    full[basis] = T[:m, -1]
    z = (full[:n] - full[n:n_split]) / col_s
    return LpSolution(LpStatus.OPTIMAL, z, float(p.objective @ z), total_iters)


def _pivot(T: np.ndarray, basis: np.ndarray, r: int, q: int):
    """Single pivot with the same arithmetic as the kernels."""
    T[r] /= T[r, q]
    colfac = T[:, q].copy()
    colfac[r] = 0.0
    T -= colfac[:, None] * T[r][None, :]
    basis[r] = q
