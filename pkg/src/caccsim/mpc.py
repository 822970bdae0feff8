"""l-inf-norm receding-horizon controller as a linear program.

The stage cost ||Q x_k||_inf + ||R u_k||_inf is relaxed with per-step
epigraph variables (eps_x bounds +/- every row of Q, eps_u the rows of R);
the comfort slack is free and priced through its own epigraph |s_k| <= eps_s.
Dynamics enter as equalities, the 14-row constraint blocks per step.

For T horizon steps the LP therefore has 8T variables

    x_k (3, k=1..T)   u_k, s_k, eps_u_k, eps_s_k (k=0..T-1)   eps_x_k (k=1..T)

3T dynamics equalities, and 22T inequalities (14T block rows, 4(T-1) stage
cost rows, 4 terminal rows, 2T input cost rows, 2T slack cost rows).  The
stage cost of the measured x_0 is a known constant and carries no variable.

The robust counterpart keeps the same shape and tightens constraint rows by
the worst-case disturbance contribution: with w bounded in the unit inf-norm
ball, max_w a.(W_bar w) over the accumulated chain W_bar_j = F^(j-1) W is the
row-wise absolute sum (Hoelder bound).  An optional deadbeat pre-stabilizer
K0 on the controllable (d, v_e) channel stops that channel's accumulation
after two steps; the lead-speed channel is input-unreachable and keeps
accumulating over the finite horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import lp
from .kinematics import PlatoonSystem, RelativeState, build_system
from .safety import (
    SAFETY_ROWS,
    BrakingSpec,
    ComfortSpec,
    ConstraintBlock,
    Row,
    constraint_block,
)

STATE_ROWS = tuple(r for r in Row if r not in (Row.BRAKE_CAPACITY, Row.COMFORT_LOWER, Row.COMFORT_UPPER))
INPUT_ROWS = (Row.BRAKE_CAPACITY, Row.COMFORT_LOWER, Row.COMFORT_UPPER)


@dataclass
class CostSpec:
    """Weighting matrices of the stage cost and the slack price."""

    Q: np.ndarray
    R: np.ndarray
    P_terminal: Optional[np.ndarray] = None
    slack_weight: float = 1000.0

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float).reshape(-1, 3)
        self.R = np.asarray(self.R, dtype=float).reshape(-1, 1)
        if self.P_terminal is None:
            self.P_terminal = self.Q.copy()
        else:
            self.P_terminal = np.asarray(self.P_terminal, dtype=float).reshape(-1, 3)
        if np.linalg.matrix_rank(self.Q) != self.Q.shape[0]:
            raise ValueError("Q must have full row rank")
        if np.linalg.matrix_rank(self.R) != self.R.shape[0]:
            raise ValueError("R must have full row rank")
        if not (self.slack_weight > 0.0):
            raise ValueError("slack_weight must be > 0")

    @staticmethod
    def default() -> "CostSpec":
        return CostSpec(Q=np.array([[100.0, 0.0, 0.0], [0.0, 1.0, -1.0]]), R=np.array([[1.0]]))


@dataclass(frozen=True)
class HorizonSpec:
    T: int
    T_s: float

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("horizon must have at least one step")
        if not (self.T_s > 0.0):
            raise ValueError("T_s must be positive")


@dataclass
class RobustLpProblem:
    """Tightened LP plus the tightening metadata."""

    base: lp.LpProblem
    phi_A: np.ndarray  # (T+1, 14); phi_A[k] applies to rows whose state is x_k
    phi_Q: np.ndarray  # (T+1, rows(Q)); phi_Q[k] tightens the stage rows at x_k
    phi_P: np.ndarray  # (rows(P),); tightens the terminal rows
    K0: np.ndarray     # (3,) pre-stabilizer gain (zeros when disabled)


@dataclass
class ControlDecision:
    u: float
    status: lp.LpStatus
    objective: float
    predicted: list
    active_rows: np.ndarray  # (T, 14) bool; block rows near their bound
    fallback: bool
    iterations: int


def holder_bound(M) -> np.ndarray:
    """max over ||w||_inf <= 1 of M w, element-wise: the row sums of |M|."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return np.abs(M).sum(axis=1)


def disturbance_chain(F_cl, W, T: int) -> np.ndarray:
    """Accumulated disturbance directions W_bar_i = F_cl^(i-1) W, i = 1..T."""
    if T < 1:
        raise ValueError("T must be >= 1")
    F_cl = np.asarray(F_cl, dtype=float)
    w = np.asarray(W, dtype=float).reshape(F_cl.shape[0])
    out = np.empty((T, w.size))
    out[0] = w
    for i in range(1, T):
        out[i] = F_cl @ out[i - 1]
    return out


def reduced_system(T_s: float):
    """Controllable (d, v_e) subsystem: F_r, G_r of the gap/ego-speed pair."""
    F_r = np.array([[1.0, -T_s], [0.0, 1.0]])
    G_r = np.array([-0.5 * T_s**2, T_s])
    return F_r, G_r


def synth_nilpotent(sys: PlatoonSystem) -> np.ndarray:
    """Deadbeat gain K0 = [k_d, 0, k_v] for the controllable (d, v_e) pair.

    Ackermann's formula placing both poles at zero; the lead-speed channel is
    input-unreachable, so its K0 entry is zero and the full closed loop keeps
    the eigenvalue 1 there.
    """
    if not (sys.T_s > 0.0):
        raise ValueError("T_s must be positive")
    F_r, G_r = reduced_system(sys.T_s)
    ctrb = np.column_stack([G_r, F_r @ G_r])
    if abs(np.linalg.det(ctrb)) < 1e-12 * max(1.0, sys.T_s**3):
        raise ValueError("reduced (d, v_e) pair is not controllable")
    k_r = np.linalg.solve(ctrb.T, np.array([0.0, 1.0])) @ (F_r @ F_r)
    return np.array([k_r[0], 0.0, k_r[1]])


def closed_loop(sys: PlatoonSystem, K0) -> np.ndarray:
    """Full 3x3 closed-loop matrix F - G K0."""
    K0 = np.asarray(K0, dtype=float).reshape(3)
    return sys.F - np.outer(sys.G, K0)


def lp_census(hz: HorizonSpec, cost: CostSpec) -> dict:
    """Documented size of the horizon LP (variables, equalities, inequalities)."""
    T = hz.T
    rq = cost.Q.shape[0]
    rp = cost.P_terminal.shape[0]
    rr = cost.R.shape[0]
    variables = {"x": 3 * T, "u": T, "s": T, "eps_x": T, "eps_u": T, "eps_s": T}
    inequalities = {
        "constraint_blocks": 14 * T,
        "stage_cost": 2 * rq * (T - 1),
        "terminal_cost": 2 * rp,
        "input_cost": 2 * rr * T,
        "slack_cost": 2 * T,
    }
    return {
        "variables": variables,
        "num_variables": sum(variables.values()),
        "num_equalities": 3 * T,
        "inequalities": inequalities,
        "num_inequalities": sum(inequalities.values()),
    }


class _Layout:
    """Column offsets of the horizon LP."""

    def __init__(self, T: int):
        self.T = T
        self.n = 8 * T

    def x(self, k: int) -> int:
        return 3 * (k - 1)

    def u(self, k: int) -> int:
        return 3 * self.T + k

    def s(self, k: int) -> int:
        return 4 * self.T + k

    def ex(self, k: int) -> int:
        return 5 * self.T + (k - 1)

    def eu(self, k: int) -> int:
        return 6 * self.T + k

    def es(self, k: int) -> int:
        return 7 * self.T + k


def _assemble(
    x0: RelativeState,
    sys: PlatoonSystem,
    cost: CostSpec,
    hz: HorizonSpec,
    blocks: Sequence[ConstraintBlock],
    K0: np.ndarray,
    chain: Optional[np.ndarray],
    tighten_rows: Sequence[int],
):
    """Build the LP; with a disturbance chain, add the Hoelder tightenings."""
    T = hz.T
    if len(blocks) != T:
        raise ValueError(f"need {T} constraint blocks, got {len(blocks)}")
    L = _Layout(T)
    n = L.n
    rq = cost.Q.shape[0]
    rp = cost.P_terminal.shape[0]
    rr = cost.R.shape[0]
    K0 = np.asarray(K0, dtype=float).reshape(3)
    F_cl = sys.F - np.outer(sys.G, K0)
    x0v = x0.as_array()

    # Row-wise tightening: phi_A[k, r] is the worst-case disturbance term of
    # block k, row r.  A state row at x_k accumulates k chain terms; an input
    # row of block k binds (u_{k-1}, x_{k-1}) and accumulates k-1 terms (its
    # state dependence is the -B K0 fold, zero without pre-stabilization).
    phi_A = np.zeros((T + 1, 14))
    phi_Q = np.zeros((T + 1, rq))
    phi_P = np.zeros(rp)
    if chain is not None:
        for k in range(1, T + 1):
            blk = blocks[k - 1]
            rows3 = blk.A[:, :3].copy()
            for r in INPUT_ROWS:
                rows3[r] = -blk.B[r] * K0
            csum = np.cumsum(np.abs(rows3 @ chain.T), axis=1)  # (14, T)
            for r in range(14):
                if r not in tighten_rows:
                    continue
                kappa = k if r in STATE_ROWS else k - 1
                if kappa >= 1:
                    phi_A[k, r] = csum[r, kappa - 1]
        phi_Q[1:, :] = np.cumsum(np.abs(cost.Q @ chain.T), axis=1).T
        phi_P = np.cumsum(np.abs(cost.P_terminal @ chain.T), axis=1)[:, T - 1]

    # Objective.
    c = np.zeros(n)
    for k in range(1, T + 1):
        c[L.ex(k)] = 1.0
    for k in range(T):
        c[L.eu(k)] = 1.0
        c[L.es(k)] = cost.slack_weight

    # Dynamics equalities: x_{k+1} - F_cl x_k - G u_k = h  (x_0 folded).
    A_eq = np.zeros((3 * T, n))
    b_eq = np.zeros(3 * T)
    for k in range(T):
        r = 3 * k
        A_eq[r:r + 3, L.x(k + 1):L.x(k + 1) + 3] = np.eye(3)
        A_eq[r:r + 3, L.u(k)] = -sys.G
        if k == 0:
            b_eq[r:r + 3] = sys.h + F_cl @ x0v
        else:
            A_eq[r:r + 3, L.x(k):L.x(k) + 3] = -F_cl
            b_eq[r:r + 3] = sys.h

    # Inequalities.
    m = 14 * T + 2 * rq * (T - 1) + 2 * rp + 2 * rr * T + 2 * T
    A_in = np.zeros((m, n))
    b_in = np.zeros(m)
    row = 0
    for k in range(1, T + 1):
        blk = blocks[k - 1]
        for r in range(14):
            if r in INPUT_ROWS:
                A_in[row, L.u(k - 1)] = blk.B[r]
                A_in[row, L.s(k - 1)] = blk.A[r, 3]
                state_part = -blk.B[r] * K0
                if k - 1 >= 1:
                    A_in[row, L.x(k - 1):L.x(k - 1) + 3] = state_part
                    b_in[row] = -blk.c[r]
                else:
                    b_in[row] = -blk.c[r] - state_part @ x0v
            else:
                A_in[row, L.x(k):L.x(k) + 3] = blk.A[r, :3]
                b_in[row] = -blk.c[r]
            b_in[row] -= phi_A[k, r]
            row += 1
    for k in range(1, T):
        for i in range(rq):
            for sign in (+1.0, -1.0):
                A_in[row, L.x(k):L.x(k) + 3] = sign * cost.Q[i]
                A_in[row, L.ex(k)] = -1.0
                b_in[row] = -phi_Q[k, i]
                row += 1
    for i in range(rp):
        for sign in (+1.0, -1.0):
            A_in[row, L.x(T):L.x(T) + 3] = sign * cost.P_terminal[i]
            A_in[row, L.ex(T)] = -1.0
            b_in[row] = -phi_P[i]
            row += 1
    for k in range(T):
        for i in range(rr):
            for sign in (+1.0, -1.0):
                A_in[row, L.u(k)] = sign * cost.R[i, 0]
                A_in[row, L.eu(k)] = -1.0
                state_part = -sign * cost.R[i, 0] * K0
                if k >= 1:
                    A_in[row, L.x(k):L.x(k) + 3] = state_part
                else:
                    b_in[row] = -state_part @ x0v
                row += 1
    for k in range(T):
        A_in[row, L.s(k)] = 1.0
        A_in[row, L.es(k)] = -1.0
        row += 1
        A_in[row, L.s(k)] = -1.0
        A_in[row, L.es(k)] = -1.0
        row += 1
    assert row == m

    prob = lp.LpProblem(n, c, A_eq, b_eq, A_in, b_in)
    return prob, phi_A, phi_Q, phi_P


def build_nominal(
    x0: RelativeState,
    sys: PlatoonSystem,
    cost: CostSpec,
    hz: HorizonSpec,
    blocks: Sequence[ConstraintBlock],
) -> lp.LpProblem:
    """Horizon LP without disturbance handling."""
    prob, _, _, _ = _assemble(x0, sys, cost, hz, blocks, np.zeros(3), None, ())
    return prob


def build_robust(
    x0: RelativeState,
    sys: PlatoonSystem,
    cost: CostSpec,
    hz: HorizonSpec,
    blocks: Sequence[ConstraintBlock],
    K0=None,
    tighten_rows: Optional[Sequence[int]] = None,
) -> RobustLpProblem:
    """Tightened counterpart of the nominal LP.

    The tightened set defaults to the eight minimum-distance rows: they are
    the hard collision-avoidance constraints the disturbance endangers.  The
    remaining rows stay nominal; robustifying the comfort/time-to-contact
    preferences or the input rows against the worst-case lead-speed drift
    either starves the mission or (under pre-stabilization) demands input
    headroom that does not exist.  With W = 0 the problem degenerates to the
    nominal LP bit for bit.
    """
    T = hz.T
    rq = cost.Q.shape[0]
    rp = cost.P_terminal.shape[0]
    if not np.any(sys.W):
        base = build_nominal(x0, sys, cost, hz, blocks)
        return RobustLpProblem(
            base=base,
            phi_A=np.zeros((T + 1, 14)),
            phi_Q=np.zeros((T + 1, rq)),
            phi_P=np.zeros(rp),
            K0=np.zeros(3),
        )
    K0 = np.zeros(3) if K0 is None else np.asarray(K0, dtype=float).reshape(3)
    F_cl = sys.F - np.outer(sys.G, K0)
    chain = disturbance_chain(F_cl, sys.W, T)
    tighten = SAFETY_ROWS if tighten_rows is None else tuple(tighten_rows)
    prob, phi_A, phi_Q, phi_P = _assemble(x0, sys, cost, hz, blocks, K0, chain, tighten)
    return RobustLpProblem(base=prob, phi_A=phi_A, phi_Q=phi_Q, phi_P=phi_P, K0=K0)


class Controller:
    """Receding-horizon controller over the platoon model.

    One control_step at a time per instance; distinct instances are
    independent.  On an infeasible (or otherwise failed) solve the command
    falls back to full braking, which the safety-distance analysis guarantees
    collision-free from any state at or above the minimum safety distance.
    """

    def __init__(
        self,
        braking: BrakingSpec,
        comfort: ComfortSpec,
        cost: CostSpec,
        horizon: HorizonSpec,
        mode: str = "nominal",
        W=(0.0, 0.0, 0.0),
        prestabilize: bool = True,
        tighten_rows: Optional[Sequence[int]] = None,
        max_iters: int = 20000,
    ):
        if mode not in ("nominal", "robust"):
            raise ValueError(f"mode must be 'nominal' or 'robust', got {mode!r}")
        self.braking = braking
        self.comfort = comfort
        self.cost = cost
        self.horizon = horizon
        self.mode = mode
        self.W = np.asarray(W, dtype=float).reshape(3)
        self.tighten_rows = tighten_rows
        self.max_iters = max_iters
        self._layout = _Layout(horizon.T)
        if mode == "robust" and prestabilize:
            self.K0 = synth_nilpotent(build_system(horizon.T_s))
        else:
            self.K0 = np.zeros(3)
        self.infeasible_count = 0

    def control_step(self, x: RelativeState, a_l: float) -> ControlDecision:
        hz = self.horizon
        sys_k = build_system(hz.T_s, a_l=a_l, W=self.W)
        blocks = [
            constraint_block(x, k, self.braking, self.comfort, sys_k)
            for k in range(1, hz.T + 1)
        ]
        if self.mode == "robust":
            rp = build_robust(
                x, sys_k, self.cost, hz, blocks,
                K0=self.K0, tighten_rows=self.tighten_rows,
            )
            prob = rp.base
            K0 = rp.K0
        else:
            prob = build_nominal(x, sys_k, self.cost, hz, blocks)
            K0 = np.zeros(3)
        sol = lp.solve(prob, max_iters=self.max_iters)
        L = self._layout
        if sol.status is not lp.LpStatus.OPTIMAL:
            self.infeasible_count += 1
            return ControlDecision(
                u=-self.braking.a_e_b,
                status=sol.status,
                objective=float("nan"),
                predicted=[],
                active_rows=np.zeros((hz.T, 14), dtype=bool),
                fallback=True,
                iterations=sol.iterations,
            )
        v0 = sol.z[L.u(0)]
        u = float(v0 - K0 @ x.as_array())
        predicted = [
            RelativeState.from_array(sol.z[L.x(k):L.x(k) + 3]) for k in range(1, hz.T + 1)
        ]
        resid = prob.ineq_lhs @ sol.z - prob.ineq_rhs
        active = (resid[: 14 * hz.T] > -1e-7).reshape(hz.T, 14)
        return ControlDecision(
            u=u,
            status=sol.status,
            objective=sol.objective_value,
            predicted=predicted,
            active_rows=active,
            fallback=False,
            iterations=sol.iterations,
        )
