"""Worst-case minimum safety distance and the per-step constraint block.

The emergency scenario: at time t the lead vehicle brakes at its full
capacity a_l_b until it stops; the ego vehicle keeps its speed for the
worst-case total delay phi and then brakes at a_e_b until it stops.  The
minimum safety distance is the largest gap closure over that maneuver,

    d_safe = max(0, max_eps integral_0^eps (v_e(tau) - v_l(tau)) dtau).

Both speed profiles are piecewise linear, so the integral is piecewise
quadratic and the maximum is attained either at infinity (both stopped) or
at the interior stationary point where the speeds cross while both brake.
`min_safe_distance` evaluates that closed form; `min_safe_distance_oracle`
integrates the profiles numerically and is used to cross-check it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from .kinematics import PlatoonSystem, RelativeState

#: Number of safety rows emitted by the linearization (one linear-region row
#: plus seven chords over [v_min, v_max]).
NUM_SAFETY_ROWS = 8

#: Number of chord knots over the nonlinear region.
NUM_KNOTS = 8


@dataclass(frozen=True)
class BrakingSpec:
    """Braking capacities (positive magnitudes) and worst-case total delay."""

    a_e_b: float  # ego maximum braking, m/s^2 (> 0)
    a_l_b: float  # lead maximum braking, m/s^2 (> 0)
    phi: float    # worst-case delay: communication + processing + actuation, s

    def __post_init__(self):
        if not (self.a_e_b > 0.0):
            raise ValueError(f"ego braking capacity must be > 0, got {self.a_e_b}")
        if not (self.a_l_b > 0.0):
            raise ValueError(f"lead braking capacity must be > 0, got {self.a_l_b}")
        if not (self.phi >= 0.0):
            raise ValueError(f"delay must be >= 0, got {self.phi}")


@dataclass(frozen=True)
class ComfortSpec:
    """Comfort band and road limits used by the constraint block."""

    t_c_min: float  # minimum comfortable time-to-contact, s
    a_min: float    # comfortable acceleration band lower edge, m/s^2
    a_max: float    # comfortable acceleration band upper edge, m/s^2
    v_max: float    # road speed limit, m/s

    def __post_init__(self):
        if not (self.t_c_min >= 0.0):
            raise ValueError(f"t_c_min must be >= 0, got {self.t_c_min}")
        if not (self.a_min < self.a_max):
            raise ValueError(f"need a_min < a_max, got [{self.a_min}, {self.a_max}]")
        if not (self.v_max > 0.0):
            raise ValueError(f"v_max must be > 0, got {self.v_max}")


class Row(IntEnum):
    """Row labels of the 14-row constraint block."""

    V_E_LOWER = 0
    V_E_UPPER = 1
    TTC = 2
    BRAKE_CAPACITY = 3
    COMFORT_LOWER = 4
    COMFORT_UPPER = 5
    SAFETY_0 = 6
    SAFETY_1 = 7
    SAFETY_2 = 8
    SAFETY_3 = 9
    SAFETY_4 = 10
    SAFETY_5 = 11
    SAFETY_6 = 12
    SAFETY_7 = 13


#: The eight minimum-distance rows (the hard collision-avoidance set).
SAFETY_ROWS = tuple(Row(i) for i in range(Row.SAFETY_0, Row.SAFETY_7 + 1))


@dataclass
class ConstraintBlock:
    """Polytopic per-step constraints A x + B u + c <= 0.

    Columns of A are (d, v_l, v_e, slack). Exactly the two comfort rows have
    a nonzero slack coefficient.
    """

    A: np.ndarray  # (14, 4)
    B: np.ndarray  # (14,)
    c: np.ndarray  # (14,)
    row_labels: tuple = tuple(Row)

    def residuals(self, x: RelativeState, u: float, s: float) -> np.ndarray:
        """Row-wise residuals A [x; s] + B u + c (feasible iff <= 0)."""
        z = np.array([x.d, x.v_l, x.v_e, s])
        return self.A @ z + self.B * u + self.c


def min_safe_distance(v_e: float, v_l: float, spec: BrakingSpec) -> float:
    """Closed-form minimum safety distance for the emergency braking maneuver.

    The gap-closure integral J(s) = (v_e - v_l) s + a_l_b s^2/2
    - a_e_b (s - phi)^2/2 (while both vehicles are still moving) has an
    interior maximum only when the ego brakes harder than the lead and the
    speeds cross during simultaneous braking; otherwise the maximum is the
    total travel difference with both vehicles stopped.
    """
    if v_e < 0.0 or v_l < 0.0:
        raise ValueError(f"speeds must be nonnegative, got v_e={v_e}, v_l={v_l}")
    a_e, a_l, phi = spec.a_e_b, spec.a_l_b, spec.phi
    t_f_e = phi + v_e / a_e
    t_f_l = v_l / a_l
    t_f_min = min(t_f_e, t_f_l)
    if a_e > a_l:
        eps = (v_e - v_l + a_e * phi) / (a_e - a_l)
        if phi <= eps < t_f_min:
            # J at the stationary point; equals
            # (v_e - v_l) eps - (a_e - a_l) eps^2/2 + a_e phi (eps - phi/2).
            lo = (v_e - v_l + a_e * phi) ** 2 / (2.0 * (a_e - a_l)) - a_e * phi**2 / 2.0
            return max(0.0, lo)
    ub = v_e * phi + v_e**2 / (2.0 * a_e) - v_l**2 / (2.0 * a_l)
    return max(0.0, ub)


def min_safe_distance_oracle(
    v_e: float, v_l: float, spec: BrakingSpec, dt: float = 1e-4
) -> float:
    """Numeric evaluation of the minimum safety distance by forward integration.

    Builds both braking speed profiles on a uniform grid with the profile
    breakpoints inserted exactly (the speeds are piecewise linear, so the
    trapezoid rule is exact between breakpoints) and returns the running
    maximum of the accumulated gap closure, clamped at zero.
    """
    if not (0.0 < dt <= 1e-3):
        raise ValueError(f"dt must be in (0, 1e-3], got {dt}")
    if v_e < 0.0 or v_l < 0.0:
        raise ValueError(f"speeds must be nonnegative, got v_e={v_e}, v_l={v_l}")
    a_e, a_l, phi = spec.a_e_b, spec.a_l_b, spec.phi
    t_f_e = phi + v_e / a_e
    t_f_l = v_l / a_l
    t_end = max(t_f_e, t_f_l, dt)
    grid = np.arange(0.0, t_end + dt, dt)
    grid = np.unique(np.concatenate([grid, [phi, t_f_e, t_f_l, t_end]]))
    grid = grid[(grid >= 0.0) & (grid <= t_end)]
    lead = np.maximum(0.0, v_l - a_l * grid)
    ego = np.where(grid < phi, v_e, np.maximum(0.0, v_e - a_e * (grid - phi)))
    closure = ego - lead
    steps = 0.5 * (closure[1:] + closure[:-1]) * np.diff(grid)
    running = np.cumsum(steps)
    return float(max(0.0, running.max(initial=0.0)))


def emergency_gap_profile(
    d0: float, v_e: float, v_l: float, spec: BrakingSpec, dt: float = 1e-4
) -> np.ndarray:
    """Gap over time during the emergency maneuver, starting from gap ``d0``."""
    if not (0.0 < dt <= 1e-3):
        raise ValueError(f"dt must be in (0, 1e-3], got {dt}")
    a_e, a_l, phi = spec.a_e_b, spec.a_l_b, spec.phi
    t_f_e = phi + v_e / a_e
    t_f_l = v_l / a_l
    t_end = max(t_f_e, t_f_l, dt)
    grid = np.arange(0.0, t_end + dt, dt)
    grid = np.unique(np.concatenate([grid, [phi, t_f_e, t_f_l, t_end]]))
    grid = grid[(grid >= 0.0) & (grid <= t_end)]
    lead = np.maximum(0.0, v_l - a_l * grid)
    ego = np.where(grid < phi, v_e, np.maximum(0.0, v_e - a_e * (grid - phi)))
    closure = ego - lead
    steps = 0.5 * (closure[1:] + closure[:-1]) * np.diff(grid)
    return d0 - np.concatenate([[0.0], np.cumsum(steps)])


def required_delay_for_clearance(d: float, v: float) -> float:
    """Total delay budget phi = d/v that makes clearance ``d`` safe at speed
    ``v`` when both vehicles have the same braking capacity."""
    if not (v > 0.0):
        raise ValueError(f"speed must be > 0, got {v}")
    if d < 0.0:
        raise ValueError(f"clearance must be >= 0, got {d}")
    return d / v


def min_distance_curve(
    v: float, a_e_b: float, a_l_range: Sequence[float], phi: float
) -> list:
    """(a_l_b, d_safe) pairs for equal cruise speeds, sweeping the lead
    braking capacity.  The curve is non-decreasing in a_l_b: a lead that can
    stop harder closes the gap more."""
    out = []
    for a_l in a_l_range:
        spec = BrakingSpec(a_e_b=a_e_b, a_l_b=float(a_l), phi=phi)
        out.append((float(a_l), min_safe_distance(v, v, spec)))
    return out


def time_to_contact(d: float, v_e: float, v_l: float) -> float:
    """Instantaneous time to collision at constant speeds; inf when opening."""
    if d < 0.0:
        raise ValueError(f"distance must be >= 0, got {d}")
    if v_e > v_l:
        return max(d / (v_e - v_l), 0.0)
    return math.inf


def linearize_safety(
    v_l0: float, a_l0: float, t: float, spec: BrakingSpec, v_max: float
):
    """Linear over-approximation of the safety distance constraint at lookahead t.

    The predicted lead speed is v_l(t) = max(0, v_l0 + t*a_l0).  Row 0 covers
    the linear region (-d <= 0 for v_e <= v_min with
    v_min = v_l(t)*sqrt(a_e_b/a_l_b)); rows 1..7 are chords of the convex
    curve d_safe(v_e) between the knots p_i = v_min + i*(v_max - v_min)/7.
    Chords of a convex function over-approximate it between their endpoints,
    so each row is conservative there.

    Returns (f, g) such that the rows read -d + f_i + g_i * v_e <= 0.
    """
    if not (v_max > 0.0):
        raise ValueError(f"v_max must be > 0, got {v_max}")
    v_l_t = max(0.0, v_l0 + t * a_l0)
    v_min = v_l_t * math.sqrt(spec.a_e_b / spec.a_l_b)
    f = np.zeros(NUM_SAFETY_ROWS)
    g = np.zeros(NUM_SAFETY_ROWS)
    if v_max <= v_min:
        # Whole feasible speed range sits in the linear region: replicate -d <= 0.
        return f, g
    knots = v_min + np.arange(NUM_KNOTS) * (v_max - v_min) / (NUM_KNOTS - 1)
    vals = np.array([min_safe_distance(p, v_l_t, spec) for p in knots])
    slopes = np.diff(vals) / np.diff(knots)
    g[1:] = slopes
    f[1:] = vals[:-1] - slopes * knots[:-1]
    return f, g


def constraint_block(
    x_pred: RelativeState,
    k: int,
    spec: BrakingSpec,
    comfort: ComfortSpec,
    sys: PlatoonSystem,
) -> ConstraintBlock:
    """Assemble the 14-row block for horizon step k (lookahead t = k*T_s).

    Rows, in canonical A x + B u + c <= 0 form over x = (d, v_l, v_e, s):

        v_e_lower       -v_e <= 0
        v_e_upper        v_e - v_max <= 0
        ttc             -d + t_c_min (v_e - v_l) <= 0
        brake_capacity  -u - a_e_b <= 0
        comfort_lower   -u - s + a_min <= 0
        comfort_upper    u - s - a_max <= 0
        safety_0        -d <= 0
        safety_1..7     -d + f_i + g_i v_e + w_t (v_l - v_l_pred) <= 0

    The chord rows keep their lead-speed dependence as a state coefficient:
    w_t = -v_l_pred / a_l_b is the first-order sensitivity of the braking
    distance term v_l^2 / (2 a_l_b).  Along the model's own lead-speed
    prediction (v_l_pred = v_l + t a_l, the same first-order hold) the term
    vanishes and the row coincides with the plain chord, so nominal behavior
    is unchanged; the robust tightening, however, sees how the uncertain
    lead speed moves the required gap.

    The slack widens the comfort band on both sides and is priced in the
    controller objective, so safety can override comfort.
    """
    t = k * sys.T_s
    f, g = linearize_safety(x_pred.v_l, sys.a_l, t, spec, comfort.v_max)
    v_l_pred = max(0.0, x_pred.v_l + t * sys.a_l)
    dfdvl = -v_l_pred / spec.a_l_b
    A = np.zeros((14, 4))
    B = np.zeros(14)
    c = np.zeros(14)

    A[Row.V_E_LOWER, 2] = -1.0
    A[Row.V_E_UPPER, 2] = 1.0
    c[Row.V_E_UPPER] = -comfort.v_max
    A[Row.TTC] = [-1.0, -comfort.t_c_min, comfort.t_c_min, 0.0]
    B[Row.BRAKE_CAPACITY] = -1.0
    c[Row.BRAKE_CAPACITY] = -spec.a_e_b
    A[Row.COMFORT_LOWER, 3] = -1.0
    B[Row.COMFORT_LOWER] = -1.0
    c[Row.COMFORT_LOWER] = comfort.a_min
    A[Row.COMFORT_UPPER, 3] = -1.0
    B[Row.COMFORT_UPPER] = 1.0
    c[Row.COMFORT_UPPER] = -comfort.a_max
    for i in range(NUM_SAFETY_ROWS):
        A[Row.SAFETY_0 + i, 0] = -1.0
        A[Row.SAFETY_0 + i, 2] = g[i]
        c[Row.SAFETY_0 + i] = f[i]
        if i > 0:
            # row 0 covers the linear region and needs no v_l term
            A[Row.SAFETY_0 + i, 1] = dfdvl
            c[Row.SAFETY_0 + i] = f[i] - dfdvl * v_l_pred
    return ConstraintBlock(A=A, B=B, c=c)
