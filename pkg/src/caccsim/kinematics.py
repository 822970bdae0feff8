"""Longitudinal two-vehicle kinematics and its discrete affine form.

The controller state is x = [d, v_l, v_e]:

    d   gap to the lead vehicle (m)
    v_l lead vehicle speed (m/s)
    v_e ego vehicle speed (m/s)

With sampling time T_s and the ego acceleration u as input, the discrete
model is the affine system

    x_{k+1} = F x_k + G u_k + h + W w_k,   |w_k| <= 1

where h carries the lead acceleration a_l held over the step and W scales a
bounded disturbance channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class VehicleState:
    """Absolute longitudinal state of a single vehicle."""

    position: float
    velocity: float
    acceleration: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.position, self.velocity, self.acceleration])):
            raise ValueError("vehicle state must be finite")


@dataclass(frozen=True)
class RelativeState:
    """Controller state: gap and the two speeds."""

    d: float
    v_l: float
    v_e: float

    def __post_init__(self):
        if not all(np.isfinite([self.d, self.v_l, self.v_e])):
            raise ValueError("relative state must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.d, self.v_l, self.v_e], dtype=float)

    @staticmethod
    def from_array(x) -> "RelativeState":
        x = np.asarray(x, dtype=float)
        return RelativeState(float(x[0]), float(x[1]), float(x[2]))


@dataclass
class PlatoonSystem:
    """Discrete affine platoon model (F, G, h) plus disturbance matrix W."""

    F: np.ndarray
    G: np.ndarray
    h: np.ndarray
    W: np.ndarray
    T_s: float
    a_l: float = 0.0

    def with_lead_accel(self, a_l: float) -> "PlatoonSystem":
        """Same model with h refreshed for a new lead acceleration."""
        return build_system(self.T_s, a_l=a_l, W=self.W)


class StepResult(NamedTuple):
    state: RelativeState
    clamped_lead: bool
    clamped_ego: bool


def build_system(T_s: float, a_l: float = 0.0, W=(0.0, 0.0, 0.0)) -> PlatoonSystem:
    """Build the discrete affine model for sampling time ``T_s``.

    F = [[1, T_s, -T_s], [0, 1, 0], [0, 0, 1]]
    G = [-0.5*T_s**2, 0, T_s]^T
    h = [0, T_s*a_l, 0]^T
    """
    if not (T_s > 0.0):
        raise ValueError(f"T_s must be positive, got {T_s}")
    F = np.array([[1.0, T_s, -T_s], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    G = np.array([-0.5 * T_s**2, 0.0, T_s])
    h = np.array([0.0, T_s * a_l, 0.0])
    W = np.asarray(W, dtype=float).reshape(3)
    return PlatoonSystem(F=F, G=G, h=h, W=W, T_s=T_s, a_l=a_l)


def step(sys: PlatoonSystem, x: RelativeState, u: float, w: float = 0.0) -> StepResult:
    """One step of x_{k+1} = F x + G u + h + W w with speeds clamped at zero.

    The clamp belongs to the plant, not to the linear prediction model; it is
    reported so that divergences from the affine model are auditable.
    """
    if abs(w) > 1.0:
        raise ValueError(f"|w| must be <= 1, got {w}")
    y = sys.F @ x.as_array() + sys.G * u + sys.h + sys.W * w
    clamped_lead = y[1] < 0.0
    clamped_ego = y[2] < 0.0
    if clamped_lead:
        y[1] = 0.0
    if clamped_ego:
        y[2] = 0.0
    return StepResult(RelativeState.from_array(y), bool(clamped_lead), bool(clamped_ego))
