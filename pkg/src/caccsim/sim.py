"""Deterministic fixed-step simulation of a two-vehicle platoon.

Single-process harness: per tick the lead advances along its acceleration
profile (unbounded jerk, exact integration with mid-tick stops), its state
reaches the ego controller through a delayed lossy channel, the controller
solves its horizon LP, and the commanded acceleration passes through an
exactly discretized first-order actuator lag before acting on the ego plant.
The gap itself is measured ego-side without delay; only the lead speed and
acceleration travel over the channel.

Runs are bit-reproducible for a fixed config and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .kinematics import RelativeState, VehicleState
from .mpc import Controller, CostSpec, HorizonSpec
from .safety import BrakingSpec, ComfortSpec, min_safe_distance


@dataclass
class LeadProfile:
    """Piecewise-constant lead acceleration; speed floored at zero."""

    initial_speed: float = 15.0
    breakpoints: Tuple[Tuple[float, float], ...] = ((0.0, 0.0),)

    def __post_init__(self):
        times = [t for t, _ in self.breakpoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("breakpoint times must be strictly increasing")
        if self.initial_speed < 0.0:
            raise ValueError("initial speed must be >= 0")

    def accel_at(self, t: float) -> float:
        a = 0.0
        for bt, ba in self.breakpoints:
            if t >= bt:
                a = ba
            else:
                break
        return a

    def speed_at(self, t: float) -> float:
        v = self.initial_speed
        prev_t = 0.0
        prev_a = 0.0
        for bt, ba in self.breakpoints:
            if bt >= t:
                break
            v = max(0.0, v + prev_a * (bt - prev_t))
            prev_t, prev_a = bt, ba
        # integrate the active segment up to t, flooring at zero
        return max(0.0, v + prev_a * (t - prev_t))


def default_profile() -> LeadProfile:
    """On-ramp acceleration, cruise, mild deceleration, emergency stop."""
    return LeadProfile(
        initial_speed=15.0,
        breakpoints=((0.0, 2.0), (10.0, 0.0), (20.0, -1.0), (30.0, -10.0)),
    )


@dataclass(frozen=True)
class ChannelSpec:
    delay: float = 0.022
    loss_probability: float = 0.01
    seed: int = 20260809

    def __post_init__(self):
        if self.delay < 0.0:
            raise ValueError("channel delay must be >= 0")
        if not (0.0 <= self.loss_probability <= 1.0):
            raise ValueError("loss probability must be in [0, 1]")


@dataclass(frozen=True)
class ActuatorSpec:
    time_constant: float = 0.1

    def __post_init__(self):
        if not (self.time_constant > 0.0):
            raise ValueError("actuator time constant must be > 0")


@dataclass(frozen=True)
class DisturbanceEvent:
    """Step applied to the plant truth at the first tick >= time."""

    time: float
    target: str  # "distance" or "lead_speed"
    amplitude: float

    def __post_init__(self):
        if self.target not in ("distance", "lead_speed"):
            raise ValueError(f"unknown disturbance target {self.target!r}")


@dataclass(frozen=True)
class NoiseSpec:
    """Optional zero-mean Gaussian measurement noise on d and v_l."""

    enabled: bool = False
    d_std: float = 0.0
    v_l_std: float = 0.0


class Channel:
    """Delayed, lossy message path with held-value semantics on loss."""

    def __init__(self, spec: ChannelSpec, T_s: float, rng: np.random.Generator):
        self.delay_ticks = int(math.ceil(spec.delay / T_s - 1e-9)) if spec.delay > 0 else 0
        self.loss = spec.loss_probability
        self.rng = rng
        self._queue: List[Tuple[int, bool, object]] = []

    def send(self, tick: int, payload) -> None:
        lost = bool(self.rng.random() < self.loss)
        self._queue.append((tick + self.delay_ticks, lost, payload))

    def receive(self, tick: int):
        """Returns (payload or None, dropped) for this tick's arrivals."""
        payload = None
        dropped = False
        while self._queue and self._queue[0][0] <= tick:
            _, lost, msg = self._queue.pop(0)
            if lost:
                dropped = True
            else:
                payload = msg
        return payload, dropped


@dataclass
class ScenarioConfig:
    """Scenario parameters; defaults follow the benchmark emergency scenario."""

    d0: float = 15.0
    v_l0: float = 15.0
    v_e0: float = 15.0
    v_max: float = 40.0
    a_max: float = 2.5
    a_min: float = -2.5
    t_c_min: float = 2.0
    total_delay: float = 0.3            # worst-case system delay used in d_safe
    a_l_brake: float = 10.0
    a_e_brake: float = 10.0
    frequency: float = 20.0
    duration: float = 40.0
    mode: str = "robust"
    horizon: int = 10
    q: Tuple = ((100.0, 0.0, 0.0), (0.0, 1.0, -1.0))
    r: Tuple = ((1.0,),)
    slack_weight: float = 1000.0
    w_disturbance: Tuple[float, float, float] = (0.0, 1.2, 0.0)
    prestabilize: bool = True
    profile: LeadProfile = field(default_factory=default_profile)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    actuator: ActuatorSpec = field(default_factory=ActuatorSpec)
    disturbances: Tuple[DisturbanceEvent, ...] = (
        DisturbanceEvent(17.0, "distance", -3.0),
        DisturbanceEvent(22.0, "lead_speed", -3.0),
    )
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if self.mode not in ("nominal", "robust"):
            raise ValueError(f"mode must be 'nominal' or 'robust', got {self.mode!r}")
        if not (self.a_e_brake > 0.0 and self.a_l_brake > 0.0):
            raise ValueError("braking capacities must be positive")
        if not (self.a_min < self.a_max):
            raise ValueError("need a_min < a_max")
        if not (self.frequency > 0.0 and self.duration > 0.0):
            raise ValueError("frequency and duration must be positive")
        if self.d0 < 0.0 or self.v_l0 < 0.0 or self.v_e0 < 0.0:
            raise ValueError("initial gap and speeds must be nonnegative")

    @property
    def T_s(self) -> float:
        return 1.0 / self.frequency

    def braking_spec(self) -> BrakingSpec:
        return BrakingSpec(a_e_b=self.a_e_brake, a_l_b=self.a_l_brake, phi=self.total_delay)

    def comfort_spec(self) -> ComfortSpec:
        return ComfortSpec(t_c_min=self.t_c_min, a_min=self.a_min, a_max=self.a_max, v_max=self.v_max)

    def cost_spec(self) -> CostSpec:
        return CostSpec(Q=np.asarray(self.q, dtype=float), R=np.asarray(self.r, dtype=float),
                        slack_weight=self.slack_weight)

    def horizon_spec(self) -> HorizonSpec:
        return HorizonSpec(T=self.horizon, T_s=self.T_s)


TRACE_COLUMNS = (
    "time_s",
    "lead_pos_m",
    "lead_vel_mps",
    "lead_acc_mps2",
    "ego_pos_m",
    "ego_vel_mps",
    "meas_d_m",
    "meas_vl_mps",
    "meas_ve_mps",
    "u_cmd_mps2",
    "a_act_mps2",
    "d_safe_m",
    "margin_safety_m",
    "margin_ttc_m",
    "solver_status",
    "fallback",
    "dropped",
)


@dataclass
class SimTrace:
    """Per-tick log of the closed loop (uniform tick spacing)."""

    time: np.ndarray
    lead_pos: np.ndarray
    lead_vel: np.ndarray
    lead_acc: np.ndarray
    ego_pos: np.ndarray
    ego_vel: np.ndarray
    meas_d: np.ndarray
    meas_vl: np.ndarray
    meas_ve: np.ndarray
    u_cmd: np.ndarray
    a_act: np.ndarray
    d_safe: np.ndarray
    margin_safety: np.ndarray
    margin_ttc: np.ndarray
    solver_status: list
    fallback: np.ndarray
    dropped: np.ndarray

    def __len__(self) -> int:
        return self.time.size

    @property
    def gap(self) -> np.ndarray:
        return self.lead_pos - self.ego_pos

    def lead_state(self, i: int) -> VehicleState:
        return VehicleState(float(self.lead_pos[i]), float(self.lead_vel[i]), float(self.lead_acc[i]))

    def ego_state(self, i: int) -> VehicleState:
        return VehicleState(float(self.ego_pos[i]), float(self.ego_vel[i]), float(self.a_act[i]))

    def window(self, t0: float, t1: float) -> np.ndarray:
        """Boolean mask for ticks with t0 <= time < t1."""
        return (self.time >= t0) & (self.time < t1)

    def to_csv(self, path) -> None:
        """One header row; floats at 9 significant digits."""
        with open(path, "w", newline="") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for i in range(len(self)):
                vals = [
                    self.time[i], self.lead_pos[i], self.lead_vel[i], self.lead_acc[i],
                    self.ego_pos[i], self.ego_vel[i],
                    self.meas_d[i], self.meas_vl[i], self.meas_ve[i],
                    self.u_cmd[i], self.a_act[i],
                    self.d_safe[i], self.margin_safety[i], self.margin_ttc[i],
                ]
                row = ",".join(f"{v:.9g}" for v in vals)
                row += f",{self.solver_status[i]},{int(self.fallback[i])},{int(self.dropped[i])}"
                fh.write(row + "\n")


@dataclass
class SimMetrics:
    min_clearance: float
    min_safety_margin: float
    violation_duration: float
    rms_speed_tracking: float
    max_abs_u: float
    dropped_packets: int
    infeasible_solves: int
    ticks: int

    def as_dict(self) -> dict:
        return {
            "min_clearance_m": self.min_clearance,
            "min_safety_margin_m": self.min_safety_margin,
            "violation_duration_s": self.violation_duration,
            "rms_speed_tracking_mps": self.rms_speed_tracking,
            "max_abs_u_mps2": self.max_abs_u,
            "dropped_packets": self.dropped_packets,
            "infeasible_solves": self.infeasible_solves,
            "ticks": self.ticks,
        }


def _advance(pos: float, vel: float, acc: float, dt: float):
    """Exact kinematic step with a mid-interval stop when braking to zero."""
    if acc < 0.0 and vel + acc * dt < 0.0:
        # stops after vel / -acc seconds
        pos += vel * vel / (-2.0 * acc)
        return pos, 0.0
    pos += vel * dt + 0.5 * acc * dt * dt
    return pos, vel + acc * dt


def run(cfg: ScenarioConfig) -> SimTrace:
    """Run the closed loop at the configured frequency and return the trace."""
    T_s = cfg.T_s
    n_ticks = int(round(cfg.duration * cfg.frequency))
    rng = np.random.default_rng(cfg.channel.seed)
    channel = Channel(cfg.channel, T_s, rng)
    braking = cfg.braking_spec()
    controller = Controller(
        braking=braking,
        comfort=cfg.comfort_spec(),
        cost=cfg.cost_spec(),
        horizon=cfg.horizon_spec(),
        mode=cfg.mode,
        W=cfg.w_disturbance,
        prestabilize=cfg.prestabilize,
    )
    lag = math.exp(-T_s / cfg.actuator.time_constant)

    lead_pos, lead_vel = 0.0, cfg.v_l0
    ego_pos, ego_vel = -cfg.d0, cfg.v_e0
    a_act = 0.0
    recv_vl, recv_al = cfg.v_l0, 0.0
    pending = list(cfg.disturbances)

    cols = {name: np.zeros(n_ticks) for name in TRACE_COLUMNS if name not in ("solver_status",)}
    status_col = []

    for k in range(n_ticks):
        t = k * T_s

        # 1. disturbance steps on the plant truth
        still_pending = []
        for ev in pending:
            if t >= ev.time - 1e-12:
                if ev.target == "distance":
                    lead_pos += ev.amplitude
                else:
                    lead_vel = max(0.0, lead_vel + ev.amplitude)
            else:
                still_pending.append(ev)
        pending = still_pending

        # 2. lead broadcast (effective acceleration: zero once stopped)
        a_prof = cfg.profile.accel_at(t)
        a_lead_eff = a_prof if not (lead_vel <= 0.0 and a_prof < 0.0) else 0.0
        channel.send(k, (lead_vel, a_lead_eff))

        # 3. receive through the channel
        payload, dropped = channel.receive(k)
        if payload is not None:
            recv_vl, recv_al = payload

        # 4. measurement (gap sensed ego-side, lead speed over the channel)
        d_true = lead_pos - ego_pos
        d_meas = d_true
        vl_meas = recv_vl
        if cfg.noise.enabled:
            d_meas += rng.normal(0.0, cfg.noise.d_std)
            vl_meas += rng.normal(0.0, cfg.noise.v_l_std)
        x_meas = RelativeState(d_meas, max(0.0, vl_meas), ego_vel)

        # 5. control
        decision = controller.control_step(x_meas, recv_al)
        u_cmd = decision.u

        # 6. trace record (state at the start of the tick)
        d_safe = min_safe_distance(ego_vel, lead_vel, braking)
        cols["time_s"][k] = t
        cols["lead_pos_m"][k] = lead_pos
        cols["lead_vel_mps"][k] = lead_vel
        cols["lead_acc_mps2"][k] = a_lead_eff
        cols["ego_pos_m"][k] = ego_pos
        cols["ego_vel_mps"][k] = ego_vel
        cols["meas_d_m"][k] = x_meas.d
        cols["meas_vl_mps"][k] = x_meas.v_l
        cols["meas_ve_mps"][k] = x_meas.v_e
        cols["u_cmd_mps2"][k] = u_cmd
        cols["a_act_mps2"][k] = a_act
        cols["d_safe_m"][k] = d_safe
        cols["margin_safety_m"][k] = d_true - d_safe
        cols["margin_ttc_m"][k] = d_true - cfg.t_c_min * max(0.0, ego_vel - lead_vel)
        cols["fallback"][k] = float(decision.fallback)
        cols["dropped"][k] = float(dropped)
        status_col.append(decision.status.value)

        # 7. integrate the plant over [t, t + T_s)
        lead_pos, lead_vel = _advance(lead_pos, lead_vel, a_lead_eff, T_s)
        ego_pos, ego_vel = _advance(ego_pos, ego_vel, a_act, T_s)
        a_act = u_cmd + (a_act - u_cmd) * lag

    return SimTrace(
        time=cols["time_s"],
        lead_pos=cols["lead_pos_m"],
        lead_vel=cols["lead_vel_mps"],
        lead_acc=cols["lead_acc_mps2"],
        ego_pos=cols["ego_pos_m"],
        ego_vel=cols["ego_vel_mps"],
        meas_d=cols["meas_d_m"],
        meas_vl=cols["meas_vl_mps"],
        meas_ve=cols["meas_ve_mps"],
        u_cmd=cols["u_cmd_mps2"],
        a_act=cols["a_act_mps2"],
        d_safe=cols["d_safe_m"],
        margin_safety=cols["margin_safety_m"],
        margin_ttc=cols["margin_ttc_m"],
        solver_status=status_col,
        fallback=cols["fallback"].astype(bool),
        dropped=cols["dropped"].astype(bool),
    )


def metrics(trace: SimTrace) -> SimMetrics:
    """Summary statistics of a completed run."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    gap = trace.gap
    margin = trace.margin_safety
    T_s = float(trace.time[1] - trace.time[0]) if len(trace) > 1 else 0.0
    return SimMetrics(
        min_clearance=float(gap.min()),
        min_safety_margin=float(margin.min()),
        violation_duration=float((margin < 0.0).sum() * T_s),
        rms_speed_tracking=float(np.sqrt(np.mean((trace.ego_vel - trace.lead_vel) ** 2))),
        max_abs_u=float(np.abs(trace.u_cmd).max()),
        dropped_packets=int(trace.dropped.sum()),
        infeasible_solves=int(trace.fallback.sum()),
        ticks=len(trace),
    )
