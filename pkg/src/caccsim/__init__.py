"""Worst-case safety distances and robust l-inf MPC for CACC platooning.

Library layout:

    kinematics  discrete affine platoon model (F, G, h, W)
    safety      minimum safety distance (closed form + numeric oracle),
                time-to-contact, per-step constraint blocks
    lp          dense two-phase simplex (compiled kernel + numpy fallback)
    mpc         horizon LP builders (nominal / tightened robust), controller
    sim         deterministic fixed-step closed-loop simulator
    config/cli  JSON scenario configs and the command line front end
"""

__version__ = "0.1.0"

from .kinematics import PlatoonSystem, RelativeState, VehicleState, build_system, step
from .lp import LpProblem, LpSolution, LpStatus, backend_name, check_solution, solve
from .mpc import (
    ControlDecision,
    Controller,
    CostSpec,
    HorizonSpec,
    RobustLpProblem,
    build_nominal,
    build_robust,
    disturbance_chain,
    holder_bound,
    lp_census,
    synth_nilpotent,
)
from .safety import (
    BrakingSpec,
    ComfortSpec,
    ConstraintBlock,
    Row,
    constraint_block,
    linearize_safety,
    min_distance_curve,
    min_safe_distance,
    min_safe_distance_oracle,
    required_delay_for_clearance,
    time_to_contact,
)
from .sim import (
    ActuatorSpec,
    ChannelSpec,
    DisturbanceEvent,
    LeadProfile,
    NoiseSpec,
    ScenarioConfig,
    SimMetrics,
    SimTrace,
    default_profile,
    metrics,
    run,
)

__all__ = [
    "ActuatorSpec",
    "BrakingSpec",
    "ChannelSpec",
    "ComfortSpec",
    "ConstraintBlock",
    "ControlDecision",
    "Controller",
    "CostSpec",
    "DisturbanceEvent",
    "HorizonSpec",
    "LeadProfile",
    "LpProblem",
    "LpSolution",
    "LpStatus",
    "NoiseSpec",
    "PlatoonSystem",
    "RelativeState",
    "RobustLpProblem",
    "Row",
    "ScenarioConfig",
    "SimMetrics",
    "SimTrace",
    "VehicleState",
    "backend_name",
    "build_nominal",
    "build_robust",
    "build_system",
    "check_solution",
    "constraint_block",
    "default_profile",
    "disturbance_chain",
    "holder_bound",
    "linearize_safety",
    "lp_census",
    "metrics",
    "min_distance_curve",
    "min_safe_distance",
    "min_safe_distance_oracle",
    "required_delay_for_clearance",
    "run",
    "solve",
    "step",
    "synth_nilpotent",
    "time_to_contact",
]
