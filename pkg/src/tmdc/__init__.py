"""Deterministic quadrotor flight-control simulator and controller library.

Thrust microstepping (TMAF) with decoupled motion control (DMC), plus the
mass-informed (MI) and direct-allocation (DA) baselines and a geometric
attitude path (GT), run against a rigid-body plant under a deterministic
multi-rate scheduler.  Runs are reproducible byte-for-byte given a seed.
"""

from .core import (
    Attitude,
    AxisMode,
    ControlCommand,
    GRAVITY,
    Setpoint,
    Vec3,
    VehicleState,
    clamp,
    euler_to_rotation,
    thrust_axis,
    wrap_angle,
)
from .filters import CwmaFilter, Differentiator, cosine_weights
from .controllers import (
    Cascade,
    CascadeConfig,
    DaController,
    DegenerateThrustError,
    FreeFallError,
    Pid,
    PidGains,
    TmafController,
    VARIANTS,
    dmc_lateral,
    dmc_thrust,
    gt_attitude,
    make_cascade,
    mi_force,
)
from .plant import Disturbance, Payload, Plant, VehicleParams
from .sensors import Estimator, SensorConfig, SensorSuite
from .scheduler import LoopSpec, Scheduler, Timeline
from .metrics import CompareTable, Metrics, RunRecord, WindowMetrics
from .scenario import (
    RunResult,
    Scenario,
    ScenarioError,
    SetpointProgram,
    compare_variants,
    load_scenario,
    loads_scenario,
    run_scenario,
    sweep_stage,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .kernels import available_backends

__version__ = "0.1.0"

__all__ = [
    "Attitude",
    "AxisMode",
    "Cascade",
    "CascadeConfig",
    "CompareTable",
    "ControlCommand",
    "CwmaFilter",
    "DaController",
    "DegenerateThrustError",
    "Differentiator",
    "Disturbance",
    "Estimator",
    "FreeFallError",
    "GRAVITY",
    "KERNEL_BACKEND",
    "LoopSpec",
    "Metrics",
    "Payload",
    "Pid",
    "PidGains",
    "Plant",
    "RunRecord",
    "RunResult",
    "Scenario",
    "ScenarioError",
    "Scheduler",
    "SensorConfig",
    "SensorSuite",
    "Setpoint",
    "SetpointProgram",
    "Timeline",
    "TmafController",
    "VARIANTS",
    "Vec3",
    "VehicleParams",
    "VehicleState",
    "WindowMetrics",
    "available_backends",
    "clamp",
    "compare_variants",
    "cosine_weights",
    "dmc_lateral",
    "dmc_thrust",
    "euler_to_rotation",
    "gt_attitude",
    "load_scenario",
    "loads_scenario",
    "make_cascade",
    "mi_force",
    "run_scenario",
    "sweep_stage",
    "thrust_axis",
    "wrap_angle",
]
