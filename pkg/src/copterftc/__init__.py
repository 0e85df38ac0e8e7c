"""Controllability analysis and fault-tolerant control simulation for
co-planar multicopters."""

__version__ = "0.1.0"

from .allocation import (
    AllocationResult,
    AllocatorConfig,
    reduced_allocate,
    rpi_allocate,
    thrust_to_speed_cmd,
)
from .controllability import (
    ArcaiTable,
    ControllabilityReport,
    FailureGrid,
    ReductionDecision,
    ReductionPlanner,
    acai,
    arcai,
    arcai_table,
    assess,
    attainable_margin,
    failure_grid,
    linear_hover_model,
    membership_oracle,
    plan_reduction,
    reduced_hover_model,
)
from .controller import (
    ControlDemand,
    EstimatedParams,
    Gains,
    NdiController,
    attitude_loop,
    position_loop,
    rate_loop,
    velocity_loop,
)
from .fdi import FaultDetector, FdiConfig, ThrustModel
from .scenario import ScenarioError, ScenarioModel, load_scenario, load_packaged_scenario
from .sim import SimLog, run_scenario, steady_spin_check, summarize
from .trajectory import ReferencePath, Segment, generate_reference
from .vehicle import (
    KinematicSingularityError,
    MotorState,
    RigidBodyState,
    RotorSpec,
    VehicleParams,
    build_effectiveness,
    dynamics_deriv,
    health_from_failures,
    motor_deriv,
    rotor_thrusts,
    step_rk4,
)
