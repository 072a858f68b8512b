"""Quasi-static simulation, solving and planning for active-surface
(roller ring) in-hand manipulation."""

__version__ = "0.1.0"

from .core import (
    BeltCommand,
    ContactKinematics,
    ContactState,
    RollerContact,
    contact_kinematics,
    contact_torque,
    dissipation,
    induced_omega,
)
from .equilibrium import (
    EquilibriumSolution,
    SolverMode,
    SolverOptions,
    brute_force_omega,
    eq9_residual,
    equilibrium_omega,
    paper_weighted_omega,
    solver_divergence,
    translation_equilibrium,
)
from .errors import RollerSimError
from .planner import (
    Plan,
    PlannerOptions,
    PlanSegment,
    Pose,
    ReachabilityReport,
    plan_pose,
    plan_rotation,
    plan_translation,
    reachable_set,
    synthesize_rotation,
)
from .scenario import Scenario, SimConfig, preset_names, preset_scenario, ring_scenario
from .scenario_io import (
    export_trajectory,
    load_scenario,
    load_trajectory,
    save_scenario,
)
from .shapes import (
    Box,
    CasmReport,
    CasmSpec,
    Cylinder,
    MountSpec,
    RadiusMode,
    Sphere,
    casm_check,
    contact_radius,
    resolve_multisphere,
    rr_contact_from_mount,
)
from .simulator import ObjectState, Trajectory, run, step, success_check
