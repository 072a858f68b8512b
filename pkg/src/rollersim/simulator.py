"""Deterministic quasi-static time stepping.

Each step re-solves the contact equilibrium at the current pose and
integrates the resulting twist with the exact single-axis exponential map,
so constant-command segments carry no integrator error at any dt. Contacts
are mounts fixed in the hand frame; as the object center translates, the
center-to-contact vectors are recomputed. Grasp maintenance is assumed;
leaving the workspace sphere is detected, not prevented.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import BeltCommand, command_speeds
from .equilibrium import geometric_median, solve_omega_arrays
from .errors import Escaped, NonConvergence, SolverFailure, ValidationError
from .geometry import (
    IDENTITY_QUAT,
    as_orientation,
    as_vec3,
    geodesic_angle,
    quat_canonical,
    quat_from_rotvec,
    quat_mul,
)
from .scenario import Scenario, SimConfig
from .shapes import radius_fixed_point_arrays

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObjectState:
    orientation: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "orientation", as_orientation(self.orientation, tol=1e-6))
        object.__setattr__(self, "position", as_vec3(self.position))


@dataclass(frozen=True)
class StepRecord:
    omega: np.ndarray
    v: np.ndarray
    slip_speeds: np.ndarray
    dissipation: float


@dataclass(frozen=True)
class TrajectorySample:
    state: ObjectState
    omega: np.ndarray
    v: np.ndarray
    slip_speeds: np.ndarray
    dissipation: float

    @property
    def t(self) -> float:
        return self.state.t


@dataclass
class Trajectory:
    samples: list[TrajectorySample]
    dt: float
    escaped: bool = False

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def final_state(self) -> ObjectState:
        return self.samples[-1].state


def _solve_twist(scenario: Scenario, positions: np.ndarray, speeds: np.ndarray,
                 allow_translation: bool, omega0=None):
    """Rotation + drift at the given (possibly shifted) contact positions."""
    d = scenario.belt_dirs
    strengths = scenario.strengths
    opts = scenario.solver
    if scenario.uses_uniform_radii:
        weights = strengths
    else:
        weights = strengths * radius_fixed_point_arrays(
            positions, d, strengths, speeds, opts, scenario.radius_mode
        )
    omega, _, converged, _ = solve_omega_arrays(positions, d, weights, speeds, opts,
                                                omega0=omega0)
    if allow_translation:
        eff = speeds[:, None] * d - np.cross(omega, positions)
        v, _ = geometric_median(eff, strengths, opts)
    else:
        v = np.zeros(3)
    slips = speeds[:, None] * d - v[None, :] - np.cross(omega, positions)
    norms = np.linalg.norm(slips, axis=1)
    record = StepRecord(omega, v, norms, float(np.dot(weights, norms)))
    return record, converged


def step(
    state: ObjectState,
    scenario: Scenario,
    command,
    config: SimConfig | None = None,
    dt: float | None = None,
) -> tuple[ObjectState, StepRecord]:
    """Advance one quasi-static step of dt (defaults to config.dt)."""
    config = config or scenario.sim
    h = config.dt if dt is None else dt
    speeds = command_speeds(command)
    if len(speeds) != scenario.n_contacts:
        raise ValidationError(
            f"{len(speeds)} speeds for {scenario.n_contacts} contacts"
        )
    positions = scenario.positions - state.position[None, :]
    try:
        record, _ = _solve_twist(scenario, positions, speeds, config.allow_translation)
    except NonConvergence as exc:
        raise SolverFailure(f"equilibrium solve failed at t={state.t:.6f}: {exc}",
                            t=state.t) from exc
    orientation = quat_canonical(
        quat_mul(quat_from_rotvec(record.omega * h), state.orientation)
    )
    position = state.position + record.v * h
    new_state = ObjectState(orientation, position, state.t + h)
    if np.linalg.norm(position) > config.workspace_radius:
        raise Escaped(
            f"object center left the workspace at t={new_state.t:.6f}",
            t=new_state.t,
            position=position,
        )
    return new_state, record


def _normalize_schedule(scenario, schedule) -> list[tuple[np.ndarray, float]]:
    # A Plan, or an iterable of (command | speeds, duration) pairs.
    segments = getattr(schedule, "segments", schedule)
    out = []
    for item in segments:
        if hasattr(item, "command") and hasattr(item, "duration"):
            cmd, duration = item.command, item.duration
        else:
            cmd, duration = item
        speeds = command_speeds(cmd)
        if len(speeds) != scenario.n_contacts:
            raise ValidationError(
                f"{len(speeds)} speeds for {scenario.n_contacts} contacts"
            )
        if not (duration > 0):
            raise ValidationError(f"segment duration must be > 0, got {duration}")
        out.append((speeds, float(duration)))
    return out


def run(
    scenario: Scenario,
    schedule,
    config: SimConfig | None = None,
    start: ObjectState | None = None,
) -> Trajectory:
    """Run a command schedule (or a Plan) and record the full trajectory.

    Segments step uniformly at config.dt with one exact fractional step at
    each segment boundary, so segment durations are honored exactly and the
    integration of a constant command is dt-invariant. Deterministic:
    identical inputs produce bit-identical trajectories.
    """
    config = config or scenario.sim
    segments = _normalize_schedule(scenario, schedule)
    state = start if start is not None else ObjectState()

    zero = np.zeros(3)
    zeros_n = np.zeros(scenario.n_contacts)
    samples = [TrajectorySample(state, zero, zero, zeros_n, 0.0)]
    trajectory = Trajectory(samples, config.dt)

    def advance(state, speeds, h, cache):
        # The twist depends only on (speeds, object position); while the
        # object does not translate, every step of a constant-command
        # segment solves the same problem, so reuse the record. When it
        # drifts, the previous step's solution warm-starts the next solve
        # (deterministic: the step sequence is a pure function of inputs).
        key = state.position.tobytes()
        if cache is not None and cache[0] == key:
            record = cache[1]
        else:
            positions = scenario.positions - state.position[None, :]
            warm = cache[1].omega if cache is not None else None
            try:
                record, _ = _solve_twist(scenario, positions, speeds,
                                         config.allow_translation, omega0=warm)
            except NonConvergence as exc:
                raise SolverFailure(
                    f"equilibrium solve failed at t={state.t:.6f}: {exc}",
                    t=state.t,
                ) from exc
            cache = (key, record)
        orientation = quat_canonical(
            quat_mul(quat_from_rotvec(record.omega * h), state.orientation)
        )
        position = state.position + record.v * h
        new_state = ObjectState(orientation, position, state.t + h)
        if np.linalg.norm(position) > config.workspace_radius:
            raise Escaped(
                f"object center left the workspace at t={new_state.t:.6f}",
                t=new_state.t,
                position=position,
            )
        return new_state, record, cache

    for speeds, duration in segments:
        n_full = int(math.floor(duration / config.dt + 1e-9))
        remainder = duration - n_full * config.dt
        if remainder < 1e-12:
            remainder = 0.0
        cache = None
        try:
            for _ in range(n_full):
                state, record, cache = advance(state, speeds, config.dt, cache)
                samples.append(TrajectorySample(state, record.omega, record.v,
                                                record.slip_speeds, record.dissipation))
            if remainder > 0.0:
                state, record, cache = advance(state, speeds, remainder, cache)
                samples.append(TrajectorySample(state, record.omega, record.v,
                                                record.slip_speeds, record.dissipation))
        except Escaped as exc:
            logger.warning("trajectory escaped the workspace: %s", exc)
            trajectory.escaped = True
            break
        except SolverFailure:
            raise
    return trajectory


def success_check(
    trajectory: Trajectory,
    target,
    config: SimConfig,
) -> tuple[bool, float | None]:
    """Task success: geodesic error within success_tol continuously for
    success_hold seconds. Returns (achieved, time the hold completed)."""
    if not trajectory.samples:
        raise ValidationError("success_check needs a non-empty trajectory")
    target_q = as_orientation(target, tol=1e-6)
    entered: float | None = None
    for sample in trajectory.samples:
        err = geodesic_angle(sample.state.orientation, target_q)
        if err <= config.success_tol:
            if entered is None:
                entered = sample.state.t
            if sample.state.t - entered >= config.success_hold:
                return True, entered + config.success_hold
        else:
            entered = None
    return False, None
