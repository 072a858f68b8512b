"""Object shapes, roller-ring mount geometry, and sleeve sizing checks.

Shapes are analytic primitives (sphere, box, z-axis cylinder) with signed
distance and outward surface normals; they drive contact construction from
mounts and the virtual-sphere radius weighting for non-spherical objects.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .core import RollerContact
from .equilibrium import (
    DEFAULT_OPTIONS,
    EquilibriumSolution,
    SolverOptions,
    equilibrium_omega,
)
from .errors import ParallelAxis, SurfaceMismatch, ValidationError
from .geometry import as_unit_vec3, as_vec3, normalized, rotate_about_axis

SURFACE_TOL = 1e-6
DEGENERATE_RADIUS = 1e-9


class RadiusMode(enum.Enum):
    """How the virtual-sphere radius r_i is measured.

    AXIS_DISTANCE: perpendicular distance from the contact to the current
    rotation axis (resolved by an outer fixed point, since the axis depends
    on the solution). CONTACT_NORM: plain |p_i|, the virtual-sphere reading.
    """

    AXIS_DISTANCE = "axis_distance"
    CONTACT_NORM = "contact_norm"


@dataclass(frozen=True)
class Sphere:
    radius: float
    center_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not (self.radius > 0):
            raise ValidationError(f"sphere radius must be > 0, got {self.radius}")
        object.__setattr__(self, "center_offset", as_vec3(self.center_offset))

    def signed_distance(self, point) -> float:
        return float(np.linalg.norm(as_vec3(point) - self.center_offset) - self.radius)

    def surface_normal(self, point) -> np.ndarray:
        return normalized(as_vec3(point) - self.center_offset)


@dataclass(frozen=True)
class Box:
    half_extents: np.ndarray
    center_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        h = as_vec3(self.half_extents)
        if not np.all(h > 0):
            raise ValidationError(f"box half_extents must be > 0, got {h}")
        object.__setattr__(self, "half_extents", h)
        object.__setattr__(self, "center_offset", as_vec3(self.center_offset))

    def signed_distance(self, point) -> float:
        q = np.abs(as_vec3(point) - self.center_offset) - self.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0))
        inside = min(float(q.max()), 0.0)
        return float(outside + inside)

    def surface_normal(self, point) -> np.ndarray:
        local = as_vec3(point) - self.center_offset
        q = np.abs(local) - self.half_extents
        axis = int(np.argmax(q))
        n = np.zeros(3)
        n[axis] = math.copysign(1.0, local[axis])
        return n


@dataclass(frozen=True)
class Cylinder:
    """Cylinder with its axis along z in the hand frame."""

    radius: float
    half_height: float
    center_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not (self.radius > 0 and self.half_height > 0):
            raise ValidationError("cylinder dimensions must be > 0")
        object.__setattr__(self, "center_offset", as_vec3(self.center_offset))

    def signed_distance(self, point) -> float:
        local = as_vec3(point) - self.center_offset
        rho = math.hypot(local[0], local[1])
        dr = rho - self.radius
        dz = abs(local[2]) - self.half_height
        outside = math.hypot(max(dr, 0.0), max(dz, 0.0))
        inside = min(max(dr, dz), 0.0)
        return outside + inside

    def surface_normal(self, point) -> np.ndarray:
        local = as_vec3(point) - self.center_offset
        rho = math.hypot(local[0], local[1])
        dr = rho - self.radius
        dz = abs(local[2]) - self.half_height
        if dr >= dz and rho > 0:
            return np.array([local[0] / rho, local[1] / rho, 0.0])
        return np.array([0.0, 0.0, math.copysign(1.0, local[2])])


ObjectShape = Union[Sphere, Box, Cylinder]


@dataclass(frozen=True)
class MountSpec:
    """Where a roller ring touches the object and how its belt is angled.

    surface_angle is the angle between the belt direction and the
    tangent-plane projection of the finger axis; positive angles rotate the
    belt counterclockwise as seen from outside the surface (about the
    outward normal).
    """

    finger_axis: np.ndarray
    contact_point: np.ndarray
    surface_angle: float = math.pi / 6.0

    def __post_init__(self):
        object.__setattr__(self, "finger_axis", as_unit_vec3(self.finger_axis, tol=1e-6))
        object.__setattr__(self, "contact_point", as_vec3(self.contact_point))
        if not (0.0 <= self.surface_angle < math.pi / 2.0):
            raise ValidationError(
                f"surface_angle must be in [0, pi/2), got {self.surface_angle}"
            )


def rr_contact_from_mount(
    mount: MountSpec,
    shape: ObjectShape,
    normal_force: float = 1.0,
    friction: float = 1.0,
) -> RollerContact:
    """Build a RollerContact from a finger mount on the object surface.

    The belt direction is the finger axis projected to the tangent plane and
    rotated by the surface angle about the outward normal.
    """
    sd = shape.signed_distance(mount.contact_point)
    if abs(sd) > SURFACE_TOL:
        raise SurfaceMismatch(
            f"contact point is {sd:.3e} m off the object surface"
        )
    n_out = shape.surface_normal(mount.contact_point)
    tangent = mount.finger_axis - np.dot(mount.finger_axis, n_out) * n_out
    t_norm = np.linalg.norm(tangent)
    if t_norm < 1e-8:
        raise ParallelAxis("finger axis is parallel to the surface normal")
    belt = rotate_about_axis(tangent / t_norm, n_out, mount.surface_angle)
    position = as_vec3(mount.contact_point) - shape.center_offset
    return RollerContact(
        position=position,
        belt_dir=belt / np.linalg.norm(belt),
        normal_force=normal_force,
        friction=friction,
    )


# ---------------------------------------------------------------------------
# Virtual-sphere radius weighting

def contact_radius(p, axis) -> float:
    """Perpendicular distance from a contact to the rotation axis through
    the object center (m). Zero for on-axis contacts, which then carry zero
    torque weight."""
    p = as_vec3(p)
    a = as_unit_vec3(axis, tol=1e-6)
    return float(np.linalg.norm(p - np.dot(p, a) * a))


def contact_radii(positions: np.ndarray, axis, mode: RadiusMode) -> np.ndarray:
    p = np.asarray(positions, dtype=float)
    if mode is RadiusMode.CONTACT_NORM:
        return np.linalg.norm(p, axis=1)
    a = as_unit_vec3(axis, tol=1e-6)
    return np.linalg.norm(p - np.outer(p @ a, a), axis=1)


def radius_fixed_point_arrays(
    p: np.ndarray,
    d: np.ndarray,
    strengths: np.ndarray,
    speeds: np.ndarray,
    opts: SolverOptions,
    mode: RadiusMode,
    max_outer: int = 50,
    radius_tol: float = 1e-9,
) -> np.ndarray:
    """Array-level radius resolution used inside solvers and the simulator.

    AXIS_DISTANCE radii depend on the solution axis, so they are iterated to
    a fixed point starting from |p_i|; CONTACT_NORM radii are just |p_i|.
    """
    from .equilibrium import solve_omega_arrays

    r = np.linalg.norm(p, axis=1)
    if mode is RadiusMode.CONTACT_NORM:
        return r
    omega, _, _, _ = solve_omega_arrays(p, d, strengths * r, speeds, opts,
                                        raise_on_fail=False)
    for _ in range(max_outer):
        wn = float(np.linalg.norm(omega))
        if wn < 1e-12:
            break
        # Damped update: the raw map can orbit because the equilibrium (and
        # with it the axis) may jump as the weights change.
        r_new = 0.5 * (r + contact_radii(p, omega / wn, mode))
        if float(np.max(np.abs(r_new - r))) <= radius_tol:
            return r_new
        r = r_new
        omega, _, _, _ = solve_omega_arrays(p, d, strengths * r, speeds, opts,
                                            raise_on_fail=False)
    return r


@dataclass(frozen=True)
class RadiusResolution:
    """Result of the outer fixed point resolving axis-dependent radii."""

    weights: np.ndarray
    solution: EquilibriumSolution
    outer_iterations: int
    converged: bool
    degenerate: tuple[int, ...]


def resolve_multisphere(
    contacts: Sequence[RollerContact],
    command,
    opts: SolverOptions = DEFAULT_OPTIONS,
    mode: RadiusMode = RadiusMode.AXIS_DISTANCE,
    max_outer: int = 50,
    radius_tol: float = 1e-9,
) -> RadiusResolution:
    """Solve the rotation equilibrium with axis-dependent radius weights.

    The weights r_i depend on the solution's rotation axis, so they are
    resolved by a fixed point: start from r_i = |p_i|, solve, recompute the
    radii from the new axis, repeat until the radii settle.
    """
    positions = np.array([c.position for c in contacts])
    r = np.linalg.norm(positions, axis=1)
    sol = equilibrium_omega(contacts, command, radius_weights=r, opts=opts)
    if mode is RadiusMode.CONTACT_NORM:
        degen = tuple(int(i) for i in np.nonzero(r <= DEGENERATE_RADIUS)[0])
        return RadiusResolution(r, sol, 1, True, degen)

    converged = False
    outer = 1
    for outer in range(2, max_outer + 1):
        wn = float(np.linalg.norm(sol.omega))
        if wn < 1e-12:
            converged = True  # no rotation: axis undefined, radii moot
            break
        # Damped update: the raw map can orbit because the equilibrium (and
        # with it the axis) may jump as the weights change.
        r_new = 0.5 * (r + contact_radii(positions, sol.omega / wn, mode))
        if float(np.max(np.abs(r_new - r))) <= radius_tol:
            r = r_new
            converged = True
            break
        r = r_new
        sol = equilibrium_omega(contacts, command, radius_weights=r, opts=opts)
    degen = tuple(int(i) for i in np.nonzero(r <= DEGENERATE_RADIUS)[0])
    return RadiusResolution(r, sol, outer, converged, degen)


# ---------------------------------------------------------------------------
# CASM sizing

@dataclass(frozen=True)
class CasmSpec:
    """Conformable sleeve dimensions, all in mm."""

    w_o: float
    w_i: float
    fin_thickness: float
    attachment_width: float = 0.0

    def __post_init__(self):
        if not (self.w_o > 0 and self.w_i > 0 and self.fin_thickness > 0):
            raise ValidationError("CASM dimensions must be positive")


@dataclass(frozen=True)
class CasmConstraint:
    name: str
    description: str
    passed: bool
    margin: float


@dataclass(frozen=True)
class CasmReport:
    attachment_width: float
    constraints: tuple[CasmConstraint, ...]

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.constraints)


def casm_check(attachment_width: float, spec: CasmSpec) -> CasmReport:
    """Check the sleeve against an attachment (finger) width, in mm.

    Constraints: the outer width must exceed the attachment by >= 2 mm to
    leave room for fin deformation, fins must be >= 1 mm thick to avoid
    plastic deformation, and the inner width must undercut the attachment
    by >= 2 mm so the quatrefoil can deform around it.
    """
    if not (attachment_width > 0):
        raise ValidationError(f"attachment_width must be > 0, got {attachment_width}")
    outer = spec.w_o - (attachment_width + 2.0)
    fin = spec.fin_thickness - 1.0
    inner = (attachment_width - 2.0) - spec.w_i
    constraints = (
        CasmConstraint(
            "outer_width",
            f"w_o >= attachment + 2 mm ({spec.w_o} vs {attachment_width + 2.0})",
            outer >= 0.0,
            outer,
        ),
        CasmConstraint(
            "fin_thickness",
            f"fin >= 1 mm ({spec.fin_thickness})",
            fin >= 0.0,
            fin,
        ),
        CasmConstraint(
            "inner_width",
            f"w_i <= attachment - 2 mm ({spec.w_i} vs {attachment_width - 2.0})",
            inner >= 0.0,
            inner,
        ),
    )
    return CasmReport(attachment_width, constraints)
