"""Per-contact kinematics and friction primitives for active-surface contacts.

A roller contact is a point on the grasped object where a belt translates
the surface tangentially. A slipping contact exerts a Coulomb force of fixed
magnitude mu*|Fn| along the slip direction; a sticking one exerts a
statically indeterminate force inside the friction cone and contributes no
net torque here.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateContact, NonTangentVelocity, ValidationError
from .geometry import as_vec3, as_unit_vec3

# Below this slip speed (m/s) a contact is treated as static: the Coulomb
# direction v/|v| is undefined in the limit and the tangential force becomes
# indeterminate inside the cone.
DEFAULT_EPS_SLIP = 1e-7

# Tolerance on belt_dir . normal at construction and on v . p_hat in
# induced_omega.
TANGENT_TOL = 1e-6


class ContactState(enum.Enum):
    STICKING = "sticking"
    SLIPPING = "slipping"


@dataclass(frozen=True)
class RollerContact:
    """One active-surface contact in the hand frame.

    position is measured from the nominal object center (m). belt_dir is the
    unit direction of positive belt linear velocity at the contact, and must
    be tangent there (for spheres the inward normal is -position/|position|).
    normal_force is the magnitude |Fn| in N; friction is the dimensionless
    Coulomb coefficient mu.
    """

    position: np.ndarray
    belt_dir: np.ndarray
    normal_force: float = 1.0
    friction: float = 1.0

    def __post_init__(self):
        p = as_vec3(self.position)
        d = as_unit_vec3(self.belt_dir, tol=TANGENT_TOL)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "belt_dir", d)
        r = np.linalg.norm(p)
        if r == 0.0:
            raise DegenerateContact("contact position has zero norm")
        if abs(np.dot(d, p / r)) > TANGENT_TOL:
            raise ValidationError(
                "belt_dir orthogonality: belt_dir must be tangent at the "
                f"contact (belt_dir . p_hat = {np.dot(d, p / r):.3e})"
            )
        if not (self.normal_force >= 0.0):
            raise ValidationError(f"normal_force must be >= 0, got {self.normal_force}")
        if not (self.friction >= 0.0):
            raise ValidationError(f"friction must be >= 0, got {self.friction}")

    @property
    def strength(self) -> float:
        """Coulomb force magnitude mu*|Fn| exerted while slipping (N)."""
        return self.friction * self.normal_force


@dataclass(frozen=True)
class BeltCommand:
    """Signed belt speeds (m/s), one per contact, bounded by speed_limit."""

    speeds: np.ndarray
    speed_limit: float

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.speeds, dtype=np.float64))
        if s.ndim != 1 or not np.all(np.isfinite(s)):
            raise ValidationError(f"speeds must be a finite 1-d array, got {self.speeds!r}")
        object.__setattr__(self, "speeds", s)
        if not (self.speed_limit > 0.0):
            raise ValidationError(f"speed_limit must be > 0, got {self.speed_limit}")
        if np.any(np.abs(s) > self.speed_limit * (1.0 + 1e-12)):
            raise ValidationError(
                f"speed {s[np.argmax(np.abs(s))]} exceeds limit {self.speed_limit}"
            )

    def __len__(self) -> int:
        return self.speeds.shape[0]


def command_speeds(command) -> np.ndarray:
    """Accept a BeltCommand or a plain sequence of speeds."""
    if isinstance(command, BeltCommand):
        return command.speeds
    return np.atleast_1d(np.asarray(command, dtype=np.float64))


@dataclass(frozen=True)
class ContactKinematics:
    """Relative motion at one contact for a given object twist."""

    belt_velocity: np.ndarray
    surface_velocity: np.ndarray
    slip: np.ndarray
    slip_speed: float
    state: ContactState


class TorqueResult(NamedTuple):
    torque: np.ndarray
    indeterminate_static: bool


def induced_omega(contact: RollerContact, speed: float) -> np.ndarray:
    """Angular velocity a single rolling contact imparts to the object.

    Solves v = omega x p for the minimal-norm omega = (p x v)/|p|^2, which
    has no component along p: a single rolling contact cannot spin the
    object about its own contact normal.
    """
    p = contact.position
    r2 = float(np.dot(p, p))
    if r2 == 0.0:
        raise DegenerateContact("contact position has zero norm")
    v = float(speed) * contact.belt_dir
    radial = float(np.dot(v, p)) / np.sqrt(r2)
    if abs(radial) > TANGENT_TOL:
        raise NonTangentVelocity(
            f"belt velocity has radial component {radial:.3e} m/s at the contact"
        )
    return np.cross(p, v) / r2


def contact_kinematics(
    contact: RollerContact,
    speed: float,
    omega,
    v_obj,
    eps_slip: float = DEFAULT_EPS_SLIP,
) -> ContactKinematics:
    """Belt vs object-surface velocity at the contact for twist (omega, v_obj)."""
    v_belt = float(speed) * contact.belt_dir
    v_surf = as_vec3(v_obj) + np.cross(as_vec3(omega), contact.position)
    slip = v_belt - v_surf
    slip_speed = float(np.linalg.norm(slip))
    state = ContactState.STICKING if slip_speed <= eps_slip else ContactState.SLIPPING
    return ContactKinematics(v_belt, v_surf, slip, slip_speed, state)


def contact_torque(
    contact: RollerContact, kin: ContactKinematics, radius_weight: float = 1.0
) -> TorqueResult:
    """Friction torque about the object center exerted by this contact.

    Slipping: tau = r * mu*|Fn| * p x slip_hat (the Coulomb force pulls the
    surface along the slip direction, scaled by the virtual-sphere radius
    weight r). Sticking: zero, flagged statically indeterminate.
    """
    if kin.state is ContactState.STICKING:
        return TorqueResult(np.zeros(3), True)
    tau = (
        float(radius_weight)
        * contact.strength
        * np.cross(contact.position, kin.slip / kin.slip_speed)
    )
    return TorqueResult(tau, False)


def dissipation(
    contacts: Sequence[RollerContact],
    command,
    omega,
    v_obj,
    radius_weights=None,
) -> float:
    """Total friction dissipation rate sum_i r_i*mu_i*|Fn_i|*|slip_i| (W).

    Convex in (omega, v_obj); zero exactly when every contact sticks. Its
    negative gradient in omega is the total slipping-contact torque, which
    makes its minimizers the torque-balance equilibria.
    """
    speeds = command_speeds(command)
    if len(speeds) != len(contacts):
        raise ValidationError(
            f"{len(speeds)} speeds for {len(contacts)} contacts"
        )
    if not contacts:
        return 0.0
    p, d, w = contact_arrays(contacts, radius_weights)
    return _dissipation_arrays(p, d, w, speeds, as_vec3(omega), as_vec3(v_obj))


# ---------------------------------------------------------------------------
# Array-level layer. The solvers and the simulator work on plain arrays so
# that contact positions can be shifted with the object center during
# simulation (the nominal tangency invariant only holds at the nominal pose).

def contact_arrays(
    contacts: Sequence[RollerContact], radius_weights=None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack contacts into (positions (N,3), belt_dirs (N,3), weights (N,)).

    weights[i] = r_i * mu_i * |Fn_i|, the torque-potential weight.
    """
    n = len(contacts)
    p = np.array([c.position for c in contacts], dtype=np.float64).reshape(n, 3)
    d = np.array([c.belt_dir for c in contacts], dtype=np.float64).reshape(n, 3)
    s = np.array([c.strength for c in contacts], dtype=np.float64)
    if radius_weights is None:
        r = np.ones(n)
    else:
        r = np.asarray(radius_weights, dtype=np.float64)
        if r.shape != (n,):
            raise ValidationError(
                f"radius_weights shape {r.shape} does not match {n} contacts"
            )
    return p, d, s * r


def slips_arrays(p, d, speeds, omega, v_obj) -> np.ndarray:
    """Slip vectors (N,3): speed_i*dir_i - (v_obj + omega x p_i)."""
    return speeds[:, None] * d - v_obj[None, :] - np.cross(omega[None, :], p)


def _dissipation_arrays(p, d, w, speeds, omega, v_obj) -> float:
    slips = slips_arrays(p, d, speeds, omega, v_obj)
    return float(np.dot(w, np.linalg.norm(slips, axis=1)))


def total_torque(
    contacts: Sequence[RollerContact],
    command,
    omega,
    v_obj=None,
    radius_weights=None,
    eps_slip: float = DEFAULT_EPS_SLIP,
) -> np.ndarray:
    """Sum of slipping-contact torques at the given twist (N*m)."""
    v_obj = np.zeros(3) if v_obj is None else as_vec3(v_obj)
    speeds = command_speeds(command)
    total = np.zeros(3)
    if radius_weights is None:
        radius_weights = np.ones(len(contacts))
    for c, s, r in zip(contacts, speeds, radius_weights):
        kin = contact_kinematics(c, s, omega, v_obj, eps_slip)
        total += contact_torque(c, kin, r).torque
    return total
