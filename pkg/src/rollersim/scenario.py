"""Scenario and simulation configuration types, plus the named presets.

A Scenario bundles everything that defines a manipulation problem: the
object shape, the roller contacts (fixed in the hand frame), the belt speed
limit, and the solver/simulation settings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .core import BeltCommand, RollerContact
from .equilibrium import SolverOptions
from .errors import NoContacts, ValidationError
from .geometry import vec3
from .shapes import MountSpec, ObjectShape, RadiusMode, Sphere, rr_contact_from_mount


@dataclass(frozen=True)
class SimConfig:
    """Time stepping and task bookkeeping for the quasi-static simulator."""

    dt: float = 1.0 / 240.0
    workspace_radius: float = 0.5
    allow_translation: bool = True
    success_tol: float = 0.05
    success_hold: float = 0.5

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        if not (self.workspace_radius > 0):
            raise ValidationError("workspace_radius must be > 0")
        if self.success_tol < 0 or self.success_hold < 0:
            raise ValidationError("success tolerances must be >= 0")


@dataclass(frozen=True)
class Scenario:
    """A manipulation problem: contacts, shape, limits and tolerances."""

    contacts: tuple[RollerContact, ...]
    speed_limit: float
    shape: ObjectShape = field(default_factory=lambda: Sphere(1.0))
    solver: SolverOptions = field(default_factory=SolverOptions)
    sim: SimConfig = field(default_factory=SimConfig)
    radius_mode: RadiusMode = RadiusMode.AXIS_DISTANCE
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "contacts", tuple(self.contacts))
        if not self.contacts:
            raise NoContacts("a scenario needs at least one contact")
        if self.speed_limit < 0:
            raise ValidationError(f"speed_limit must be >= 0, got {self.speed_limit}")

    @property
    def n_contacts(self) -> int:
        return len(self.contacts)

    def command(self, speeds) -> BeltCommand:
        return BeltCommand(speeds=np.asarray(speeds, dtype=float), speed_limit=self.speed_limit)

    @cached_property
    def positions(self) -> np.ndarray:
        return np.array([c.position for c in self.contacts])

    @cached_property
    def belt_dirs(self) -> np.ndarray:
        return np.array([c.belt_dir for c in self.contacts])

    @cached_property
    def strengths(self) -> np.ndarray:
        return np.array([c.strength for c in self.contacts])

    @property
    def uses_uniform_radii(self) -> bool:
        """Spherical objects are their own virtual sphere: every contact sits
        on the same ball, so the radius weighting is uniform and the
        multi-sphere fixed point is skipped."""
        return isinstance(self.shape, Sphere)


def ring_scenario(
    n_contacts: int,
    surface_angle: float = math.pi / 6.0,
    speed_limit: float = 1.0,
    radius: float = 1.0,
    allow_translation: bool = False,
    name: str | None = None,
) -> Scenario:
    """Roller rings spaced evenly around the equator of a sphere.

    Finger axes run along +z (fingers wrapping over the object) and belts
    are angled from them by surface_angle, mirroring an n-finger grasp.
    The center is held (allow_translation=False) as in a power grasp.
    """
    if n_contacts < 1:
        raise ValidationError("need at least one contact")
    shape = Sphere(radius)
    contacts = []
    for k in range(n_contacts):
        az = 2.0 * math.pi * k / n_contacts
        point = vec3(radius * math.cos(az), radius * math.sin(az), 0.0)
        mount = MountSpec(
            finger_axis=vec3(0.0, 0.0, 1.0),
            contact_point=point,
            surface_angle=surface_angle,
        )
        contacts.append(rr_contact_from_mount(mount, shape))
    return Scenario(
        contacts=tuple(contacts),
        speed_limit=speed_limit,
        shape=shape,
        sim=SimConfig(allow_translation=allow_translation),
        name=name or f"ring-{n_contacts}rr",
    )


def _sphere_4rr() -> Scenario:
    """Four equatorial contacts with belts along +z: the symmetric-lift
    scenario. Contacts are ordered cyclically (+x, +y, -x, -y)."""
    contacts = tuple(
        RollerContact(position=p, belt_dir=vec3(0.0, 0.0, 1.0))
        for p in (vec3(1, 0, 0), vec3(0, 1, 0), vec3(-1, 0, 0), vec3(0, -1, 0))
    )
    return Scenario(
        contacts=contacts,
        speed_limit=1.0,
        shape=Sphere(1.0),
        name="sphere-4rr",
    )


def _human_2rr() -> Scenario:
    return ring_scenario(2, name="human-2rr")


def _model_o_3rr() -> Scenario:
    return ring_scenario(3, name="model-o-3rr")


_PRESETS = {
    "sphere-4rr": _sphere_4rr,
    "human-2rr": _human_2rr,
    "model-o-3rr": _model_o_3rr,
}


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(_PRESETS))


def preset_scenario(name: str) -> Scenario:
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise ValidationError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None
    return factory()
