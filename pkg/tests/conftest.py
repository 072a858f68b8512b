import numpy as np
import pytest

from rollersim.core import BeltCommand, RollerContact
from rollersim.scenario import Scenario, preset_scenario


@pytest.fixture
def e1_contacts():
    """Two equatorial contacts with belts along +z: sticks for any speeds."""
    return [
        RollerContact(position=[1.0, 0.0, 0.0], belt_dir=[0.0, 0.0, 1.0]),
        RollerContact(position=[0.0, 1.0, 0.0], belt_dir=[0.0, 0.0, 1.0]),
    ]


@pytest.fixture
def e1_command():
    return BeltCommand(speeds=[1.0, 1.0], speed_limit=2.0)


@pytest.fixture
def e1_scenario(e1_contacts):
    return Scenario(contacts=tuple(e1_contacts), speed_limit=2.0)


@pytest.fixture
def lift_contacts():
    """sphere-4rr geometry: cyclic equatorial contacts, belts along +z."""
    return list(preset_scenario("sphere-4rr").contacts)


def random_sphere_contact(rng):
    p = rng.normal(size=3)
    p /= np.linalg.norm(p)
    t = np.cross(p, rng.normal(size=3))
    t /= np.linalg.norm(t)
    return RollerContact(position=p, belt_dir=t)


def random_scene(rng, n):
    contacts = [random_sphere_contact(rng) for _ in range(n)]
    cmd = BeltCommand(speeds=rng.uniform(-1, 1, n), speed_limit=1.0)
    return contacts, cmd
