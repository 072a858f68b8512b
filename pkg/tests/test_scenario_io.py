import json
import math

import numpy as np
import pytest

from rollersim.core import BeltCommand
from rollersim.errors import ParseError, ValidationError
from rollersim.scenario import preset_names, preset_scenario
from rollersim.scenario_io import (
    export_trajectory,
    load_scenario,
    load_schedule,
    load_trajectory,
    save_scenario,
)
from rollersim.simulator import run


class TestPresets:
    def test_names(self):
        assert set(preset_names()) == {"sphere-4rr", "human-2rr", "model-o-3rr"}

    def test_sphere_4rr_content(self):
        sc = preset_scenario("sphere-4rr")
        assert sc.n_contacts == 4
        expected = [(1, 0, 0), (0, 1, 0), (-1, 0, 0), (0, -1, 0)]
        for c, p in zip(sc.contacts, expected):
            np.testing.assert_allclose(c.position, p)
            np.testing.assert_allclose(c.belt_dir, [0, 0, 1])

    def test_unknown_preset(self):
        with pytest.raises(ValidationError):
            preset_scenario("nope")

    def test_preset_reference_in_file(self):
        sc = load_scenario('{"preset": "sphere-4rr", "speed_limit": 3.0}')
        assert sc.speed_limit == 3.0
        assert sc.n_contacts == 4


class TestLoadScenario:
    def test_roundtrip_field_equality(self):
        for name in preset_names():
            sc = preset_scenario(name)
            sc2 = load_scenario(save_scenario(sc))
            assert sc2.speed_limit == sc.speed_limit
            assert sc2.n_contacts == sc.n_contacts
            assert sc2.solver == sc.solver
            assert sc2.sim == sc.sim
            assert sc2.radius_mode == sc.radius_mode
            for a, b in zip(sc.contacts, sc2.contacts):
                np.testing.assert_array_equal(a.position, b.position)
                np.testing.assert_array_equal(a.belt_dir, b.belt_dir)
                assert a.normal_force == b.normal_force
                assert a.friction == b.friction

    def test_nontangent_belt_rejected(self):
        text = json.dumps({
            "contacts": [{"position": [1, 0, 0], "belt_dir": [1, 0, 0]}],
            "speed_limit": 1.0,
        })
        with pytest.raises(ValidationError, match="orthogonality"):
            load_scenario(text)

    def test_truncated_file_position(self):
        good = save_scenario(preset_scenario("sphere-4rr"))
        with pytest.raises(ParseError) as exc:
            load_scenario(good[: len(good) // 2])
        assert exc.value.position is not None

    def test_unknown_field_strict(self):
        text = json.dumps({
            "contacts": [{"position": [1, 0, 0], "belt_dir": [0, 0, 1]}],
            "speed_limit": 1.0,
            "bogus": 1,
        })
        with pytest.raises(ValidationError, match="bogus"):
            load_scenario(text)
        # lenient mode just warns
        sc = load_scenario(text, strict=False)
        assert sc.n_contacts == 1

    def test_mount_contact_with_degrees(self):
        text = json.dumps({
            "shape": {"kind": "sphere", "radius": 1.0},
            "contacts": [{
                "mount": {
                    "finger_axis": [0, 1, 0],
                    "contact_point": [1, 0, 0],
                    "surface_angle_deg": 30.0,
                },
            }],
            "speed_limit": 1.0,
        })
        sc = load_scenario(text)
        np.testing.assert_allclose(
            sc.contacts[0].belt_dir, [0, math.cos(math.pi / 6), 0.5], atol=1e-9
        )

    def test_angle_and_degrees_conflict(self):
        text = json.dumps({
            "shape": {"kind": "sphere", "radius": 1.0},
            "contacts": [{
                "mount": {
                    "finger_axis": [0, 1, 0],
                    "contact_point": [1, 0, 0],
                    "surface_angle": 0.5,
                    "surface_angle_deg": 30.0,
                },
            }],
            "speed_limit": 1.0,
        })
        with pytest.raises(ValidationError, match="not both"):
            load_scenario(text)

    def test_missing_required(self):
        with pytest.raises(ValidationError, match="speed_limit"):
            load_scenario('{"contacts": []}')

    def test_box_and_cylinder_shapes(self):
        text = json.dumps({
            "shape": {"kind": "box", "half_extents": [1, 1, 2]},
            "contacts": [{"position": [1, 0, 0], "belt_dir": [0, 0, 1]}],
            "speed_limit": 1.0,
        })
        sc = load_scenario(text)
        assert not sc.uses_uniform_radii


class TestSchedules:
    def test_load(self, tmp_path):
        sc = preset_scenario("sphere-4rr")
        path = tmp_path / "sched.json"
        path.write_text(json.dumps([
            {"speeds": [1, 1, 1, 1], "duration": 0.5},
            {"speeds": [0, 0, 0, 0], "duration": 0.1},
        ]))
        sched = load_schedule(path, sc)
        assert len(sched) == 2
        assert isinstance(sched[0][0], BeltCommand)

    def test_bad_duration(self, tmp_path):
        sc = preset_scenario("sphere-4rr")
        with pytest.raises(ValidationError):
            load_schedule('[{"speeds": [0,0,0,0], "duration": 0}]', sc)

    def test_overspeed_rejected(self):
        sc = preset_scenario("sphere-4rr")
        with pytest.raises(ValidationError):
            load_schedule('[{"speeds": [9,0,0,0], "duration": 1}]', sc)


class TestTrajectoryExport:
    @pytest.fixture
    def traj(self):
        sc = preset_scenario("sphere-4rr")
        cmd = BeltCommand(speeds=[1.0] * 4, speed_limit=2.0)
        return run(sc, [(cmd, 0.05)])

    def test_csv_header_and_columns(self, traj):
        data = export_trajectory(traj, "csv")
        lines = data.decode().splitlines()
        header = lines[0].split(",")
        assert header[:5] == ["t", "qw", "qx", "qy", "qz"]
        assert sum(1 for h in header if h.startswith("slip_")) == 4
        assert header[-1] == "dissipation"
        assert len(lines) == len(traj.samples) + 1

    def test_single_sample_two_lines(self):
        sc = preset_scenario("sphere-4rr")
        traj = run(sc, [])
        data = export_trajectory(traj, "csv")
        assert len(data.decode().splitlines()) == 2

    def test_csv_roundtrip_bit_identical(self, traj):
        back = load_trajectory(export_trajectory(traj, "csv"), "csv")
        assert len(back) == len(traj)
        for a, b in zip(traj.samples, back.samples):
            np.testing.assert_array_equal(a.state.orientation, b.state.orientation)
            np.testing.assert_array_equal(a.state.position, b.state.position)
            np.testing.assert_array_equal(a.omega, b.omega)
            np.testing.assert_array_equal(a.v, b.v)
            np.testing.assert_array_equal(a.slip_speeds, b.slip_speeds)
            assert a.dissipation == b.dissipation
            assert a.state.t == b.state.t

    def test_jsonl_roundtrip(self, traj):
        back = load_trajectory(export_trajectory(traj, "jsonl"), "jsonl")
        for a, b in zip(traj.samples, back.samples):
            np.testing.assert_array_equal(a.state.orientation, b.state.orientation)
            assert a.dissipation == b.dissipation

    def test_unknown_format(self, traj):
        with pytest.raises(ValidationError):
            export_trajectory(traj, "xml")
