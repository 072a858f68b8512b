import math

import numpy as np
import pytest

from rollersim.core import RollerContact
from rollersim.errors import PlanInfeasible, Unreachable, ValidationError
from rollersim.geometry import (
    IDENTITY_QUAT,
    geodesic_angle,
    quat_from_axis_angle,
    random_quat,
)
from rollersim.planner import (
    DEFAULT_PLANNER,
    PlannerOptions,
    Pose,
    _euler_two_axis,
    _plan_rotation_core,
    plan_pose,
    plan_rotation,
    plan_translation,
    reachable_set,
    synthesize_rotation,
)
from rollersim.scenario import Scenario, preset_scenario
from rollersim.simulator import run


@pytest.fixture(scope="module")
def ring3():
    return preset_scenario("model-o-3rr")


@pytest.fixture(scope="module")
def ring3_reach(ring3):
    return reachable_set(ring3, 256)


class TestReachableSet:
    def test_single_contact_colinear(self):
        sc = Scenario(
            contacts=(RollerContact(position=[1, 0, 0], belt_dir=[0, 0, 1]),),
            speed_limit=1.0,
        )
        report = reachable_set(sc, 128)
        assert not report.has_two_noncolinear

    def test_two_noncolinear(self, e1_scenario):
        report = reachable_set(e1_scenario, 128)
        assert report.has_two_noncolinear

    def test_zero_speed_limit_empty(self):
        sc = Scenario(
            contacts=(RollerContact(position=[1, 0, 0], belt_dir=[0, 0, 1]),),
            speed_limit=0.0,
        )
        report = reachable_set(sc, 128)
        assert report.coverage == 0.0
        assert not report.has_two_noncolinear
        assert all(mag == 0.0 for _, mag in report.sampled_axes)

    def test_deterministic_per_seed(self, ring3):
        a = reachable_set(ring3, 128)
        b = reachable_set(ring3, 128)
        assert a.coverage == b.coverage
        for (s1, o1), (s2, o2) in zip(a.achieved, b.achieved):
            np.testing.assert_array_equal(s1, s2)
            np.testing.assert_array_equal(o1, o2)

    def test_more_contacts_do_not_reduce_coverage(self, e1_scenario):
        # add a third contact to the two-contact scenario
        extra = RollerContact(position=[0, 0, 1], belt_dir=[1, 0, 0])
        bigger = Scenario(
            contacts=e1_scenario.contacts + (extra,),
            speed_limit=e1_scenario.speed_limit,
        )
        base = reachable_set(e1_scenario, 256)
        more = reachable_set(bigger, 256)
        stderr = math.sqrt(base.coverage * (1 - base.coverage) / 200)
        assert more.coverage >= base.coverage - stderr


class TestSynthesizeRotation:
    def test_e1_exact(self, e1_scenario):
        res = synthesize_rotation(e1_scenario, [1.0, -1.0, 0.0])
        assert res.residual <= 1e-6
        np.testing.assert_allclose(res.command.speeds, [1, 1], atol=1e-6)
        np.testing.assert_allclose(res.achieved, [1, -1, 0], atol=1e-6)

    def test_pure_spin_unreachable(self):
        sc = Scenario(
            contacts=(RollerContact(position=[1, 0, 0], belt_dir=[0, 0, 1]),),
            speed_limit=1.0,
        )
        with pytest.raises(Unreachable):
            synthesize_rotation(sc, [1.0, 0.0, 0.0])

    def test_scaled_achieved_axis(self, ring3):
        from rollersim.planner import _Forward
        fwd = _Forward(ring3)
        s0 = np.array([0.7, -0.2, 0.4])
        om0 = fwd.omega(s0, warm=False)
        res = synthesize_rotation(ring3, 0.5 * om0)
        assert res.residual <= 1e-6

    def test_zero_desired_rejected(self, e1_scenario):
        with pytest.raises(ValidationError):
            synthesize_rotation(e1_scenario, [0.0, 0.0, 0.0])


class _StubSynth:
    """Axis oracle achieving exactly a fixed set of unit axes."""

    def __init__(self, axes, mag=1.0):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.mag = mag
        self.cmds = [np.array([float(i)]) for i in range(len(self.axes))]
        self.omegas = np.array([self.mag * a for a in self.axes])
        self.mags = np.full(len(self.axes), self.mag)

        class _Fake:
            class scenario:
                speed_limit = 1e9
                n_contacts = 1

        self.fwd = _Fake()

    def toward(self, axis):
        best = max(self.axes, key=lambda a: np.dot(a, axis))
        if np.dot(best, axis) < -1:  # pragma: no cover
            raise AssertionError
        # achieved exactly along the stub axis closest to the request
        sign = 1.0 if np.dot(best, axis) >= 0 else -1.0
        return np.array([sign]), self.mag * sign * best

    def drift(self, speeds, omega):
        return np.zeros(3)


class TestPlanRotationCore:
    def test_orthogonal_axes_180_about_y(self):
        # achievable axes exactly {x, z}; goal is a half turn about y:
        # the two-axis decomposition realizes it in three segments with a
        # total travel of 2*pi (detour ratio 2)
        synth = _StubSynth([[1, 0, 0], [0, 0, 1], [-1, 0, 0], [0, 0, -1]])
        goal = quat_from_axis_angle([0, 1, 0], math.pi)
        segments, final, travel = _plan_rotation_core(
            synth, Pose(IDENTITY_QUAT), goal, DEFAULT_PLANNER
        )
        assert len(segments) == 3
        assert geodesic_angle(final.orientation, goal) <= DEFAULT_PLANNER.tol_angle
        assert travel == pytest.approx(2.0 * math.pi, abs=1e-6)
        assert travel / math.pi == pytest.approx(2.0, abs=1e-6)

    def test_goal_axis_directly_achievable(self):
        synth = _StubSynth([[0, 0, 1], [1, 0, 0]])
        goal = quat_from_axis_angle([0, 0, 1], 1.0)
        segments, final, travel = _plan_rotation_core(
            synth, Pose(IDENTITY_QUAT), goal, DEFAULT_PLANNER
        )
        assert len(segments) == 1
        assert travel == pytest.approx(1.0, abs=1e-9)


class TestPlanRotation:
    def test_identity_goal_empty_plan(self, ring3):
        plan = plan_rotation(ring3, IDENTITY_QUAT, IDENTITY_QUAT)
        assert plan.segments == ()
        assert plan.detour_ratio == 1.0

    def test_single_contact_infeasible(self):
        sc = Scenario(
            contacts=(RollerContact(position=[1, 0, 0], belt_dir=[0, 0, 1]),),
            speed_limit=1.0,
        )
        goal = quat_from_axis_angle([0, 0, 1], 1.0)
        with pytest.raises(PlanInfeasible):
            plan_rotation(sc, IDENTITY_QUAT, goal)

    def test_random_goals_converge_and_replay(self, ring3, ring3_reach):
        rng = np.random.default_rng(17)
        for _ in range(5):
            goal = random_quat(rng)
            plan = plan_rotation(ring3, IDENTITY_QUAT, goal, reach=ring3_reach)
            err = geodesic_angle(plan.expected_final_pose.orientation, goal)
            assert err <= DEFAULT_PLANNER.tol_angle
            assert plan.detour_ratio >= 1.0
            assert len(plan.segments) <= DEFAULT_PLANNER.max_segments
            traj = run(ring3, plan)
            replay_err = geodesic_angle(traj.final_state.orientation, goal)
            assert replay_err <= 10 * DEFAULT_PLANNER.tol_angle

    def test_monotonic_progress_across_iterations(self, ring3, ring3_reach):
        # replaying segment prefixes: the geodesic after each greedy
        # iteration decreases (a-b-a triples count as one iteration)
        goal = random_quat(np.random.default_rng(23))
        plan = plan_rotation(ring3, IDENTITY_QUAT, goal, reach=ring3_reach)
        from rollersim.geometry import quat_canonical, quat_from_rotvec, quat_mul
        q = IDENTITY_QUAT
        dists = [geodesic_angle(q, goal)]
        for seg in plan.segments:
            q = quat_canonical(
                quat_mul(quat_from_rotvec(seg.expected_omega * seg.duration), q)
            )
            dists.append(geodesic_angle(q, goal))
        # final strictly better than start; no stagnation at the end
        assert dists[-1] < dists[0]
        assert dists[-1] <= DEFAULT_PLANNER.tol_angle


class TestPlanTranslation:
    def test_symmetric_lift(self):
        sc = preset_scenario("sphere-4rr")
        plan = plan_translation(sc, [0, 0, 1], 0.2)
        assert len(plan.segments) == 1
        seg = plan.segments[0]
        assert np.linalg.norm(seg.expected_omega) <= 1e-6
        v = seg.expected_v
        assert np.dot(v, [0, 0, 1]) / np.linalg.norm(v) >= math.cos(math.radians(1))
        # equal speeds on all four belts
        s = seg.command.speeds
        assert np.allclose(s, s[0], atol=1e-4)
        assert plan.detour_ratio == 1.0

    def test_zero_distance_empty(self):
        sc = preset_scenario("sphere-4rr")
        plan = plan_translation(sc, [0, 0, 1], 0.0)
        assert plan.segments == ()
        assert plan.detour_ratio == 1.0

    def test_single_contact_unreachable(self):
        sc = Scenario(
            contacts=(RollerContact(position=[1, 0, 0], belt_dir=[0, 0, 1]),),
            speed_limit=1.0,
        )
        with pytest.raises(Unreachable):
            plan_translation(sc, [0, 0, 1], 0.1)

    def test_pinned_scenario_unreachable(self, ring3):
        with pytest.raises(Unreachable):
            plan_translation(ring3, [0, 0, 1], 0.1)

    def test_replay_reaches_position(self):
        sc = preset_scenario("sphere-4rr")
        plan = plan_translation(sc, [0, 0, 1], 0.2)
        traj = run(sc, plan)
        np.testing.assert_allclose(traj.final_state.position, [0, 0, 0.2],
                                   atol=1e-6)


class TestPlanPose:
    def test_pure_rotation_matches_plan_rotation(self, ring3, ring3_reach):
        goal_q = quat_from_axis_angle([0, 0, 1], 0.8)
        pose_plan = plan_pose(ring3, Pose(IDENTITY_QUAT), Pose(goal_q))
        rot_plan = plan_rotation(ring3, IDENTITY_QUAT, goal_q, reach=ring3_reach)
        assert len(pose_plan.segments) == len(rot_plan.segments)
        assert geodesic_angle(
            pose_plan.expected_final_pose.orientation, goal_q
        ) <= DEFAULT_PLANNER.tol_angle

    def test_pure_translation(self):
        sc = preset_scenario("sphere-4rr")
        goal = Pose(IDENTITY_QUAT, np.array([0.0, 0.0, 0.15]))
        plan = plan_pose(sc, Pose(IDENTITY_QUAT), goal)
        assert np.linalg.norm(
            plan.expected_final_pose.position - goal.position
        ) <= DEFAULT_PLANNER.tol_position

    def test_combined_goal_closed_loop(self):
        # recenter-and-reorient: translate back to the nominal center, where
        # rotations roll without drift, then turn
        sc = preset_scenario("sphere-4rr")
        start = Pose(IDENTITY_QUAT, np.array([0.0, 0.0, 0.05]))
        goal = Pose(quat_from_axis_angle([1, 0, 0], 0.4), np.zeros(3))
        plan = plan_pose(sc, start, goal)
        from rollersim.simulator import ObjectState
        traj = run(sc, plan, start=ObjectState(start.orientation, start.position))
        assert geodesic_angle(
            traj.final_state.orientation, goal.orientation
        ) <= 10 * DEFAULT_PLANNER.tol_angle
        assert np.linalg.norm(
            traj.final_state.position - goal.position
        ) <= 10 * DEFAULT_PLANNER.tol_position


class TestEulerTwoAxis:
    def test_reconstruction_random(self):
        from rollersim.geometry import quat_from_rotvec, quat_mul, quat_canonical
        rng = np.random.default_rng(31)
        for _ in range(30):
            a = rng.normal(size=3)
            a /= np.linalg.norm(a)
            b = np.cross(a, rng.normal(size=3))
            b /= np.linalg.norm(b)
            e = random_quat(rng)
            alpha, beta, gamma = _euler_two_axis(e, a, b)
            rec = quat_mul(
                quat_from_rotvec(a * alpha),
                quat_mul(quat_from_rotvec(b * beta), quat_from_rotvec(a * gamma)),
            )
            # arccos conditioning near the poles costs a few ulps beyond 1e-9
            assert geodesic_angle(quat_canonical(rec), e) <= 1e-6
