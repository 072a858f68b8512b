"""Teleoperation sessions: live simulated scenarios driven by belt-speed
commands, with timed-task bookkeeping.

The manager is synchronous and deterministic: commands queue until the next
tick boundary, each tick advances exactly 1/tick_rate seconds of simulated
time, and task timing is measured in simulated seconds so results do not
depend on the machine. The network layer in ``service`` wraps this.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BadLength,
    CapacityExceeded,
    SessionPaused,
    SolverFailure,
    UnknownSession,
    ValidationError,
)
from .geometry import IDENTITY_QUAT, as_orientation, geodesic_angle
from .scenario import Scenario, preset_scenario
from .simulator import ObjectState, TrajectorySample, Trajectory, step

logger = logging.getLogger(__name__)

MIN_TICK_RATE = 10.0
MAX_TICK_RATE = 240.0


@dataclass
class Session:
    id: str
    scenario: Scenario
    tick_rate: float
    state: ObjectState = field(default_factory=ObjectState)
    speeds: np.ndarray = None
    pending_speeds: np.ndarray | None = None
    target: np.ndarray | None = None
    task_start_t: float | None = None
    task_done: bool = False
    task_elapsed: float | None = None
    hold_entered_t: float | None = None
    paused: bool = True
    samples: list = field(default_factory=list)

    def __post_init__(self):
        if self.speeds is None:
            self.speeds = np.zeros(self.scenario.n_contacts)
        zeros = np.zeros(3)
        self.samples.append(TrajectorySample(
            self.state, zeros, zeros, np.zeros(self.scenario.n_contacts), 0.0
        ))

    @property
    def dt(self) -> float:
        return 1.0 / self.tick_rate


class SessionManager:
    """Holds live sessions; every mutation happens through tick/apply."""

    def __init__(self, max_sessions: int = 32, tick_rate: float = 60.0):
        self.max_sessions = max_sessions
        self.default_tick_rate = tick_rate
        self.sessions: dict[str, Session] = {}
        self._ids = itertools.count(1)

    def create_session(self, scenario, tick_rate: float | None = None) -> Session:
        """New paused session at t=0 with zero speeds.

        ``scenario`` is a Scenario, a preset name, or anything accepted by
        scenario_io.load_scenario.
        """
        if len(self.sessions) >= self.max_sessions:
            raise CapacityExceeded(
                f"session capacity {self.max_sessions} reached"
            )
        if isinstance(scenario, str):
            scenario = preset_scenario(scenario)
        elif not isinstance(scenario, Scenario):
            raise ValidationError("scenario must be a Scenario or preset name")
        rate = self.default_tick_rate if tick_rate is None else float(tick_rate)
        if not (MIN_TICK_RATE <= rate <= MAX_TICK_RATE):
            raise ValidationError(
                f"tick rate must be in [{MIN_TICK_RATE}, {MAX_TICK_RATE}] Hz"
            )
        sid = f"s{next(self._ids):06d}"
        session = Session(id=sid, scenario=scenario, tick_rate=rate)
        self.sessions[sid] = session
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSession(f"no session {session_id!r}") from None

    def delete(self, session_id: str):
        self.get(session_id)
        del self.sessions[session_id]

    # -- client messages --------------------------------------------------

    def apply_command(self, session_id: str, speeds) -> dict:
        """Queue clamped speeds for the next tick boundary; acks clamping."""
        session = self.get(session_id)
        s = np.atleast_1d(np.asarray(speeds, dtype=float))
        if s.shape != (session.scenario.n_contacts,):
            raise BadLength(
                f"expected {session.scenario.n_contacts} speeds, got {s.shape}"
            )
        if not np.all(np.isfinite(s)):
            raise ValidationError("speeds must be finite")
        limit = session.scenario.speed_limit
        clamped = np.clip(s, -limit, limit)
        was_clamped = bool(np.any(clamped != s))
        session.pending_speeds = clamped
        return {
            "type": "ack",
            "applied_speeds": clamped.tolist(),
            "clamped": was_clamped,
        }

    def set_target(self, session_id: str, quat) -> dict:
        session = self.get(session_id)
        session.target = as_orientation(quat, tol=1e-6)
        session.task_start_t = session.state.t
        session.task_done = False
        session.task_elapsed = None
        session.hold_entered_t = None
        # A pose already within tolerance starts its hold window now.
        err = geodesic_angle(session.state.orientation, session.target)
        if err <= session.scenario.sim.success_tol:
            session.hold_entered_t = session.state.t
        return {"type": "ack", "target": session.target.tolist()}

    def reset(self, session_id: str) -> dict:
        session = self.get(session_id)
        fresh = Session(id=session.id, scenario=session.scenario,
                        tick_rate=session.tick_rate)
        self.sessions[session.id] = fresh
        return {"type": "ack", "reset": True}

    def pause(self, session_id: str) -> dict:
        self.get(session_id).paused = True
        return {"type": "ack", "paused": True}

    def resume(self, session_id: str) -> dict:
        self.get(session_id).paused = False
        return {"type": "ack", "paused": False}

    # -- simulation --------------------------------------------------------

    def tick(self, session_id: str) -> dict:
        """Advance one tick of simulated time and return the state message."""
        session = self.get(session_id)
        if session.paused:
            raise SessionPaused(f"session {session_id} is paused")
        if session.pending_speeds is not None:
            session.speeds = session.pending_speeds
            session.pending_speeds = None
        try:
            state, record = step(
                session.state, session.scenario, session.speeds,
                session.scenario.sim, dt=session.dt,
            )
        except SolverFailure:
            session.paused = True
            raise
        session.state = state
        session.samples.append(TrajectorySample(
            state, record.omega, record.v, record.slip_speeds, record.dissipation
        ))
        self._update_task(session)
        return self.state_message(session_id)

    def _update_task(self, session: Session):
        if session.target is None or session.task_done:
            return
        cfg = session.scenario.sim
        err = geodesic_angle(session.state.orientation, session.target)
        if err <= cfg.success_tol:
            if session.hold_entered_t is None:
                session.hold_entered_t = session.state.t
            if session.state.t - session.hold_entered_t >= cfg.success_hold:
                session.task_done = True
                session.task_elapsed = session.state.t - session.task_start_t
        else:
            session.hold_entered_t = None

    def state_message(self, session_id: str) -> dict:
        session = self.get(session_id)
        latest = session.samples[-1]
        target_err = (
            geodesic_angle(session.state.orientation, session.target)
            if session.target is not None
            else None
        )
        if session.task_done:
            elapsed = session.task_elapsed
        elif session.task_start_t is not None:
            elapsed = session.state.t - session.task_start_t
        else:
            elapsed = None
        return {
            "type": "state",
            "t": session.state.t,
            "quat": session.state.orientation.tolist(),
            "pos": session.state.position.tolist(),
            "omega": latest.omega.tolist(),
            "v": latest.v.tolist(),
            "slip": latest.slip_speeds.tolist(),
            "dissipation": latest.dissipation,
            "target_err_rad": target_err,
            "task_elapsed_s": elapsed,
            "task_done": session.task_done,
            "paused": session.paused,
        }

    def trajectory(self, session_id: str) -> Trajectory:
        session = self.get(session_id)
        return Trajectory(list(session.samples), session.dt)

    def handle_message(self, session_id: str, message: dict) -> dict:
        """Dispatch one wire message; returns the reply (ack or error)."""
        if not isinstance(message, dict) or "type" not in message:
            raise ValidationError("message must be an object with a 'type' field")
        kind = message["type"]
        if kind == "set_speeds":
            return self.apply_command(session_id, message.get("speeds", []))
        if kind == "set_target":
            return self.set_target(session_id, message.get("quat"))
        if kind == "reset":
            return self.reset(session_id)
        if kind == "pause":
            return self.pause(session_id)
        if kind == "resume":
            return self.resume(session_id)
        raise ValidationError(f"unknown message type {kind!r}")
