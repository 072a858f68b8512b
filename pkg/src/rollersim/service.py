"""HTTP/WebSocket layer over the teleoperation session manager.

Endpoints:
  GET    /presets                         list preset scenario names
  POST   /sessions {scenario|preset,...}  create a session (paused, t=0)
  DELETE /sessions/{id}
  GET    /sessions/{id}/trajectory.csv    trajectory download
  WS     /ws/session/{id}                 command stream in, state stream out

The socket emits one state message per tick while the session runs; client
messages (set_speeds, set_target, reset, pause, resume) are applied at tick
boundaries, which keeps a recorded message log exactly replayable.
"""

from __future__ import annotations

import asyncio
import json
import logging

from fastapi import FastAPI, Response, WebSocket, WebSocketDisconnect

from .errors import RollerSimError, SessionPaused, TeleopError, ValidationError
from .scenario import preset_names
from .scenario_io import export_trajectory, load_scenario
from .teleop import SessionManager

logger = logging.getLogger(__name__)


def _error_payload(exc: Exception) -> dict:
    code = getattr(exc, "code", "error")
    return {"type": "error", "code": code, "message": str(exc)}


def build_app(tick_rate: float = 60.0, max_sessions: int = 32) -> FastAPI:
    app = FastAPI(title="rollersim teleop", version="0.1.0")
    manager = SessionManager(max_sessions=max_sessions, tick_rate=tick_rate)
    app.state.manager = manager

    @app.get("/presets")
    def presets():
        return {"presets": list(preset_names())}

    @app.post("/sessions")
    def create_session(body: dict):
        try:
            if "preset" in body and "scenario" not in body:
                scenario = body["preset"]
            elif "scenario" in body:
                scenario = load_scenario(json.dumps(body["scenario"]))
            else:
                raise ValidationError("body needs 'preset' or 'scenario'")
            session = manager.create_session(scenario, body.get("tick_rate"))
        except RollerSimError as exc:
            return Response(
                content=json.dumps(_error_payload(exc)),
                status_code=400,
                media_type="application/json",
            )
        return {
            "id": session.id,
            "tick_rate": session.tick_rate,
            "n_contacts": session.scenario.n_contacts,
            "speed_limit": session.scenario.speed_limit,
            "state": manager.state_message(session.id),
        }

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        try:
            manager.delete(session_id)
        except TeleopError as exc:
            return Response(
                content=json.dumps(_error_payload(exc)),
                status_code=404,
                media_type="application/json",
            )
        return {"deleted": session_id}

    @app.get("/sessions/{session_id}/trajectory.csv")
    def trajectory_csv(session_id: str):
        try:
            data = export_trajectory(manager.trajectory(session_id), "csv")
        except TeleopError as exc:
            return Response(
                content=json.dumps(_error_payload(exc)),
                status_code=404,
                media_type="application/json",
            )
        return Response(content=data, media_type="text/csv")

    @app.websocket("/ws/session/{session_id}")
    async def session_socket(ws: WebSocket, session_id: str):
        await ws.accept()
        try:
            manager.get(session_id)
        except TeleopError as exc:
            await ws.send_json(_error_payload(exc))
            await ws.close()
            return
        await ws.send_json(manager.state_message(session_id))

        async def pump_inbound():
            while True:
                text = await ws.receive_text()
                try:
                    message = json.loads(text)
                    reply = manager.handle_message(session_id, message)
                except RollerSimError as exc:
                    reply = _error_payload(exc)
                except json.JSONDecodeError as exc:
                    reply = _error_payload(ValidationError(f"bad JSON: {exc}"))
                await ws.send_json(reply)

        inbound = asyncio.create_task(pump_inbound())
        try:
            session = manager.get(session_id)
            while True:
                await asyncio.sleep(session.dt)
                if session_id not in manager.sessions:
                    break
                if session.paused:
                    continue
                try:
                    state = manager.tick(session_id)
                except SessionPaused:
                    continue
                except RollerSimError as exc:
                    await ws.send_json(_error_payload(exc))
                    continue
                await ws.send_json(state)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            inbound.cancel()

    return app


app = build_app()
