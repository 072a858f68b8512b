"""Scenario files, command schedules, and trajectory export.

Scenarios are JSON (UTF-8, SI units, radians; any angle field accepts a
"_deg"-suffixed alternative on input). Trajectories export as CSV with a
fixed header or as JSON lines; floats are written with 17 significant
digits so a round-trip reproduces identical binary values.
"""

from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import BeltCommand, RollerContact
from .equilibrium import SolverMode, SolverOptions
from .errors import ParseError, ValidationError
from .geometry import as_vec3
from .scenario import Scenario, SimConfig, preset_names, preset_scenario
from .shapes import Box, Cylinder, MountSpec, RadiusMode, Sphere, rr_contact_from_mount
from .simulator import ObjectState, Trajectory, TrajectorySample

logger = logging.getLogger(__name__)

SCENARIO_VERSION = 1

CSV_FLOAT = "%.17g"


def _fmt(x: float) -> str:
    return CSV_FLOAT % float(x)


# ---------------------------------------------------------------------------
# Scenario loading

def _reject_unknown(obj: dict, allowed: set, where: str, strict: bool):
    unknown = set(obj) - allowed
    if unknown:
        msg = f"unknown fields in {where}: {sorted(unknown)}"
        if strict:
            raise ValidationError(msg)
        logger.warning("%s (ignored in lenient mode)", msg)


def _angle_field(obj: dict, name: str, default: float) -> float:
    """Radians, with an accepted <name>_deg alternative."""
    if name in obj and f"{name}_deg" in obj:
        raise ValidationError(f"give either {name} or {name}_deg, not both")
    if f"{name}_deg" in obj:
        return math.radians(float(obj[f"{name}_deg"]))
    return float(obj.get(name, default))


def _shape_from_json(obj: dict, strict: bool):
    kind = obj.get("kind")
    offset = obj.get("center_offset", [0.0, 0.0, 0.0])
    if kind == "sphere":
        _reject_unknown(obj, {"kind", "radius", "center_offset"}, "shape", strict)
        return Sphere(float(obj["radius"]), as_vec3(offset))
    if kind == "box":
        _reject_unknown(obj, {"kind", "half_extents", "center_offset"}, "shape", strict)
        return Box(as_vec3(obj["half_extents"]), as_vec3(offset))
    if kind == "cylinder":
        _reject_unknown(
            obj, {"kind", "radius", "half_height", "center_offset"}, "shape", strict
        )
        return Cylinder(float(obj["radius"]), float(obj["half_height"]), as_vec3(offset))
    raise ValidationError(f"unknown shape kind {kind!r}")


def _shape_to_json(shape) -> dict:
    if isinstance(shape, Sphere):
        return {"kind": "sphere", "radius": shape.radius,
                "center_offset": list(shape.center_offset)}
    if isinstance(shape, Box):
        return {"kind": "box", "half_extents": list(shape.half_extents),
                "center_offset": list(shape.center_offset)}
    if isinstance(shape, Cylinder):
        return {"kind": "cylinder", "radius": shape.radius,
                "half_height": shape.half_height,
                "center_offset": list(shape.center_offset)}
    raise ValidationError(f"unsupported shape {type(shape).__name__}")


def _contact_from_json(obj: dict, shape, strict: bool) -> RollerContact:
    force = float(obj.get("normal_force", 1.0))
    friction = float(obj.get("friction", 1.0))
    if "mount" in obj:
        _reject_unknown(obj, {"mount", "normal_force", "friction"}, "contact", strict)
        m = obj["mount"]
        _reject_unknown(
            m, {"finger_axis", "contact_point", "surface_angle", "surface_angle_deg"},
            "contact.mount", strict,
        )
        mount = MountSpec(
            finger_axis=as_vec3(m["finger_axis"]),
            contact_point=as_vec3(m["contact_point"]),
            surface_angle=_angle_field(m, "surface_angle", math.pi / 6.0),
        )
        return rr_contact_from_mount(mount, shape, force, friction)
    _reject_unknown(
        obj, {"position", "belt_dir", "normal_force", "friction"}, "contact", strict
    )
    return RollerContact(
        position=as_vec3(obj["position"]),
        belt_dir=as_vec3(obj["belt_dir"]),
        normal_force=force,
        friction=friction,
    )


_SOLVER_FIELDS = {f.name for f in fields(SolverOptions)}
_SIM_FIELDS = {f.name for f in fields(SimConfig)}


def _solver_from_json(obj: dict, strict: bool) -> SolverOptions:
    _reject_unknown(obj, _SOLVER_FIELDS, "solver", strict)
    kwargs = {k: v for k, v in obj.items() if k in _SOLVER_FIELDS}
    if "mode" in kwargs:
        kwargs["mode"] = SolverMode(kwargs["mode"])
    return SolverOptions(**kwargs)


def _sim_from_json(obj: dict, strict: bool) -> SimConfig:
    _reject_unknown(obj, _SIM_FIELDS, "sim", strict)
    return SimConfig(**{k: v for k, v in obj.items() if k in _SIM_FIELDS})


_TOP_FIELDS = {
    "version", "preset", "name", "shape", "contacts", "speed_limit",
    "solver", "sim", "radius_mode",
}


def load_scenario(source, strict: bool = True) -> Scenario:
    """Load a scenario from a path, JSON text, or file object.

    Unknown fields are rejected (strict) or warned about (lenient). A
    top-level {"preset": name} resolves a named preset, with any other
    fields overriding its settings.
    """
    text = _read_source(source)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scenario JSON is malformed: {exc.msg} "
                         f"(byte offset {exc.pos})", position=exc.pos) from exc
    if not isinstance(obj, dict):
        raise ValidationError("scenario file must be a JSON object")
    _reject_unknown(obj, _TOP_FIELDS, "scenario", strict)

    version = obj.get("version", SCENARIO_VERSION)
    if version != SCENARIO_VERSION:
        raise ValidationError(f"unsupported scenario version {version}")

    if "preset" in obj:
        base = preset_scenario(obj["preset"])
        overrides = {}
        if "speed_limit" in obj:
            overrides["speed_limit"] = float(obj["speed_limit"])
        if "solver" in obj:
            overrides["solver"] = _solver_from_json(obj["solver"], strict)
        if "sim" in obj:
            overrides["sim"] = _sim_from_json(obj["sim"], strict)
        if "radius_mode" in obj:
            overrides["radius_mode"] = RadiusMode(obj["radius_mode"])
        if "name" in obj:
            overrides["name"] = obj["name"]
        return replace(base, **overrides) if overrides else base

    for required in ("contacts", "speed_limit"):
        if required not in obj:
            raise ValidationError(f"scenario is missing required field {required!r}")
    shape = _shape_from_json(obj["shape"], strict) if "shape" in obj else Sphere(1.0)
    contacts = tuple(
        _contact_from_json(c, shape, strict) for c in obj["contacts"]
    )
    return Scenario(
        contacts=contacts,
        speed_limit=float(obj["speed_limit"]),
        shape=shape,
        solver=_solver_from_json(obj.get("solver", {}), strict),
        sim=_sim_from_json(obj.get("sim", {}), strict),
        radius_mode=RadiusMode(obj.get("radius_mode", "axis_distance")),
        name=obj.get("name"),
    )


def save_scenario(scenario: Scenario) -> str:
    """Serialize a scenario to JSON text; load(save(x)) == x field-wise."""
    obj = {
        "version": SCENARIO_VERSION,
        "shape": _shape_to_json(scenario.shape),
        "contacts": [
            {
                "position": list(c.position),
                "belt_dir": list(c.belt_dir),
                "normal_force": c.normal_force,
                "friction": c.friction,
            }
            for c in scenario.contacts
        ],
        "speed_limit": scenario.speed_limit,
        "solver": {**asdict(scenario.solver), "mode": scenario.solver.mode.value},
        "sim": asdict(scenario.sim),
        "radius_mode": scenario.radius_mode.value,
    }
    if scenario.name is not None:
        obj["name"] = scenario.name
    return json.dumps(obj, indent=2)


def _read_source(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8")
    if isinstance(source, str):
        stripped = source.lstrip()
        if stripped.startswith("{") or stripped.startswith("["):
            return source
        return Path(source).read_text(encoding="utf-8")
    raise ValidationError(f"cannot read scenario from {type(source).__name__}")


# ---------------------------------------------------------------------------
# Command schedules

def load_schedule(source, scenario: Scenario) -> list[tuple[BeltCommand, float]]:
    """Schedule file: JSON list of {"speeds": [...], "duration": seconds}."""
    text = _read_source(source)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"schedule JSON is malformed: {exc.msg} "
                         f"(byte offset {exc.pos})", position=exc.pos) from exc
    if not isinstance(obj, list):
        raise ValidationError("schedule must be a JSON list")
    out = []
    for i, item in enumerate(obj):
        _reject_unknown(item, {"speeds", "duration"}, f"schedule[{i}]", strict=True)
        try:
            cmd = scenario.command(item["speeds"])
        except KeyError:
            raise ValidationError(f"schedule[{i}] is missing 'speeds'") from None
        duration = float(item["duration"])
        if not (duration > 0):
            raise ValidationError(f"schedule[{i}] duration must be > 0")
        out.append((cmd, duration))
    return out


# ---------------------------------------------------------------------------
# Trajectory export

def trajectory_header(n_contacts: int) -> list[str]:
    return (
        ["t", "qw", "qx", "qy", "qz", "px", "py", "pz",
         "wx", "wy", "wz", "vx", "vy", "vz"]
        + [f"slip_{i}" for i in range(n_contacts)]
        + ["dissipation"]
    )


def export_trajectory(trajectory: Trajectory, format: str = "csv") -> bytes:
    """Serialize a trajectory as CSV (fixed header) or JSON lines."""
    if not trajectory.samples:
        raise ValidationError("cannot export an empty trajectory")
    n = len(trajectory.samples[0].slip_speeds)
    if format == "csv":
        buf = io.StringIO()
        buf.write(",".join(trajectory_header(n)) + "\n")
        for s in trajectory.samples:
            row = (
                [s.state.t, *s.state.orientation, *s.state.position,
                 *s.omega, *s.v, *s.slip_speeds, s.dissipation]
            )
            buf.write(",".join(_fmt(x) for x in row) + "\n")
        return buf.getvalue().encode("utf-8")
    if format == "jsonl":
        lines = []
        for s in trajectory.samples:
            lines.append(json.dumps({
                "t": s.state.t,
                "quat": list(s.state.orientation),
                "pos": list(s.state.position),
                "omega": list(s.omega),
                "v": list(s.v),
                "slip": list(s.slip_speeds),
                "dissipation": s.dissipation,
            }))
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValidationError(f"unknown trajectory format {format!r}")


def load_trajectory(data: bytes, format: str = "csv") -> Trajectory:
    """Inverse of export_trajectory (lossless for CSV and JSONL)."""
    text = data.decode("utf-8")
    samples = []
    if format == "csv":
        lines = [ln for ln in text.splitlines() if ln]
        if not lines:
            raise ParseError("empty trajectory CSV", position=0)
        header = lines[0].split(",")
        n = sum(1 for h in header if h.startswith("slip_"))
        if header != trajectory_header(n):
            raise ValidationError("unexpected trajectory CSV header")
        for ln in lines[1:]:
            vals = [float(x) for x in ln.split(",")]
            t = vals[0]
            state = ObjectState(np.array(vals[1:5]), np.array(vals[5:8]), t)
            samples.append(TrajectorySample(
                state,
                np.array(vals[8:11]),
                np.array(vals[11:14]),
                np.array(vals[14:14 + n]),
                vals[14 + n],
            ))
    elif format == "jsonl":
        for ln in text.splitlines():
            if not ln:
                continue
            obj = json.loads(ln)
            state = ObjectState(np.array(obj["quat"]), np.array(obj["pos"]), obj["t"])
            samples.append(TrajectorySample(
                state, np.array(obj["omega"]), np.array(obj["v"]),
                np.array(obj["slip"]), obj["dissipation"],
            ))
    else:
        raise ValidationError(f"unknown trajectory format {format!r}")
    if not samples:
        raise ParseError("trajectory contains no samples", position=0)
    dt = samples[1].t - samples[0].t if len(samples) > 1 else 0.0
    return Trajectory(samples, dt)


__all__ = [
    "load_scenario", "save_scenario", "load_schedule",
    "export_trajectory", "load_trajectory", "trajectory_header",
    "preset_names",
]
