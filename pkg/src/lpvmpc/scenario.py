"""JSON scenario files: schema, defaults and conversion to :class:`Scenario`.

A file has up to five sections (``road``, ``vehicle``, ``mpc``, ``obstacle``,
``run``). Every key is optional; omitted keys take the library defaults, unknown
keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .config import MpcConfig
from .constraints import ObstacleCircle
from .nmpc import SqpSettings
from .reference import RoadSpec
from .sim import CONTROLLERS, Scenario, ScenarioError
from .vehicle import VehicleParams

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT1 = {"type": "integer", "minimum": 1}


def _vec(n):
    return {"type": "array", "items": _NUM, "minItems": n, "maxItems": n}


def _section(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


# a weight is either its diagonal or the full matrix
def _weight(n):
    return {"oneOf": [_vec(n), {"type": "array", "items": _vec(n), "minItems": n, "maxItems": n}]}


SCHEMA = _section({
    "road": _section({
        "amplitude": _NUM,
        "wavelength": _POS,
        "length": _POS,
        "phase": _NUM,
        "offset": _NUM,
        "speed_profile": {"type": "array", "minItems": 1, "items": _vec(2)},
        "ts": _POS,
        "r1": _POS,
        "r2": _POS,
    }),
    "vehicle": _section({k: _POS for k in ("c_alpha_f", "c_alpha_r", "l_f", "l_r", "i_z", "mass")}),
    "mpc": _section({
        "horizon": _INT1,
        "ts": _POS,
        "Q": _weight(6),
        "R": _weight(2),
        "P": _weight(6),
        "state_lo": _vec(6),
        "state_hi": _vec(6),
        "input_lo": _vec(2),
        "input_hi": _vec(2),
        "rate_lo": _vec(2),
        "rate_hi": _vec(2),
        "soft_weight": _POS,
        "qp_tol": _POS,
        "qp_max_iter": _INT1,
        "v_min": _POS,
        "sqp": _section({
            "max_iter": _INT1,
            "tol": _POS,
            "backtrack": _POS,
            "armijo": _POS,
            "min_step": _POS,
            "trust_radius": {"oneOf": [_POS, {"type": "null"}]},
            "penalty_init": _POS,
        }),
    }),
    "obstacle": {"oneOf": [
        {"type": "null"},
        _section({"x": _NUM, "y": _NUM, "radius": _POS,
                  "margin": {"type": "number", "minimum": 0}}, required=("x", "y")),
    ]},
    "run": _section({
        "name": {"type": "string"},
        "controller": {"enum": list(CONTROLLERS) + ["both"]},
        "duration": {"type": "integer", "minimum": 0},
        "initial_state": _vec(6),
        "substeps": _INT1,
        "transient_steps": {"type": "integer", "minimum": 0},
        "parallel": {"type": "boolean"},
        "initial_noise": _vec(3),
        "seed": {"oneOf": [{"type": "integer"}, {"type": "null"}]},
    }),
})


def _matrix(value):
    arr = np.asarray(value, dtype=float)
    return np.diag(arr) if arr.ndim == 1 else arr


def scenario_from_dict(doc: dict) -> Scenario:
    """Validate ``doc`` against :data:`SCHEMA` and build the scenario."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {exc.message}") from None

    road_doc = dict(doc.get("road", {}))
    if "speed_profile" in road_doc:
        road_doc["speed_profile"] = [tuple(k) for k in road_doc["speed_profile"]]
    mpc_doc = dict(doc.get("mpc", {}))
    sqp = SqpSettings(**mpc_doc.pop("sqp", {}))
    for key in ("Q", "R", "P"):
        if key in mpc_doc:
            mpc_doc[key] = _matrix(mpc_doc[key])
    run_doc = dict(doc.get("run", {}))
    for key in ("initial_state", "initial_noise"):
        if key in run_doc:
            run_doc[key] = tuple(run_doc[key])
    obs_doc = doc.get("obstacle")
    obstacles = []
    if obs_doc is not None:
        obstacles.append(ObstacleCircle(obs_doc["x"], obs_doc["y"], obs_doc.get("radius", 1.0),
                                        obs_doc.get("margin", 0.0)))
    try:
        road = RoadSpec(**road_doc)
        # the road sampling time follows the controller unless set explicitly
        if "ts" in mpc_doc and "ts" not in road_doc:
            road.ts = mpc_doc["ts"]
        if "ts" in road_doc and "ts" not in mpc_doc:
            mpc_doc["ts"] = road_doc["ts"]
        mpc_doc["r1"], mpc_doc["r2"] = road.r1, road.r2
        scenario = Scenario(road=road, vehicle=VehicleParams(**doc.get("vehicle", {})),
                            mpc=MpcConfig(**mpc_doc), sqp=sqp, obstacles=obstacles, **run_doc)
        scenario.validate()
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from exc
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    return scenario_from_dict(doc)


def _plain(value):
    return value.tolist() if isinstance(value, np.ndarray) else value


def scenario_to_dict(scenario: Scenario) -> dict:
    """Inverse of :func:`scenario_from_dict`; the result round-trips exactly."""
    # road widths live in the road section only
    mpc = {k: _plain(v) for k, v in asdict(scenario.mpc).items() if k not in ("r1", "r2")}
    mpc["sqp"] = asdict(scenario.sqp)
    road = asdict(scenario.road)
    road["speed_profile"] = [list(k) for k in scenario.road.speed_profile]
    obs = scenario.obstacle
    return {
        "road": road,
        "vehicle": asdict(scenario.vehicle),
        "mpc": mpc,
        "obstacle": None if obs is None else
        {"x": obs.cx, "y": obs.cy, "radius": obs.radius, "margin": obs.margin},
        "run": {
            "name": scenario.name,
            "controller": scenario.controller,
            "duration": scenario.duration,
            "initial_state": list(scenario.initial_state),
            "substeps": scenario.substeps,
            "transient_steps": scenario.transient_steps,
            "parallel": scenario.parallel,
            "initial_noise": list(scenario.initial_noise),
            "seed": scenario.seed,
        },
    }


def shipped_scenario_path(name: str) -> Path:
    """Path of a bundled scenario file, e.g. ``"scenario_rt.json"``."""
    return Path(str(resources.files("lpvmpc") / "scenarios" / name))


def shipped_scenario(name: str) -> Scenario:
    return load_scenario(shipped_scenario_path(name))
