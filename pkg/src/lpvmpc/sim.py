"""Closed-loop simulation of the nonlinear plant under either controller."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import MpcConfig
from .constraints import ObstacleCircle, lateral_error, obstacle_clearance
from .controller import QpFailure, brake_fallback
from .lpvmpc import LpvMpcController
from .nmpc import NmpcController, SqpSettings
from .reference import ReferencePath, RoadSpec, generate_sine_road
from .vehicle import DegenerateSpeed, VehicleParams, step_euler

log = logging.getLogger(__name__)

CONTROLLERS = ("lpvmpc", "nmpc")
ROAD_TOL = 0.05  # [m] allowance on the soft road rows when counting violations


class ScenarioError(ValueError):
    pass


class EmptyRecord(ValueError):
    pass


@dataclass
class Scenario:
    road: RoadSpec = field(default_factory=RoadSpec)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    sqp: SqpSettings = field(default_factory=SqpSettings)
    controller: str = "both"
    obstacles: list = field(default_factory=list)
    initial_state: tuple = (0.0, 0.0, 10.0, 0.0, 0.0, 0.0)
    duration: int = 400
    substeps: int = 1
    transient_steps: int = 20
    parallel: bool = False
    initial_noise: tuple = (0.0, 0.0, 0.0)  # std of (X, Y, yaw) perturbation
    seed: Optional[int] = None
    name: str = "scenario"

    def validate(self) -> None:
        if self.controller not in CONTROLLERS + ("both",):
            raise ScenarioError(f"unknown controller {self.controller!r}")
        if len(self.obstacles) > 1:
            raise ScenarioError("at most one obstacle is supported")
        if self.duration < 0:
            raise ScenarioError("duration must be non-negative")
        if self.substeps < 1:
            raise ScenarioError("substeps must be at least 1")
        if len(self.initial_state) != 6:
            raise ScenarioError("initial_state needs 6 entries")
        if (self.road.r1, self.road.r2) != (self.mpc.r1, self.mpc.r2):
            raise ScenarioError("road and controller road widths differ")
        if abs(self.road.ts - self.mpc.ts) > 1e-12:
            raise ScenarioError("road and controller sampling times differ")
        try:
            self.road.validate()
            self.mpc.validate()
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc

    @property
    def obstacle(self) -> Optional[ObstacleCircle]:
        return self.obstacles[0] if self.obstacles else None

    def selected(self) -> list[str]:
        return list(CONTROLLERS) if self.controller == "both" else [self.controller]

    def start_state(self) -> np.ndarray:
        z0 = np.array(self.initial_state, dtype=float)
        noise = np.asarray(self.initial_noise, dtype=float)
        if np.any(noise > 0):
            rng = np.random.default_rng(self.seed)
            z0[[0, 1, 4]] += rng.normal(0.0, 1.0, 3) * noise
        return z0


RECORD_COLUMNS = ("k", "X", "Y", "v_lon", "v_lat", "yaw", "yaw_rate", "steer", "accel",
                  "solve_time", "status", "lateral_error", "obstacle_distance", "ref_index",
                  "arc_length", "iterations", "fallback")


@dataclass
class RunRecord:
    controller: str
    states: np.ndarray  # (T, 6), state at the start of each step
    inputs: np.ndarray  # (T, 2), applied input
    solve_times: np.ndarray
    statuses: list
    lateral_errors: np.ndarray
    obstacle_distances: np.ndarray  # distance to obstacle center, inf if none
    ref_indices: np.ndarray
    arc_lengths: np.ndarray
    iterations: np.ndarray
    fallbacks: np.ndarray  # bool
    final_state: Optional[np.ndarray] = None
    metrics: Optional["Metrics"] = None
    qp_dumps: list = field(default_factory=list)

    def __len__(self):
        return len(self.states)

    def rows(self):
        for k in range(len(self)):
            yield (k, *self.states[k], *self.inputs[k], self.solve_times[k], self.statuses[k],
                   self.lateral_errors[k], self.obstacle_distances[k], self.ref_indices[k],
                   self.arc_lengths[k], int(self.iterations[k]), int(self.fallbacks[k]))


@dataclass
class Metrics:
    steps: int
    solve_time_avg: float
    solve_time_max: float
    solve_time_min: float
    rmse: float
    max_lateral_left: float
    max_lateral_right: float
    min_clearance: float
    input_violations: int
    road_violations: int
    obstacle_violations: int
    fallbacks: int

    @property
    def constraint_violations(self) -> int:
        return self.input_violations + self.road_violations + self.obstacle_violations

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["constraint_violations"] = self.constraint_violations
        return out


def make_controller(kind: str, scenario: Scenario, z0):
    if kind == "lpvmpc":
        return LpvMpcController(z0, scenario.mpc, scenario.vehicle)
    if kind == "nmpc":
        return NmpcController(z0, scenario.mpc, scenario.vehicle, scenario.sqp)
    raise ScenarioError(f"unknown controller {kind!r}")


def _plant_step(z, u, scenario: Scenario) -> np.ndarray:
    h = scenario.mpc.ts / scenario.substeps
    for _ in range(scenario.substeps):
        z = step_euler(z, u, scenario.vehicle, h, scenario.mpc.v_min)
    return z


def run_single(scenario: Scenario, kind: str, path: Optional[ReferencePath] = None,
               dump_qp: bool = False) -> RunRecord:
    scenario.validate()
    if path is None:
        path = ReferencePath(generate_sine_road(scenario.road), scenario.mpc.ts)
    cfg = scenario.mpc
    obs = scenario.obstacle
    z = scenario.start_state()
    controller = make_controller(kind, scenario, z)
    T = scenario.duration

    states = np.zeros((T, 6))
    inputs = np.zeros((T, 2))
    times = np.zeros(T)
    lat = np.zeros(T)
    dist = np.full(T, math.inf)
    idxs = np.zeros(T)
    arcs = np.zeros(T)
    iters = np.zeros(T, dtype=int)
    fb = np.zeros(T, dtype=bool)
    statuses: list = []
    dumps = []

    idx = path.project(z[0], z[1])
    n_done = 0
    for k in range(T):
        idx = path.project(z[0], z[1], hint=idx)
        if idx + cfg.horizon > len(path) - 1:
            log.warning("%s: reference exhausted at step %d", kind, k)
            break
        refs = path.window(idx, cfg.horizon)
        here = path.interpolate(idx)
        here[4] = path.segment_yaw(idx)

        try:
            result = controller.step(z, refs, obs)
            u = result.applied
            status = result.status
            times[k] = result.solve_time
            iters[k] = result.iterations
            if dump_qp and result.qp is not None:
                qp = result.qp
                dumps.append((k, qp.H, qp.f, qp.G, qp.h))
        except (QpFailure, DegenerateSpeed, np.linalg.LinAlgError) as exc:
            log.warning("%s: controller failure at step %d: %s", kind, k, exc)
            u = brake_fallback(controller.u_prev, cfg)
            controller.u_prev = u
            status = getattr(exc, "status", type(exc).__name__)
            fb[k] = True

        states[k] = z
        inputs[k] = u
        statuses.append(status)
        lat[k] = lateral_error(z, here)
        if obs is not None:
            dist[k] = math.hypot(z[0] - obs.cx, z[1] - obs.cy)
        idxs[k] = idx
        arcs[k] = path.arc_length(idx)
        n_done = k + 1
        try:
            z = _plant_step(z, u, scenario)
        except DegenerateSpeed as exc:
            raise ScenarioError(f"plant left the valid speed range at step {k}: {exc}") from exc

    record = RunRecord(kind, states[:n_done], inputs[:n_done], times[:n_done], statuses,
                       lat[:n_done], dist[:n_done], idxs[:n_done], arcs[:n_done],
                       iters[:n_done], fb[:n_done], final_state=z, qp_dumps=dumps)
    # the first solve carries one-off warm-up costs
    record.metrics = compute_metrics(record, scenario, warmup=1) if n_done else empty_metrics()
    return record


def run(scenario: Scenario, dump_qp: bool = False) -> dict[str, RunRecord]:
    """Run every selected controller on the same scenario; returns records by name."""
    scenario.validate()
    path = ReferencePath(generate_sine_road(scenario.road), scenario.mpc.ts)
    kinds = scenario.selected()
    if scenario.parallel and len(kinds) > 1:
        with ThreadPoolExecutor(max_workers=len(kinds)) as pool:
            futures = {k: pool.submit(run_single, scenario, k, path, dump_qp) for k in kinds}
            return {k: f.result() for k, f in futures.items()}
    return {k: run_single(scenario, k, path, dump_qp) for k in kinds}


def empty_metrics() -> Metrics:
    nan = float("nan")
    return Metrics(0, nan, nan, nan, nan, nan, nan, math.inf, 0, 0, 0, 0)


def compute_metrics(record: RunRecord, scenario: Scenario, warmup: int = 0) -> Metrics:
    """Aggregate a record; the first ``warmup`` solve times are left out of the timing."""
    n = len(record)
    if n == 0:
        raise EmptyRecord("cannot compute metrics of an empty record")
    cfg = scenario.mpc
    t = record.solve_times[warmup:] if n > warmup else record.solve_times
    tail = record.lateral_errors[min(scenario.transient_steps, n - 1):]
    rmse = float(np.sqrt(np.mean(tail**2)))

    lat = record.lateral_errors
    road_bad = (lat < -scenario.road.r1 - ROAD_TOL) | (lat > scenario.road.r2 + ROAD_TOL)

    u = record.inputs
    prev = np.vstack([np.zeros(2), u[:-1]])
    du = u - prev
    bad_u = np.any((u < cfg.input_lo) | (u > cfg.input_hi), axis=1)
    bad_du = np.any((du < cfg.rate_lo) | (du > cfg.rate_hi), axis=1)

    obs = scenario.obstacle
    if obs is None:
        clearance = math.inf
        obs_bad = 0
    else:
        pts = record.states[:, :2]
        if record.final_state is not None:
            pts = np.vstack([pts, record.final_state[:2]])
        gaps = obstacle_clearance(obs, pts[:, 0], pts[:, 1])
        clearance = float(np.min(gaps))
        obs_bad = int(np.sum(gaps < 0))

    return Metrics(
        steps=n,
        solve_time_avg=float(np.mean(t)),
        solve_time_max=float(np.max(t)),
        solve_time_min=float(np.min(t)),
        rmse=rmse,
        max_lateral_left=float(max(np.max(lat), 0.0)),
        max_lateral_right=float(max(-np.min(lat), 0.0)),
        min_clearance=clearance,
        input_violations=int(np.sum(bad_u | bad_du)),
        road_violations=int(np.sum(road_bad)),
        obstacle_violations=obs_bad,
        fallbacks=int(np.sum(record.fallbacks)),
    )
