"""Dynamic bicycle model with linear tire forces and its forward-Euler discretization.

State ordering is ``z = (X, Y, v_lon, v_lat, yaw, yaw_rate)`` and input ordering is
``u = (steer, accel)``. All functions accept anything ``np.asarray`` understands,
including the ``VehicleState`` / ``ControlInput`` named tuples below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

V_MIN = 1.0  # [m/s] lower speed bound; slip angles divide by v_lon

NX = 6
NU = 2


class DegenerateSpeed(ValueError):
    """Longitudinal speed below the minimum at which slip angles are defined."""


class VehicleState(NamedTuple):
    X: float
    Y: float
    v_lon: float
    v_lat: float
    yaw: float
    yaw_rate: float


class ControlInput(NamedTuple):
    steer: float
    accel: float


class TireResponse(NamedTuple):
    alpha_f: float
    alpha_r: float
    f_yf: float
    f_yr: float


@dataclass(frozen=True)
class VehicleParams:
    """Vehicle constants; defaults describe a mid-size passenger car."""

    c_alpha_f: float = 156_000.0  # [N/rad]
    c_alpha_r: float = 193_000.0  # [N/rad]
    l_f: float = 1.04  # [m]
    l_r: float = 1.4  # [m]
    i_z: float = 2937.0  # [kg m^2]
    mass: float = 1919.0  # [kg]

    def __post_init__(self):
        for name in ("c_alpha_f", "c_alpha_r", "l_f", "l_r", "i_z", "mass"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value!r}")

    # derived quantities are properties so they can never go stale
    @property
    def beta_f(self) -> float:
        return 2.0 * self.c_alpha_f / self.mass

    @property
    def beta_r(self) -> float:
        return 2.0 * self.c_alpha_r / self.mass

    @property
    def gamma_f(self) -> float:
        return 2.0 * self.l_f * self.c_alpha_f / self.i_z

    @property
    def gamma_r(self) -> float:
        return 2.0 * self.l_r * self.c_alpha_r / self.i_z


def check_speed(v_lon: float, v_min: float = V_MIN) -> None:
    if not v_lon >= v_min:
        raise DegenerateSpeed(f"v_lon={v_lon!r} is below v_min={v_min}")


def tire_response(z, u, params: VehicleParams, v_min: float = V_MIN) -> TireResponse:
    _, _, vx, vy, _, r = (float(c) for c in z)
    steer = float(u[0])
    check_speed(vx, v_min)
    alpha_f = steer - (vy + params.l_f * r) / vx
    alpha_r = (params.l_r * r - vy) / vx
    return TireResponse(alpha_f, alpha_r, params.c_alpha_f * alpha_f, params.c_alpha_r * alpha_r)


def dynamics_continuous(z, u, params: VehicleParams, v_min: float = V_MIN) -> np.ndarray:
    """Time derivative of the state, returned as a length-6 array."""
    _, _, vx, vy, yaw, r = (float(c) for c in z)
    steer, accel = float(u[0]), float(u[1])
    tire = tire_response(z, u, params, v_min)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([
        vx * cy - vy * sy,
        vx * sy + vy * cy,
        r * vy + accel,
        -r * vx + 2.0 / params.mass * (tire.f_yf * math.cos(steer) + tire.f_yr),
        r,
        2.0 / params.i_z * (params.l_f * tire.f_yf - params.l_r * tire.f_yr),
    ])


def step_euler(z, u, params: VehicleParams, ts: float, v_min: float = V_MIN) -> np.ndarray:
    if not ts > 0:
        raise ValueError(f"ts must be positive, got {ts!r}")
    z = np.asarray(z, dtype=float)
    return z + ts * dynamics_continuous(z, u, params, v_min)


def jacobians_euler(z, u, params: VehicleParams, ts: float,
                    v_min: float = V_MIN) -> tuple[np.ndarray, np.ndarray]:
    """Analytic partial derivatives of :func:`step_euler` w.r.t. state and input.

    Returns ``(A, B)`` with ``A`` of shape (6, 6) and ``B`` of shape (6, 2).
    """
    if not ts > 0:
        raise ValueError(f"ts must be positive, got {ts!r}")
    _, _, vx, vy, yaw, r = (float(c) for c in z)
    steer = float(u[0])
    check_speed(vx, v_min)
    p = params
    cy, sy = math.cos(yaw), math.sin(yaw)
    cd, sd = math.cos(steer), math.sin(steer)
    alpha_f = steer - (vy + p.l_f * r) / vx
    fyf = p.c_alpha_f * alpha_f

    # slip-angle partials w.r.t. (vx, vy, r)
    daf = ((vy + p.l_f * r) / vx**2, -1.0 / vx, -p.l_f / vx)
    dar = (-(p.l_r * r - vy) / vx**2, -1.0 / vx, p.l_r / vx)

    jc = np.zeros((NX, NX))
    jc[0, 2], jc[0, 3], jc[0, 4] = cy, -sy, -vx * sy - vy * cy
    jc[1, 2], jc[1, 3], jc[1, 4] = sy, cy, vx * cy - vy * sy
    jc[2, 3], jc[2, 5] = r, vy
    k = 2.0 / p.mass
    for col, (df, dr) in zip((2, 3, 5), zip(daf, dar)):
        jc[3, col] = k * (p.c_alpha_f * df * cd + p.c_alpha_r * dr)
        jc[5, col] = 2.0 / p.i_z * (p.l_f * p.c_alpha_f * df - p.l_r * p.c_alpha_r * dr)
    jc[3, 2] += -r
    jc[3, 5] += -vx
    jc[4, 5] = 1.0

    bc = np.zeros((NX, NU))
    bc[3, 0] = k * (p.c_alpha_f * cd - fyf * sd)
    bc[5, 0] = 2.0 / p.i_z * p.l_f * p.c_alpha_f
    bc[2, 1] = 1.0
    return np.eye(NX) + ts * jc, ts * bc
