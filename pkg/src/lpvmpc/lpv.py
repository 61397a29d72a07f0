"""Exact LPV rewriting of the bicycle model.

The scheduling vector ``p = (v_lon, v_lat, steer, yaw)`` absorbs every nonlinearity,
so that with ``p`` taken from the current state/input, ``A(p) z + B(p) u`` equals one
forward-Euler step of the nonlinear model.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .vehicle import NU, NX, V_MIN, VehicleParams, check_speed


class SchedulingVector(NamedTuple):
    v_lon: float
    v_lat: float
    steer: float
    yaw: float


class LpvMatrices(NamedTuple):
    a: np.ndarray
    b: np.ndarray


def scheduling_from(z, u, v_min: float = V_MIN) -> SchedulingVector:
    check_speed(float(z[2]), v_min)
    return SchedulingVector(float(z[2]), float(z[3]), float(u[0]), float(z[4]))


def continuous_matrices(p, params: VehicleParams,
                        v_min: float = V_MIN) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-time ``(A_c, B_c)``; only the entries below are ever nonzero."""
    vx, vy, steer, yaw = (float(c) for c in p)
    check_speed(vx, v_min)
    bf, br, gf, gr = params.beta_f, params.beta_r, params.gamma_f, params.gamma_r
    lf, lr = params.l_f, params.l_r
    cd = math.cos(steer)
    cy, sy = math.cos(yaw), math.sin(yaw)

    ac = np.zeros((NX, NX))
    ac[0, 2], ac[0, 3] = cy, -sy
    ac[1, 2], ac[1, 3] = sy, cy
    ac[2, 5] = vy
    ac[3, 3] = -bf * cd / vx - br / vx
    ac[3, 5] = -vx - bf * cd / vx * lf + br / vx * lr
    ac[4, 5] = 1.0
    ac[5, 3] = (gr - gf) / vx
    ac[5, 5] = -(gf * lf + gr * lr) / vx

    bc = np.zeros((NX, NU))
    bc[3, 0] = bf * cd
    bc[5, 0] = gf
    bc[2, 1] = 1.0
    return ac, bc


def lpv_matrices(p, params: VehicleParams, ts: float, v_min: float = V_MIN) -> LpvMatrices:
    if not ts >= 0:
        raise ValueError(f"ts must be non-negative, got {ts!r}")
    ac, bc = continuous_matrices(p, params, v_min)
    return LpvMatrices(np.eye(NX) + ts * ac, ts * bc)


def lpv_step(z, u, p, params: VehicleParams, ts: float, v_min: float = V_MIN) -> np.ndarray:
    a, b = lpv_matrices(p, params, ts, v_min)
    return a @ np.asarray(z, dtype=float) + b @ np.asarray(u, dtype=float)
