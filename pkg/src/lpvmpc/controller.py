"""Common controller result type and helpers used by both MPC schemes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .reference import wrap_angle


class QpFailure(RuntimeError):
    def __init__(self, status, message: str = ""):
        super().__init__(message or f"QP solve failed with status {status}")
        self.status = status


@dataclass
class ControllerStepResult:
    applied: np.ndarray  # (steer, accel)
    predicted_states: np.ndarray  # z_{1..N|k}, shape (N, 6)
    predicted_inputs: np.ndarray  # u_{0..N-1|k}, shape (N, 2)
    status: str
    solve_time: float
    active_obstacle_steps: list = field(default_factory=list)
    iterations: int = 0
    max_slack: float = 0.0
    qp: object = None  # last QP solved, kept for optional dumps


def unwrap_reference_yaw(refs: np.ndarray, yaw_now: float) -> np.ndarray:
    """Shift reference headings by multiples of 2*pi to follow the current yaw.

    The cost is quadratic in the raw yaw, so the references must sit on the same
    branch as the predicted states.
    """
    refs = np.array(refs, dtype=float, copy=True)
    yaw = refs[:, 4]
    out = np.empty_like(yaw)
    out[0] = yaw_now + wrap_angle(yaw[0] - yaw_now)
    for i in range(1, len(yaw)):
        out[i] = out[i - 1] + wrap_angle(yaw[i] - yaw[i - 1])
    refs[:, 4] = out
    return refs


def project_input(u, u_prev, cfg) -> np.ndarray:
    """Clip ``u`` into the input box intersected with the rate window around ``u_prev``.

    Interior-point iterates may sit a hair outside hard bounds; applied inputs
    are made to satisfy them exactly.
    """
    lo = np.maximum(cfg.input_lo, np.asarray(u_prev) + cfg.rate_lo)
    hi = np.minimum(cfg.input_hi, np.asarray(u_prev) + cfg.rate_hi)
    return np.minimum(np.maximum(np.asarray(u, dtype=float), lo), hi)


def brake_fallback(u_prev, cfg) -> np.ndarray:
    """Hold the previous steering and brake as hard as the rate limit allows."""
    u_prev = np.asarray(u_prev, dtype=float)
    target = np.array([u_prev[0], cfg.input_lo[1]])
    return project_input(target, u_prev, cfg)
