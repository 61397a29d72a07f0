"""Road and obstacle geometry turned into per-step linear inequalities.

A :class:`HalfSpace` ``(a, b, c)`` is the safe set ``a*X + b*Y >= c`` with a unit
normal ``(a, b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

CENTER_TIE_TOL = 1e-6  # [m]
BOUNDARY_TOL = 1e-9  # [m] points this close to the circle count as on it


class HalfSpace(NamedTuple):
    a: float
    b: float
    c: float

    @classmethod
    def from_normal(cls, nx: float, ny: float, c: float) -> "HalfSpace":
        norm = math.hypot(nx, ny)
        if norm == 0.0:
            raise ValueError("half-space normal must be nonzero")
        return cls(nx / norm, ny / norm, c / norm)

    def value(self, x, y):
        """Signed margin ``a*x + b*y - c``; non-negative on the safe side."""
        return self.a * np.asarray(x) + self.b * np.asarray(y) - self.c

    def contains(self, x, y, tol: float = 0.0):
        return self.value(x, y) >= -tol


@dataclass(frozen=True)
class ObstacleCircle:
    cx: float
    cy: float
    radius: float = 1.0
    margin: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")
        if not self.margin >= 0:
            raise ValueError("obstacle margin must be non-negative")

    @property
    def inflated(self) -> float:
        return self.radius + self.margin


@dataclass
class StepConstraints:
    road_right: HalfSpace
    road_left: HalfSpace
    obstacle: Optional[HalfSpace]
    state_lo: np.ndarray
    state_hi: np.ndarray
    input_lo: Optional[np.ndarray] = None
    input_hi: Optional[np.ndarray] = None
    rate_lo: Optional[np.ndarray] = None
    rate_hi: Optional[np.ndarray] = None

    def halfspaces(self) -> list[HalfSpace]:
        hs = [self.road_right, self.road_left]
        if self.obstacle is not None:
            hs.append(self.obstacle)
        return hs


def lateral_error(z, ref) -> float:
    yaw = float(ref[4])
    return (-math.sin(yaw) * (float(z[0]) - float(ref[0]))
            + math.cos(yaw) * (float(z[1]) - float(ref[1])))


def road_halfspaces(ref, r1: float, r2: float) -> tuple[HalfSpace, HalfSpace]:
    """Right and left road-edge half-spaces at a reference point.

    Together they hold exactly when the lateral error lies in ``[-r1, r2]``.
    """
    if not (r1 > 0 and r2 > 0):
        raise ValueError("road widths must be positive")
    xr, yr, yaw = float(ref[0]), float(ref[1]), float(ref[4])
    nx, ny = -math.sin(yaw), math.cos(yaw)  # left normal
    base = nx * xr + ny * yr
    right = HalfSpace(nx, ny, base - r1)
    left = HalfSpace(-nx, -ny, -(base + r2))
    return right, left


def tangent_at(obs: ObstacleCircle, direction) -> HalfSpace:
    """Half-space tangent to the inflated circle at ``center + R * direction``."""
    nx, ny = float(direction[0]), float(direction[1])
    norm = math.hypot(nx, ny)
    nx, ny = nx / norm, ny / norm
    qx, qy = obs.cx + obs.inflated * nx, obs.cy + obs.inflated * ny
    return HalfSpace(nx, ny, nx * qx + ny * qy)


def obstacle_tangent(obs: ObstacleCircle, ref_point,
                     ref_yaw: float | None = None) -> Optional[HalfSpace]:
    """Tangent half-space for a reference point inside the inflated obstacle.

    Returns ``None`` when the point is outside (constraint inactive). The tangent
    point is the radial projection of the reference point onto the circle; if the
    point sits on the center the road's left normal (from ``ref_yaw``) is used.
    """
    dx = float(ref_point[0]) - obs.cx
    dy = float(ref_point[1]) - obs.cy
    dist = math.hypot(dx, dy)
    if dist > obs.inflated + BOUNDARY_TOL:
        return None
    if dist < CENTER_TIE_TOL:
        yaw = 0.0 if ref_yaw is None else float(ref_yaw)
        dx, dy = -math.sin(yaw), math.cos(yaw)
    return tangent_at(obs, (dx, dy))


def obstacle_linearization(obs: ObstacleCircle, x: float, y: float,
                           fallback_yaw: float = 0.0) -> HalfSpace:
    """First-order model of ``||p - center|| >= R`` around ``(x, y)``.

    The distance is linearised rather than its square: the result is the tangent
    half-space at the radial projection of ``(x, y)``, for any ``(x, y)``.
    """
    dx, dy = x - obs.cx, y - obs.cy
    if math.hypot(dx, dy) < CENTER_TIE_TOL:
        dx, dy = -math.sin(fallback_yaw), math.cos(fallback_yaw)
    return tangent_at(obs, (dx, dy))


def obstacle_clearance(obs: ObstacleCircle, x, y):
    return np.hypot(np.asarray(x) - obs.cx, np.asarray(y) - obs.cy) - obs.radius


@dataclass
class ConstraintConfig:
    """Box, rate and road limits shared by both controllers."""

    r1: float = 1.0
    r2: float = 4.0
    state_lo: np.ndarray = field(default_factory=lambda: np.array(
        [-1.0, -1.0, 1.0, -10.0, -math.pi / 2, -math.pi / (4 * 0.05)]))
    state_hi: np.ndarray = field(default_factory=lambda: np.array(
        [150.0, 120.0, 100.0, 10.0, math.pi / 2, math.pi / (4 * 0.05)]))
    input_lo: np.ndarray = field(default_factory=lambda: np.array([-34 * math.pi / 180, -6.0]))
    input_hi: np.ndarray = field(default_factory=lambda: np.array([34 * math.pi / 180, 2.0]))
    rate_lo: np.ndarray = field(default_factory=lambda: np.array([-40 * math.pi / 180, -1.5]))
    rate_hi: np.ndarray = field(default_factory=lambda: np.array([40 * math.pi / 180, 1.5]))


def build_horizon_constraints(refs: Sequence, obs: Optional[ObstacleCircle],
                              cfg) -> list[StepConstraints]:
    """Per-step constraints for a window of ``N + 1`` references.

    ``cfg`` is anything exposing the :class:`ConstraintConfig` attributes (an
    ``MpcConfig`` works). Input and rate limits are attached to steps ``0..N-1``.
    """
    refs = np.asarray(refs, dtype=float)
    n = len(refs) - 1
    if n < 1:
        raise ValueError("need at least two reference states (N >= 1)")
    out = []
    for i, ref in enumerate(refs):
        right, left = road_halfspaces(ref, cfg.r1, cfg.r2)
        obstacle = None if obs is None else obstacle_tangent(obs, ref[:2], ref[4])
        step = StepConstraints(right, left, obstacle,
                               np.asarray(cfg.state_lo, float), np.asarray(cfg.state_hi, float))
        if i < n:
            step.input_lo = np.asarray(cfg.input_lo, float)
            step.input_hi = np.asarray(cfg.input_hi, float)
            step.rate_lo = np.asarray(cfg.rate_lo, float)
            step.rate_hi = np.asarray(cfg.rate_hi, float)
        out.append(step)
    return out
