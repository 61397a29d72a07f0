"""Full-state references recovered from position-only waypoints, plus the sine road.

Only ``(X, Y)`` of the road is assumed known. Heading comes from the forward
displacement between consecutive waypoints, yaw rate from the wrapped heading
increment, and the body-frame speeds from the displacement rotated into the
reference heading and divided by the sample time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .vehicle import V_MIN

MIN_SEPARATION = 1e-9  # [m]


class CoincidentWaypoints(ValueError):
    pass


class TooFewWaypoints(ValueError):
    pass


class InvalidSpec(ValueError):
    pass


class Waypoint(NamedTuple):
    x_ref: float
    y_ref: float


class ReferenceState(NamedTuple):
    X: float
    Y: float
    v_lon: float
    v_lat: float
    yaw: float
    yaw_rate: float


def wrap_angle(angle):
    """Map an angle (scalar or array) to (-pi, pi]."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    wrapped = np.where(wrapped <= -math.pi, wrapped + 2.0 * math.pi, wrapped)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


def heading_ref(prev, curr) -> float:
    dx = float(curr[0]) - float(prev[0])
    dy = float(curr[1]) - float(prev[1])
    if math.hypot(dx, dy) <= MIN_SEPARATION:
        raise CoincidentWaypoints(f"waypoints {tuple(prev)} and {tuple(curr)} coincide")
    return wrap_angle(math.atan2(dy, dx))


def full_reference(waypoints: Sequence, ts: float) -> list[ReferenceState]:
    """Recover ``(X, Y, v_lon, v_lat, yaw, yaw_rate)`` for every waypoint.

    Element 0 has no predecessor, so it copies the derived quantities of element 1.
    """
    pts = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise TooFewWaypoints(f"need at least 3 waypoints, got {len(pts)}")
    if not ts > 0:
        raise ValueError(f"ts must be positive, got {ts!r}")
    return [ReferenceState(*row) for row in reference_array(pts, ts)]


def reference_array(pts: np.ndarray, ts: float) -> np.ndarray:
    """Vectorised core of :func:`full_reference`; returns an (n, 6) array."""
    pts = np.asarray(pts, dtype=float)
    d = np.diff(pts, axis=0)
    dist = np.hypot(d[:, 0], d[:, 1])
    if np.any(dist <= MIN_SEPARATION):
        k = int(np.argmax(dist <= MIN_SEPARATION))
        raise CoincidentWaypoints(f"waypoints {k} and {k + 1} coincide")
    yaw = wrap_angle(np.arctan2(d[:, 1], d[:, 0]))
    yaw_rate = np.empty_like(yaw)
    yaw_rate[1:] = wrap_angle(np.diff(yaw)) / ts
    yaw_rate[0] = yaw_rate[1] if len(yaw) > 1 else 0.0
    # body-frame displacement over one sample
    c, s = np.cos(yaw), np.sin(yaw)
    x_body = c * d[:, 0] + s * d[:, 1]
    y_body = -s * d[:, 0] + c * d[:, 1]

    out = np.empty((len(pts), 6))
    out[:, 0:2] = pts
    out[1:, 2] = x_body / ts
    out[1:, 3] = y_body / ts
    out[1:, 4] = yaw
    out[1:, 5] = yaw_rate
    out[0, 2:] = out[1, 2:]
    return out


@dataclass
class RoadSpec:
    """Sine road ``Y = offset + amplitude * sin(2 pi X / wavelength + phase)``.

    ``speed_profile`` holds ``(arc_length, speed)`` knots, interpolated linearly
    and held constant beyond the ends. Waypoints are spaced ``speed * ts`` apart.
    """

    # defaults: one rising half-wave from (0, 0), tuned so the path passes the
    # obstacle at (29.4819, 17.4753) and stays inside the X/Y state box
    amplitude: float = 44.9153
    wavelength: float = 200.0
    length: float = 150.0  # extent along X [m]
    speed_profile: list = field(
        default_factory=lambda: [(0.0, 10.0), (20.0, 13.9), (60.0, 13.9), (90.0, 7.0)])
    ts: float = 0.05
    r1: float = 1.0  # right width [m]
    r2: float = 4.0  # left width [m]
    phase: float = -math.pi / 2
    offset: float = 44.9153

    def validate(self) -> None:
        if not (self.r1 > 0 and self.r2 > 0):
            raise InvalidSpec("road widths must be positive")
        if not (self.wavelength > 0 and self.length > 0 and self.ts > 0):
            raise InvalidSpec("wavelength, length and ts must be positive")
        if not self.speed_profile:
            raise InvalidSpec("speed_profile is empty")
        s = [float(k[0]) for k in self.speed_profile]
        v = [float(k[1]) for k in self.speed_profile]
        if any(b < a for a, b in zip(s, s[1:])):
            raise InvalidSpec("speed_profile arc lengths must be non-decreasing")
        if min(v) < V_MIN:
            raise InvalidSpec(f"speeds must be at least {V_MIN} m/s")

    def centerline(self, x):
        return self.offset + self.amplitude * np.sin(2.0 * np.pi * x / self.wavelength + self.phase)

    def speed_at(self, s):
        knots = np.asarray(self.speed_profile, dtype=float).reshape(-1, 2)
        return np.interp(s, knots[:, 0], knots[:, 1])


def generate_sine_road(spec: RoadSpec, resolution: int = 20_000) -> list[Waypoint]:
    spec.validate()
    xs = np.linspace(0.0, spec.length, resolution + 1)
    ys = spec.centerline(xs)
    arc = np.concatenate(([0.0], np.cumsum(np.hypot(np.diff(xs), np.diff(ys)))))
    out = [Waypoint(0.0, float(ys[0]))]
    s = 0.0
    while True:
        step = float(spec.speed_at(s)) * spec.ts
        s_next = s + step
        if s_next > arc[-1]:
            break
        # place the next point at chord distance `step` from the previous one
        prev = np.array(out[-1])
        s_try = s_next
        for _ in range(3):
            x = np.interp(s_try, arc, xs)
            y = float(spec.centerline(x))
            chord = math.hypot(x - prev[0], y - prev[1])
            s_try += step - chord
        if s_try > arc[-1]:
            break
        x = float(np.interp(s_try, arc, xs))
        out.append(Waypoint(x, float(spec.centerline(x))))
        s = s_try
    return out


def save_waypoints_csv(path, waypoints: Sequence) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["X", "Y"])
        for x, y in waypoints:
            writer.writerow([repr(float(x)), repr(float(y))])


def load_waypoints_csv(path) -> list[Waypoint]:
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        return [Waypoint(float(row["X"]), float(row["Y"])) for row in reader]


class ReferencePath:
    """Waypoint polyline with recovered references and projection helpers.

    The closed loop can fall behind or run ahead of the nominal timing, so the
    horizon window is located by projecting the vehicle onto the polyline and
    interpolating the reference table at the resulting fractional index.
    """

    def __init__(self, waypoints: Sequence, ts: float):
        self.points = np.asarray(waypoints, dtype=float).reshape(-1, 2)
        self.ts = ts
        self.table = np.asarray(full_reference(self.points, ts))
        seg = np.diff(self.points, axis=0)
        self._seg = seg
        self._seg_len2 = np.einsum("ij,ij->i", seg, seg)
        self.arc = np.concatenate(([0.0], np.cumsum(np.sqrt(self._seg_len2))))

    def __len__(self):
        return len(self.points)

    def project(self, x: float, y: float, hint: int | None = None,
                window: int = 60) -> float:
        """Fractional waypoint index of the closest polyline point to ``(x, y)``."""
        nseg = len(self._seg)
        if hint is None:
            lo, hi = 0, nseg
        else:
            lo, hi = max(0, int(hint) - window), min(nseg, int(hint) + window)
        seg = self._seg[lo:hi]
        rel = np.array([x, y]) - self.points[lo:hi]
        t = np.clip(np.einsum("ij,ij->i", rel, seg) / self._seg_len2[lo:hi], 0.0, 1.0)
        diff = rel - t[:, None] * seg
        k = int(np.argmin(np.einsum("ij,ij->i", diff, diff)))
        return lo + k + float(t[k])

    def arc_length(self, idx: float) -> float:
        return float(np.interp(idx, np.arange(len(self.arc)), self.arc))

    def interpolate(self, idx: float) -> np.ndarray:
        """Reference state at a fractional index, clamped to the path ends."""
        last = len(self.table) - 1
        idx = min(max(idx, 0.0), float(last))
        k = min(int(math.floor(idx)), last - 1)
        t = idx - k
        lo, hi = self.table[k], self.table[k + 1]
        out = lo + t * (hi - lo)
        out[4] = wrap_angle(lo[4] + t * wrap_angle(hi[4] - lo[4]))
        return out

    def window(self, idx: float, n: int) -> np.ndarray:
        """``n + 1`` reference states starting at fractional index ``idx``."""
        return np.array([self.interpolate(idx + i) for i in range(n + 1)])

    def segment_yaw(self, idx: float) -> float:
        """Heading of the polyline segment containing fractional index ``idx``."""
        k = min(max(int(math.floor(idx)), 0), len(self._seg) - 1)
        return float(np.arctan2(self._seg[k, 1], self._seg[k, 0]))
