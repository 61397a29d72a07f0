import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpvmpc.config import MpcConfig
from lpvmpc.constraints import (HalfSpace, ObstacleCircle, build_horizon_constraints, lateral_error,
                                obstacle_clearance, obstacle_linearization, obstacle_tangent,
                                road_halfspaces)

coord = st.floats(-100, 100, allow_nan=False)
angle = st.floats(-math.pi, math.pi)


def ref(x=0.0, y=0.0, yaw=0.0):
    return (x, y, 10.0, 0.0, yaw, 0.0)


def test_lateral_error_examples():
    assert lateral_error((0, 2, 10, 0, 0, 0), ref()) == pytest.approx(2)
    assert lateral_error((-2, 0, 10, 0, 0, 0), ref(yaw=math.pi / 2)) == pytest.approx(2)
    assert lateral_error((3, 4, 10, 0, 1, 0), ref(3, 4, 0.3)) == 0


def test_axis_aligned_road():
    right, left = road_halfspaces(ref(), 1, 4)
    assert right == pytest.approx((0, 1, -1))
    assert left == pytest.approx((0, -1, -4))


def test_quarter_turn_road():
    right, left = road_halfspaces(ref(yaw=math.pi / 2), 1, 4)
    assert right == pytest.approx((-1, 0, -1))
    assert left == pytest.approx((1, 0, -4))


@given(coord, coord, angle, coord, coord, st.floats(0.1, 5), st.floats(0.1, 5))
def test_road_halfspaces_match_lateral_error(rx, ry, yaw, px, py, r1, r2):
    r = ref(rx, ry, yaw)
    e = lateral_error((px, py, 10, 0, 0, 0), r)
    hs = road_halfspaces(r, r1, r2)
    for h in hs:
        assert math.isclose(h.a**2 + h.b**2, 1.0, rel_tol=1e-12)
    inside = all(h.value(px, py) >= 0 for h in hs)
    # the two forms agree except within 1e-9 m of an edge
    if -r1 + 1e-9 < e < r2 - 1e-9:
        assert inside
    elif e < -r1 - 1e-9 or e > r2 + 1e-9:
        assert not inside
    right, left = hs
    assert right.value(px, py) == pytest.approx(e + r1, abs=1e-9)
    assert left.value(px, py) == pytest.approx(r2 - e, abs=1e-9)


def test_tangent_examples():
    h = obstacle_tangent(ObstacleCircle(2, 0, 1), (1, 0))
    assert h == pytest.approx((-1, 0, -1))
    assert obstacle_tangent(ObstacleCircle(0, 0, 1), (0, 2)) is None
    h = obstacle_tangent(ObstacleCircle(0, 0, 1), (0.5, 0))
    assert h == pytest.approx((1, 0, 1))
    g = np.linspace(-1, 1, 401)
    X, Y = np.meshgrid(g, g)
    disk = X**2 + Y**2 < 1
    assert not np.any(h.value(X[disk], Y[disk]) >= 0)


def test_center_tie_break_uses_left_normal():
    h = obstacle_tangent(ObstacleCircle(5, 5, 1), (5, 5), ref_yaw=0.0)
    assert h == pytest.approx((0, 1, 6))


@given(st.floats(-30, 30), st.floats(-30, 30), st.floats(0.2, 5), st.floats(0, 1),
       angle, st.floats(0, 1))
def test_tangency(cx, cy, radius, margin, direction, frac):
    obs = ObstacleCircle(cx, cy, radius, margin)
    rho = frac * obs.inflated
    p = (cx + rho * math.cos(direction), cy + rho * math.sin(direction))
    h = obstacle_tangent(obs, p, ref_yaw=0.3)
    assert h is not None
    assert math.isclose(h.a**2 + h.b**2, 1.0, rel_tol=1e-12)
    q = (cx + obs.inflated * h.a, cy + obs.inflated * h.b)
    assert math.hypot(q[0] - cx, q[1] - cy) == pytest.approx(obs.inflated, abs=1e-12)
    assert h.value(*q) == pytest.approx(0.0, abs=1e-9)


def test_tangent_excludes_disk_by_rejection_sampling(rng):
    fails = 0
    for _ in range(100):
        obs = ObstacleCircle(*rng.uniform(-20, 20, 2), rng.uniform(0.3, 3), rng.uniform(0, 0.5))
        p = obs.cx + rng.uniform(-1, 1) * obs.inflated, obs.cy + rng.uniform(-1, 1) * obs.inflated
        h = obstacle_tangent(obs, p, ref_yaw=rng.uniform(-3, 3))
        if h is None:
            continue
        pts = rng.uniform(-1, 1, (400, 2))
        pts = pts[np.hypot(*pts.T) < 1] * obs.inflated + (obs.cx, obs.cy)
        fails += int(np.sum(h.value(pts[:, 0], pts[:, 1]) >= 0))
    assert fails == 0


@given(angle)
def test_linearization_on_boundary_is_the_tangent(direction):
    obs = ObstacleCircle(3, -2, 1.5, 0.2)
    x, y = 3 + 1.7 * math.cos(direction), -2 + 1.7 * math.sin(direction)
    lin = obstacle_linearization(obs, x, y)
    tan = obstacle_tangent(obs, (x, y))
    assert lin == pytest.approx(tan, abs=1e-9)


def test_clearance_is_distance_minus_radius():
    obs = ObstacleCircle(0, 0, 1)
    assert obstacle_clearance(obs, 1.0, 0.0) == pytest.approx(0.0)
    assert obstacle_clearance(obs, 3.0, 4.0) == pytest.approx(4.0)


def test_halfspace_normalization():
    h = HalfSpace.from_normal(3, 4, 10)
    assert h == pytest.approx((0.6, 0.8, 2))
    with pytest.raises(ValueError):
        HalfSpace.from_normal(0, 0, 1)


def test_obstacle_validation():
    with pytest.raises(ValueError):
        ObstacleCircle(0, 0, 0)
    with pytest.raises(ValueError):
        ObstacleCircle(0, 0, 1, -0.1)


def straight_refs(n=9, y=0.0):
    return np.array([ref(0.5 * i, y) for i in range(n)])


def test_horizon_without_obstacle():
    cfg = MpcConfig()
    steps = build_horizon_constraints(straight_refs(), None, cfg)
    assert len(steps) == 9
    assert all(s.obstacle is None for s in steps)
    assert all(s.input_hi is not None for s in steps[:8]) and steps[8].input_hi is None
    far = build_horizon_constraints(straight_refs(), ObstacleCircle(100, 100, 1), cfg)
    for a, b in zip(steps, far):
        assert a.halfspaces() == b.halfspaces()


def test_overtake_instant_has_usable_obstacle_row():
    from lpvmpc.reference import ReferencePath, RoadSpec, generate_sine_road
    path = ReferencePath(generate_sine_road(RoadSpec()), 0.05)
    obs = ObstacleCircle(29.4819, 17.4753, 1.0)
    idx = path.project(obs.cx, obs.cy) - 4
    steps = build_horizon_constraints(path.window(idx, 8), obs, MpcConfig())
    active = [s for s in steps[1:] if s.obstacle is not None]
    assert active
    # some point of the road corridor at the reference lies on the safe side
    r = path.window(idx, 8)
    ok = False
    for s, rr in zip(steps, r):
        if s.obstacle is None:
            continue
        n = np.array([-math.sin(rr[4]), math.cos(rr[4])])
        for e in np.linspace(-1, 4, 51):
            p = rr[:2] + e * n
            ok |= s.obstacle.value(*p) > 0 and all(h.value(*p) >= -1e-9 for h in (s.road_left, s.road_right))
    assert ok
