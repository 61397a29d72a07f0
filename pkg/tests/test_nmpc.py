import math

import numpy as np
import pytest

from lpvmpc.config import MpcConfig
from lpvmpc.constraints import ObstacleCircle, lateral_error
from lpvmpc.nmpc import (NlpIterate, NmpcController, SqpSettings, nmpc_step, rollout,
                         warm_start_from_previous)
from lpvmpc.vehicle import VehicleParams, step_euler

from oracles import grid_search_two_step

P = VehicleParams()
TS = 0.05


def straight_refs(n, v=10.0, x0=0.0):
    return np.array([(x0 + v * TS * i, 0.0, v, 0.0, 0.0, 0.0) for i in range(n)])


def full_cost(cfg, states, inputs, refs):
    e = states[1:] - refs[1:]
    total = sum(ei @ (cfg.P if i == len(e) - 1 else cfg.Q) @ ei for i, ei in enumerate(e))
    return total + sum(u @ cfg.R @ u for u in inputs)


@pytest.mark.parametrize("kwargs", [dict(tol=0), dict(backtrack=1.0), dict(armijo=0), dict(max_iter=0)])
def test_settings_validation(kwargs):
    with pytest.raises(ValueError):
        SqpSettings(**kwargs)


def test_equilibrium_converges_fast():
    cfg = MpcConfig()
    res = nmpc_step(np.array([0, 0, 10, 0, 0, 0.0]), straight_refs(9), None, cfg)
    assert res.status == "Optimal"
    assert res.iterations <= 3
    assert np.max(np.abs(res.applied)) <= 1e-6


def test_two_step_problem_matches_grid_search():
    cfg = MpcConfig(horizon=2, qp_tol=1e-9)
    z0 = np.array([0, 0.5, 10, 0, 0, 0.0])
    refs = straight_refs(3, v=12.0)
    res = nmpc_step(z0, refs, None, cfg, SqpSettings(tol=1e-7, max_iter=50))
    assert res.status == "Optimal"
    sqp_obj = full_cost(cfg, rollout(z0, res.predicted_inputs, P, TS, 1.0), res.predicted_inputs, refs)

    grid_obj, resolution = grid_search_two_step(z0, refs, cfg, P)
    assert sqp_obj <= grid_obj + resolution
    assert grid_obj - sqp_obj <= resolution


def test_shift_of_constant_trajectory():
    z = np.array([0, 0, 10, 0, 0, 0.0])
    inputs = np.zeros((8, 2))
    prev = NlpIterate(rollout(z, inputs, P, TS, 1.0), inputs)
    z_new = prev.states[1]
    out = warm_start_from_previous(prev, z_new, P, TS, 1.0)
    np.testing.assert_array_equal(out.inputs, inputs)
    np.testing.assert_array_equal(out.states[0], z_new)
    np.testing.assert_allclose(out.states, rollout(z_new, inputs, P, TS, 1.0))


def test_shifted_iterate_has_no_defect(rng):
    inputs = rng.uniform([-0.2, -1], [0.2, 1], size=(8, 2))
    z = np.array([0, 0, 12, 0.1, 0.1, 0.05])
    prev = NlpIterate(rollout(z, inputs, P, TS, 1.0) + 0.01, inputs)
    out = warm_start_from_previous(prev, np.array([0.6, 0.1, 12, 0, 0.1, 0.0]), P, TS, 1.0)
    np.testing.assert_array_equal(out.inputs[:-1], inputs[1:])
    np.testing.assert_array_equal(out.inputs[-1], inputs[-1])
    for i in range(8):
        np.testing.assert_array_equal(out.states[i + 1], step_euler(out.states[i], out.inputs[i], P, TS))


def obstacle_case():
    cfg = MpcConfig()
    refs = straight_refs(9)
    obs = ObstacleCircle(3.5, -0.5, 1.0)
    z0 = np.array([0, 0.0, 10, 0, 0, 0])
    return cfg, refs, obs, z0


def test_merit_decreases_on_accepted_steps():
    cfg, refs, obs, z0 = obstacle_case()
    ctrl = NmpcController(z0, cfg, P, SqpSettings())
    ctrl.solve(z0, refs, obs)
    assert ctrl.last_trace.accepted
    for before, after in ctrl.last_trace.accepted:
        assert after <= before + 1e-12


def test_converged_solution_is_feasible_for_nonlinear_constraints():
    cfg, refs, obs, z0 = obstacle_case()
    ctrl = NmpcController(z0, cfg, P, SqpSettings())
    it, status, _, _, _ = ctrl.solve(z0, refs, obs)
    assert status == "Optimal"
    for i in range(8):
        assert np.max(np.abs(step_euler(it.states[i], it.inputs[i], P, TS) - it.states[i + 1])) <= 1e-4
    for i in range(1, 9):
        z = it.states[i]
        assert math.hypot(z[0] - obs.cx, z[1] - obs.cy) >= obs.radius - 1e-4
        assert -cfg.r1 - 1e-4 <= lateral_error(z, refs[i]) <= cfg.r2 + 1e-4
    assert np.all(np.abs(it.inputs[:, 0]) <= cfg.input_hi[0] + 1e-9)


def test_applied_input_is_first_planned_input():
    cfg, refs, obs, z0 = obstacle_case()
    res = NmpcController(z0, cfg, P).step(z0, refs, obs)
    np.testing.assert_allclose(res.applied, res.predicted_inputs[0], atol=1e-6)
    assert res.active_obstacle_steps or res.status == "Optimal"


def test_warm_start_saves_iterations():
    from lpvmpc.reference import ReferencePath, RoadSpec, generate_sine_road
    from lpvmpc.scenario import shipped_scenario
    sc = shipped_scenario("scenario_obstacle.json")
    path = ReferencePath(generate_sine_road(sc.road), sc.mpc.ts)
    warm = NmpcController(sc.start_state(), sc.mpc, sc.vehicle, sc.sqp)
    z = sc.start_state()
    idx = path.project(z[0], z[1])
    better = total = 0
    for k in range(120):
        idx = path.project(z[0], z[1], hint=idx)
        refs = path.window(idx, sc.mpc.horizon)
        cold = NmpcController(z, sc.mpc, sc.vehicle, sc.sqp, warm_start=False)
        cold.u_prev = warm.u_prev.copy()
        _, _, cold_iters, _, _ = cold.solve(z, refs, sc.obstacle)
        res = warm.step(z, refs, sc.obstacle)
        if k > 0:
            total += 1
            better += res.iterations <= cold_iters
        z = step_euler(z, res.applied, sc.vehicle, sc.mpc.ts)
    assert better >= 0.9 * total
