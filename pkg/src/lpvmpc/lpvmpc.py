"""QP-based LPV-MPC: one condensed QP per sample with frozen scheduling.

Each sample builds ``A(p_i), B(p_i)`` from the stored scheduling trajectory, solves
the tracking QP, refreshes the scheduling from the QP's own predictions, applies
the first input and shifts the scheduling trajectory by one sample.
"""

from __future__ import annotations

import time
from typing import Optional

import numpy as np

from .config import MpcConfig
from .constraints import ObstacleCircle, build_horizon_constraints
from .controller import ControllerStepResult, QpFailure, project_input, unwrap_reference_yaw
from .lpv import SchedulingVector, lpv_matrices
from .qp import QpSolver, condense
from .vehicle import VehicleParams, check_speed


class LpvMpcController:
    name = "lpvmpc"

    def __init__(self, z0, cfg: MpcConfig | None = None, params: VehicleParams | None = None):
        self.cfg = cfg or MpcConfig()
        self.params = params or VehicleParams()
        z0 = np.asarray(z0, dtype=float)
        check_speed(float(z0[2]), self.cfg.v_min)
        # the initial steering is not part of the state; start from zero
        p0 = SchedulingVector(float(z0[2]), float(z0[3]), 0.0, float(z0[4]))
        self.scheduling = [p0] * self.cfg.horizon
        self.u_prev = np.zeros(2)
        self.solver = QpSolver(tol=self.cfg.qp_tol, max_iter=self.cfg.qp_max_iter)

    def step(self, z_k, refs, obs: Optional[ObstacleCircle] = None) -> ControllerStepResult:
        cfg = self.cfg
        N = cfg.horizon
        z_k = np.asarray(z_k, dtype=float)
        refs = np.asarray(refs, dtype=float)
        if refs.shape != (N + 1, 6):
            raise ValueError(f"expected {N + 1} reference states, got shape {refs.shape}")

        t0 = time.perf_counter()
        models = [lpv_matrices(p, self.params, cfg.ts, cfg.v_min) for p in self.scheduling]
        constraints = build_horizon_constraints(refs, obs, cfg)
        qp = condense(models, z_k, unwrap_reference_yaw(refs, z_k[4]), constraints,
                      cfg.Q, cfg.R, cfg.P, self.u_prev, cfg.soft_weight)
        sol = self.solver.solve(qp)
        solve_time = time.perf_counter() - t0

        if not sol.ok:
            raise QpFailure(sol.status.value)

        inputs = qp.inputs(sol.x_opt)
        states = qp.predict(sol.x_opt)
        applied = project_input(inputs[0], self.u_prev, cfg)

        # scheduling refresh from the predicted trajectory, then shift by one
        traj = np.vstack([z_k, states[:-1]])
        updated = [SchedulingVector(max(float(z[2]), cfg.v_min), float(z[3]), float(u[0]), float(z[4]))
                   for z, u in zip(traj, inputs)]
        self.scheduling = updated[1:] + [updated[-1]]
        self.u_prev = applied

        active = [i for i, c in enumerate(constraints) if i > 0 and c.obstacle is not None]
        return ControllerStepResult(
            applied=applied,
            predicted_states=states,
            predicted_inputs=inputs,
            status=sol.status.value,
            solve_time=solve_time,
            active_obstacle_steps=active,
            iterations=sol.iterations,
            max_slack=float(np.max(qp.slacks(sol.x_opt), initial=0.0)),
            qp=qp,
        )


def init_controller(z0, cfg: MpcConfig | None = None,
                    params: VehicleParams | None = None) -> LpvMpcController:
    return LpvMpcController(z0, cfg, params)


def controller_step(controller: LpvMpcController, z_k, refs,
                    obs: Optional[ObstacleCircle] = None) -> ControllerStepResult:
    return controller.step(z_k, refs, obs)
