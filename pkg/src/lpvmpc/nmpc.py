"""Nonlinear MPC solved by sequential quadratic programming.

The NLP keeps states and inputs as variables (multiple shooting). Every SQP
iteration linearises the Euler dynamics and the obstacle distance around the
current iterate, eliminates the linearised states through :func:`qp.condense`
and solves the resulting QP. Steps are globalised with a backtracking line search
on an L1 exact-penalty merit function. The Hessian is the (constant) Hessian of
the tracking cost, i.e. a constrained Gauss-Newton method.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import MpcConfig
from .constraints import (ObstacleCircle, StepConstraints, obstacle_linearization,
                          road_halfspaces)
from .controller import ControllerStepResult, QpFailure, project_input, unwrap_reference_yaw
from .qp import QpSolver, condense
from .vehicle import NU, NX, DegenerateSpeed, VehicleParams, check_speed, jacobians_euler, step_euler

log = logging.getLogger(__name__)


@dataclass
class SqpSettings:
    max_iter: int = 30
    tol: float = 1e-4  # on the step infinity norm and on constraint violation
    backtrack: float = 0.5
    armijo: float = 1e-4
    min_step: float = 1e-4
    trust_radius: Optional[float] = None  # cap on |u - u_iterate| per iteration
    penalty_init: float = 10.0

    def __post_init__(self):
        if not (self.tol > 0 and 0 < self.backtrack < 1 and 0 < self.armijo < 1):
            raise ValueError("invalid SQP settings")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class NlpIterate:
    states: np.ndarray  # z_0..z_N, shape (N + 1, 6); z_0 is the measured state
    inputs: np.ndarray  # u_0..u_{N-1}, shape (N, 2)
    multipliers: Optional[np.ndarray] = None
    merit: float = math.inf

    def copy(self) -> "NlpIterate":
        return NlpIterate(self.states.copy(), self.inputs.copy(),
                          None if self.multipliers is None else self.multipliers.copy(), self.merit)


@dataclass
class SqpTrace:
    merit: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)
    violation: list = field(default_factory=list)
    kkt: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    accepted: list = field(default_factory=list)  # (merit before, merit after) per line-search step


def rollout(z0, inputs, params: VehicleParams, ts: float, v_min: float) -> np.ndarray:
    states = np.empty((len(inputs) + 1, NX))
    states[0] = z0
    for i, u in enumerate(inputs):
        z = states[i]
        if z[2] < v_min:
            z = z.copy()
            z[2] = v_min
        states[i + 1] = step_euler(z, u, params, ts, v_min)
    return states


def warm_start_from_previous(prev: NlpIterate, z_new, params: VehicleParams, ts: float,
                             v_min: float = 1.0) -> NlpIterate:
    """Shift inputs by one sample, repeat the last one, and re-roll the states."""
    inputs = np.vstack([prev.inputs[1:], prev.inputs[-1:]])
    states = rollout(np.asarray(z_new, dtype=float), inputs, params, ts, v_min)
    return NlpIterate(states, inputs)


class NmpcController:
    name = "nmpc"

    def __init__(self, z0, cfg: MpcConfig | None = None, params: VehicleParams | None = None,
                 settings: SqpSettings | None = None, warm_start: bool = True):
        self.cfg = cfg or MpcConfig()
        self.params = params or VehicleParams()
        self.settings = settings or SqpSettings()
        check_speed(float(np.asarray(z0)[2]), self.cfg.v_min)
        self.u_prev = np.zeros(2)
        self.iterate: Optional[NlpIterate] = None
        self.warm_start = warm_start
        self.solver = QpSolver(tol=self.cfg.qp_tol, max_iter=self.cfg.qp_max_iter)
        self.last_trace: Optional[SqpTrace] = None

    # -- problem pieces -------------------------------------------------------

    def _cost(self, it: NlpIterate, refs: np.ndarray) -> float:
        """Half the tracking cost, consistent with the condensed QP objective."""
        cfg = self.cfg
        e = it.states[1:] - refs[1:]
        total = 0.0
        for i, ei in enumerate(e):
            W = cfg.P if i == len(e) - 1 else cfg.Q
            total += ei @ W @ ei
        total += np.einsum("ij,jk,ik->", it.inputs, cfg.R, it.inputs)
        return 0.5 * float(total)

    def _cost_gradient(self, it: NlpIterate, refs: np.ndarray):
        cfg = self.cfg
        e = it.states[1:] - refs[1:]
        gz = e @ cfg.Q.T
        gz[-1] = cfg.P @ e[-1]
        gu = it.inputs @ cfg.R.T
        return gz, gu

    def _violations(self, it: NlpIterate, refs_raw: np.ndarray, obs) -> tuple[float, float]:
        """``(sum of |dynamics defects|, sum over steps of the worst inequality violation)``."""
        cfg, p = self.cfg, self.params
        defect = 0.0
        for i in range(len(it.inputs)):
            z = it.states[i]
            if z[2] < cfg.v_min:
                return math.inf, math.inf
            defect += float(np.sum(np.abs(step_euler(z, it.inputs[i], p, cfg.ts, cfg.v_min)
                                          - it.states[i + 1])))
        ineq = 0.0
        for i in range(1, len(it.states)):
            z = it.states[i]
            right, left = road_halfspaces(refs_raw[i], cfg.r1, cfg.r2)
            worst = max(0.0, -right.value(z[0], z[1]), -left.value(z[0], z[1]),
                        float(np.max(z - cfg.state_hi)), float(np.max(cfg.state_lo - z)))
            if obs is not None:
                worst = max(worst, obs.inflated - math.hypot(z[0] - obs.cx, z[1] - obs.cy))
            ineq += worst
        return defect, ineq

    def _merit(self, it, refs, refs_raw, obs, mu_dyn, mu_ineq) -> float:
        defect, ineq = self._violations(it, refs_raw, obs)
        if not math.isfinite(defect):
            return math.inf
        return self._cost(it, refs) + mu_dyn * defect + mu_ineq * ineq

    def _subproblem(self, it: NlpIterate, refs, refs_raw, obs):
        cfg, p, st = self.cfg, self.params, self.settings
        N = cfg.horizon
        models = []
        for i in range(N):
            z, u = it.states[i], it.inputs[i]
            A, B = jacobians_euler(z, u, p, cfg.ts, cfg.v_min)
            c = step_euler(z, u, p, cfg.ts, cfg.v_min) - A @ z - B @ u
            models.append((A, B, c))
        steps = []
        for i in range(N + 1):
            right, left = road_halfspaces(refs_raw[i], cfg.r1, cfg.r2)
            hs = None
            if obs is not None and i > 0:
                hs = obstacle_linearization(obs, it.states[i, 0], it.states[i, 1], refs_raw[i, 4])
            step = StepConstraints(right, left, hs, cfg.state_lo, cfg.state_hi)
            if i < N:
                lo, hi = cfg.input_lo, cfg.input_hi
                if st.trust_radius is not None:
                    lo = np.maximum(lo, it.inputs[i] - st.trust_radius)
                    hi = np.minimum(hi, it.inputs[i] + st.trust_radius)
                step.input_lo, step.input_hi = lo, hi
                step.rate_lo, step.rate_hi = cfg.rate_lo, cfg.rate_hi
            steps.append(step)
        qp = condense(models, it.states[0], refs, steps, cfg.Q, cfg.R, cfg.P,
                      self.u_prev, cfg.soft_weight)
        return qp, models

    def _costates(self, it, refs, qp, lam, models) -> np.ndarray:
        """Multipliers of the linearised dynamics, by backward recursion."""
        N = self.cfg.horizon
        gz, _ = self._cost_gradient(it, refs)
        nu_ = np.zeros((N + 1, NX))
        contrib = np.zeros((N + 1, NX))
        mask = qp.row_step > 0
        np.add.at(contrib, qp.row_step[mask], lam[mask, None] * qp.row_coef[mask])
        contrib = contrib[1:]
        nu_[N] = gz[N - 1] + contrib[N - 1]
        for i in range(N - 1, 0, -1):
            nu_[i] = models[i][0].T @ nu_[i + 1] + gz[i - 1] + contrib[i - 1]
        return nu_[1:]

    # -- main loop -----------------------------------------------------------

    def solve(self, z_k, refs_raw, obs: Optional[ObstacleCircle] = None,
              init: Optional[NlpIterate] = None) -> tuple[NlpIterate, str, int, SqpTrace, object]:
        cfg, st, p = self.cfg, self.settings, self.params
        N = cfg.horizon
        z_k = np.asarray(z_k, dtype=float)
        refs = unwrap_reference_yaw(refs_raw, z_k[4])
        if init is None:
            inputs = np.tile(self.u_prev, (N, 1))
            it = NlpIterate(rollout(z_k, inputs, p, cfg.ts, cfg.v_min), inputs)
        else:
            it = init.copy()
            it.states[0] = z_k

        mu_dyn = st.penalty_init
        mu_ineq = cfg.soft_weight
        trace = SqpTrace()
        status = "NoConvergence"
        last_qp = None
        best = None
        k = 0
        for k in range(1, st.max_iter + 1):
            qp, models = self._subproblem(it, refs, refs_raw, obs)
            sol = self.solver.solve(qp)
            last_qp = qp
            if not sol.ok:
                raise QpFailure(sol.status.value)
            new_u = qp.inputs(sol.x_opt)
            new_z = qp.predict(sol.x_opt)
            du = new_u - it.inputs
            dz = new_z - it.states[1:]
            step_norm = float(max(np.max(np.abs(du)), np.max(np.abs(dz))))

            nu_dyn = self._costates(it, refs, qp, sol.lam, models)
            mu_dyn = max(mu_dyn, 1.5 * float(np.max(np.abs(nu_dyn), initial=0.0)))

            defect, ineq = self._violations(it, refs_raw, obs)
            merit0 = self._cost(it, refs) + mu_dyn * defect + mu_ineq * ineq
            it.merit = merit0
            viol = max(defect, ineq)
            trace.merit.append(merit0)
            trace.step_norm.append(step_norm)
            trace.violation.append(viol)
            trace.kkt.append(sol.dual_residual)
            if best is None or merit0 < best[0]:
                best = (merit0, it.copy())

            if step_norm <= st.tol and viol <= st.tol:
                status = "Optimal"
                trace.alpha.append(0.0)
                break

            gz, gu = self._cost_gradient(it, refs)
            slack_total = float(np.sum(qp.slacks(sol.x_opt)))
            deriv = float(np.sum(gz * dz) + np.sum(gu * du)) - mu_dyn * defect - mu_ineq * max(0.0, ineq - slack_total)
            alpha = 1.0
            accepted = None
            while alpha >= st.min_step:
                cand = NlpIterate(it.states.copy(), it.inputs + alpha * du)
                cand.states[1:] += alpha * dz
                merit = self._merit(cand, refs, refs_raw, obs, mu_dyn, mu_ineq)
                if merit <= merit0 + st.armijo * alpha * min(deriv, 0.0):
                    accepted = cand
                    accepted.merit = merit
                    trace.accepted.append((merit0, merit))
                    break
                alpha *= st.backtrack
            trace.alpha.append(alpha if accepted is not None else 0.0)
            if accepted is None:
                log.debug("line search failed at SQP iteration %d", k)
                # take a short step anyway to escape; merit may stall otherwise
                accepted = NlpIterate(it.states.copy(), it.inputs + st.min_step * du)
                accepted.states[1:] += st.min_step * dz
            accepted.multipliers = nu_dyn
            it = accepted
        else:
            # polish bookkeeping for the last accepted iterate
            defect, ineq = self._violations(it, refs_raw, obs)
            merit_last = self._cost(it, refs) + mu_dyn * defect + mu_ineq * ineq
            if best is not None and best[0] < merit_last:
                it = best[1]

        if log.isEnabledFor(logging.DEBUG):
            for j, (m_, s_, v_) in enumerate(zip(trace.merit, trace.step_norm, trace.violation)):
                log.debug("sqp it=%d merit=%.6g step=%.3g viol=%.3g", j + 1, m_, s_, v_)
        self.last_trace = trace
        return it, status, k, trace, last_qp

    def step(self, z_k, refs, obs: Optional[ObstacleCircle] = None) -> ControllerStepResult:
        cfg = self.cfg
        refs = np.asarray(refs, dtype=float)
        if refs.shape != (cfg.horizon + 1, 6):
            raise ValueError(f"expected {cfg.horizon + 1} reference states, got shape {refs.shape}")
        z_k = np.asarray(z_k, dtype=float)
        t0 = time.perf_counter()
        init = None
        if self.warm_start and self.iterate is not None:
            try:
                init = warm_start_from_previous(self.iterate, z_k, self.params, cfg.ts, cfg.v_min)
            except DegenerateSpeed:
                init = None
        it, status, iters, trace, qp = self.solve(z_k, refs, obs, init)
        solve_time = time.perf_counter() - t0

        self.iterate = it
        applied = project_input(it.inputs[0], self.u_prev, cfg)
        self.u_prev = applied
        active = []
        if obs is not None:
            d = np.hypot(it.states[1:, 0] - obs.cx, it.states[1:, 1] - obs.cy)
            active = [i + 1 for i in np.flatnonzero(d <= obs.inflated + 1e-6)]
        return ControllerStepResult(
            applied=applied,
            predicted_states=it.states[1:].copy(),
            predicted_inputs=it.inputs.copy(),
            status=status,
            solve_time=solve_time,
            active_obstacle_steps=active,
            iterations=iters,
            qp=qp,
        )


def nmpc_step(z_k, refs, obs: Optional[ObstacleCircle], cfg: MpcConfig,
              settings: SqpSettings | None = None, init: Optional[NlpIterate] = None,
              params: VehicleParams | None = None, u_prev=None) -> ControllerStepResult:
    """Stateless single solve; ``u_prev`` feeds the rate limits of the first input."""
    ctrl = NmpcController(z_k, cfg, params, settings, warm_start=init is not None)
    if u_prev is not None:
        ctrl.u_prev = np.asarray(u_prev, dtype=float)
    if init is not None:
        ctrl.iterate = None
        t0 = time.perf_counter()
        it, status, iters, _, qp = ctrl.solve(z_k, refs, obs, init)
        applied = project_input(it.inputs[0], ctrl.u_prev, cfg)
        return ControllerStepResult(applied, it.states[1:].copy(), it.inputs.copy(), status,
                                    time.perf_counter() - t0, iterations=iters, qp=qp)
    return ctrl.step(z_k, refs, obs)
