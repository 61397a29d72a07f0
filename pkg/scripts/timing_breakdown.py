"""Where an LPV-MPC step spends its time: model matrices, constraints, condensing, QP."""

import argparse
import time

import numpy as np

from lpvmpc.constraints import build_horizon_constraints
from lpvmpc.controller import unwrap_reference_yaw
from lpvmpc.lpv import lpv_matrices
from lpvmpc.lpvmpc import LpvMpcController
from lpvmpc.reference import ReferencePath, generate_sine_road
from lpvmpc.scenario import shipped_scenario
from lpvmpc.qp import condense
from lpvmpc.vehicle import step_euler


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default="scenario_obstacle.json")
    parser.add_argument("--steps", type=int, default=300)
    args = parser.parse_args()

    sc = shipped_scenario(args.scenario)
    cfg = sc.mpc
    path = ReferencePath(generate_sine_road(sc.road), cfg.ts)
    z = sc.start_state()
    ctrl = LpvMpcController(z, cfg, sc.vehicle)
    parts = {"matrices": [], "constraints": [], "condense": [], "solve": []}
    idx = path.project(z[0], z[1])
    for _ in range(args.steps):
        idx = path.project(z[0], z[1], hint=idx)
        refs = path.window(idx, cfg.horizon)
        # same pipeline as LpvMpcController.step, timed piece by piece
        t0 = time.perf_counter()
        models = [lpv_matrices(p, sc.vehicle, cfg.ts, cfg.v_min) for p in ctrl.scheduling]
        t1 = time.perf_counter()
        cons = build_horizon_constraints(refs, sc.obstacle, cfg)
        t2 = time.perf_counter()
        qp = condense(models, z, unwrap_reference_yaw(refs, z[4]), cons, cfg.Q, cfg.R, cfg.P,
                      ctrl.u_prev, cfg.soft_weight)
        t3 = time.perf_counter()
        ctrl.solver.solve(qp)
        t4 = time.perf_counter()
        for key, dt in zip(parts, (t1 - t0, t2 - t1, t3 - t2, t4 - t3)):
            parts[key].append(dt)
        res = ctrl.step(z, refs, sc.obstacle)
        z = step_euler(z, res.applied, sc.vehicle, cfg.ts)
    total = sum(np.mean(v) for v in parts.values())
    for key, values in parts.items():
        print(f"{key:12s} {np.mean(values) * 1e3:7.3f} ms  {np.mean(values) / total:6.1%}")
    print(f"{'total':12s} {total * 1e3:7.3f} ms")


if __name__ == "__main__":
    main()
