"""Dense convex QP solver and the condensed MPC transcription.

``solve`` minimises ``0.5 x'Hx + f'x`` subject to ``Gx <= h`` with a
Mehrotra predictor-corrector interior-point method. The problems produced by
:func:`condense` are small (inputs plus one slack per horizon step), so every
Newton step is a dense Cholesky solve.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .vehicle import NU, NX

log = logging.getLogger(__name__)

HESSIAN_REG = 1e-9


class QpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITERATIONS = "MaxIterations"
    INFEASIBLE = "Infeasible"


class DimensionMismatch(ValueError):
    pass


@dataclass
class QpProblem:
    H: np.ndarray
    f: np.ndarray
    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.f = np.asarray(self.f, dtype=float).ravel()
        n = self.f.size
        self.G = np.asarray(self.G, dtype=float).reshape(-1, n)
        self.h = np.asarray(self.h, dtype=float).ravel()
        if self.H.shape != (n, n):
            raise DimensionMismatch(f"H has shape {self.H.shape}, expected {(n, n)}")
        if self.G.shape[0] != self.h.size:
            raise DimensionMismatch(f"G has {self.G.shape[0]} rows but h has {self.h.size}")

    @property
    def n(self) -> int:
        return self.f.size

    @property
    def m(self) -> int:
        return self.h.size

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.f @ x)


@dataclass
class QpSolution:
    x_opt: np.ndarray
    lam: np.ndarray
    status: QpStatus
    iterations: int
    primal_residual: float
    dual_residual: float
    complementarity: float = 0.0
    objective: float = float("nan")

    @property
    def ok(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def kkt_residuals(qp: QpProblem, x, lam) -> tuple[float, float, float]:
    """``(primal, dual, complementarity)`` residuals in the infinity norm."""
    slack = qp.G @ x - qp.h
    primal = float(np.max(np.maximum(slack, 0.0), initial=0.0))
    dual = float(np.max(np.abs(qp.H @ x + qp.f + qp.G.T @ lam), initial=0.0))
    comp = float(np.max(np.abs(lam * slack), initial=0.0))
    return primal, dual, comp


def is_kkt_point(qp: QpProblem, x, lam, tol: float) -> bool:
    if np.any(lam < 0):
        return False
    primal, dual, comp = kkt_residuals(qp, x, lam)
    fscale = 1.0 + float(np.max(np.abs(qp.f), initial=0.0))
    return primal <= tol and dual <= tol * fscale and comp <= tol


class QpSolver:
    """Interior-point solver; one instance per thread."""

    def __init__(self, tol: float = 1e-4, max_iter: int = 100):
        self.tol = tol
        self.max_iter = max_iter

    def solve(self, qp: QpProblem, warm_start=None, tol: Optional[float] = None,
              max_iter: Optional[int] = None) -> QpSolution:
        tol = self.tol if tol is None else tol
        max_iter = self.max_iter if max_iter is None else max_iter
        H, f, G, h = qp.H, qp.f, qp.G, qp.h
        n, m = qp.n, qp.m

        if np.linalg.eigvalsh(H)[0] < HESSIAN_REG:
            H = H + HESSIAN_REG * np.eye(n)

        if m == 0:
            x = np.linalg.solve(H, -f)
            primal, dual, comp = kkt_residuals(qp, x, np.zeros(0))
            return QpSolution(x, np.zeros(0), QpStatus.OPTIMAL, 0, primal, dual, comp,
                              qp.objective(x))

        if warm_start is not None:
            x = np.asarray(warm_start[0], dtype=float).copy()
            z = np.asarray(warm_start[1], dtype=float).copy() if warm_start[1] is not None else None
            if z is not None and z.shape == (m,) and is_kkt_point(qp, x, z, tol):
                primal, dual, comp = kkt_residuals(qp, x, z)
                return QpSolution(x, z, QpStatus.OPTIMAL, 0, primal, dual, comp, qp.objective(x))
            s = np.maximum(h - G @ x, 1e-2)
            z = np.ones(m) if z is None or z.shape != (m,) else np.maximum(z, 1e-2)
        else:
            # least-squares start, then shift s and z into the positive orthant
            x = np.linalg.solve(H + G.T @ G, -f + G.T @ h)
            s = h - G @ x
            z = -s.copy()
            s = s + max(0.0, -float(s.min())) + 1.0
            z = z + max(0.0, -float(z.min())) + 1.0

        fscale = 1.0 + float(np.max(np.abs(f), initial=0.0))
        status = QpStatus.MAX_ITERATIONS
        it = 0
        while True:
            r_d = H @ x + f + G.T @ z
            r_p = G @ x + s - h
            # contract residuals of (x, z), reusing the Newton residuals
            viol = r_p - s  # = Gx - h
            if (z.min() >= 0 and viol.max() <= tol and np.abs(r_d).max() <= tol * fscale
                    and np.abs(z * viol).max() <= tol):
                status = QpStatus.OPTIMAL
                break
            if it and _infeasibility_certificate(G, h, z):
                status = QpStatus.INFEASIBLE
                break
            if it >= max_iter:
                break
            it += 1
            mu = float(s @ z) / m

            w = z / s
            try:
                factor = cho_factor(H + G.T @ (w[:, None] * G), check_finite=False)
            except LinAlgError:
                log.debug("KKT matrix not positive definite at iteration %d", it)
                break

            def newton(r_c):
                rhs = -r_d + G.T @ ((r_c - z * r_p) / s)
                dx = cho_solve(factor, rhs, check_finite=False)
                gdx = G @ dx
                dz = (-r_c + z * r_p) / s + w * gdx
                ds = -r_p - gdx
                return dx, ds, dz

            # affine-scaling predictor
            dx_a, ds_a, dz_a = newton(s * z)
            alpha_a = min(_max_step(s, ds_a), _max_step(z, dz_a))
            mu_a = float((s + alpha_a * ds_a) @ (z + alpha_a * dz_a)) / m
            sigma = (mu_a / mu) ** 3 if mu > 0 else 0.0
            # centering-corrector
            dx, ds, dz = newton(s * z + ds_a * dz_a - sigma * mu)
            alpha = min(1.0, 0.99 * min(_max_step(s, ds), _max_step(z, dz)))
            x = x + alpha * dx
            s = s + alpha * ds
            z = z + alpha * dz

        primal, dual, comp = kkt_residuals(qp, x, z)
        return QpSolution(x, z, status, it, primal, dual, comp, qp.objective(x))


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not neg.any():
        return 1.0
    return min(1.0, float((-v[neg] / dv[neg]).min()))


def _infeasibility_certificate(G, h, z, eps: float = 1e-7) -> bool:
    """Farkas test: ``z >= 0``, ``G'z ~ 0`` and ``h'z < 0`` after normalisation."""
    scale = float(np.max(z))
    if scale < 1e6:
        return False
    zn = z / scale
    return float(h @ zn) < -eps and float(np.max(np.abs(G.T @ zn))) <= eps * max(1.0, float(np.max(np.abs(h))))


def solve(qp: QpProblem, warm_start=None, tol: float = 1e-4, max_iter: int = 100) -> QpSolution:
    return QpSolver(tol=tol, max_iter=max_iter).solve(qp, warm_start)


@dataclass
class CondensedQp(QpProblem):
    """QP over ``[U, slack]`` plus the maps needed to recover predicted states.

    Predicted states ``z_1..z_N`` are ``free + gamma @ U`` (stacked, length 6N).
    """

    free: np.ndarray = None
    gamma: np.ndarray = None
    n_inputs: int = 0
    n_slack: int = 0
    labels: list = field(default_factory=list)
    row_coef: np.ndarray = None  # state-space coefficients of soft rows, zero elsewhere
    row_step: np.ndarray = None  # horizon step of each soft row, -1 elsewhere

    def predict(self, x) -> np.ndarray:
        u = np.asarray(x, dtype=float)[: self.n_inputs]
        return (self.free + self.gamma @ u).reshape(-1, NX)

    def inputs(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[: self.n_inputs].reshape(-1, NU)

    def slacks(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.n_inputs:]

    def count(self, label: str) -> int:
        return sum(1 for lab in self.labels if lab == label)


def condense(lin_models: Sequence, z0, refs, constraints: Sequence, Q, R, P,
             u_prev, soft_weight: float = 1e4) -> CondensedQp:
    """Eliminate the states of a linear(-affine) MPC problem.

    ``lin_models`` holds ``(A_i, B_i)`` or ``(A_i, B_i, c_i)`` for
    ``z_{i+1} = A_i z_i + B_i u_i + c_i``. The objective is half the tracking cost
    ``||z_N - r_N||_P^2 + sum_{i=1}^{N-1} ||z_i - r_i||_Q^2 + sum_i ||u_i||_R^2``
    (the ``i = 0`` state term is constant and dropped). Road, obstacle and state-box
    rows of steps ``1..N`` are softened with one non-negative slack per step
    weighted by ``soft_weight``; input boxes and rate limits stay hard.
    """
    N = len(lin_models)
    z0 = np.asarray(z0, dtype=float).ravel()
    refs = np.asarray(refs, dtype=float)
    if z0.shape != (NX,):
        raise DimensionMismatch(f"z0 must have {NX} entries")
    if refs.shape != (N + 1, NX):
        raise DimensionMismatch(f"refs must have shape {(N + 1, NX)}, got {refs.shape}")
    if len(constraints) != N + 1:
        raise DimensionMismatch(f"need {N + 1} StepConstraints, got {len(constraints)}")
    Q, R, P = (np.asarray(m_, dtype=float) for m_ in (Q, R, P))
    nu = NU * N

    gamma = np.zeros((NX * N, nu))
    free = np.zeros(NX * N)
    g_prev = np.zeros((NX, nu))
    f_prev = z0
    for i, model in enumerate(lin_models):
        A, B = np.asarray(model[0], float), np.asarray(model[1], float)
        if A.shape != (NX, NX) or B.shape != (NX, NU):
            raise DimensionMismatch(f"model {i} has shapes {A.shape}, {B.shape}")
        c = np.asarray(model[2], float) if len(model) > 2 else 0.0
        g_cur = A @ g_prev
        g_cur[:, NU * i:NU * (i + 1)] += B
        f_cur = A @ f_prev + c
        gamma[NX * i:NX * (i + 1)] = g_cur
        free[NX * i:NX * (i + 1)] = f_cur
        g_prev, f_prev = g_cur, f_cur

    weights = [Q] * (N - 1) + [P]
    qbar = np.zeros((NX * N, NX * N))
    for i, W in enumerate(weights):
        qbar[NX * i:NX * (i + 1), NX * i:NX * (i + 1)] = W
    err0 = free - refs[1:].ravel()
    gq = gamma.T @ qbar
    H_u = gq @ gamma + np.kron(np.eye(N), R)
    f_u = gq @ err0

    n_var = nu + N
    H = np.zeros((n_var, n_var))
    H[:nu, :nu] = 0.5 * (H_u + H_u.T)
    f = np.concatenate([f_u, np.full(N, float(soft_weight))])

    g_blocks, h_blocks, labels = [], [], []
    coef_blocks, step_ids = [], []
    eye = np.eye(NX)

    # soft state rows, steps 1..N: coef @ z_i <= bound, relaxed by slack s_i
    for i in range(1, N + 1):
        step = constraints[i]
        coefs, bounds, labs = [], [], []
        for hs, label in ((step.road_right, "road"), (step.road_left, "road"),
                          (step.obstacle, "obstacle")):
            if hs is not None:
                coefs.append([-hs.a, -hs.b, 0.0, 0.0, 0.0, 0.0])
                bounds.append(-hs.c)
                labs.append(label)
        hi_ok = np.isfinite(step.state_hi)
        lo_ok = np.isfinite(step.state_lo)
        C = np.vstack([np.asarray(coefs).reshape(-1, NX), eye[hi_ok], -eye[lo_ok]])
        b = np.concatenate([bounds, step.state_hi[hi_ok], -step.state_lo[lo_ok]])
        labs += ["state_box"] * int(hi_ok.sum() + lo_ok.sum())
        gi = gamma[NX * (i - 1):NX * i]
        fi = free[NX * (i - 1):NX * i]
        block = np.zeros((len(b), n_var))
        block[:, :nu] = C @ gi
        block[:, nu + i - 1] = -1.0
        g_blocks.append(block)
        h_blocks.append(b - C @ fi)
        labels += labs
        coef_blocks.append(C)
        step_ids.append(np.full(len(b), i))

    # slack non-negativity
    block = np.zeros((N, n_var))
    block[:, nu:] = -np.eye(N)
    g_blocks.append(block)
    h_blocks.append(np.zeros(N))
    labels += ["slack"] * N

    # hard input boxes and rate limits, steps 0..N-1
    u_prev = np.asarray(u_prev, dtype=float).ravel()
    box_idx = [i for i in range(N) if constraints[i].input_hi is not None]
    rate_idx = [i for i in range(N) if constraints[i].rate_hi is not None]
    for idx, kind in ((box_idx, "input_box"), (rate_idx, "rate")):
        if not idx:
            continue
        sel = np.zeros((NU * len(idx), n_var))
        hi, lo = [], []
        for r, i in enumerate(idx):
            step = constraints[i]
            sel[NU * r:NU * (r + 1), NU * i:NU * (i + 1)] = np.eye(NU)
            if kind == "input_box":
                hi.append(step.input_hi)
                lo.append(step.input_lo)
            else:
                if i == 0:
                    hi.append(step.rate_hi + u_prev)
                    lo.append(step.rate_lo + u_prev)
                else:
                    sel[NU * r:NU * (r + 1), NU * (i - 1):NU * i] = -np.eye(NU)
                    hi.append(step.rate_hi)
                    lo.append(step.rate_lo)
        g_blocks += [sel, -sel]
        h_blocks += [np.concatenate(hi), -np.concatenate(lo)]
        labels += [kind] * (4 * len(idx))

    G = np.vstack(g_blocks)
    h = np.concatenate(h_blocks)
    n_state = sum(len(c) for c in coef_blocks)
    row_coef = np.zeros((len(h), NX))
    row_step = np.full(len(h), -1)
    if n_state:
        row_coef[:n_state] = np.vstack(coef_blocks)
        row_step[:n_state] = np.concatenate(step_ids)
    return CondensedQp(H, f, G, h, free=free, gamma=gamma, n_inputs=nu, n_slack=N,
                       labels=labels, row_coef=row_coef, row_step=row_step)
