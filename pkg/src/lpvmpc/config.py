"""MPC tuning shared by the LPV and nonlinear controllers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintConfig
from .vehicle import V_MIN


@dataclass
class MpcConfig(ConstraintConfig):
    horizon: int = 8
    ts: float = 0.05
    Q: np.ndarray = field(default_factory=lambda: np.diag([10.0, 10.0, 1.0, 1.0, 1.0, 1.0]))
    R: np.ndarray = field(default_factory=lambda: np.diag([0.1, 0.1]))
    P: np.ndarray = None  # defaults to Q
    soft_weight: float = 1e4
    qp_tol: float = 1e-6
    qp_max_iter: int = 100
    v_min: float = V_MIN

    def __post_init__(self):
        if self.P is None:
            self.P = np.array(self.Q, dtype=float, copy=True)
        self.Q = np.asarray(self.Q, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        for name in ("state_lo", "state_hi", "input_lo", "input_hi", "rate_lo", "rate_hi"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.validate()

    def validate(self) -> None:
        if int(self.horizon) < 1:
            raise ValueError("horizon must be at least 1")
        if not self.ts > 0:
            raise ValueError("ts must be positive")
        if self.Q.shape != (6, 6) or self.P.shape != (6, 6) or self.R.shape != (2, 2):
            raise ValueError("Q and P must be 6x6, R must be 2x2")
        for name in ("Q", "P"):
            if np.linalg.eigvalsh(0.5 * (getattr(self, name) + getattr(self, name).T))[0] < -1e-12:
                raise ValueError(f"{name} must be positive semidefinite")
        if np.linalg.eigvalsh(0.5 * (self.R + self.R.T))[0] <= 0:
            raise ValueError("R must be positive definite")
        for lo, hi in ((self.state_lo, self.state_hi), (self.input_lo, self.input_hi),
                       (self.rate_lo, self.rate_hi)):
            if np.any(lo > hi):
                raise ValueError("lower bounds must not exceed upper bounds")
        if not self.soft_weight > 0:
            raise ValueError("soft_weight must be positive")
