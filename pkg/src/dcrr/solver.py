"""Accelerated proximal gradient solver for the penalized surrogate problem.

Minimizes F(beta) = S(beta) + sum_j w_j |beta_j| where S is the smooth
shard loss minus a linear correction term.  FISTA with backtracking line
search and function-value restart: the momentum state is reset whenever the
accelerated step would increase F, so accepted objectives are monotone.
Supports are read from the exact zeros the soft-threshold produces.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rankloss
from .datagen import Shard
from .errors import ConfigError, NumericError
from .smoothing import SmoothedLoss

KKT_TOL_FACTOR = 1e-6  # certificate tolerance = factor * (1 + ||c||_inf)


@dataclass(frozen=True)
class CompositeProblem:
    """Master-shard smooth loss, linear correction c, and l1 weights."""

    master: Shard
    sl: SmoothedLoss
    correction: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = self.master.p
        c = np.asarray(self.correction, dtype=float)
        w = np.broadcast_to(np.asarray(self.weights, dtype=float), (p,)).copy()
        if c.shape != (p,):
            raise ConfigError("correction vector dimension mismatch")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ConfigError("weights must be finite and nonnegative")
        object.__setattr__(self, "correction", c)
        object.__setattr__(self, "weights", w)

    def smooth_value(self, beta):
        return rankloss.local_loss(self.master, self.sl, beta) - self.correction @ beta

    def smooth_gradient(self, beta):
        return rankloss.local_gradient(self.master, self.sl, beta) - self.correction

    def kkt_tol(self) -> float:
        return KKT_TOL_FACTOR * (1.0 + float(np.max(np.abs(self.correction), initial=0.0)))


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 2000
    tol: float = 1e-8  # relative objective-change tolerance
    backtrack: float = 0.5
    init_step: float = 1.0
    kkt_tol: float | None = None  # None -> problem.kkt_tol()

    def __post_init__(self):
        if self.tol <= 0 or not (0.0 < self.backtrack < 1.0) or self.init_step <= 0:
            raise ConfigError("invalid solver configuration")


@dataclass
class SolveResult:
    beta_hat: np.ndarray
    iterations: int
    converged: bool
    final_objective: float
    kkt_residual: float


def soft_threshold(v: np.ndarray, thresh: np.ndarray) -> np.ndarray:
    """Entrywise shrinkage; values at exactly the threshold map to 0."""
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def kkt_residual(grad: np.ndarray, beta: np.ndarray, weights: np.ndarray) -> float:
    """Max violation of the subgradient optimality conditions."""
    nz = beta != 0.0
    r = 0.0
    if np.any(nz):
        r = float(np.max(np.abs(grad[nz] + weights[nz] * np.sign(beta[nz]))))
    if np.any(~nz):
        slack = np.abs(grad[~nz]) - weights[~nz]
        r = max(r, float(np.max(np.maximum(slack, 0.0))))
    return r


def solve_composite(smooth_value, smooth_gradient, weights, config: SolverConfig,
                    warm_start: np.ndarray, kkt_tol: float) -> SolveResult:
    """FISTA with backtracking and restart on a generic smooth part.

    smooth_value/smooth_gradient are callables of beta; weights is the full
    nonnegative l1 weight vector (zeros give plain accelerated descent).
    """
    w = np.asarray(weights, dtype=float)
    x = np.array(warm_start, dtype=float, copy=True)
    y = x.copy()
    theta = 1.0
    t = config.init_step
    pen = float(w @ np.abs(x))
    Fx = smooth_value(x) + pen
    if not math.isfinite(Fx):
        raise NumericError("objective is non-finite at the starting point")
    converged = False
    kkt = math.inf
    it = 0
    for it in range(1, config.max_iter + 1):
        g = smooth_gradient(y)
        fy = smooth_value(y)
        x_new, f_new, t = _backtrack(smooth_value, y, g, fy, w, t, config.backtrack)
        F_new = f_new + float(w @ np.abs(x_new))
        if F_new > Fx:
            # momentum overshoot: restart from the last accepted point
            y = x.copy()
            theta = 1.0
            g = smooth_gradient(y)
            fy = smooth_value(y)
            x_new, f_new, t = _backtrack(smooth_value, y, g, fy, w, t, config.backtrack)
            F_new = f_new + float(w @ np.abs(x_new))
        if not math.isfinite(F_new):
            raise NumericError("objective became non-finite during the solve")
        rel = abs(F_new - Fx) / max(1.0, abs(Fx))
        theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        y = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
        x, Fx, theta = x_new, F_new, theta_new
        if rel <= config.tol:
            kkt = kkt_residual(smooth_gradient(x), x, w)
            if kkt <= kkt_tol:
                converged = True
                break
    if not converged:
        kkt = kkt_residual(smooth_gradient(x), x, w)
        converged = kkt <= kkt_tol
    return SolveResult(x, it, converged, Fx, kkt)


def _backtrack(smooth_value, y, g, fy, w, t, factor):
    """Shrink the step until the quadratic upper bound holds at the prox point."""
    while True:
        x_new = soft_threshold(y - t * g, t * w)
        d = x_new - y
        f_new = smooth_value(x_new)
        bound = fy + float(g @ d) + float(d @ d) / (2.0 * t)
        if f_new <= bound + 1e-12 * max(1.0, abs(fy)):
            return x_new, f_new, t
        t *= factor
        if t < 1e-20:
            raise NumericError("line search collapsed; gradient may be inconsistent")


def solve(problem: CompositeProblem, config: SolverConfig = SolverConfig(),
          warm_start: np.ndarray | None = None) -> SolveResult:
    """Minimize the weighted-l1 penalized surrogate objective."""
    p = problem.master.p
    warm = np.zeros(p) if warm_start is None else np.asarray(warm_start, dtype=float)
    kkt_tol = problem.kkt_tol() if config.kkt_tol is None else config.kkt_tol
    return solve_composite(problem.smooth_value, problem.smooth_gradient,
                           problem.weights, config, warm, kkt_tol)


def solve_restricted(problem: CompositeProblem, support, config: SolverConfig = SolverConfig(),
                     warm_start: np.ndarray | None = None) -> SolveResult:
    """Unpenalized smooth minimization with coordinates off `support` pinned at 0."""
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        raise ConfigError("restricted solve needs a nonempty support")
    sub = Shard(X=problem.master.X[:, support], y=problem.master.y,
                machine_id=problem.master.machine_id, is_master=problem.master.is_master)
    c_sub = problem.correction[support]

    def val(b):
        return rankloss.local_loss(sub, problem.sl, b) - c_sub @ b

    def grad(b):
        return rankloss.local_gradient(sub, problem.sl, b) - c_sub

    p = problem.master.p
    warm_full = np.zeros(p) if warm_start is None else np.asarray(warm_start, dtype=float)
    kkt_tol = problem.kkt_tol() if config.kkt_tol is None else config.kkt_tol
    res = solve_composite(val, grad, np.zeros(support.size), config,
                          warm_full[support], kkt_tol)
    beta = np.zeros(p)
    beta[support] = res.beta_hat
    return SolveResult(beta, res.iterations, res.converged, res.final_objective,
                       res.kkt_residual)
