"""Distributed rank regression driver and baselines.

The distributed fit alternates communication rounds with master-side solves
of the surrogate problem: the master shard's smoothed rank loss minus a
linear correction <beta, c>, where c = (master gradient) - (machine-average
gradient) at the current centering point.  Stage 1 runs k1 l1-penalized
iterations, re-centering the correction at each iterate; stages t >= 2 apply
one weighted-l1 solve per stage with folded-concave LLA weights taken at the
previous stage's estimator.

Tuning: one lambda per stage.  All candidates of a selection event share the
same centering point (and hence the same gradient round); each admissible
candidate costs one machine-averaged loss evaluation for the criterion.  A
(k1, T) fit therefore uses exactly k1 + T - 1 gradient rounds, plus one loss
round per admissible candidate evaluated.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import rankloss
from .datagen import Shard, master_shard, pool_shards
from .penalty import PenaltySpec, lla_weights
from .selection import (InfoCriterionConfig, default_criterion_config, geometric_grid,
                        select_lambda)
from .smoothing import SmoothedLoss
from .solver import CompositeProblem, SolverConfig, solve, solve_restricted

FINAL_KKT_FACTOR = 1e-8  # tighter certificates for folded-stage and oracle solves


@dataclass(frozen=True)
class DcrrConfig:
    sl: SmoothedLoss
    k1: int = 8
    T: int = 2
    penalty_variant: str = "scad"
    penalty_a: float | None = None
    lambda_l1: float | None = None  # fixed stage-1 lambda; None -> grid + DHBIC
    lambda_folded: float | None = None  # fixed folded-stage lambda; None -> grid + DHBIC
    grid_size: int = 30
    grid_ratio: float = 0.01
    solver: SolverConfig = field(default_factory=SolverConfig)
    criterion: InfoCriterionConfig | None = None  # None -> defaults from (N, n)

    def __post_init__(self):
        if self.k1 < 1 or self.T < 1:
            raise ValueError("need k1 >= 1 and T >= 1")

    def penalty(self, lam: float) -> PenaltySpec:
        return PenaltySpec(self.penalty_variant, lam, self.penalty_a)


@dataclass
class StageRecord:
    stage: int
    iterate: int
    lam: float
    objective: float
    nnz: int
    solver_iterations: int
    converged: bool


@dataclass
class FitReport:
    beta_hat: np.ndarray
    support: np.ndarray
    stage_trace: list[StageRecord]
    ledger: object
    solver_iterations: int
    lambda_by_stage: dict


@dataclass
class DcrrFit:
    """Pipeline output; stage 1 holds the l1 estimator, stage t the t-th refinement."""

    beta_by_stage: dict
    oracle_by_stage: dict
    lambda_by_stage: dict
    trace: list[StageRecord]
    ledger: object
    solver_iterations: int

    def beta(self, stage: int | None = None) -> np.ndarray:
        stage = max(self.beta_by_stage) if stage is None else stage
        return self.beta_by_stage[stage]

    def report(self, stage: int | None = None) -> FitReport:
        b = self.beta(stage)
        return FitReport(beta_hat=b, support=np.flatnonzero(b), stage_trace=self.trace,
                         ledger=self.ledger, solver_iterations=self.solver_iterations,
                         lambda_by_stage=self.lambda_by_stage)


def surrogate_correction(cluster, beta0: np.ndarray) -> np.ndarray:
    """c = master gradient minus machine-average gradient at beta0 (one round)."""
    beta0 = np.asarray(beta0, dtype=float)
    mean_grad = cluster.broadcast_gather_gradients(beta0)
    return rankloss.local_gradient(cluster.master, cluster.sl, beta0) - mean_grad


def _tight_solver(cfg: SolverConfig, c: np.ndarray) -> SolverConfig:
    tol = FINAL_KKT_FACTOR * (1.0 + float(np.max(np.abs(c), initial=0.0)))
    return dataclasses.replace(cfg, kkt_tol=tol)


class _PathFitter:
    """Warm-start chain for one selection event (grid walked largest-first)."""

    def __init__(self, master, sl, c, weights_of_lambda, solver, warm0, trace, stage, iterate):
        self.master, self.sl, self.c = master, sl, c
        self.weights_of_lambda = weights_of_lambda
        self.solver = solver
        self.warm = np.asarray(warm0, dtype=float)
        self.trace, self.stage, self.iterate = trace, stage, iterate
        self.iterations = 0

    def __call__(self, lam: float) -> np.ndarray:
        prob = CompositeProblem(self.master, self.sl, self.c, self.weights_of_lambda(lam))
        res = solve(prob, self.solver, warm_start=self.warm)
        self.warm = res.beta_hat
        self.iterations += res.iterations
        self.trace.append(StageRecord(self.stage, self.iterate, lam, res.final_objective,
                                      int(np.count_nonzero(res.beta_hat)),
                                      res.iterations, res.converged))
        return res.beta_hat


def _lambda_grid(master: Shard, sl: SmoothedLoss, grid_size: int, grid_ratio: float,
                 fixed: float | None) -> np.ndarray:
    """Geometric grid anchored at the l1 threshold that empties the model."""
    if fixed is not None:
        return np.array([float(fixed)])
    g0 = rankloss.local_gradient(master, sl, np.zeros(master.p))
    lam_max = float(np.max(np.abs(g0)))
    if lam_max <= 0:
        lam_max = 1e-8  # degenerate all-ties data; any positive lambda empties the model
    return geometric_grid(lam_max, grid_size, grid_ratio)


def fit_dcrr(cluster, config: DcrrConfig, oracle_support=None) -> DcrrFit:
    """Run the full distributed pipeline on a cluster of M shards.

    With oracle_support given, a support-restricted companion fit is solved
    at every folded stage from the same correction vector, so the oracle
    sequence costs no extra communication.
    """
    master = cluster.master
    sl = cluster.sl
    n, p = master.n, master.p
    N = sum(s.n for s in cluster.shards)
    crit = config.criterion or default_criterion_config(N, n)
    crit_local = config.criterion or default_criterion_config(n, n)
    grid = _lambda_grid(master, sl, config.grid_size, config.grid_ratio, config.lambda_l1)
    trace: list[StageRecord] = []
    total_iters = 0
    zero_c = np.zeros(p)

    def local_loss(beta):
        return rankloss.local_loss(master, sl, beta)

    # initial estimator: l1-penalized fit on the master shard alone
    fitter = _PathFitter(master, sl, zero_c, lambda lam: np.full(p, lam),
                         config.solver, np.zeros(p), trace, 0, 0)
    sel0 = select_lambda(grid, fitter, local_loss, crit_local, n, p)
    total_iters += fitter.iterations
    beta = sel0.beta

    # stage 1, iterate 1: shared centering at beta0, lambda chosen once
    c = surrogate_correction(cluster, beta)
    fitter = _PathFitter(master, sl, c, lambda lam: np.full(p, lam),
                         config.solver, beta, trace, 1, 1)
    sel1 = select_lambda(grid, fitter, cluster.broadcast_gather_losses, crit, n, p)
    total_iters += fitter.iterations
    lam1 = sel1.lam
    beta = sel1.beta

    # stage 1, iterates 2..k1 at the selected lambda, re-centering each time
    w1 = np.full(p, lam1)
    for k in range(2, config.k1 + 1):
        c = surrogate_correction(cluster, beta)
        res = solve(CompositeProblem(master, sl, c, w1), config.solver, warm_start=beta)
        total_iters += res.iterations
        trace.append(StageRecord(1, k, lam1, res.final_objective,
                                 int(np.count_nonzero(res.beta_hat)),
                                 res.iterations, res.converged))
        beta = res.beta_hat

    betas = {1: beta}
    oracles = {}
    lams = {0: sel0.lam, 1: lam1}
    oracle_prev = beta

    for t in range(2, config.T + 1):
        prev = beta
        c = surrogate_correction(cluster, prev)
        tight = _tight_solver(config.solver, c)
        if oracle_support is not None:
            res = solve_restricted(CompositeProblem(master, sl, c, zero_c),
                                   oracle_support, tight, warm_start=oracle_prev)
            total_iters += res.iterations
            oracles[t] = res.beta_hat
            oracle_prev = res.beta_hat
        if config.lambda_folded is not None:
            lam_t = config.lambda_folded
            w = lla_weights(config.penalty(lam_t), prev)
            res = solve(CompositeProblem(master, sl, c, w), tight, warm_start=prev)
            total_iters += res.iterations
            trace.append(StageRecord(t, 1, lam_t, res.final_objective,
                                     int(np.count_nonzero(res.beta_hat)),
                                     res.iterations, res.converged))
            beta = res.beta_hat
        else:
            fitter = _PathFitter(master, sl, c,
                                 lambda lam: lla_weights(config.penalty(lam), prev),
                                 tight, prev, trace, t, 1)
            sel_t = select_lambda(grid, fitter, cluster.broadcast_gather_losses,
                                  crit, n, p)
            total_iters += fitter.iterations
            lam_t = sel_t.lam
            beta = sel_t.beta
        lams[t] = lam_t
        betas[t] = beta

    return DcrrFit(beta_by_stage=betas, oracle_by_stage=oracles, lambda_by_stage=lams,
                   trace=trace, ledger=cluster.ledger, solver_iterations=total_iters)


def fit_oracle(cluster, support, rounds: int = 3,
               solver: SolverConfig = SolverConfig()) -> np.ndarray:
    """Support-restricted distributed fit: recenter and re-solve `rounds` times."""
    master = cluster.master
    sl = cluster.sl
    p = master.p
    base = CompositeProblem(master, sl, np.zeros(p), np.zeros(p))
    res = solve_restricted(base, support, _tight_solver(solver, base.correction))
    beta = res.beta_hat
    for _ in range(rounds):
        c = surrogate_correction(cluster, beta)
        prob = CompositeProblem(master, sl, c, np.zeros(p))
        res = solve_restricted(prob, support, _tight_solver(solver, c), warm_start=beta)
        beta = res.beta_hat
    return beta


@dataclass
class SingleMachineFit:
    beta_by_stage: dict
    lambda_by_stage: dict
    trace: list[StageRecord]
    solver_iterations: int

    def beta(self, stage: int | None = None) -> np.ndarray:
        stage = max(self.beta_by_stage) if stage is None else stage
        return self.beta_by_stage[stage]


def fit_single_machine(shard: Shard, sl: SmoothedLoss, penalty_variant: str = "l1",
                       penalty_a: float | None = None, lla_stages: int = 1,
                       grid_size: int = 30, grid_ratio: float = 0.01,
                       lambda_fixed: float | None = None,
                       solver: SolverConfig = SolverConfig(),
                       criterion: InfoCriterionConfig | None = None) -> SingleMachineFit:
    """Penalized rank regression on one shard: l1 path, then optional LLA stages.

    Used for the centralized baselines (on the pooled pseudo-shard), the
    divide-and-conquer locals, and the master initialization.  Tuning is by
    the criterion with the shard's own loss and sample size.
    """
    n, p = shard.n, shard.p
    crit = criterion or default_criterion_config(n, n)
    grid = _lambda_grid(shard, sl, grid_size, grid_ratio, lambda_fixed)
    zero_c = np.zeros(p)
    trace: list[StageRecord] = []
    total_iters = 0

    def local_loss(beta):
        return rankloss.local_loss(shard, sl, beta)

    fitter = _PathFitter(shard, sl, zero_c, lambda lam: np.full(p, lam),
                         solver, np.zeros(p), trace, 1, 1)
    sel = select_lambda(grid, fitter, local_loss, crit, n, p)
    total_iters += fitter.iterations
    betas = {1: sel.beta}
    lams = {1: sel.lam}
    beta = sel.beta

    if penalty_variant != "l1":
        pen_a = penalty_a
        for t in range(2, lla_stages + 1):
            prev = beta
            tight = _tight_solver(solver, zero_c)
            fitter = _PathFitter(
                shard, sl, zero_c,
                lambda lam: lla_weights(PenaltySpec(penalty_variant, lam, pen_a), prev),
                tight, prev, trace, t, 1)
            sel = select_lambda(grid, fitter, local_loss, crit, n, p)
            total_iters += fitter.iterations
            beta = sel.beta
            betas[t] = beta
            lams[t] = sel.lam

    return SingleMachineFit(betas, lams, trace, total_iters)


def fit_centralized(shards, sl: SmoothedLoss, penalty_variant: str = "l1",
                    lla_stages: int = 3, **kwargs) -> SingleMachineFit:
    """Centralized baseline on the pooled data (all cross-shard pairs included)."""
    pooled = shards if isinstance(shards, Shard) else pool_shards(list(shards))
    return fit_single_machine(pooled, sl, penalty_variant=penalty_variant,
                              lla_stages=lla_stages, **kwargs)


def fit_centralized_oracle(shards, sl: SmoothedLoss, support,
                           solver: SolverConfig = SolverConfig()) -> np.ndarray:
    """Unpenalized pooled fit restricted to the true support."""
    pooled = shards if isinstance(shards, Shard) else pool_shards(list(shards))
    p = pooled.p
    prob = CompositeProblem(pooled, sl, np.zeros(p), np.zeros(p))
    res = solve_restricted(prob, support, _tight_solver(solver, prob.correction))
    return res.beta_hat


@dataclass
class DivideAndConquerFit:
    average_by_stage: dict
    local_fits: list[SingleMachineFit]

    def beta(self, stage: int | None = None) -> np.ndarray:
        stage = max(self.average_by_stage) if stage is None else stage
        return self.average_by_stage[stage]


def fit_divide_and_conquer(shards, sl: SmoothedLoss, penalty_variant: str = "l1",
                           lla_stages: int = 3, majority_vote: bool = False,
                           **kwargs) -> DivideAndConquerFit:
    """One-shot baseline: average independently tuned local fits coordinatewise.

    The averaged vector is nonzero wherever any machine selected the
    coordinate; with majority_vote=True, coordinates selected by fewer than
    half the machines are zeroed instead.
    """
    shards = list(shards)
    fits = [fit_single_machine(s, sl, penalty_variant=penalty_variant,
                               lla_stages=lla_stages, **kwargs) for s in shards]
    M = len(shards)
    averages = {}
    for stage in fits[0].beta_by_stage:
        stack = np.stack([f.beta_by_stage[stage] for f in fits])
        avg = stack.mean(axis=0)
        if majority_vote:
            votes = (stack != 0.0).sum(axis=0)
            avg[votes < (M + 1) // 2] = 0.0
        averages[stage] = avg
    return DivideAndConquerFit(averages, fits)
