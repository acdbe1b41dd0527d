"""One Monte-Carlo trial: design, re-solve for minimum power, extract, reduce.

Pipeline per seed:

1. solve the sensing-design relaxation (moderate tolerance; its only role is
   to produce an achievable metric/SINR operating point);
2. extract beamformers and freeze their quadratic values and achieved SINRs;
3. solve the power-minimization relaxation at those fixed values (tight
   tolerance; the reduction theory operates on its optima);
4. extract a factorization whose column count is the relaxation rank and
   run the reduction driver when its counting condition applies
   (``inflate_start`` first widens the sensing factor to the full dimension
   by a Gram-preserving remix -- still an optimal solution, with the full
   column count -- which forces the driver to walk every reduction step);
5. record counts, the relaxation rank, residuals, and timing.

``n_optimize <= bound`` is asserted on every completed trial.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ..bounds import bound_hypotenuse, bound_sum
from ..channel import quad_values
from ..errors import IsacError
from ..metrics import BeamformerMatrix, sinr_ic, sinr_nic
from ..reduce import ReductionTarget, reduce_to_bound
from ..sdp import (
    SolveOptions,
    build_power_min,
    build_sensing_design,
    covariance_rank,
    design_metric_value,
    extract_rank_one,
    solve,
)
from .config import ExperimentConfig
from .randomize import TrialSetup, randomize_scenario, trial_rng

DESIGN_TOL = 5e-6
DESIGN_MAX_ITERS = 15_000
POWER_TOL = 1e-7
POWER_MAX_ITERS = 50_000
ACCEPT_RESIDUAL = 1e-5


class BoundViolation(IsacError):
    """A completed trial exceeded its theoretical beamformer bound."""


@dataclass
class TrialRecord:
    seed: int
    n_tx: int
    n_rx: int
    k_users: int
    n_targets: int
    d: int
    mode: str
    n_sdr_rank: int = 0
    n_start: int = 0
    n_optimize: int = 0
    bound: int = 0
    objective: float = math.nan
    power: float = math.nan
    max_residual: float = math.nan
    status: str = "ok"
    detail: str = ""
    solver_iters: int = 0
    wall_time_ms: float = 0.0
    reduction_steps: int = 0

    def csv_row(self) -> str:
        cells = [
            str(self.seed), str(self.n_tx), str(self.n_rx), str(self.k_users),
            str(self.n_targets), str(self.d), self.mode, str(self.n_sdr_rank),
            str(self.n_optimize), str(self.bound),
            _fmt(self.objective), _fmt(self.power), _fmt(self.max_residual),
            self.status, _fmt(self.wall_time_ms),
        ]
        return ",".join(cells)


CSV_COLUMNS = ("seed,n_tx,n_rx,k,ntr,d,mode,n_sdr_rank,n_optimize,bound,"
               "objective,power,max_residual,status,wall_time_ms")


def _fmt(x: float) -> str:
    return "nan" if x != x else f"{x:.10g}"


def trial_bound(config: ExperimentConfig, d: int) -> int:
    if config.interference_mode == "ic":
        return bound_sum(config.k_users, d)
    return min(bound_hypotenuse(config.k_users, d), config.n_tx)


def _inflate(v: BeamformerMatrix, width: int, rng: np.random.Generator) -> BeamformerMatrix:
    """Widen the sensing factor by a co-isometry; the Gram is unchanged."""
    n_s = v.n_beams - v.k_comm
    if n_s == 0 or n_s >= width:
        return v
    pad = np.zeros((n_s, width), dtype=complex)
    pad[:, :n_s] = np.eye(n_s)
    g = rng.standard_normal((width, width)) + 1j * rng.standard_normal((width, width))
    q, _ = np.linalg.qr(g)
    return BeamformerMatrix(np.hstack([v.comm, v.sensing @ (pad @ q)]), k_comm=v.k_comm)


def run_trial(setup: TrialSetup, config: ExperimentConfig, seed: int) -> TrialRecord:
    scenario = setup.scenario
    metric = setup.metric
    k = scenario.k_users
    record = TrialRecord(
        seed=seed, n_tx=config.n_tx, n_rx=config.n_rx, k_users=k,
        n_targets=config.n_targets if config.metric_kind in ("multitarget", "aoa") else 0,
        d=metric.d, mode=config.mode, bound=trial_bound(config, metric.d))
    start = time.perf_counter()
    try:
        design = build_sensing_design(setup.design_metric, scenario, config.scalarization)
        sol_design = solve(design.problem, SolveOptions(tol=DESIGN_TOL,
                                                        max_iters=DESIGN_MAX_ITERS))
        record.solver_iters += sol_design.iterations
        if sol_design.status == "infeasible":
            record.status = "infeasible"
            return record
        if sol_design.primal_residual > 1e-4:
            record.status = "failed"
            record.detail = f"design solve stalled at residual {sol_design.primal_residual:.2e}"
            return record
        record.objective = design_metric_value(design, sol_design)
        n_tx = config.n_tx
        v_star = extract_rank_one(
            design.layout.total_covariance(sol_design, n_tx),
            design.layout.comm_covariances(sol_design), scenario.channels,
            orth_basis=design.layout.orth_basis)

        sinr_fn = sinr_ic if config.interference_mode == "ic" else sinr_nic
        floors = None
        if k:
            floors = np.minimum(scenario.sinr_targets, sinr_fn(scenario, v_star))
        pm = build_power_min(scenario, metric.q_matrices,
                             quad_values(metric.q_matrices, v_star.columns),
                             sinr_floors=floors)
        warm_names = {b.name for b in pm.problem.blocks}
        warm = {name: mat for name, mat in sol_design.blocks.items() if name in warm_names}
        sol_pm = solve(pm.problem, SolveOptions(tol=POWER_TOL, max_iters=POWER_MAX_ITERS,
                                                warm_start=warm))
        record.solver_iters += sol_pm.iterations
        if sol_pm.status == "infeasible":
            record.status = "failed"
            record.detail = "power minimization reported infeasible"
            return record
        total_cov = pm.layout.total_covariance(sol_pm, n_tx)
        record.n_sdr_rank = covariance_rank(total_cov)
        v0 = extract_rank_one(total_cov, pm.layout.comm_covariances(sol_pm),
                              scenario.channels, orth_basis=pm.layout.orth_basis)
        if config.inflate_start:
            width = n_tx if config.interference_mode == "ic" else n_tx - k
            v0 = _inflate(v0, width, trial_rng(config.master_seed, seed + 1_000_003))
        record.n_start = v0.n_beams

        target = ReductionTarget(
            metric.q_matrices, quad_values(metric.q_matrices, v0.columns),
            sinr_fn(scenario, v0) if k else np.ones(0), v0.power)
        v_final, trace = reduce_to_bound(v0, scenario, target,
                                         mode=config.interference_mode, seed=seed)
        record.reduction_steps = trace.n_steps
        record.n_optimize = v_final.n_beams
        record.power = v_final.power

        values = quad_values(metric.q_matrices, v_final.columns)
        quad_res = float(np.max(np.abs(values - target.quad_values)
                                / np.maximum(1.0, np.abs(target.quad_values))))
        drift = abs(v_final.power - v0.power) / max(v0.power, 1e-12)
        sinr_def = 0.0
        if k:
            sinr_def = float(max(0.0, np.max(target.sinr_floor - sinr_fn(scenario, v_final))))
        record.max_residual = max(quad_res, drift, sinr_def)
        if record.max_residual > ACCEPT_RESIDUAL:
            record.status = "failed"
            record.detail = f"conservation residual {record.max_residual:.2e}"
            return record
        if record.n_optimize > record.bound:
            raise BoundViolation(
                f"seed {seed}: {record.n_optimize} beams exceed bound {record.bound}")
        record.status = "ok"
        return record
    except BoundViolation:
        raise
    except IsacError as exc:
        record.status = "failed"
        record.detail = f"{type(exc).__name__}: {exc}"
        return record
    finally:
        record.wall_time_ms = 1000.0 * (time.perf_counter() - start)


def run_seed(config: ExperimentConfig, seed: int) -> TrialRecord:
    """Scenario generation plus trial execution for one seed (picklable).

    Scenario construction can legitimately reject a draw (e.g. heavily
    overlapping angle priors degrade the metric's quadratic matrices past
    the linear-independence validation); such seeds are counted as failed,
    never dropped silently.
    """
    try:
        setup = randomize_scenario(config, seed)
    except (IsacError, ValueError) as exc:
        return TrialRecord(seed=seed, n_tx=config.n_tx, n_rx=config.n_rx,
                           k_users=config.k_users, n_targets=config.n_targets,
                           d=0, mode=config.mode, status="failed",
                           detail=f"{type(exc).__name__}: {exc}")
    return run_trial(setup, config, seed)
