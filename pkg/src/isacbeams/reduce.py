"""Constructive reduction of the number of beamformers.

Given a beamformer set that attains fixed quadratic sensing values, SINR
floors, and a power level, the steps here build a strictly smaller set that
attains the same values:

* :func:`ic_reduce_step` scales each user beam by a real factor and right-
  multiplies the sensing block by a tall matrix. The factors come from a
  null vector of a homogeneous linear system in the unknowns
  ``a_k = 1 - d_k^2`` and the Hermitian ``M_s = I - U_s U_s^H``; one row per
  quadratic value and one per user SINR. It applies whenever
  ``n_sensing^2 > d``.
* :func:`nic_reduce_step` assumes channel-orthogonal sensing beams and
  right-multiplies the whole set by ``U = [[I_K, 0], [U_c, U_s]]`` built
  from a Hermitian ``M = I - U U^H`` with zero upper-left K x K block; user
  SINRs are untouched structurally. It applies whenever ``N^2 > K^2 + d``.
* :func:`reduce_to_bound` iterates a step until its counting condition
  fails, which lands at ``K + floor(sqrt(d))`` beams in 'ic' mode and
  ``floor(sqrt(K^2 + d))`` in 'nic' mode.

Whenever the null space has spare dimensions (strict slack in the counting
condition), the total-power functional is added as an extra homogeneous row,
which preserves power exactly by construction. At the counting boundary the
row is dropped and power preservation instead rides on the optimality of the
input set (the power-minimal solution makes the power functional linearly
dependent on the constraint rows); the drift is always measured and
enforced.

:func:`orthogonalize_sensing` implements the channel-orthogonality move for
the no-cancellation mode: a max-min weighted useful-power SDR followed by a
lexicographic absorption phase and a Gram-preserving unitary remix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .channel import IsacScenario
from .errors import (
    DegenerateDeltaError,
    ConditionViolatedError,
    NotPsdError,
    OrthonormalityLossError,
    SolverFailureError,
    StalledReductionError,
)
from .metrics import BeamformerMatrix, sinr_ic, sinr_nic
from .numerics import (
    cvec,
    cvec_to_matrix,
    eig_hermitian,
    orthonormal_complement,
    psd_factor,
    real_nullspace_vector,
)
from .channel import quad_values, steering_derivative
from .sdp.solver import BlockSpec, ConicProblem, LinearTerm, ScalarSpec, SolveOptions, solve

NULL_RANK_TOL = 1e-8
STEP_TOL = 1e-6
END_TO_END_TOL = 1e-5


@dataclass
class ReductionTarget:
    """Values a reduction must preserve: quadratic sensing terms, SINR
    floors, and the power level of the starting set."""

    quad_matrices: List[np.ndarray]
    quad_values: np.ndarray
    sinr_floor: np.ndarray
    power_cap: float

    def __post_init__(self):
        self.quad_values = np.atleast_1d(np.asarray(self.quad_values, dtype=float))
        self.sinr_floor = np.atleast_1d(np.asarray(self.sinr_floor, dtype=float))
        if len(self.quad_matrices) != self.quad_values.size:
            raise ValueError("one value per quadratic matrix required")
        if self.quad_values.size < 1:
            raise ValueError("need at least one quadratic value")
        if np.any(self.sinr_floor <= 0):
            raise ValueError("SINR floors must be positive")

    @property
    def d(self) -> int:
        return self.quad_values.size


@dataclass
class ReductionStep:
    n_before: int
    n_after: int
    max_quad_residual: float
    max_sinr_deficit: float
    power_drift: float
    delta_used: float
    delta_source: str


@dataclass
class ReductionTrace:
    steps: List[ReductionStep] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.steps)


def _step_diagnostics(v: BeamformerMatrix, target: ReductionTarget,
                      scenario_sinr, power_before: float):
    values = quad_values(target.quad_matrices, v.columns)
    quad_res = float(np.max(np.abs(values - target.quad_values)
                            / np.maximum(1.0, np.abs(target.quad_values))))
    if target.sinr_floor.size:
        deficits = target.sinr_floor - scenario_sinr(v)
        sinr_deficit = float(max(0.0, np.max(deficits)))
    else:
        sinr_deficit = 0.0
    drift = abs(v.power - power_before) / max(power_before, 1e-12)
    return quad_res, sinr_deficit, drift


def _pick_delta(comm_values: np.ndarray, eigenvalues: np.ndarray, tie_tol: float = 1e-12):
    """Signed scale of largest magnitude; sensing eigenvalues win near-ties."""
    best_eig = int(np.argmax(np.abs(eigenvalues)))
    eig_mag = abs(eigenvalues[best_eig])
    if comm_values.size:
        best_comm = int(np.argmax(np.abs(comm_values)))
        comm_mag = abs(comm_values[best_comm])
        if comm_mag > eig_mag * (1.0 + tie_tol):
            return float(comm_values[best_comm]), f"comm_beam[{best_comm}]"
    return float(eigenvalues[best_eig]), f"sensing_eigen[{best_eig}]"


def ic_reduce_step(v: BeamformerMatrix, target: ReductionTarget,
                   channels: np.ndarray, noise_var: float) -> Optional[BeamformerMatrix]:
    """One reduction step for interference-cancelling users.

    Returns ``None`` when the counting condition ``n_sensing^2 > d`` fails.
    Raises :class:`DegenerateDeltaError` when the scaling would zero out a
    user beam (excluded at an optimum, possible under numerical drift).
    """
    k = v.k_comm
    n_s = v.n_beams - k
    d = target.d
    if n_s * n_s <= d:
        return None
    comm = v.comm
    sens = v.sensing

    rows = []
    for q in target.quad_matrices:
        a_coeff = np.real(np.einsum("ik,ij,jk->k", comm.conj(), q, comm)) if k else np.zeros(0)
        m_coeff = cvec(sens.conj().T @ q @ sens)
        rows.append(np.concatenate([a_coeff, m_coeff]))
    gains = np.abs(channels.conj().T @ comm) ** 2 if k else np.zeros((0, 0))
    if k:
        achieved = np.diag(gains) / (gains.sum(axis=1) - np.diag(gains) + noise_var)
        if np.any(achieved <= 0):
            raise DegenerateDeltaError("a user beam carries no useful power")
        for i in range(k):
            a_coeff = -gains[i].copy()
            a_coeff[i] = gains[i, i] / achieved[i]
            rows.append(np.concatenate([a_coeff, np.zeros(n_s * n_s)]))
    if n_s * n_s > d + 1:
        power_row = np.concatenate([
            np.sum(np.abs(comm) ** 2, axis=0) if k else np.zeros(0),
            cvec(sens.conj().T @ sens)])
        rows.append(power_row)

    x = real_nullspace_vector(np.array(rows))
    a_raw = x[:k]
    m_raw = cvec_to_matrix(x[k:], n_s)
    eigs = eig_hermitian(m_raw).eigenvalues
    delta, source = _pick_delta(a_raw, eigs)
    if source.startswith("comm"):
        raise DegenerateDeltaError(f"scaling dominated by {source}")
    a = a_raw / delta
    if np.any(a > 1.0 - 1e-10):
        raise DegenerateDeltaError("a user scale factor reached zero")
    m_s = m_raw / delta
    eye_minus = np.eye(n_s) - m_s
    w_min = eig_hermitian(eye_minus).eigenvalues[0]
    if w_min > 1e-8:
        raise DegenerateDeltaError("I - M_s failed to become singular after scaling")
    factor = psd_factor(eye_minus, NULL_RANK_TOL)
    if factor.shape[1] >= n_s:
        raise DegenerateDeltaError("factorization did not drop a sensing column")
    new_comm = comm * np.sqrt(np.maximum(1.0 - a, 0.0)) if k else comm
    out = BeamformerMatrix(np.hstack([new_comm, sens @ factor]), k_comm=k)
    out._delta_info = (float(delta), source)
    return out


def _masked_cvec_indices(n: int, k: int) -> np.ndarray:
    """cvec coordinates of Hermitian n x n matrices with zero top-left k x k."""
    keep = []
    keep.extend(range(k, n))  # diagonal entries outside the block
    iu, ju = np.triu_indices(n, 1)
    m = iu.size
    for pos in range(m):
        if not (iu[pos] < k and ju[pos] < k):
            keep.append(n + pos)          # real part
            keep.append(n + m + pos)      # imaginary part
    return np.array(sorted(keep), dtype=int)


def nic_reduce_step(v: BeamformerMatrix, target: ReductionTarget,
                    channels: np.ndarray, noise_var: float,
                    orth_tol: float = 1e-6) -> Optional[BeamformerMatrix]:
    """One reduction step for non-cancelling users with orthogonal sensing.

    Returns ``None`` when ``N^2 > K^2 + d`` fails. The sensing beams must be
    orthogonal to every user channel on entry; user beams change only within
    the span of the sensing beams, so every SINR is untouched.
    """
    k = v.k_comm
    n = v.n_beams
    d = target.d
    if n * n <= k * k + d:
        return None
    if k and v.sensing.size:
        leak = np.linalg.norm(channels.conj().T @ v.sensing)
        scale = np.linalg.norm(channels) * max(np.linalg.norm(v.sensing), 1e-300)
        if leak > orth_tol * scale:
            raise OrthonormalityLossError(
                f"sensing beams leak into the channels ({leak / scale:.3e} relative)")

    keep = _masked_cvec_indices(n, k)
    cols = v.columns
    rows = [cvec(cols.conj().T @ q @ cols)[keep] for q in target.quad_matrices]
    if n * n - k * k > d + 1:
        rows.append(cvec(cols.conj().T @ cols)[keep])

    x = real_nullspace_vector(np.array(rows))
    full = np.zeros(n * n)
    full[keep] = x
    m_raw = cvec_to_matrix(full, n)
    eigs = eig_hermitian(m_raw).eigenvalues
    delta, source = _pick_delta(np.zeros(0), eigs)
    m = m_raw / delta
    eye_minus = np.eye(n) - m
    if eig_hermitian(eye_minus).eigenvalues[0] > 1e-8:
        raise DegenerateDeltaError("I - M failed to become singular after scaling")
    u_tilde = psd_factor(eye_minus, NULL_RANK_TOL)
    n_new = u_tilde.shape[1]
    if n_new >= n:
        raise DegenerateDeltaError("factorization did not drop a column")
    if k == 0:
        out = BeamformerMatrix(cols @ u_tilde, k_comm=0)
        out._delta_info = (float(delta), source)
        return out

    q1 = u_tilde[:k]
    gram_defect = float(np.max(np.abs(q1 @ q1.conj().T - np.eye(k))))
    if gram_defect > orth_tol:
        raise OrthonormalityLossError(
            f"top user rows of the compact factor drifted ({gram_defect:.3e})")
    # exactly unitary remix frame: polar-correct the user rows, complete them
    uu, _, vh = np.linalg.svd(q1, full_matrices=False)
    q1_ortho = uu @ vh
    if n_new == k:
        w = q1_ortho
    else:
        w = np.vstack([q1_ortho, orthonormal_complement(q1_ortho)])
    u = u_tilde @ w.conj().T
    out = BeamformerMatrix(cols @ u, k_comm=k)
    out._delta_info = (float(delta), source)
    return out


def reduce_to_bound(v0: BeamformerMatrix, scenario: IsacScenario,
                    target: ReductionTarget, mode: Optional[str] = None,
                    max_retries: int = 3, seed: int = 0):
    """Iterate reduction steps until the counting condition fails.

    Returns ``(final_beams, trace)``. Numerically failed steps are retried
    with a re-randomized (Gram-preserving) sensing factor up to
    ``max_retries`` times before :class:`StalledReductionError`.
    """
    mode = mode or scenario.interference_mode
    k = v0.k_comm
    d = target.d
    rng = np.random.default_rng(seed)

    def sinr_fn(v):
        return sinr_ic(scenario, v) if mode == "ic" else sinr_nic(scenario, v)

    def condition(v):
        if mode == "ic":
            n_s = v.n_beams - k
            return n_s * n_s > d
        return v.n_beams ** 2 > k * k + d

    step_fn = ic_reduce_step if mode == "ic" else nic_reduce_step

    trace = ReductionTrace()
    current = v0
    power0 = v0.power
    while condition(current):
        attempt = 0
        candidate = None
        work = current
        while attempt <= max_retries:
            try:
                candidate = step_fn(work, target, scenario.channels, scenario.noise_var)
                if candidate is None:
                    break
                quad_res, sinr_def, drift = _step_diagnostics(
                    candidate, target, sinr_fn, power0)
                if quad_res > STEP_TOL or sinr_def > STEP_TOL or drift > STEP_TOL:
                    raise DegenerateDeltaError(
                        f"conservation failure (quad {quad_res:.2e}, sinr {sinr_def:.2e}, "
                        f"power {drift:.2e})")
                break
            except (DegenerateDeltaError, OrthonormalityLossError, NotPsdError) as exc:
                attempt += 1
                candidate = None
                if attempt > max_retries:
                    raise StalledReductionError(
                        f"step from {work.n_beams} beams kept failing: {exc}") from exc
                work = _rerandomize_sensing(work, rng)
        if candidate is None:
            break
        delta, source = getattr(candidate, "_delta_info", (np.nan, "unknown"))
        trace.steps.append(ReductionStep(
            n_before=current.n_beams, n_after=candidate.n_beams,
            max_quad_residual=quad_res, max_sinr_deficit=sinr_def,
            power_drift=drift, delta_used=delta, delta_source=source))
        if candidate.n_beams >= current.n_beams:
            raise StalledReductionError("step did not reduce the beam count")
        current = candidate

    quad_res, sinr_def, drift = _step_diagnostics(current, target, sinr_fn, power0)
    if max(quad_res, sinr_def, drift) > END_TO_END_TOL:
        raise StalledReductionError(
            f"end-to-end conservation failure (quad {quad_res:.2e}, sinr {sinr_def:.2e}, "
            f"power {drift:.2e})")
    return current, trace


def _rerandomize_sensing(v: BeamformerMatrix, rng: np.random.Generator) -> BeamformerMatrix:
    """Right-multiply the sensing block by a random unitary (Gram preserved)."""
    n_s = v.n_beams - v.k_comm
    if n_s == 0:
        return v
    g = rng.standard_normal((n_s, n_s)) + 1j * rng.standard_normal((n_s, n_s))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return BeamformerMatrix(np.hstack([v.comm, v.sensing @ q]), k_comm=v.k_comm)


# ---------------------------------------------------------------------------
# Channel-orthogonal sensing beams (no-cancellation mode)
# ---------------------------------------------------------------------------


def orthogonalize_sensing(v: BeamformerMatrix, scenario: IsacScenario,
                          opts: Optional[SolveOptions] = None) -> BeamformerMatrix:
    """Remix a feasible set so the sensing beams are channel-orthogonal.

    The Gram matrix (hence every quadratic sensing value and the power) is
    preserved exactly by a unitary right-factor; each user's SINR ends at or
    above its target. Phase 1 maximizes the weighted minimum useful power
    under the covariance cap; phase 2 re-maximizes the weighted useful powers
    at the fixed optimum, which provably absorbs every channel-aligned
    component into the user beams and survives rank-one extraction.
    """
    k = v.k_comm
    if k == 0:
        return v
    n_tx = v.n_tx
    gram_total = v.gram
    h = scenario.channels
    weights = np.array([
        (1.0 + 1.0 / scenario.sinr_targets[i])
        / (float(np.real(h[:, i].conj() @ gram_total @ h[:, i])) + scenario.noise_var)
        for i in range(k)])

    names = [f"user_{i}" for i in range(k)]
    blocks = [BlockSpec(name, n_tx, "complex") for name in names]
    blocks.append(BlockSpec("slack", n_tx, "complex"))

    def cap_rows():
        rows = []
        eye = np.eye(n_tx, dtype=complex)
        for p in range(n_tx):
            for q in range(p, n_tx):
                m = np.zeros((n_tx, n_tx), dtype=complex)
                if p == q:
                    m[p, p] = 1.0
                else:
                    m[p, q] = 0.5
                    m[q, p] = 0.5
                rhs = float(np.real(np.trace(m @ gram_total)))
                rows.append(LinearTerm(matrices={**{nm: m for nm in names}, "slack": m},
                                       rhs=rhs))
                if p != q:
                    m2 = np.zeros((n_tx, n_tx), dtype=complex)
                    m2[p, q] = 0.5j
                    m2[q, p] = -0.5j
                    rhs2 = float(np.real(np.trace(m2 @ gram_total)))
                    rows.append(LinearTerm(matrices={**{nm: m2 for nm in names}, "slack": m2},
                                           rhs=rhs2))
        return rows

    useful = [np.outer(h[:, i], h[:, i].conj()) for i in range(k)]

    phase1 = ConicProblem(blocks=list(blocks), scalars=[ScalarSpec("t", nonneg=True)])
    phase1.eq_constraints.extend(cap_rows())
    for i in range(k):
        phase1.ineq_constraints.append(LinearTerm(
            matrices={names[i]: weights[i] * useful[i]}, scalars={"t": -1.0}, rhs=0.0))
    phase1.objective_scalars = {"t": -1.0}
    sol1 = solve(phase1, opts or SolveOptions(tol=1e-8))
    if sol1.status == "infeasible":
        raise SolverFailureError("orthogonalization phase 1 reported infeasible")
    t_star = sol1.scalars["t"]

    phase2 = ConicProblem(blocks=list(blocks))
    phase2.eq_constraints.extend(cap_rows())
    for i in range(k):
        phase2.ineq_constraints.append(LinearTerm(
            matrices={names[i]: weights[i] * useful[i]}, rhs=t_star * (1.0 - 1e-9)))
    phase2.objective_matrices = {names[i]: -weights[i] * useful[i] for i in range(k)}
    sol2 = solve(phase2, opts or SolveOptions(tol=1e-8))
    if sol2.status == "infeasible":
        raise SolverFailureError("orthogonalization phase 2 reported infeasible")

    coeffs = []
    pinv = np.linalg.pinv(v.columns)
    for i in range(k):
        rk = sol2.blocks[names[i]]
        power = float(np.real(h[:, i].conj() @ rk @ h[:, i]))
        if power <= 1e-14:
            raise SolverFailureError(f"user {i} lost all useful power in phase 2")
        beam = rk @ h[:, i] / np.sqrt(power)
        coeffs.append(pinv @ beam)
    c = np.stack(coeffs, axis=1)
    uu, sing, vh = np.linalg.svd(c, full_matrices=False)
    if sing[-1] <= 1e-8 * sing[0]:
        raise SolverFailureError("extracted user beams are numerically dependent")
    theta_c = uu @ vh
    theta_s = orthonormal_complement(theta_c.conj().T).conj().T
    theta = np.hstack([theta_c, theta_s])
    return BeamformerMatrix(v.columns @ theta, k_comm=k)


# ---------------------------------------------------------------------------
# Closed-form two-beam necessity check (single target, derivative direction)
# ---------------------------------------------------------------------------


@dataclass
class TwoBeamReport:
    c_value: float
    beta1: float
    beta2: float
    two_beam_objective: float
    single_beam_objective: float
    grid_beta1: float
    grid_objective: float


def verify_single_target_two_beams(geometry, theta: float, power: float,
                                   grid_points: int = 1000) -> TwoBeamReport:
    """Optimal two-beam power split toward a single target and its margin
    over the best single beam, cross-checked against a grid search.

    Allocating everything to the steering direction leaves zero information
    about the angle whenever the receive array is small; the closed-form
    optimum puts ``beta2 = power - beta1 > 0`` on the derivative direction.
    """
    da_t = steering_derivative(geometry, theta, "tx")
    da_r = steering_derivative(geometry, theta, "rx")
    dt2 = float(np.vdot(da_t, da_t).real)
    dr2 = float(np.vdot(da_r, da_r).real)
    c = dt2 - dr2
    nt, nr = geometry.n_tx, geometry.n_rx
    threshold = (2 * np.pi**2 * np.cos(theta) ** 2 / 12.0) * (nr**2 - 1) ** 2
    if not (nt**2 - nr**2 > threshold):
        raise ConditionViolatedError(
            f"two-beam analysis needs n_tx^2 - n_rx^2 > {threshold:.4f}")

    def objective(beta1, beta2):
        if beta1 <= 0:
            return np.inf
        denom = beta1 * dr2 + beta2 * dt2
        if denom <= 0:
            return np.inf
        return 2.0 / beta1 + 1.0 / denom

    beta1 = min(power * dt2 / (c + np.sqrt(c / 2.0)), power)
    beta2 = power - beta1
    grid = np.linspace(power / grid_points, power, grid_points)
    values = np.array([objective(b, power - b) for b in grid])
    best = int(np.argmin(values))
    grid_beta1, grid_obj = grid[best], values[best]
    if 0 < best < grid_points - 1 and np.all(np.isfinite(values[best - 1:best + 2])):
        # parabolic vertex through the best grid triple (sub-grid refinement)
        y0, y1, y2 = values[best - 1:best + 2]
        denom = y0 - 2 * y1 + y2
        if denom > 0:
            shift = 0.5 * (y0 - y2) / denom
            grid_beta1 = grid[best] + shift * (grid[1] - grid[0])
            grid_obj = objective(grid_beta1, power - grid_beta1)
    return TwoBeamReport(
        c_value=c,
        beta1=float(beta1),
        beta2=float(beta2),
        two_beam_objective=float(objective(beta1, beta2)),
        single_beam_objective=float(objective(power, 0.0)),
        grid_beta1=float(grid_beta1),
        grid_objective=float(grid_obj),
    )
