"""Builders that turn scenarios and sensing metrics into conic problems.

Block layout shared by all builders: one complex PSD block per user
covariance (``user_k``) plus one PSD block for the covariance surplus
(``extra``). The total transmit covariance is reconstructed as

    R = sum_k R_k + extra             (interference-cancellation mode)
    R = sum_k R_k + B @ extra @ B^H   (no-cancellation mode)

where ``B`` is an orthonormal basis of the complement of the user channels.
Parameterizing the surplus in that complement is lossless in the
no-cancellation mode (an optimal solution with channel-orthogonal sensing
beams always exists) and makes the extracted sensing beams structurally
orthogonal to every user channel, so the sensing beams never show up in any
SINR denominator and the SINR rows coincide for both modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..channel import BfimSpec, IsacScenario, QuadraticMetricSpec
from ..errors import UnsupportedScalarizationError
from .solver import BlockSpec, ConicProblem, LinearTerm, ScalarSpec, SdpSolution


def orthogonal_complement_basis(channels: np.ndarray) -> np.ndarray:
    """Orthonormal columns spanning the orthogonal complement of the channels."""
    n_tx, k = channels.shape
    if k == 0:
        return np.eye(n_tx, dtype=complex)
    u, _, _ = np.linalg.svd(channels, full_matrices=True)
    return u[:, k:]


def comm_names(k_users: int) -> List[str]:
    return [f"user_{k}" for k in range(k_users)]


@dataclass
class CovarianceLayout:
    """How solver blocks map back to transmit covariances."""

    comm_names: List[str]
    sensing_name: Optional[str]
    orth_basis: Optional[np.ndarray]  # None: surplus lives in the full space

    def comm_covariances(self, solution: SdpSolution) -> List[np.ndarray]:
        return [solution.blocks[name] for name in self.comm_names]

    def surplus(self, solution: SdpSolution, n_tx: int) -> np.ndarray:
        if self.sensing_name is None:
            return np.zeros((n_tx, n_tx), dtype=complex)
        block = solution.blocks[self.sensing_name]
        if self.orth_basis is None:
            return block
        return self.orth_basis @ block @ self.orth_basis.conj().T

    def total_covariance(self, solution: SdpSolution, n_tx: int) -> np.ndarray:
        total = self.surplus(solution, n_tx).astype(complex)
        for name in self.comm_names:
            total = total + solution.blocks[name]
        return total


@dataclass
class PowerMinProblem:
    problem: ConicProblem
    layout: CovarianceLayout
    quad_matrices: List[np.ndarray]
    quad_values: np.ndarray


@dataclass
class DesignProblem:
    problem: ConicProblem
    layout: CovarianceLayout
    kind: str
    extras: Dict[str, object] = field(default_factory=dict)


def _variable_blocks(scenario: IsacScenario, mode: str):
    """Block specs, covariance layout, and per-block quad-coefficient maps."""
    n_tx = scenario.geometry.n_tx
    k = scenario.k_users
    blocks = [BlockSpec(name, n_tx, "complex") for name in comm_names(k)]
    basis = None
    if mode == "nic" and k:
        basis = orthogonal_complement_basis(scenario.channels)
        surplus_dim = n_tx - k
    else:
        surplus_dim = n_tx
    sensing_name = "extra" if surplus_dim else None
    if sensing_name:
        blocks.append(BlockSpec(sensing_name, surplus_dim, "complex"))
    layout = CovarianceLayout(comm_names(k), sensing_name, basis)
    return blocks, layout


def _quad_coeffs(layout: CovarianceLayout, q: np.ndarray) -> Dict[str, np.ndarray]:
    """Coefficients of ``Tr(Q R)`` over the solver blocks."""
    coeffs = {name: q for name in layout.comm_names}
    if layout.sensing_name:
        if layout.orth_basis is None:
            coeffs[layout.sensing_name] = q
        else:
            b = layout.orth_basis
            coeffs[layout.sensing_name] = b.conj().T @ q @ b
    return coeffs


def _sinr_rows(scenario: IsacScenario, floors: np.ndarray) -> List[LinearTerm]:
    """SINR floor rows; the sensing surplus never appears (see module doc)."""
    rows = []
    h = scenario.channels
    for k in range(scenario.k_users):
        hk = np.outer(h[:, k], h[:, k].conj())
        mats = {f"user_{n}": (hk / floors[k] if n == k else -hk)
                for n in range(scenario.k_users)}
        rows.append(LinearTerm(matrices=mats, rhs=scenario.noise_var,
                               label=f"sinr_{k}"))
    return rows


def _power_row(blocks: Sequence[BlockSpec], budget: float) -> LinearTerm:
    return LinearTerm(matrices={b.name: -np.eye(b.dim, dtype=complex) for b in blocks},
                      rhs=-budget, label="power")


def build_power_min(scenario: IsacScenario, quad_matrices: Sequence[np.ndarray],
                    quad_values: Sequence[float], sinr_floors=None,
                    mode: Optional[str] = None) -> PowerMinProblem:
    """Minimize total power subject to fixed quadratic sensing values and
    SINR floors; this is the problem whose optima the reduction steps expect."""
    mode = mode or scenario.interference_mode
    floors = np.asarray(sinr_floors if sinr_floors is not None else scenario.sinr_targets,
                        dtype=float)
    blocks, layout = _variable_blocks(scenario, mode)
    quad_values = np.asarray(quad_values, dtype=float)
    if len(quad_matrices) != quad_values.size:
        raise ValueError("one target value per quadratic matrix required")
    problem = ConicProblem(blocks=blocks)
    problem.objective_matrices = {b.name: np.eye(b.dim, dtype=complex) for b in blocks}
    for q, value in zip(quad_matrices, quad_values):
        problem.eq_constraints.append(
            LinearTerm(matrices=_quad_coeffs(layout, q), rhs=float(value), label="quad"))
    problem.ineq_constraints.extend(_sinr_rows(scenario, floors))
    return PowerMinProblem(problem=problem, layout=layout,
                           quad_matrices=list(quad_matrices), quad_values=quad_values)


def build_power_min_ic(scenario, quad_matrices, quad_values, sinr_floors=None):
    return build_power_min(scenario, quad_matrices, quad_values, sinr_floors, mode="ic")


def build_power_min_nic(scenario, quad_matrices, quad_values, sinr_floors=None):
    return build_power_min(scenario, quad_matrices, quad_values, sinr_floors, mode="nic")


def quad_targets_from_bfim(spec: BfimSpec, j_target: np.ndarray):
    """Target trace values for every (p <= q) information entry."""
    j_target = np.asarray(j_target, dtype=float)
    factor = spec.noise_var / spec.snapshots
    values = []
    idx = 0
    for p in range(spec.n_params):
        for q in range(p, spec.n_params):
            values.append(factor * (j_target[p, q] - spec.prior_matrix[p, q]))
            idx += 1
    return list(spec.quad_matrices), np.array(values)


# ---------------------------------------------------------------------------
# Forward design problems
# ---------------------------------------------------------------------------


def _sym_unit(p: int, q: int, n: int) -> np.ndarray:
    """Real symmetric matrix S with Tr(S E) == E[p, q] for symmetric E."""
    s = np.zeros((n, n))
    if p == q:
        s[p, p] = 1.0
    else:
        s[p, q] = 0.5
        s[q, p] = 0.5
    return s


def _herm_re_unit(p: int, q: int, n: int) -> np.ndarray:
    """Hermitian M with Tr(M E) == Re E[p, q] for Hermitian E."""
    m = np.zeros((n, n), dtype=complex)
    if p == q:
        m[p, p] = 1.0
    else:
        m[p, q] = 0.5
        m[q, p] = 0.5
    return m


def _herm_im_unit(p: int, q: int, n: int) -> np.ndarray:
    """Hermitian M with Tr(M E) == Im E[p, q] for Hermitian E (p != q)."""
    m = np.zeros((n, n), dtype=complex)
    m[p, q] = 0.5j
    m[q, p] = -0.5j
    return m


def build_sensing_design(metric, scenario: IsacScenario,
                         scalarization: Optional[str] = None) -> DesignProblem:
    """Conic encoding of 'optimize sensing subject to SINR floors and power'.

    Supported combinations:

    * ``BfimSpec`` + ``maxdiag``: minimize the worst diagonal of the inverse
      information matrix via one (L+1) Schur block per parameter.
    * ``BfimSpec`` + ``trace``: minimize the error-bound trace via a single
      Schur block; uses the compact complex form when the metric carries a
      ``complex_prior`` (full-channel structure), else the real 2L encoding.
    * ``QuadraticMetricSpec`` with offsets (angle-only metric): maximize the
      smallest information diagonal (equivalently minimize the worst angular
      error), a purely linear program over the covariances.
    * ``QuadraticMetricSpec`` with d == 1: maximize the single quadratic.

    ``logdet`` has no conic path here and raises
    :class:`UnsupportedScalarizationError`.
    """
    mode = scenario.interference_mode
    blocks, layout = _variable_blocks(scenario, mode)
    problem = ConicProblem(blocks=list(blocks))
    problem.ineq_constraints.extend(_sinr_rows(scenario, scenario.sinr_targets))
    problem.ineq_constraints.append(_power_row(blocks, scenario.power_budget))

    if isinstance(metric, QuadraticMetricSpec):
        scal = (scalarization or metric.scalarization).lower()
        if scal == "logdet":
            raise UnsupportedScalarizationError("logdet has no conic encoding here")
        if metric.offsets is not None:
            problem.scalars.append(ScalarSpec("t", nonneg=True))
            for i, q in enumerate(metric.q_matrices):
                problem.ineq_constraints.append(LinearTerm(
                    matrices=_quad_coeffs(layout, q), scalars={"t": -1.0},
                    rhs=-float(metric.offsets[i]), label=f"floor_{i}"))
            problem.objective_scalars = {"t": -1.0}
            return DesignProblem(problem, layout, kind="maxmin_information")
        if metric.d == 1:
            problem.objective_matrices = {
                name: -mat for name, mat in _quad_coeffs(layout, metric.q_matrices[0]).items()}
            return DesignProblem(problem, layout, kind="max_single_quad")
        raise UnsupportedScalarizationError(
            f"no conic encoding for a {metric.d}-term metric with {scal!r}")

    if not isinstance(metric, BfimSpec):
        raise TypeError(f"unsupported metric type {type(metric).__name__}")

    scal = (scalarization or "maxdiag").lower()
    factor = metric.snapshots / metric.noise_var
    n_params = metric.n_params

    def info_coeffs(p, q):
        g = metric.quad_matrices[_pair_index(p, q, n_params)]
        return {name: factor * mat for name, mat in _quad_coeffs(layout, g).items()}

    # Congruence-scale the Schur blocks by the prior so their entries are
    # O(1); W (J, e_i; e_i, t) W with W = diag(d^-1/2, 1) is PSD iff the
    # unscaled block is, and t keeps its meaning.
    d_scale = np.sqrt(1.0 + np.abs(np.diag(metric.prior_matrix)))

    if scal == "maxdiag":
        problem.scalars.append(ScalarSpec("t", nonneg=True))
        dim = n_params + 1
        for i in range(n_params):
            name = f"epi_{i}"
            problem.blocks.append(BlockSpec(name, dim, "real"))
            for p in range(n_params):
                for q in range(p, n_params):
                    w = 1.0 / (d_scale[p] * d_scale[q])
                    mats = {name: _sym_unit(p, q, dim)}
                    for bname, coeff in info_coeffs(p, q).items():
                        mats[bname] = -w * coeff
                    problem.eq_constraints.append(LinearTerm(
                        matrices=mats, rhs=w * float(metric.prior_matrix[p, q])))
            for p in range(n_params):
                problem.eq_constraints.append(LinearTerm(
                    matrices={name: _sym_unit(p, n_params, dim)},
                    rhs=1.0 / d_scale[p] if p == i else 0.0))
            problem.eq_constraints.append(LinearTerm(
                matrices={name: _sym_unit(n_params, n_params, dim)},
                scalars={"t": -1.0}, rhs=0.0))
        problem.objective_scalars = {"t": 1.0}
        return DesignProblem(problem, layout, kind="maxdiag_bfim")

    if scal == "trace":
        if metric.complex_prior is not None:
            nt = scenario.geometry.n_tx
            dim = 2 * nt
            problem.blocks.append(BlockSpec("epi", dim, "complex"))
            prior = metric.complex_prior
            factor2 = 2.0 * metric.snapshots / metric.noise_var
            dc = np.sqrt(1.0 + np.abs(np.diag(prior)))

            def tie(m_small, m_big, rhs):
                mats = {"epi": m_big}
                for bname, coeff in _quad_coeffs(layout, m_small).items():
                    mats[bname] = -factor2 * coeff
                problem.eq_constraints.append(LinearTerm(matrices=mats, rhs=rhs))

            for p in range(nt):
                for q in range(p, nt):
                    w = 1.0 / (dc[p] * dc[q])
                    m = _herm_re_unit(p, q, nt)
                    tie(w * m, _embed(m, dim, 0, 0), w * float(np.real(np.trace(m @ prior))))
                    if p != q:
                        m = _herm_im_unit(p, q, nt)
                        tie(w * m, _embed(m, dim, 0, 0), w * float(np.real(np.trace(m @ prior))))
            for p in range(nt):
                for q in range(nt):
                    m_re = np.zeros((dim, dim), dtype=complex)
                    m_re[p, nt + q] = 0.5
                    m_re[nt + q, p] = 0.5
                    problem.eq_constraints.append(LinearTerm(
                        matrices={"epi": m_re}, rhs=1.0 / dc[p] if p == q else 0.0))
                    m_im = np.zeros((dim, dim), dtype=complex)
                    m_im[p, nt + q] = 0.5j
                    m_im[nt + q, p] = -0.5j
                    problem.eq_constraints.append(LinearTerm(matrices={"epi": m_im}, rhs=0.0))
            corner = np.zeros((dim, dim), dtype=complex)
            corner[nt:, nt:] = np.eye(nt)
            problem.objective_matrices = {"epi": 2.0 * scenario.geometry.n_rx * corner}
            return DesignProblem(problem, layout, kind="trace_fullchannel")

        dim = 2 * n_params
        problem.blocks.append(BlockSpec("epi", dim, "real"))
        for p in range(n_params):
            for q in range(p, n_params):
                w = 1.0 / (d_scale[p] * d_scale[q])
                mats = {"epi": _sym_unit(p, q, dim)}
                for bname, coeff in info_coeffs(p, q).items():
                    mats[bname] = -w * coeff
                problem.eq_constraints.append(LinearTerm(
                    matrices=mats, rhs=w * float(metric.prior_matrix[p, q])))
        for p in range(n_params):
            for q in range(n_params):
                problem.eq_constraints.append(LinearTerm(
                    matrices={"epi": _sym_unit(p, n_params + q, dim)},
                    rhs=1.0 / d_scale[p] if p == q else 0.0))
        corner = np.zeros((dim, dim))
        corner[n_params:, n_params:] = np.eye(n_params)
        problem.objective_matrices = {"epi": corner}
        return DesignProblem(problem, layout, kind="trace_bfim")

    raise UnsupportedScalarizationError(f"unsupported scalarization {scal!r}")


def design_metric_value(design: DesignProblem, solution: SdpSolution) -> float:
    """Recover the sensing-metric value from a solved design problem."""
    if design.kind in ("maxdiag_bfim",):
        return solution.scalars["t"]
    if design.kind in ("trace_fullchannel", "trace_bfim"):
        return solution.objective
    if design.kind == "maxmin_information":
        return 1.0 / solution.scalars["t"]
    if design.kind == "max_single_quad":
        return -solution.objective
    raise ValueError(f"unknown design kind {design.kind!r}")


def _embed(m: np.ndarray, dim: int, row: int, col: int) -> np.ndarray:
    out = np.zeros((dim, dim), dtype=complex)
    out[row:row + m.shape[0], col:col + m.shape[1]] = m
    return out


def _pair_index(p: int, q: int, n: int) -> int:
    if p > q:
        p, q = q, p
    return p * n - p * (p - 1) // 2 + (q - p)
