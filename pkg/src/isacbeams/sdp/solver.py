"""Small dense conic solver over products of PSD blocks and scalar cones.

Problems are stated as

    minimize    sum_b Tr(C_b X_b) + sum_s c_s x_s
    subject to  sum_b Tr(A_b X_b) + sum_s a_s x_s  =  rhs   (equalities)
                sum_b Tr(A_b X_b) + sum_s a_s x_s  >= rhs   (inequalities)
                X_b PSD (complex Hermitian or real symmetric), x_s >= 0 or free

and solved with an over-relaxed ADMM splitting: alternating projection onto
the affine constraint set (cached Cholesky of A A^T) and onto the cone
product (batched eigendecompositions), with adaptive penalty rescaling. All
constraint rows are normalized to unit norm and the objective to unit norm;
reported residuals are relative. The method is deterministic for fixed
options; ``SolveOptions.seed`` is reserved for randomized restarts and does
not affect the default algorithm.

Infeasibility is flagged when the affine-projection displacement keeps
growing while the primal residual stagnates and the normalized multiplier
passes a certificate test; this cleanly rejects, e.g., power targets that
contradict the trace budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..errors import SolverFailureError
from ..numerics import hermitian_basis_dim, unvec_block, vec_block

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class BlockSpec:
    """One PSD matrix variable."""

    name: str
    dim: int
    kind: str = "complex"  # "complex" | "real"


@dataclass(frozen=True)
class ScalarSpec:
    """One scalar variable, nonnegative by default."""

    name: str
    nonneg: bool = True


@dataclass
class LinearTerm:
    """One linear constraint row over blocks and scalars."""

    matrices: Dict[str, np.ndarray] = field(default_factory=dict)
    scalars: Dict[str, float] = field(default_factory=dict)
    rhs: float = 0.0
    label: str = ""


@dataclass
class ConicProblem:
    blocks: List[BlockSpec] = field(default_factory=list)
    scalars: List[ScalarSpec] = field(default_factory=list)
    objective_matrices: Dict[str, np.ndarray] = field(default_factory=dict)
    objective_scalars: Dict[str, float] = field(default_factory=dict)
    eq_constraints: List[LinearTerm] = field(default_factory=list)
    ineq_constraints: List[LinearTerm] = field(default_factory=list)


@dataclass
class SolveOptions:
    tol: float = 1e-7
    max_iters: int = 50_000
    rho: float = 1.0
    over_relax: float = 1.6
    check_every: int = 50
    infeas_check_after: int = 5_000
    adapt_rho: bool = True
    accel_memory: int = 12
    seed: int = 0
    warm_start: Optional[Dict[str, np.ndarray]] = None


@dataclass
class SdpSolution:
    blocks: Dict[str, np.ndarray]
    scalars: Dict[str, float]
    objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    status: str
    iterations: int
    duals_eq: np.ndarray
    duals_ineq: np.ndarray
    dual_blocks: Dict[str, np.ndarray]

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Layout:
    """Index bookkeeping for the stacked variable vector."""

    def __init__(self, problem: ConicProblem):
        self.block_offset: Dict[str, int] = {}
        self.block_spec: Dict[str, BlockSpec] = {}
        offset = 0
        for spec in problem.blocks:
            self.block_offset[spec.name] = offset
            self.block_spec[spec.name] = spec
            offset += hermitian_basis_dim(spec.dim, spec.kind)
        self.scalar_offset: Dict[str, int] = {}
        self.scalar_nonneg: List[int] = []
        for spec in problem.scalars:
            self.scalar_offset[spec.name] = offset
            if spec.nonneg:
                self.scalar_nonneg.append(offset)
            offset += 1
        self.slack_offset = offset
        self.n_slacks = len(problem.ineq_constraints)
        self.size = offset + self.n_slacks
        # group equal-shape blocks for batched eigendecompositions
        groups: Dict[tuple, List[int]] = {}
        for spec in problem.blocks:
            groups.setdefault((spec.kind, spec.dim), []).append(self.block_offset[spec.name])
        self.groups = []
        for (kind, dim), offs in groups.items():
            width = hermitian_basis_dim(dim, kind)
            idx = np.array(offs)[:, None] + np.arange(width)[None, :]
            self.groups.append((kind, dim, idx))
        self.nonneg_idx = np.array(self.scalar_nonneg, dtype=int)
        self.free_idx = np.array(
            [off for name, off in self.scalar_offset.items()
             if off not in self.scalar_nonneg], dtype=int)

    def row(self, term: LinearTerm) -> np.ndarray:
        out = np.zeros(self.size)
        for name, mat in term.matrices.items():
            spec = self.block_spec[name]
            off = self.block_offset[name]
            out[off:off + hermitian_basis_dim(spec.dim, spec.kind)] = vec_block(mat, spec.kind)
        for name, coeff in term.scalars.items():
            out[self.scalar_offset[name]] = coeff
        return out


def _project_cone(v: np.ndarray, layout: _Layout, dual: bool = False) -> np.ndarray:
    """Project onto the cone product (or its dual, which zeroes free scalars)."""
    out = v.copy()
    for kind, dim, idx in layout.groups:
        segs = v[idx]
        if kind == "complex":
            mats = _batch_cvec_to_mats(segs, dim)
        else:
            mats = _batch_rvec_to_mats(segs, dim)
        w, q = np.linalg.eigh(mats)
        np.maximum(w, 0.0, out=w)
        proj = (q * w[:, None, :]) @ q.conj().transpose(0, 2, 1)
        out[idx] = _batch_cvec(proj) if kind == "complex" else _batch_rvec(proj)
    if layout.nonneg_idx.size:
        out[layout.nonneg_idx] = np.maximum(v[layout.nonneg_idx], 0.0)
    if dual and layout.free_idx.size:
        out[layout.free_idx] = 0.0
    if layout.n_slacks:
        sl = slice(layout.slack_offset, layout.slack_offset + layout.n_slacks)
        out[sl] = np.maximum(v[sl], 0.0)
    return out


def _batch_cvec_to_mats(segs: np.ndarray, n: int) -> np.ndarray:
    g = segs.shape[0]
    m = n * (n - 1) // 2
    mats = np.zeros((g, n, n), dtype=complex)
    idx = np.arange(n)
    mats[:, idx, idx] = segs[:, :n]
    if m:
        iu, ju = np.triu_indices(n, 1)
        upper = (segs[:, n:n + m] + 1j * segs[:, n + m:]) / _SQRT2
        mats[:, iu, ju] = upper
        mats[:, ju, iu] = upper.conj()
    return mats


def _batch_cvec(mats: np.ndarray) -> np.ndarray:
    g, n, _ = mats.shape
    idx = np.arange(n)
    parts = [mats[:, idx, idx].real]
    if n > 1:
        iu, ju = np.triu_indices(n, 1)
        upper = mats[:, iu, ju]
        parts += [_SQRT2 * upper.real, _SQRT2 * upper.imag]
    return np.concatenate(parts, axis=1)


def _batch_rvec_to_mats(segs: np.ndarray, n: int) -> np.ndarray:
    g = segs.shape[0]
    mats = np.zeros((g, n, n))
    idx = np.arange(n)
    mats[:, idx, idx] = segs[:, :n]
    if n > 1:
        iu, ju = np.triu_indices(n, 1)
        mats[:, iu, ju] = segs[:, n:] / _SQRT2
        mats[:, ju, iu] = segs[:, n:] / _SQRT2
    return mats


def _batch_rvec(mats: np.ndarray) -> np.ndarray:
    g, n, _ = mats.shape
    idx = np.arange(n)
    parts = [mats[:, idx, idx]]
    if n > 1:
        iu, ju = np.triu_indices(n, 1)
        parts.append(_SQRT2 * mats[:, iu, ju])
    return np.concatenate(parts, axis=1)


def solve(problem: ConicProblem, opts: Optional[SolveOptions] = None) -> SdpSolution:
    """Solve a conic problem; see the module docstring for the method."""
    opts = opts or SolveOptions()
    layout = _Layout(problem)
    n = layout.size
    if n == 0:
        raise SolverFailureError("problem has no variables")

    c = np.zeros(n)
    for name, mat in problem.objective_matrices.items():
        spec = layout.block_spec[name]
        off = layout.block_offset[name]
        c[off:off + hermitian_basis_dim(spec.dim, spec.kind)] = vec_block(mat, spec.kind)
    for name, coeff in problem.objective_scalars.items():
        c[layout.scalar_offset[name]] += coeff

    rows, rhs = [], []
    for term in problem.eq_constraints:
        rows.append(layout.row(term))
        rhs.append(term.rhs)
    for j, term in enumerate(problem.ineq_constraints):
        row = layout.row(term)
        row[layout.slack_offset + j] = -1.0
        rows.append(row)
        rhs.append(term.rhs)
    if not rows:
        raise SolverFailureError("problem has no constraints")
    a = np.array(rows)
    b = np.array(rhs, dtype=float)
    n_eq = len(problem.eq_constraints)

    # Ruiz-style equilibration. Column scaling is uniform within each cone
    # block (a positive scalar per PSD block keeps the cone invariant).
    col_groups = [np.arange(off, off + hermitian_basis_dim(spec.dim, spec.kind))
                  for spec, off in ((layout.block_spec[s.name], layout.block_offset[s.name])
                                    for s in problem.blocks)]
    col_groups += [np.array([layout.scalar_offset[s.name]]) for s in problem.scalars]
    col_groups += [np.array([layout.slack_offset + j]) for j in range(layout.n_slacks)]
    scale_rows = np.ones(a.shape[0])
    scale_cols = np.ones(n)
    for _ in range(10):
        row_inf = np.max(np.abs(a), axis=1)
        row_inf[row_inf < 1e-14] = 1.0
        d = 1.0 / np.sqrt(row_inf)
        a *= d[:, None]
        scale_rows *= d
        col_inf = np.max(np.abs(a), axis=0)
        for grp in col_groups:
            g = float(np.max(col_inf[grp])) if grp.size else 0.0
            if g < 1e-14:
                continue
            e = 1.0 / np.sqrt(g)
            a[:, grp] *= e
            scale_cols[grp] *= e
    norms = np.linalg.norm(a, axis=1)
    keep = norms > 1e-14
    if not np.all(keep):
        if np.any(np.abs(b[~keep]) > 1e-12):
            raise SolverFailureError("constraint with zero coefficients and nonzero rhs")
    final_rows = np.where(keep, norms, 1.0)
    a = a / final_rows[:, None]
    scale_rows /= final_rows
    b = b * scale_rows

    c_scaled = c * scale_cols
    obj_scale = max(1.0, float(np.linalg.norm(c_scaled)))
    c_int = c_scaled / obj_scale

    at = np.ascontiguousarray(a.T)
    gram = a @ at
    jitter = 1e-12 * max(1.0, float(np.trace(gram)) / gram.shape[0])
    for attempt in range(6):
        try:
            factor = cho_factor(gram + (jitter * 10**attempt if attempt else 0.0) * np.eye(gram.shape[0]),
                                check_finite=False)
            break
        except np.linalg.LinAlgError:
            continue
    else:  # pragma: no cover - pathological conditioning
        raise SolverFailureError("could not factor the constraint Gram matrix")

    z = np.zeros(n)
    if opts.warm_start:
        for name, value in opts.warm_start.items():
            if name in layout.block_offset:
                spec = layout.block_spec[name]
                off = layout.block_offset[name]
                width = hermitian_basis_dim(spec.dim, spec.kind)
                z[off:off + width] = vec_block(np.asarray(value), spec.kind) / scale_cols[off:off + width]
            elif name in layout.scalar_offset:
                off = layout.scalar_offset[name]
                z[off] = float(value) / scale_cols[off]
        z = _project_cone(z, layout)
    u = np.zeros(n)

    rho = opts.rho
    alpha = opts.over_relax
    status = "max_iters"
    it = 0
    r_prim = r_dual = gap = np.inf
    y = np.zeros(a.shape[0])
    norm_b = 1.0 + np.linalg.norm(b)
    norm_c = 1.0 + np.linalg.norm(c_int)
    u_norm_hist: List[float] = []
    prim_hist: List[float] = []
    rho_changes = 0
    accel = _Anderson(opts.accel_memory) if opts.accel_memory > 0 else None

    def step(z_in, u_in):
        w = z_in - u_in - c_int / rho
        y_new = cho_solve(factor, a @ w - b, check_finite=False)
        x = w - at @ y_new
        x_relax = alpha * x + (1.0 - alpha) * z_in
        v = x_relax + u_in
        z_out = _project_cone(v, layout)
        return z_out, v - z_out, y_new

    z_plain, u_plain = z, u
    while it < opts.max_iters:
        it += 1
        # plain step output stays cone-exact; acceleration only shapes the
        # next input state and is safeguarded by its own residual history
        z_plain, u_plain, y = step(z, u)
        if accel is not None:
            z, u = accel.propose(np.concatenate([z, u]),
                                 np.concatenate([z_plain, u_plain]), n)
        else:
            z, u = z_plain, u_plain

        if it % opts.check_every == 0 or it == opts.max_iters:
            r_prim = float(np.linalg.norm(a @ z_plain - b)) / norm_b
            s = -rho * u_plain
            nu = rho * y
            r_dual = float(np.linalg.norm(c_int + at @ nu - s)) / norm_c
            pval = float(c_int @ z_plain)
            dval = float(-b @ nu)
            gap = abs(pval - dval) / (1.0 + abs(pval) + abs(dval))
            if r_prim <= opts.tol and r_dual <= opts.tol and gap <= opts.tol:
                status = "optimal"
                break
            if (opts.adapt_rho and rho_changes < 6 and it % (opts.check_every * 8) == 0
                    and it < min(opts.max_iters // 2, 10_000)):
                ratio = r_prim / max(r_dual, 1e-16)
                if ratio > 5.0 or ratio < 0.2:
                    scale = float(np.clip(np.sqrt(ratio), 0.33, 3.0))
                    new_rho = float(np.clip(rho * scale, 1e-4, 1e4))
                    if new_rho != rho:
                        u_plain *= rho / new_rho
                        rho = new_rho
                        rho_changes += 1
                        z, u = z_plain, u_plain
                        u_norm_hist.clear()
                        prim_hist.clear()
                        if accel is not None:
                            accel.reset()
            if it >= opts.infeas_check_after:
                u_norm_hist.append(float(np.linalg.norm(u_plain)))
                prim_hist.append(r_prim)
                if len(u_norm_hist) >= 25 and _looks_infeasible(
                        u_norm_hist, prim_hist, a, b, nu, layout, opts.tol):
                    status = "infeasible"
                    break
    z, u = z_plain, u_plain

    s = -rho * u
    nu = rho * y

    blocks = {}
    dual_blocks = {}
    for spec in problem.blocks:
        off = layout.block_offset[spec.name]
        width = hermitian_basis_dim(spec.dim, spec.kind)
        seg = slice(off, off + width)
        blocks[spec.name] = unvec_block(scale_cols[seg] * z[seg], spec.dim, spec.kind)
        dual_blocks[spec.name] = unvec_block(obj_scale * s[seg] / scale_cols[seg],
                                             spec.dim, spec.kind)
    scalars = {name: float(scale_cols[off] * z[off])
               for name, off in layout.scalar_offset.items()}

    nu_unscaled = obj_scale * scale_rows * nu
    objective = float(c_scaled @ z)
    return SdpSolution(
        blocks=blocks,
        scalars=scalars,
        objective=objective,
        primal_residual=r_prim,
        dual_residual=r_dual,
        gap=gap,
        status=status,
        iterations=it,
        duals_eq=nu_unscaled[:n_eq],
        duals_ineq=nu_unscaled[n_eq:],
        dual_blocks=dual_blocks,
    )


class _Anderson:
    """Safeguarded type-II Anderson acceleration for the splitting map.

    Proposes the next input state from a short history of (state, step)
    pairs; resets whenever the fixed-point residual stops improving, which
    keeps the plain iteration's convergence behavior as a fallback.
    """

    def __init__(self, memory: int):
        self.memory = memory
        self.ds: Optional[np.ndarray] = None  # (memory, dim) rings
        self.dg: Optional[np.ndarray] = None
        self.prev_s: Optional[np.ndarray] = None
        self.prev_g: Optional[np.ndarray] = None
        self.count = 0
        self.best = np.inf

    def reset(self) -> None:
        self.count = 0
        self.prev_s = None
        self.prev_g = None
        self.best = np.inf

    def propose(self, s: np.ndarray, f_s: np.ndarray, n: int):
        g = f_s - s
        gn = float(np.linalg.norm(g))
        if gn > 2.0 * self.best:
            self.reset()
        self.best = min(self.best, gn)
        if self.ds is None:
            self.ds = np.empty((self.memory, s.size))
            self.dg = np.empty((self.memory, s.size))
        if self.prev_s is not None:
            slot = (self.count - 1) % self.memory
            np.subtract(s, self.prev_s, out=self.ds[slot])
            np.subtract(g, self.prev_g, out=self.dg[slot])
        self.prev_s = s
        self.prev_g = g
        self.count += 1
        m = min(self.count - 1, self.memory)
        if m < 2:
            return f_s[:n], f_s[n:]
        ds = self.ds[:m]
        dg = self.dg[:m]
        gram = dg @ dg.T
        reg = 1e-10 * max(1.0, float(np.trace(gram)))
        try:
            gamma = np.linalg.solve(gram + reg * np.eye(m), dg @ g)
        except np.linalg.LinAlgError:  # pragma: no cover
            return f_s[:n], f_s[n:]
        s_next = f_s - gamma @ (ds + dg)
        if not np.all(np.isfinite(s_next)):
            self.reset()
            return f_s[:n], f_s[n:]
        return s_next[:n], s_next[n:]


def _looks_infeasible(u_norms: List[float], prims: List[float], a: np.ndarray,
                      b: np.ndarray, nu: np.ndarray, layout: _Layout,
                      tol: float) -> bool:
    """Growth of the splitting multiplier plus a Farkas-style certificate."""
    growing = u_norms[-1] >= u_norms[-13] >= u_norms[-25] > 0
    stuck = min(prims[-25:]) > max(1e-4, 1e3 * tol)
    if not (growing and stuck):
        return False
    scale = np.linalg.norm(nu)
    if scale <= 1e-12:
        return False
    for sign in (1.0, -1.0):
        nu_hat = sign * nu / scale
        if b @ nu_hat >= -1e-6:
            continue
        q = a.T @ nu_hat
        q_proj = _project_cone(q, layout, dual=True)
        if float(np.linalg.norm(q - q_proj)) <= 1e-4:
            return True
    return False
