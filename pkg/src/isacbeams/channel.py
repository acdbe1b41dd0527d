"""Sensing-channel constructors: steering vectors, information-matrix specs,
and quadratic sensing-metric specs.

Conventions
-----------
* Centered uniform linear array with half-wavelength spacing by default; the
  n-th steering element carries phase ``2*pi*spacing*(n - (N-1)/2)*sin(theta)``
  and the vector is unit-norm, so ``||da/dtheta||^2 = pi^2 cos^2(theta) (N^2-1)/12``
  at half-wavelength spacing.
* The prior-averaged information matrix is ``J = C + T_V`` where
  ``T_V[p, q] = (snapshots / noise_var) * Tr(G[p, q] @ V @ V^H)`` and ``C``
  encodes the parameter priors. ``BfimSpec`` stores the ``G[p, q]`` matrices
  for ``p <= q``; :func:`assemble_bfim` evaluates ``J`` for a beamformer set.
* A sensing metric that depends on the beamformers only through ``d`` trace
  terms ``Tr(Q_i V V^H)`` is represented by :class:`QuadraticMetricSpec`;
  the Q matrices must be linearly independent.

Angle expectations over Gaussian priors use Gauss-Hermite quadrature
(default 15 nodes); a seeded Monte-Carlo fallback is available for
non-Gaussian extensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    GridExhaustedError,
    ImaginaryResidueError,
    NonzeroMeanError,
    QuadratureUnderflowError,
)
from .numerics import cvec, require_hermitian


@dataclass(frozen=True)
class ArrayGeometry:
    """Transmit/receive uniform linear array sizes and element spacing."""

    n_tx: int
    n_rx: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("array sizes must be positive")
        if self.spacing_wavelengths <= 0:
            raise ValueError("element spacing must be positive")


def _array_size(geometry: ArrayGeometry, side: str) -> int:
    if side == "tx":
        return geometry.n_tx
    if side == "rx":
        return geometry.n_rx
    raise ValueError(f"side must be 'tx' or 'rx', got {side!r}")


def steering_vector(geometry: ArrayGeometry, theta: float, side: str = "tx") -> np.ndarray:
    """Unit-norm array response of a centered ULA toward angle ``theta``."""
    n = _array_size(geometry, side)
    offsets = np.arange(n) - (n - 1) / 2.0
    phase = 2.0 * np.pi * geometry.spacing_wavelengths * offsets * np.sin(theta)
    return np.exp(1j * phase) / np.sqrt(n)


def steering_derivative(geometry: ArrayGeometry, theta: float, side: str = "tx") -> np.ndarray:
    """Derivative of :func:`steering_vector` with respect to ``theta``.

    Orthogonal to the steering vector at the same angle.
    """
    n = _array_size(geometry, side)
    offsets = np.arange(n) - (n - 1) / 2.0
    rate = 2.0 * np.pi * geometry.spacing_wavelengths * offsets * np.cos(theta)
    return 1j * rate * steering_vector(geometry, theta, side)


@dataclass(frozen=True)
class TargetPrior:
    """Gaussian prior on one target: complex path loss and arrival angle."""

    alpha_mean: complex
    alpha_var: float
    theta_mean: float
    theta_std: float

    def __post_init__(self):
        if self.alpha_var <= 0:
            raise ValueError("alpha_var must be positive")
        if not 0 < self.theta_std < np.pi / 2:
            raise ValueError("theta_std must lie in (0, pi/2)")
        if abs(self.theta_mean) >= np.pi / 2:
            raise ValueError("theta_mean must lie strictly inside (-pi/2, pi/2)")


@dataclass
class QuadraticMetricSpec:
    """Sensing metric defined through d quadratic terms ``Tr(Q_i V V^H)``.

    ``offsets``, when present, are constants added to each quadratic value
    before scalarization (used by the angle-only metric, where
    ``offset_i + Tr(Q_i V V^H)`` is the i-th diagonal information entry).
    """

    q_matrices: list
    scalarization: str = "maxdiag"
    offsets: Optional[np.ndarray] = None
    independence_rtol: float = 1e-8

    def __post_init__(self):
        if not self.q_matrices:
            raise ValueError("need at least one quadratic matrix")
        self.q_matrices = [require_hermitian(q) for q in self.q_matrices]
        stack = np.stack([cvec(q) for q in self.q_matrices])
        sing = np.linalg.svd(stack, compute_uv=False)
        if sing[-1] <= self.independence_rtol * sing[0]:
            raise ValueError(
                f"quadratic matrices are linearly dependent "
                f"(sigma_min/sigma_max = {sing[-1] / sing[0]:.3e})"
            )
        if self.offsets is not None:
            self.offsets = np.asarray(self.offsets, dtype=float)
            if self.offsets.shape != (len(self.q_matrices),):
                raise ValueError("offsets must match the number of quadratic matrices")

    @property
    def d(self) -> int:
        return len(self.q_matrices)

    def values(self, v: np.ndarray) -> np.ndarray:
        """Quadratic values ``Tr(Q_i V V^H)`` for a beamformer matrix."""
        return quad_values(self.q_matrices, v)


def quad_values(q_matrices: Sequence[np.ndarray], v: np.ndarray) -> np.ndarray:
    """Evaluate ``Tr(Q_i V V^H)`` for each Q; result is real."""
    gram = v @ v.conj().T
    vals = np.array([np.sum(q * gram.T) for q in q_matrices])
    return vals.real


def pair_index(p: int, q: int, n_params: int) -> int:
    """Position of ordered pair (p, q), p <= q, in row-major upper-triangular order."""
    if p > q:
        p, q = q, p
    return p * n_params - p * (p - 1) // 2 + (q - p)


@dataclass
class BfimSpec:
    """Prior matrix plus the quadratic matrices of the information matrix.

    ``quad_matrices[pair_index(p, q, n_params)]`` holds ``G[p, q]`` for
    ``p <= q``; :func:`assemble_bfim` forms
    ``J = prior + (snapshots/noise_var) * [Tr(G[p,q] V V^H)]``.

    ``complex_prior`` is set by the full-channel builder: it is the complex
    n_tx x n_tx reduction of the prior, enabling the compact trace-inverse
    path ``Tr(J^-1) = 2 n_rx Tr((C_c + 2*snapshots/noise_var * V V^H)^-1)``.
    """

    prior_matrix: np.ndarray
    quad_matrices: list
    snapshots: int
    noise_var: float
    n_params: int
    complex_prior: Optional[np.ndarray] = None
    _stack: Optional[np.ndarray] = field(default=None, repr=False, init=False, compare=False)

    def __post_init__(self):
        expected = self.n_params * (self.n_params + 1) // 2
        if len(self.quad_matrices) != expected:
            raise ValueError(
                f"need {expected} quadratic matrices for {self.n_params} parameters, "
                f"got {len(self.quad_matrices)}"
            )
        self.prior_matrix = np.asarray(self.prior_matrix, dtype=float)
        if self.prior_matrix.shape != (self.n_params, self.n_params):
            raise ValueError("prior matrix shape mismatch")
        w = np.linalg.eigvalsh(0.5 * (self.prior_matrix + self.prior_matrix.T))
        if w.size and w[0] < -1e-9 * max(1.0, w[-1]):
            raise ValueError("prior matrix must be PSD")
        if self.snapshots < 1:
            raise ValueError("snapshots must be a positive integer")
        if self.noise_var <= 0:
            raise ValueError("noise variance must be positive")
        stack = self.stacked
        defect = float(np.max(np.abs(stack - stack.conj().transpose(0, 2, 1))))
        if defect > 1e-12 * max(1.0, float(np.max(np.abs(stack)))):
            raise ValueError(f"quadratic matrices must be Hermitian (defect {defect:.3e})")

    @property
    def stacked(self) -> np.ndarray:
        if self._stack is None:
            self._stack = np.stack(self.quad_matrices)
        return self._stack


def assemble_bfim(spec: BfimSpec, v: np.ndarray, imag_tol: float = 1e-8) -> np.ndarray:
    """Evaluate the information matrix ``J = C + T_V`` for beamformers ``v``.

    Raises :class:`ImaginaryResidueError` if a trace term carries an
    imaginary part above ``imag_tol`` (relative to the term scale).
    """
    v = np.asarray(v)
    gram = v @ v.conj().T
    terms = np.einsum("kij,ji->k", spec.stacked, gram)
    scale = max(1.0, float(np.max(np.abs(terms))) if terms.size else 0.0)
    worst = float(np.max(np.abs(terms.imag))) if terms.size else 0.0
    if worst > imag_tol * scale:
        raise ImaginaryResidueError(f"imaginary residue {worst:.3e} exceeds {imag_tol * scale:.3e}")
    factor = spec.snapshots / spec.noise_var
    j = np.array(spec.prior_matrix, dtype=float)
    iu, ju = np.triu_indices(spec.n_params)
    j[iu, ju] += factor * terms.real
    lower = np.tril_indices(spec.n_params, k=-1)
    j[lower] = j.T[lower]
    return j


@dataclass
class IsacScenario:
    """Channels, SINR targets, power budget, and the sensing metric in force."""

    geometry: ArrayGeometry
    channels: np.ndarray
    sinr_targets: np.ndarray
    power_budget: float
    noise_var: float
    interference_mode: str = "ic"
    metric: object = None

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=complex)
        if self.channels.size == 0:
            self.channels = np.zeros((self.geometry.n_tx, 0), dtype=complex)
        elif self.channels.ndim == 1:
            self.channels = self.channels[:, None]
        if self.channels.shape[0] != self.geometry.n_tx:
            raise ValueError("channel vectors must have n_tx entries")
        self.sinr_targets = np.atleast_1d(np.asarray(self.sinr_targets, dtype=float))
        k = self.channels.shape[1]
        if self.sinr_targets.shape != (k,):
            raise ValueError("need one SINR target per user")
        if k > self.geometry.n_tx:
            raise ValueError("more users than transmit antennas")
        if np.any(self.sinr_targets <= 0):
            raise ValueError("SINR targets must be positive")
        if self.power_budget <= 0 or self.noise_var <= 0:
            raise ValueError("power budget and noise variance must be positive")
        if self.interference_mode not in ("ic", "nic"):
            raise ValueError("interference_mode must be 'ic' or 'nic'")
        if k >= 2:
            sing = np.linalg.svd(self.channels, compute_uv=False)
            if sing[-1] <= 1e-8 * sing[0]:
                raise ValueError("communication channels are linearly dependent")

    @property
    def k_users(self) -> int:
        return self.channels.shape[1]


# ---------------------------------------------------------------------------
# Expectations over angle priors
# ---------------------------------------------------------------------------


def angle_nodes(mean: float, std: float, n_nodes: int = 15,
                method: str = "gauss_hermite", seed: int = 0):
    """Sample points and weights for ``E[f(theta)]`` under a Gaussian prior."""
    if method == "gauss_hermite":
        x, w = np.polynomial.hermite.hermgauss(n_nodes)
        w = w / np.sqrt(np.pi)
        if not np.all(np.isfinite(w)) or np.any(w == 0.0) or w.sum() <= 0:
            raise QuadratureUnderflowError(f"degenerate weights for {n_nodes} nodes")
        return mean + np.sqrt(2.0) * std * x, w
    if method == "monte_carlo":
        rng = np.random.default_rng(seed)
        draws = mean + std * rng.standard_normal(10_000)
        return draws, np.full(draws.size, 1.0 / draws.size)
    raise ValueError(f"unknown expectation method {method!r}")


@dataclass
class _TargetMoments:
    """Per-target angle expectations of steering products (transmit frame)."""

    m: np.ndarray        # E[a_r a_t^H]
    m_dot: np.ndarray    # E[da_r a_t^H + a_r da_t^H]
    p: np.ndarray        # E[a_t a_t^H]
    s2: np.ndarray       # E[a_t da_t^H]
    s3: np.ndarray       # E[||da_r||^2 a_t a_t^H + da_t da_t^H]


def _target_moments(geometry: ArrayGeometry, prior: TargetPrior,
                    n_nodes: int, method: str, seed: int) -> _TargetMoments:
    thetas, weights = angle_nodes(prior.theta_mean, prior.theta_std, n_nodes, method, seed)
    nt, nr = geometry.n_tx, geometry.n_rx
    m = np.zeros((nr, nt), dtype=complex)
    m_dot = np.zeros((nr, nt), dtype=complex)
    p = np.zeros((nt, nt), dtype=complex)
    s2 = np.zeros((nt, nt), dtype=complex)
    s3 = np.zeros((nt, nt), dtype=complex)
    for theta, w in zip(thetas, weights):
        at = steering_vector(geometry, theta, "tx")
        dat = steering_derivative(geometry, theta, "tx")
        ar = steering_vector(geometry, theta, "rx")
        dar = steering_derivative(geometry, theta, "rx")
        m += w * np.outer(ar, at.conj())
        m_dot += w * (np.outer(dar, at.conj()) + np.outer(ar, dat.conj()))
        p += w * np.outer(at, at.conj())
        s2 += w * np.outer(at, dat.conj())
        s3 += w * (np.vdot(dar, dar).real * np.outer(at, at.conj())
                   + np.outer(dat, dat.conj()))
    return _TargetMoments(m=m, m_dot=m_dot, p=p, s2=s2, s3=s3)


def _herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


# ---------------------------------------------------------------------------
# Full-channel estimation
# ---------------------------------------------------------------------------


def build_full_channel_bfim(geometry: ArrayGeometry, prior_var_per_entry,
                            snapshots: int, noise_var: float):
    """Spec pair for estimating every entry of the n_rx x n_tx channel matrix.

    ``prior_var_per_entry[i]`` is the variance of the i-th complex entry of
    each channel row (zero-mean circular prior, so real and imaginary parts
    carry half the variance each). Parameters are ordered per receive row as
    [Re g_1..Re g_nt, Im g_1..Im g_nt].

    Returns ``(BfimSpec, QuadraticMetricSpec)``; the metric holds the
    canonical Hermitian basis, d = n_tx^2.
    """
    variances = np.asarray(prior_var_per_entry, dtype=float)
    nt, nr = geometry.n_tx, geometry.n_rx
    if variances.shape != (nt,):
        raise ValueError("need one prior variance per transmit antenna")
    if np.any(variances <= 0):
        raise ValueError("prior variances must be positive")

    n_params = 2 * nt * nr
    prior_row = np.concatenate([2.0 / variances, 2.0 / variances])
    prior = np.diag(np.tile(prior_row, nr))

    eye = np.eye(nt, dtype=complex)

    def deriv_pair(local: int):
        # within one receive row: 0..nt-1 real parts, nt..2nt-1 imaginary parts
        idx = local % nt
        return idx, local >= nt

    zero = np.zeros((nt, nt), dtype=complex)
    quads = []
    for p in range(n_params):
        for q in range(p, n_params):
            if p // (2 * nt) != q // (2 * nt):
                quads.append(zero)
                continue
            i, p_imag = deriv_pair(p % (2 * nt))
            j, q_imag = deriv_pair(q % (2 * nt))
            eij = np.outer(eye[i], eye[j].conj())
            eji = np.outer(eye[j], eye[i].conj())
            if p_imag == q_imag:
                quads.append(eij + eji)
            elif not p_imag and q_imag:
                quads.append(1j * (eij - eji))
            else:  # p imaginary, q real (only when p < q within the row)
                quads.append(1j * (eji - eij))
    spec = BfimSpec(
        prior_matrix=prior,
        quad_matrices=quads,
        snapshots=snapshots,
        noise_var=noise_var,
        n_params=n_params,
        complex_prior=np.diag(2.0 / variances).astype(complex),
    )

    basis = [np.outer(eye[i], eye[i].conj()) for i in range(nt)]
    for i in range(nt):
        for j in range(i + 1, nt):
            basis.append(np.outer(eye[i], eye[j].conj()) + np.outer(eye[j], eye[i].conj()))
    for i in range(nt):
        for j in range(i + 1, nt):
            basis.append(1j * (np.outer(eye[i], eye[j].conj()) - np.outer(eye[j], eye[i].conj())))
    metric = QuadraticMetricSpec(q_matrices=basis, scalarization="trace")
    return spec, metric


# ---------------------------------------------------------------------------
# Line-of-sight multi-target estimation
# ---------------------------------------------------------------------------


def build_multitarget_bfim(geometry: ArrayGeometry, priors: Sequence[TargetPrior],
                           snapshots: int, noise_var: float,
                           quadrature_nodes: int = 15,
                           method: str = "gauss_hermite", seed: int = 0):
    """Spec pair for estimating path losses and angles of LoS targets.

    Parameters are ordered [Re alpha (per target), Im alpha, theta], so
    ``n_params = 3 * n_targets``. Returns ``(BfimSpec, QuadraticMetricSpec)``.
    With nonzero path-loss means the metric has
    ``d = 7/2 n_targets^2 + 1/2 n_targets`` structurally distinct matrices
    (duplicate and negated blocks removed by construction); structurally
    zero matrices (e.g. with zero-mean priors) are dropped as well.
    """
    if not priors:
        raise ValueError("need at least one target prior")
    n = len(priors)
    moments = [_target_moments(geometry, pr, quadrature_nodes, method, seed + 7 * t)
               for t, pr in enumerate(priors)]
    mu = np.array([pr.alpha_mean for pr in priors], dtype=complex)
    var = np.array([pr.alpha_var for pr in priors], dtype=float)

    def g_alpha_alpha(i, j):
        if i == j:
            return _herm(2.0 * moments[i].p)
        x = moments[i].m.conj().T @ moments[j].m
        return _herm(x + x.conj().T)

    def g_alpha_cross(i, j):
        # (Re alpha_i, Im alpha_j); zero when i == j
        if i == j:
            return np.zeros((geometry.n_tx, geometry.n_tx), dtype=complex)
        x = moments[i].m.conj().T @ moments[j].m
        return _herm(1j * (x - x.conj().T))

    def g_re_theta(i, j):
        if i == j:
            x = mu[i] * moments[i].s2
        else:
            x = mu[j] * (moments[i].m.conj().T @ moments[j].m_dot)
        return _herm(x + x.conj().T)

    def g_im_theta(i, j):
        if i == j:
            x = mu[i] * moments[i].s2
        else:
            x = mu[j] * (moments[i].m.conj().T @ moments[j].m_dot)
        return _herm(1j * (x.conj().T - x))

    def g_theta_theta(i, j):
        if i == j:
            return _herm(2.0 * (abs(mu[i]) ** 2 + var[i]) * moments[i].s3)
        x = mu[i].conjugate() * mu[j] * (moments[i].m_dot.conj().T @ moments[j].m_dot)
        return _herm(x + x.conj().T)

    n_params = 3 * n
    prior = np.diag(np.concatenate([2.0 / var, 2.0 / var, 1.0 / np.array(
        [pr.theta_std for pr in priors]) ** 2]))

    def block_matrix(p, q):
        bp, i = divmod(p, n) if p < 2 * n else (2, p - 2 * n)
        bq, j = divmod(q, n) if q < 2 * n else (2, q - 2 * n)
        if bp == 0 and bq == 0:
            return g_alpha_alpha(i, j)
        if bp == 0 and bq == 1:
            return g_alpha_cross(i, j)
        if bp == 1 and bq == 1:
            return g_alpha_alpha(i, j)
        if bp == 0 and bq == 2:
            return g_re_theta(i, j)
        if bp == 1 and bq == 2:
            return g_im_theta(i, j)
        return g_theta_theta(i, j)

    quads = [block_matrix(p, q) for p in range(n_params) for q in range(p, n_params)]
    spec = BfimSpec(prior_matrix=prior, quad_matrices=quads, snapshots=snapshots,
                    noise_var=noise_var, n_params=n_params)

    distinct = []
    for i in range(n):
        for j in range(i, n):
            distinct.append(g_alpha_alpha(i, j))
    for i in range(n):
        for j in range(i + 1, n):
            distinct.append(g_alpha_cross(i, j))
    for i in range(n):
        for j in range(n):
            distinct.append(g_re_theta(i, j))
    for i in range(n):
        for j in range(n):
            distinct.append(g_im_theta(i, j))
    for i in range(n):
        for j in range(i, n):
            distinct.append(g_theta_theta(i, j))
    top = max(float(np.linalg.norm(q)) for q in distinct)
    distinct = [q for q in distinct if np.linalg.norm(q) > 1e-14 * top]
    metric = QuadraticMetricSpec(q_matrices=distinct, scalarization="maxdiag")
    return spec, metric


def multitarget_d(n_targets: int) -> int:
    """Structurally distinct quadratic-term count for the LoS target metric."""
    return (7 * n_targets * n_targets + n_targets) // 2


def build_aoa_only_spec(geometry: ArrayGeometry, priors: Sequence[TargetPrior],
                        snapshots: int, noise_var: float,
                        quadrature_nodes: int = 15,
                        method: str = "gauss_hermite", seed: int = 0) -> QuadraticMetricSpec:
    """Angle-only sensing metric for zero-mean path losses; d = n_targets.

    Each metric value is the exact angle-information diagonal
    ``offset_i + Tr(Q_i V V^H)`` with ``offset_i`` the angle-prior information
    and ``Q_i = (snapshots/noise_var) * 2 * alpha_var_i * E[dA^H dA]``.
    """
    if any(abs(pr.alpha_mean) > 0 for pr in priors):
        raise NonzeroMeanError("angle-only metric requires zero-mean path losses")
    factor = snapshots / noise_var
    mats, offsets = [], []
    for t, pr in enumerate(priors):
        mom = _target_moments(geometry, pr, quadrature_nodes, method, seed + 7 * t)
        mats.append(_herm(factor * 2.0 * pr.alpha_var * mom.s3))
        offsets.append(1.0 / pr.theta_std**2)
    return QuadraticMetricSpec(q_matrices=mats, scalarization="maxdiag",
                               offsets=np.array(offsets))


def fourier_grid(n_tx: int) -> np.ndarray:
    """Angles whose half-wavelength ULA steering vectors are orthogonal."""
    if n_tx % 2 == 0:
        js = np.arange(-(n_tx // 2) + 1, n_tx // 2 + 1)
    else:
        js = np.arange(-((n_tx - 1) // 2), (n_tx - 1) // 2 + 1)
    return np.arcsin(2.0 * js / n_tx)
