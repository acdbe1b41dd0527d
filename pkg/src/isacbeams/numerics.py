"""Dense complex-Hermitian linear algebra primitives.

Everything in this module operates on plain numpy arrays. Hermitian inputs
are validated on entry (``require_hermitian``); factorizations and null-space
computations come with explicit residual contracts that the test suite
enforces:

* ``eig_hermitian``: reconstruction residual <= 1e-9 * max(1, ||A||_F),
  orthonormality defect <= 1e-10.
* ``psd_factor``: ``A ~= F F^H`` with Frobenius residual <= 10 * rank_tol * ||A||_F.
* ``real_nullspace_vector``: ||M x|| <= 1e-9 * ||M||_F * ||x||.
* ``orthonormal_complement``: stacked [B; Q_perp] unitary within 1e-8.

The module also provides the isometric vectorizations ``cvec`` (complex
Hermitian -> R^{n^2}) and ``rvec`` (real symmetric -> R^{n(n+1)/2}) used by
the conic solver and the rank-reduction steps. Both satisfy
``vec(A) @ vec(B) == <A, B>_F`` exactly.

All functions are pure; none of them mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EigConvergenceError,
    NotHermitianError,
    NotPsdError,
    RowsNotOrthonormalError,
)

HERMITIAN_ATOL = 1e-12
DEFAULT_RANK_TOL = 1e-8


def require_hermitian(a: np.ndarray, tol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Validate that ``a`` is square and Hermitian; return it symmetrized.

    The tolerance is absolute for O(1)-scaled matrices and relaxes
    proportionally for larger entries.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    defect = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if defect > tol * scale:
        raise NotHermitianError(f"Hermitian defect {defect:.3e} exceeds {tol * scale:.3e}")
    return 0.5 * (a + a.conj().T)


@dataclass(frozen=True)
class EigenSystem:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reassemble(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T


def eig_hermitian(a: np.ndarray, tol: float = HERMITIAN_ATOL) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix with ascending eigenvalues."""
    a = require_hermitian(a, tol)
    try:
        w, q = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigConvergenceError(str(exc)) from exc
    return EigenSystem(eigenvalues=w, eigenvectors=q)


def psd_factor(a: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL,
               abs_floor: float = 1e-13) -> np.ndarray:
    """Compact factor F with ``A ~= F F^H`` of a (numerically) PSD matrix.

    Columns correspond to eigenvalues above ``rank_tol * ||A||_2``; an
    eigenvalue below ``-rank_tol * ||A||_2`` raises :class:`NotPsdError`.
    ``abs_floor`` keeps round-off-sized matrices from tripping either test.
    """
    system = eig_hermitian(a)
    w, q = system.eigenvalues, system.eigenvectors
    spectral = float(np.max(np.abs(w))) if w.size else 0.0
    cut = max(rank_tol * spectral, abs_floor)
    if w.size and w[0] < -cut:
        raise NotPsdError(f"smallest eigenvalue {w[0]:.3e} below -{cut:.3e}")
    keep = w > cut
    return q[:, keep] * np.sqrt(w[keep])


def real_nullspace_vector(m: np.ndarray) -> np.ndarray:
    """Nonzero x with ``M x ~= 0`` for a real matrix with fewer rows than columns.

    Returns the right singular vector of the smallest singular value,
    normalized so the entry of largest magnitude equals +1 (deterministic
    sign convention).
    """
    m = np.asarray(m, dtype=float)
    rows, cols = m.shape
    if rows >= cols:
        raise ValueError(f"need strictly fewer rows than columns, got {m.shape}")
    if not np.any(m):
        x = np.zeros(cols)
        x[-1] = 1.0
        return x
    _, _, vt = np.linalg.svd(m)
    x = vt[-1]
    pivot = int(np.argmax(np.abs(x)))
    return x / x[pivot]


def orthonormal_complement(b: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal rows spanning the null space of a row-orthonormal block.

    For B of shape (r, n) with r < n and orthonormal rows, returns Q_perp of
    shape (n - r, n) with orthonormal rows and ``B @ Q_perp^H = 0``.
    """
    b = np.atleast_2d(np.asarray(b))
    rows, cols = b.shape
    if rows >= cols:
        raise ValueError(f"need fewer rows than columns, got {b.shape}")
    gram_defect = float(np.max(np.abs(b @ b.conj().T - np.eye(rows)))) if rows else 0.0
    if gram_defect > tol:
        raise RowsNotOrthonormalError(f"row Gram defect {gram_defect:.3e} exceeds {tol:.3e}")
    if rows == 0:
        return np.eye(cols, dtype=complex)
    _, _, vh = np.linalg.svd(b)
    return vh[rows:]


# ---------------------------------------------------------------------------
# Isometric vectorizations
# ---------------------------------------------------------------------------

_SQRT2 = np.sqrt(2.0)


def cvec(a: np.ndarray) -> np.ndarray:
    """Isometric real vectorization of a complex Hermitian n x n matrix.

    Layout: [diag (n), sqrt(2)*Re upper (n(n-1)/2), sqrt(2)*Im upper]; total
    length n^2. Satisfies ``cvec(A) @ cvec(B) == Tr(A B)`` for Hermitian A, B.
    """
    a = np.asarray(a)
    n = a.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    upper = a[iu, ju]
    return np.concatenate([np.real(np.diag(a)), _SQRT2 * upper.real, _SQRT2 * upper.imag])


def cvec_to_matrix(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`cvec`."""
    v = np.asarray(v, dtype=float)
    m = n * (n - 1) // 2
    out = np.zeros((n, n), dtype=complex)
    iu, ju = np.triu_indices(n, k=1)
    out[np.arange(n), np.arange(n)] = v[:n]
    upper = (v[n:n + m] + 1j * v[n + m:]) / _SQRT2
    out[iu, ju] = upper
    out[ju, iu] = upper.conj()
    return out


def rvec(a: np.ndarray) -> np.ndarray:
    """Isometric vectorization of a real symmetric n x n matrix.

    Layout: [diag, sqrt(2)*upper]; length n(n+1)/2.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    return np.concatenate([np.diag(a), _SQRT2 * a[iu, ju]])


def rvec_to_matrix(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`rvec`."""
    v = np.asarray(v, dtype=float)
    out = np.zeros((n, n))
    iu, ju = np.triu_indices(n, k=1)
    out[np.arange(n), np.arange(n)] = v[:n]
    out[iu, ju] = v[n:] / _SQRT2
    out[ju, iu] = v[n:] / _SQRT2
    return out


def hermitian_basis_dim(n: int, field: str) -> int:
    """Real dimension of the symmetric/Hermitian matrices of size n."""
    return n * n if field == "complex" else n * (n + 1) // 2


def vec_block(a: np.ndarray, field: str) -> np.ndarray:
    """Dispatch to :func:`cvec` or :func:`rvec` by field tag."""
    return cvec(a) if field == "complex" else rvec(a)


def unvec_block(v: np.ndarray, n: int, field: str) -> np.ndarray:
    """Inverse of :func:`vec_block`."""
    return cvec_to_matrix(v, n) if field == "complex" else rvec_to_matrix(v, n)
