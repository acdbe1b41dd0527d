"""Rank-one beamformer extraction from covariance-relaxation solutions.

Each user covariance R_k is collapsed onto the direction that preserves its
useful power exactly:

    v_k = R_k h_k / sqrt(h_k^H R_k h_k),

which satisfies ``h_k^H v_k v_k^H h_k == h_k^H R_k h_k`` and
``v_k v_k^H <= R_k`` (Cauchy-Schwarz), so every SINR floor met by the
relaxation is still met after extraction. The total covariance is kept: the
sensing beams factor the leftover ``R - sum_k v_k v_k^H``. When an
orthogonal-complement basis is supplied, the leftover is compressed into the
complement before factoring, which makes the sensing beams exactly
channel-orthogonal and discards only cone-tolerance-level junk.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..errors import ZeroUsefulPowerError
from ..metrics import BeamformerMatrix
from ..numerics import psd_factor

EXTRACT_RANK_TOL = 1e-6


def extract_rank_one(r_total: np.ndarray, comm_covariances: Sequence[np.ndarray],
                     channels: np.ndarray, rank_tol: float = EXTRACT_RANK_TOL,
                     orth_basis: Optional[np.ndarray] = None) -> BeamformerMatrix:
    """Beamformers realizing a relaxation solution with rank-one user parts."""
    r_total = np.asarray(r_total)
    k = len(comm_covariances)
    n_tx = r_total.shape[0]
    beams = []
    residual = 0.5 * (r_total + r_total.conj().T)
    for idx in range(k):
        rk = np.asarray(comm_covariances[idx])
        h = channels[:, idx]
        useful = float(np.real(h.conj() @ rk @ h))
        if useful <= 1e-12 * max(1.0, float(np.real(np.trace(rk)))):
            raise ZeroUsefulPowerError(f"user {idx} has no useful power in its covariance")
        v = rk @ h / np.sqrt(useful)
        beams.append(v)
        residual = residual - np.outer(v, v.conj())
    residual = 0.5 * (residual + residual.conj().T)
    if orth_basis is not None and orth_basis.shape[1] < n_tx:
        core = orth_basis.conj().T @ residual @ orth_basis
        sensing = orth_basis @ psd_factor(0.5 * (core + core.conj().T), rank_tol)
    else:
        sensing = psd_factor(residual, rank_tol)
    comm = np.stack(beams, axis=1) if beams else np.zeros((n_tx, 0), dtype=complex)
    return BeamformerMatrix(np.hstack([comm, sensing]), k_comm=k)


def covariance_rank(r: np.ndarray, rel_tol: float = 1e-6) -> int:
    """Eigenvalue count above ``rel_tol`` times the spectral norm."""
    w = np.linalg.eigvalsh(0.5 * (r + r.conj().T))
    top = float(np.max(np.abs(w))) if w.size else 0.0
    if top == 0.0:
        return 0
    return int(np.sum(w > rel_tol * top))
