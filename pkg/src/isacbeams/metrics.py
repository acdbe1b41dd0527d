"""Performance functionals: per-user SINR, radar SNR/SCNR, beam-pattern
matching, and scalarizations of the estimation-error bound.

Every metric here depends on the beamformer matrix only through its Gram
``V V^H``, so all of them are invariant to right-multiplication of ``V`` by a
unitary matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ArrayGeometry, IsacScenario, steering_vector
from .errors import DegenerateDenominatorError, SingularBfimError
from .numerics import require_hermitian


@dataclass
class BeamformerMatrix:
    """Complex n_tx x N beamformer set; the first k_comm columns serve users."""

    columns: np.ndarray
    k_comm: int = 0

    def __post_init__(self):
        self.columns = np.asarray(self.columns, dtype=complex)
        if self.columns.ndim != 2:
            raise ValueError("beamformer matrix must be two-dimensional")
        if not 0 <= self.k_comm <= self.columns.shape[1]:
            raise ValueError("k_comm must lie between 0 and the column count")
        if not np.all(np.isfinite(self.columns)):
            raise ValueError("beamformer entries must be finite")

    @property
    def n_tx(self) -> int:
        return self.columns.shape[0]

    @property
    def n_beams(self) -> int:
        return self.columns.shape[1]

    @property
    def comm(self) -> np.ndarray:
        return self.columns[:, :self.k_comm]

    @property
    def sensing(self) -> np.ndarray:
        return self.columns[:, self.k_comm:]

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.columns) ** 2))

    @property
    def gram(self) -> np.ndarray:
        return self.columns @ self.columns.conj().T


def _as_columns(v) -> tuple:
    if isinstance(v, BeamformerMatrix):
        return v.columns, v.k_comm
    v = np.asarray(v, dtype=complex)
    return v, v.shape[1]


def sinr_ic(scenario: IsacScenario, v) -> np.ndarray:
    """Per-user SINR when sensing interference is cancelled at the receivers."""
    cols, k_comm = _as_columns(v)
    k = scenario.k_users
    if k_comm < k:
        raise ValueError(f"beamformer carries {k_comm} user columns, scenario has {k}")
    proj = scenario.channels.conj().T @ cols[:, :k]      # (k users) x (k beams)
    powers = np.abs(proj) ** 2
    signal = np.diag(powers)
    interference = powers.sum(axis=1) - signal
    return signal / (interference + scenario.noise_var)


def sinr_nic(scenario: IsacScenario, v) -> np.ndarray:
    """Per-user SINR when the sensing beams act as additional interference."""
    cols, k_comm = _as_columns(v)
    k = scenario.k_users
    if k_comm < k:
        raise ValueError(f"beamformer carries {k_comm} user columns, scenario has {k}")
    proj = scenario.channels.conj().T @ cols             # (k users) x (all beams)
    powers = np.abs(proj) ** 2
    signal = np.diag(powers[:, :k])
    interference = powers.sum(axis=1) - signal
    return signal / (interference + scenario.noise_var)


def sinr(scenario: IsacScenario, v) -> np.ndarray:
    """SINR under the scenario's interference mode."""
    return sinr_ic(scenario, v) if scenario.interference_mode == "ic" else sinr_nic(scenario, v)


def radar_snr(theta0: float, geometry: ArrayGeometry, v, snapshots: int,
              noise_var: float) -> float:
    """Echo SNR toward a known direction; equals
    ``snapshots * ||a_t^H V||^2 / noise_var`` for unit-norm steering."""
    cols, _ = _as_columns(v)
    a_t = steering_vector(geometry, theta0, "tx")
    a_r = steering_vector(geometry, theta0, "rx")
    gain = float(np.vdot(a_r, a_r).real) * float(np.sum(np.abs(a_t.conj() @ cols) ** 2))
    return snapshots * gain / noise_var


@dataclass
class ScnrSpec:
    """Target/clutter quadratic forms for detection with a fixed combiner."""

    target_gram: np.ndarray
    clutter_gram: np.ndarray
    combiner_power: float
    snapshots: int
    noise_var: float

    def __post_init__(self):
        self.target_gram = require_hermitian(self.target_gram)
        self.clutter_gram = require_hermitian(self.clutter_gram)
        if self.combiner_power <= 0:
            raise ValueError("combiner power must be positive")
        if self.snapshots < 1 or self.noise_var <= 0:
            raise ValueError("snapshots and noise variance must be positive")


def radar_scnr(spec: ScnrSpec, v) -> float:
    """Signal-to-clutter-plus-noise ratio of the echo for beamformers ``v``."""
    cols, _ = _as_columns(v)
    gram = cols @ cols.conj().T
    num = spec.snapshots * float(np.einsum("ij,ji->", spec.target_gram, gram).real)
    den = (spec.snapshots * float(np.einsum("ij,ji->", spec.clutter_gram, gram).real)
           + spec.noise_var * spec.combiner_power)
    if den <= 0:
        raise DegenerateDenominatorError("SCNR denominator is nonpositive")
    return num / den


def scnr_single_quadratic(spec: ScnrSpec, value: float) -> tuple:
    """Rearrange ``scnr == value`` into one trace equation ``Tr(Q V V^H) == rhs``.

    Returns ``(Q, rhs)`` with
    ``Q = (snapshots/value) * target - snapshots * clutter`` and
    ``rhs = noise_var * combiner_power``.
    """
    if value <= 0:
        raise ValueError("SCNR level must be positive")
    q = (spec.snapshots / value) * spec.target_gram - spec.snapshots * spec.clutter_gram
    return q, spec.noise_var * spec.combiner_power


@dataclass
class BeamPatternSpec:
    """Desired transmit pattern samples plus cross-correlation directions."""

    grid_angles: np.ndarray
    desired: np.ndarray
    crosscorr_angles: np.ndarray = None
    weight: float = 0.0

    def __post_init__(self):
        self.grid_angles = np.atleast_1d(np.asarray(self.grid_angles, dtype=float))
        self.desired = np.atleast_1d(np.asarray(self.desired, dtype=float))
        if self.grid_angles.size == 0:
            raise ValueError("pattern grid must be non-empty")
        if self.desired.shape != self.grid_angles.shape:
            raise ValueError("desired levels must match the grid")
        if np.any(self.desired < 0):
            raise ValueError("desired pattern levels must be nonnegative")
        if self.crosscorr_angles is None:
            self.crosscorr_angles = np.zeros(0)
        self.crosscorr_angles = np.atleast_1d(np.asarray(self.crosscorr_angles, dtype=float))
        if self.weight < 0:
            raise ValueError("cross-correlation weight must be nonnegative")


def beam_pattern_objective(spec: BeamPatternSpec, geometry: ArrayGeometry, v) -> float:
    """Squared pattern mismatch plus weighted squared cross-correlations."""
    cols, _ = _as_columns(v)
    gram = cols @ cols.conj().T
    total = 0.0
    for theta, level in zip(spec.grid_angles, spec.desired):
        a = steering_vector(geometry, theta, "tx")
        total += abs(float(np.real(a.conj() @ gram @ a)) - level) ** 2
    if spec.weight > 0 and spec.crosscorr_angles.size >= 2:
        steers = [steering_vector(geometry, t, "tx") for t in spec.crosscorr_angles]
        for p, ap in enumerate(steers):
            for q, aq in enumerate(steers):
                if p != q:
                    total += spec.weight * abs(ap.conj() @ gram @ aq) ** 2
    return float(total)


def bcrb_scalarize(j: np.ndarray, mode: str = "trace") -> float:
    """Scalarize an information matrix: error-bound trace, worst diagonal,
    or negative log-determinant."""
    j = np.asarray(j, dtype=float)
    j = 0.5 * (j + j.T)
    w = np.linalg.eigvalsh(j)
    if w[0] <= 1e-12:
        raise SingularBfimError(f"information matrix has min eigenvalue {w[0]:.3e}")
    mode = mode.lower()
    if mode == "trace":
        return float(np.trace(np.linalg.inv(j)))
    if mode == "maxdiag":
        return float(np.max(np.diag(np.linalg.inv(j))))
    if mode == "logdet":
        return float(-np.sum(np.log(w)))
    raise ValueError(f"unknown scalarization {mode!r}")
