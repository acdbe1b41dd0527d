"""Downlink joint sensing/communication beamformer design: closed-form
bounds on the number of simultaneous beamformers, a small dense conic solver
for the covariance relaxations, and constructive rank reduction that meets
the bounds while preserving sensing, SINR, and power performance."""

__version__ = "0.1.0"

from .bounds import (  # noqa: F401
    BoundQuery,
    bound_bcrb,
    bound_for_query,
    bound_hypotenuse,
    bound_radar,
    bound_sum,
    no_extra_beams_threshold,
)
from .channel import (  # noqa: F401
    ArrayGeometry,
    BfimSpec,
    IsacScenario,
    QuadraticMetricSpec,
    TargetPrior,
    assemble_bfim,
    build_aoa_only_spec,
    build_full_channel_bfim,
    build_multitarget_bfim,
    fourier_grid,
    steering_derivative,
    steering_vector,
)
from .metrics import (  # noqa: F401
    BeamformerMatrix,
    BeamPatternSpec,
    ScnrSpec,
    bcrb_scalarize,
    beam_pattern_objective,
    radar_scnr,
    radar_snr,
    sinr_ic,
    sinr_nic,
)
from .numerics import (  # noqa: F401
    EigenSystem,
    eig_hermitian,
    orthonormal_complement,
    psd_factor,
    real_nullspace_vector,
)
