"""Conic solver, problem builders, and rank-one extraction."""

from .builders import (  # noqa: F401
    CovarianceLayout,
    DesignProblem,
    PowerMinProblem,
    build_power_min,
    build_power_min_ic,
    build_power_min_nic,
    build_sensing_design,
    design_metric_value,
    orthogonal_complement_basis,
    quad_targets_from_bfim,
)
from .extract import covariance_rank, extract_rank_one  # noqa: F401
from .solver import (  # noqa: F401
    BlockSpec,
    ConicProblem,
    LinearTerm,
    ScalarSpec,
    SdpSolution,
    SolveOptions,
    solve,
)
