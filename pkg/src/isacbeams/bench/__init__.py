"""Configuration, scenario randomization, Monte-Carlo driver, and CLI."""

from .config import ExperimentConfig, load_config  # noqa: F401
from .experiment import run_experiment, run_trials, summarize, write_outputs  # noqa: F401
from .randomize import TrialSetup, draw_priors, randomize_scenario, trial_rng  # noqa: F401
from .trial import BoundViolation, TrialRecord, run_seed, run_trial, trial_bound  # noqa: F401
from .verify import VerifyReport, verify_analytic  # noqa: F401
