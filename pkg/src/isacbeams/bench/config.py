"""Experiment configuration: a TOML file with sections plus CLI overrides."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

if sys.version_info >= (3, 11):  # pragma: no cover - version shim
    import tomllib
else:
    import tomli as tomllib

VALID_MODES = ("ic", "nic", "sensing_only")
VALID_METRICS = ("multitarget", "fullchannel", "aoa", "snr")
VALID_SCALARIZATIONS = ("maxdiag", "trace")


@dataclass
class ExperimentConfig:
    """Everything a seeded trial needs; defaults are desk-scale."""

    n_tx: int = 8
    n_rx: int = 8
    k_users: int = 2
    n_targets: int = 1
    power_budget: float = 10.0
    sinr_target_db: float = 5.0
    noise_var: float = 1.0
    snapshots: int = 1
    theta_max_deg: float = 10.0
    quadrature_nodes: int = 15
    n_seeds: int = 200
    master_seed: int = 20240521
    mode: str = "nic"
    metric_kind: str = "multitarget"
    scalarization: str = "maxdiag"
    fullchannel_var_ratio: float = 1.0
    inflate_start: bool = False
    jobs: int = 1
    out_dir: str = "results"
    defaults_applied: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in VALID_MODES:
            raise ValueError(f"mode must be one of {VALID_MODES}, got {self.mode!r}")
        if self.metric_kind not in VALID_METRICS:
            raise ValueError(f"metric_kind must be one of {VALID_METRICS}")
        if self.scalarization not in VALID_SCALARIZATIONS:
            raise ValueError(f"scalarization must be one of {VALID_SCALARIZATIONS}")
        if self.mode == "sensing_only":
            self.k_users = 0
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be at least 1")
        if not 0.5 < self.theta_max_deg <= 45.0:
            raise ValueError("theta_max_deg must lie in (0.5, 45]")
        if not float(self.sinr_target_db) == self.sinr_target_db:
            raise ValueError("sinr_target_db must be finite")
        if self.k_users > self.n_tx:
            raise ValueError("more users than transmit antennas")
        if self.fullchannel_var_ratio < 1.0:
            raise ValueError("fullchannel_var_ratio must be >= 1")

    @property
    def interference_mode(self) -> str:
        return "nic" if self.mode == "nic" else "ic"

    def echo(self) -> dict:
        return asdict(self)


_SECTION_FIELDS = {
    "geometry": ("n_tx", "n_rx"),
    "scenario": ("k_users", "n_targets", "power_budget", "sinr_target_db",
                 "noise_var", "snapshots", "mode", "metric_kind", "scalarization",
                 "fullchannel_var_ratio", "inflate_start"),
    "priors": ("theta_max_deg", "quadrature_nodes"),
    "experiment": ("n_seeds", "master_seed", "out_dir", "jobs"),
}


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Parse a sectioned TOML config; flat keys are accepted as well."""
    data = tomllib.loads(Path(path).read_text())
    flat = {}
    tracked = []
    for section, keys in _SECTION_FIELDS.items():
        body = data.get(section, {})
        for key in keys:
            if key in body:
                flat[key] = body[key]
    for key in ExperimentConfig.__dataclass_fields__:
        if key in data and key not in flat:
            flat[key] = data[key]
    for key in ("power_budget",):
        if key not in flat:
            tracked.append(f"{key}={ExperimentConfig.__dataclass_fields__[key].default}")
    if overrides:
        flat.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig(**flat)
    cfg.defaults_applied = tracked
    return cfg
