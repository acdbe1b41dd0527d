"""Analytic verification suite: closed forms against independent evaluations.

Four families of checks, each decidable in well under a second:

* two-beam necessity for a single target (closed-form split vs grid search,
  strict margin over the best single beam);
* the real-embedding inverse identity behind the compact trace form, and the
  trace form itself against a direct inverse of the assembled information
  matrix;
* the symmetric equal-power optimum against the conic solver;
* the generated bound table against a golden file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import List, Tuple

import numpy as np

from ..bounds import bound_hypotenuse, bound_table
from ..channel import ArrayGeometry, IsacScenario, assemble_bfim, build_full_channel_bfim
from ..metrics import bcrb_scalarize
from ..reduce import verify_single_target_two_beams
from ..sdp import SolveOptions, build_sensing_design, design_metric_value, solve


@dataclass
class VerifyReport:
    checks: List[Tuple[str, bool, str]] = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append((name, passed, detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)


def _check_two_beam(report: VerifyReport) -> None:
    geom = ArrayGeometry(n_tx=8, n_rx=1)
    r = verify_single_target_two_beams(geom, 0.0, 1.0)
    gap_ok = (r.single_beam_objective - r.two_beam_objective) > 1e-3 * r.two_beam_objective
    report.add("two-beam margin (n_tx=8)", bool(gap_ok and r.beta2 > 0),
               f"two-beam {r.two_beam_objective:.6f} vs single {r.single_beam_objective:.6f}")
    report.add("two-beam split vs grid", abs(r.beta1 - r.grid_beta1) < 1e-4,
               f"closed form {r.beta1:.6f}, grid {r.grid_beta1:.6f}")
    geom4 = ArrayGeometry(n_tx=4, n_rx=1)
    r4 = verify_single_target_two_beams(geom4, 0.0, 1.0)
    c = 15 * np.pi**2 / 12
    want = c / (c + np.sqrt(c / 2))
    report.add("two-beam closed form (n_tx=4)", abs(r4.beta1 - want) < 1e-9,
               f"beta1 {r4.beta1:.6f}, expected {want:.6f}")


def _check_embedding_identity(report: VerifyReport, trials: int = 5) -> None:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(trials):
        a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)) + 3 * np.eye(6)
        emb = np.block([[a.real, a.imag], [-a.imag, a.real]])
        inv = np.linalg.inv(a)
        emb_inv = np.block([[inv.real, inv.imag], [-inv.imag, inv.real]])
        worst = max(worst, np.linalg.norm(np.linalg.inv(emb) - emb_inv)
                    / np.linalg.norm(emb_inv))
    report.add("real-embedding inverse identity", worst < 1e-10, f"worst {worst:.2e}")


def _check_trace_closed_form(report: VerifyReport, trials: int = 20) -> None:
    rng = np.random.default_rng(11)
    sigma0, sigma2, ups = 1.0, 1.0, 1
    geom = ArrayGeometry(n_tx=4, n_rx=1)
    spec, _ = build_full_channel_bfim(geom, np.full(4, 2 * sigma0**2), ups, sigma2)
    worst = 0.0
    for _ in range(trials):
        v = (rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))) / np.sqrt(2)
        direct = bcrb_scalarize(assemble_bfim(spec, v), "trace")
        jbar = np.eye(4) / sigma0**2 + (2 * ups / sigma2) * (v @ v.conj().T)
        compact = 2 * float(np.trace(np.linalg.inv(jbar)).real)
        worst = max(worst, abs(direct - compact) / abs(compact))
    report.add("trace closed form vs direct inverse", worst < 1e-10, f"worst {worst:.2e}")


def _check_equal_power_optimum(report: VerifyReport) -> None:
    sigma0 = sigma = 1.0
    ups, p, nt = 1, 4.0, 4
    geom = ArrayGeometry(n_tx=nt, n_rx=1)
    spec, _ = build_full_channel_bfim(geom, np.full(nt, 2 * sigma0**2), ups, sigma**2)
    scen = IsacScenario(geometry=geom, channels=np.zeros((nt, 0)), sinr_targets=[],
                        power_budget=p, noise_var=sigma**2)
    design = build_sensing_design(spec, scen, "trace")
    sol = solve(design.problem, SolveOptions(tol=1e-8))
    want = 2 * nt / (1 / sigma0**2 + 2 * ups * p / (sigma**2 * nt))
    got = design_metric_value(design, sol)
    report.add("equal-power optimum vs solver",
               sol.status == "optimal" and abs(got - want) <= 1e-5 * want,
               f"solver {got:.8f}, closed form {want:.8f} ({sol.status})")


def _check_bound_table(report: VerifyReport) -> None:
    golden = resources.files("isacbeams.bench").joinpath(
        "data/bounds_table_golden.csv").read_text()
    generated = bound_table(range(3), (1, 2))
    report.add("bound table vs golden file", generated == golden,
               "byte-identical" if generated == golden else "MISMATCH")
    snr_row = [bound_hypotenuse(0, 1), bound_hypotenuse(3, 1)]
    report.add("single-quadratic bound row", snr_row == [1, 3], f"{snr_row}")


def verify_analytic() -> VerifyReport:
    report = VerifyReport()
    _check_two_beam(report)
    _check_embedding_identity(report)
    _check_trace_closed_form(report)
    _check_equal_power_optimum(report)
    _check_bound_table(report)
    return report
