"""Monte-Carlo experiment driver with CSV and JSON emitters.

Trials are independent and run under per-seed derived RNG streams, so the
results do not depend on the worker count; aggregation is ordered by seed.
Re-running a config reproduces the CSV except for the timestamp header line
and the wall-clock timing column.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import List

import numpy as np

from .. import __version__
from .config import ExperimentConfig
from .trial import CSV_COLUMNS, TrialRecord, run_seed


def run_trials(config: ExperimentConfig) -> List[TrialRecord]:
    seeds = list(range(config.n_seeds))
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            records = list(pool.map(run_seed, [config] * len(seeds), seeds,
                                    chunksize=max(1, len(seeds) // (4 * config.jobs))))
    else:
        records = [run_seed(config, seed) for seed in seeds]
    records.sort(key=lambda r: r.seed)
    return records


def summarize(config: ExperimentConfig, records: List[TrialRecord]) -> dict:
    ok = [r for r in records if r.status == "ok"]
    failed = [r for r in records if r.status == "failed"]
    infeasible = [r for r in records if r.status == "infeasible"]
    counts = {}
    for r in ok:
        counts[str(r.n_optimize)] = counts.get(str(r.n_optimize), 0) + 1
    summary = {
        "version": __version__,
        "config": asdict(config),
        "trials": {
            "total": len(records),
            "ok": len(ok),
            "failed": len(failed),
            "infeasible": len(infeasible),
        },
        "n_optimize": {
            "max": max((r.n_optimize for r in ok), default=None),
            "mean": float(np.mean([r.n_optimize for r in ok])) if ok else None,
            "histogram": dict(sorted(counts.items(), key=lambda kv: int(kv[0]))),
        },
        "bound": max((r.bound for r in ok), default=None),
        "bound_violations": sum(1 for r in ok if r.n_optimize > r.bound),
        "max_residual": max((r.max_residual for r in ok), default=None),
        "reduction_steps_total": sum(r.reduction_steps for r in ok),
        "failed_details": sorted({r.detail for r in failed if r.detail}),
    }
    return summary


def write_outputs(config: ExperimentConfig, records: List[TrialRecord],
                  out_dir=None) -> dict:
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat()
    lines = [f"# generated: {stamp}", CSV_COLUMNS]
    lines.extend(r.csv_row() for r in records)
    (out / "trials.csv").write_text("\n".join(lines) + "\n")
    summary = summarize(config, records)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def run_experiment(config: ExperimentConfig, out_dir=None) -> dict:
    """Run all seeds, write ``trials.csv`` and ``summary.json``, return the summary."""
    records = run_trials(config)
    return write_outputs(config, records, out_dir)
