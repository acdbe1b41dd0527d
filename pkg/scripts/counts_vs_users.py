#!/usr/bin/env python3
"""Observed beam counts versus the user count, against both bounds.

Sweeps K for a fixed number of LoS targets and prints the worst observed
beamformer count per K for the cancellation and no-cancellation modes, next
to the sum bound K + floor(sqrt(d)) and the hypotenuse bound
floor(sqrt(K^2 + d)). The no-cancellation bound becomes exact once
K >= d/2.
"""

import argparse
from pathlib import Path

from isacbeams.bench import ExperimentConfig, run_trials, write_outputs
from isacbeams.bounds import bound_hypotenuse, bound_sum
from isacbeams.channel import multitarget_d


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=50)
    parser.add_argument("--ntx", type=int, default=8)
    parser.add_argument("--ntr", type=int, default=2)
    parser.add_argument("--kmax", type=int, default=6)
    parser.add_argument("--power", type=float, default=10.0)
    parser.add_argument("--jobs", type=int, default=2)
    parser.add_argument("--out", default="results/k_sweep")
    args = parser.parse_args()

    d = multitarget_d(args.ntr)
    out_root = Path(args.out)
    print(f"d = {d} quadratic terms for {args.ntr} targets")
    print(f"{'K':>3} {'max ic':>7} {'sum bound':>9} {'max nic':>8} {'hyp bound':>9}")
    for k in range(args.kmax + 1):
        worst = {}
        for mode in ("ic", "nic"):
            cfg = ExperimentConfig(
                n_tx=args.ntx, n_rx=args.ntx, k_users=k, n_targets=args.ntr,
                mode=mode, power_budget=args.power, n_seeds=args.seeds,
                jobs=args.jobs, master_seed=530_000 + 10 * k,
                out_dir=str(out_root / f"k{k}_{mode}"))
            records = run_trials(cfg)
            write_outputs(cfg, records)
            ok = [r.n_optimize for r in records if r.status == "ok"]
            worst[mode] = max(ok) if ok else float("nan")
        print(f"{k:>3} {worst['ic']:>7} {bound_sum(k, d):>9} "
              f"{worst['nic']:>8} {min(bound_hypotenuse(k, d), args.ntx):>9}")


if __name__ == "__main__":
    main()
