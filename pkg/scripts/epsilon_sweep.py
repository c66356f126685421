#!/usr/bin/env python3
"""Sweep the total privacy budget epsilon on a synthetic power-law log.

Writes one metrics row per (epsilon, seed) cell to <out>/epsilon_sweep.csv.
Rows flagged `headlist_short` come from budgets too tight to fill the
M-query head list; drop them when plotting trend lines.
"""

import argparse
from pathlib import Path

from hybridhh.core import PrivacyParams
from hybridhh.harness import ExperimentConfig, SweepAxes, SynthSpec, load_dataset, sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilons", default="1,2,3,4,5",
                    help="comma-separated epsilon values")
    ap.add_argument("--seeds", type=int, default=5, help="repetitions per cell")
    ap.add_argument("--users", type=int, default=100_000)
    ap.add_argument("--queries", type=int, default=500)
    ap.add_argument("--urls", type=int, default=4)
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("--out", default="results", help="output directory")
    args = ap.parse_args()

    eps = tuple(float(x) for x in args.epsilons.split(","))
    config = ExperimentConfig(
        params=PrivacyParams(),
        seed=args.master_seed,
        synth=SynthSpec(users=args.users, queries=args.queries, urls=args.urls),
        sweep=SweepAxes(epsilon=eps, seeds=args.seeds),
    )
    dataset = load_dataset(config)
    out_path = Path(args.out) / "epsilon_sweep.csv"
    rows = sweep(config, dataset, out_path=out_path)
    ok = sum(1 for r in rows if r.status == "ok")
    print(f"{len(rows)} runs ({ok} ok) -> {out_path}")


if __name__ == "__main__":
    main()
