#!/usr/bin/env python3
"""Sweep the opt-in fraction on a synthetic power-law log.

Shows how much trusted-curator data the blend needs before it beats the
pure local-model estimate. Writes <out>/optin_sweep.csv.
"""

import argparse
from pathlib import Path

from hybridhh.core import PrivacyParams
from hybridhh.harness import ExperimentConfig, SweepAxes, SynthSpec, load_dataset, sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fractions", default="0.01,0.02,0.05,0.10",
                    help="comma-separated opt-in fractions")
    ap.add_argument("--seeds", type=int, default=5, help="repetitions per cell")
    ap.add_argument("--users", type=int, default=100_000)
    ap.add_argument("--queries", type=int, default=500)
    ap.add_argument("--urls", type=int, default=4)
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("--out", default="results", help="output directory")
    args = ap.parse_args()

    fracs = tuple(float(x) for x in args.fractions.split(","))
    config = ExperimentConfig(
        params=PrivacyParams(),
        seed=args.master_seed,
        synth=SynthSpec(users=args.users, queries=args.queries, urls=args.urls),
        sweep=SweepAxes(optin_fraction=fracs, seeds=args.seeds),
    )
    dataset = load_dataset(config)
    out_path = Path(args.out) / "optin_sweep.csv"
    rows = sweep(config, dataset, out_path=out_path)
    ok = sum(1 for r in rows if r.status == "ok")
    print(f"{len(rows)} runs ({ok} ok) -> {out_path}")


if __name__ == "__main__":
    main()
