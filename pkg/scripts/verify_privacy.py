#!/usr/bin/env python3
"""Exact DP audit of the client randomizer over a grid of head-list shapes.

For every (k, k_q) shape and every requested budget, enumerates the
randomizer's output law in high precision and prints the worst additive
slack over all input pairs; a non-positive value certifies the budget.
"""

import argparse

from hybridhh.client import build_report_model
from hybridhh.core import STAR, HeadList, PrivacyParams, Stage
from hybridhh.oracle import verify_dp


def shape(k: int, kq: int) -> HeadList:
    entries = {
        f"q{i}": tuple(f"q{i}/u{j}" for j in range(kq - 1)) + (STAR,)
        for i in range(k - 1)
    }
    entries[STAR] = (STAR,)
    return HeadList(entries, Stage.CLIENT_AUGMENTED)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k-max", type=int, default=5, help="max queries incl. star")
    ap.add_argument("--kq-max", type=int, default=4, help="max urls per query incl. star")
    ap.add_argument("--budgets", default="1:1e-5,4:1e-5,4:1e-7",
                    help="comma-separated epsilon:delta pairs")
    ap.add_argument("--f-c", type=float, default=0.85, dest="f_c")
    args = ap.parse_args()

    budgets = []
    for part in args.budgets.split(","):
        eps, delta = part.split(":")
        budgets.append((float(eps), float(delta)))

    print(f"{'k':>3} {'k_q':>4} {'eps':>5} {'delta':>8} {'violation':>12}  verdict")
    worst = float("-inf")
    for k in range(2, args.k_max + 1):
        for kq in range(2, args.kq_max + 1):
            hl = shape(k, kq)
            for eps, delta in budgets:
                params = PrivacyParams(epsilon=eps, delta=delta, f_C=args.f_c)
                model = build_report_model(params, hl)
                v = verify_dp(model, hl, params.eps_prime, params.delta_prime)
                worst = max(worst, v)
                verdict = "PASS" if v <= 0 else "FAIL"
                print(f"{k:>3} {kq:>4} {eps:>5g} {delta:>8g} {v:>12.3e}  {verdict}")
    print(f"worst violation: {worst:.3e} ({'PASS' if worst <= 0 else 'FAIL'})")


if __name__ == "__main__":
    main()
