"""Command-line entry point.

Subcommands: run (one pipeline execution), sweep (parameter grid),
synth (write a synthetic log), verify-dp (exact privacy check for a
head-list shape), metrics (score a blended output against a truth
file). Exit codes: 0 success, 1 config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from . import client, data, harness, metrics, oracle
from .core import (
    STAR,
    HeadList,
    ParamError,
    PrivacyParams,
    Record,
    Stage,
    decode_star,
)
from .data import ParseError
from .harness import ConfigError
from .sampling import substream


def _load_config(args) -> harness.ExperimentConfig:
    if args.config:
        config = harness.parse_config(Path(args.config).read_text(encoding="utf-8"))
    else:
        config = harness.ExperimentConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    if getattr(args, "no_projection", False):
        config = replace(config, projection=False)
    return config


def _cmd_run(args) -> int:
    config = _load_config(args)
    dataset = harness.load_dataset(config)
    result = harness.run_blender(config, dataset, out_dir=Path(config.out_dir))
    print(f"head list: {result.head_list.k - 1} queries (+wildcard), "
          f"{result.head_list.num_records()} records")
    print(f"L1 = {result.row.l1:.4f}  NDCG = {result.row.ndcg:.4f}")
    print(f"artifacts written to {config.out_dir}/")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    dataset = harness.load_dataset(config) if config.dataset_path else None
    out_path = Path(config.out_dir) / "sweep.csv"
    rows = harness.sweep(config, dataset, out_path=out_path)
    ok = sum(1 for r in rows if r.status == "ok")
    print(f"{len(rows)} runs ({ok} ok); results in {out_path}")
    return 0


def _cmd_synth(args) -> int:
    rng = substream(args.seed, 0xDA7A)
    dataset = data.synth_zipf(args.users, args.queries, args.urls, args.exponent, rng)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        data.serialize_log(dataset, fh)
    truth_path = out.with_suffix(out.suffix + ".truth.csv")
    with open(truth_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["query", "url", "p"])
        for rec, p in dataset.true_distribution.items():
            w.writerow([rec.query, rec.url, repr(p)])
    print(f"wrote {len(dataset.users)} users to {out} (truth: {truth_path})")
    return 0


def _cmd_verify_dp(args) -> int:
    params = PrivacyParams(
        epsilon=args.epsilon, delta=args.delta, f_C=args.f_c
    )
    entries = {
        f"q{i}": tuple(f"q{i}/u{j}" for j in range(args.kq - 1)) + (STAR,)
        for i in range(args.k - 1)
    }
    entries[STAR] = (STAR,)
    hl = HeadList(entries, Stage.CLIENT_AUGMENTED)
    model = client.build_report_model(params, hl)
    violation = oracle.verify_dp(model, hl, params.eps_prime, params.delta_prime)
    print(f"max violation: {violation:.3e} ({'PASS' if violation <= 0 else 'FAIL'})")
    return 0


def _read_prob_csv(path: str) -> dict[Record, float]:
    probs: dict[Record, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rec = Record(decode_star(row["query"]), decode_star(row["url"]))
            key = "p_blend" if "p_blend" in row else "p"
            probs[rec] = float(row[key])
    return probs


def _cmd_metrics(args) -> int:
    est = _read_prob_csv(args.blended)
    truth = _read_prob_csv(args.truth)
    star_free = [r for r in est if r.query != STAR and r.url != STAR]
    l1 = metrics.l1_distance(
        {r: est[r] for r in star_free},
        {r: truth.get(r, 0.0) for r in star_free},
    )
    est_ranked = metrics.strip_stars_and_rescale(est)
    truth_ranked = metrics.strip_stars_and_rescale(truth)
    ndcg = metrics.generalized_ndcg(est_ranked, truth_ranked)
    print(f"L1 = {l1:.6f}")
    print(f"NDCG = {ndcg:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridhh",
        description="Hybrid-model differentially private heavy-hitter estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--seed", type=int, default=None, help="master RNG seed")
        p.add_argument("--out", default=None, help="output directory")

    p_run = sub.add_parser("run", help="execute one full pipeline run")
    common(p_run)
    p_run.add_argument("--no-projection", action="store_true",
                       help="skip the simplex projection of the blended estimate")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run the configured parameter grid")
    common(p_sweep)
    p_sweep.add_argument("--no-projection", action="store_true")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_synth = sub.add_parser("synth", help="generate a synthetic power-law log")
    p_synth.add_argument("--users", type=int, required=True)
    p_synth.add_argument("--queries", type=int, required=True)
    p_synth.add_argument("--urls", type=int, required=True)
    p_synth.add_argument("--exponent", type=float, default=1.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=_cmd_synth)

    p_vdp = sub.add_parser("verify-dp", help="exact DP check for a head-list shape")
    p_vdp.add_argument("--k", type=int, required=True, help="number of queries incl. star")
    p_vdp.add_argument("--kq", type=int, required=True, help="urls per query incl. star")
    p_vdp.add_argument("--epsilon", type=float, required=True)
    p_vdp.add_argument("--delta", type=float, required=True)
    p_vdp.add_argument("--f-c", type=float, default=0.85, dest="f_c")
    p_vdp.set_defaults(func=_cmd_verify_dp)

    p_met = sub.add_parser("metrics", help="score a blended output against truth")
    p_met.add_argument("--blended", required=True, help="blended.csv from a run")
    p_met.add_argument("--truth", required=True, help="truth CSV (query,url,p)")
    p_met.set_defaults(func=_cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParamError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
