"""End-to-end orchestration: partition, estimate, privatize, blend, score.

A run consumes a dataset and a seeded config, executes the trusted-
curator stage on the opt-in partitions, the local randomizer for every
client, the denoising aggregation, and the variance-weighted blend, and
writes the head list, the estimate tables, and a metrics row. Sweeps
repeat runs over a Cartesian product of parameter axes with derived
seeds.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import blend, client, data, metrics, optin
from .core import (
    STAR,
    EstimateVector,
    HeadList,
    ParamError,
    PrivacyParams,
    Record,
    canonicalize,
    encode_star,
)
from .sampling import client_stream_id, substream


@dataclass(frozen=True)
class SynthSpec:
    users: int = 100_000
    queries: int = 500
    urls: int = 4
    exponent: float = 1.0


@dataclass(frozen=True)
class SweepAxes:
    epsilon: tuple[float, ...] = ()
    optin_fraction: tuple[float, ...] = ()
    M: tuple[int, ...] = ()
    seeds: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    params: PrivacyParams = field(default_factory=PrivacyParams)
    seed: int = 0
    dataset_path: Optional[str] = None   # None means synthetic
    synth: SynthSpec = field(default_factory=SynthSpec)
    out_dir: str = "results"
    projection: bool = True
    sweep: SweepAxes = field(default_factory=SweepAxes)


@dataclass(frozen=True)
class MetricsRow:
    epsilon: float
    delta: float
    optin_fraction: float
    M: int
    seed: int
    l1: float
    ndcg: float
    headlist_short: bool
    status: str = "ok"

    FIELDS = ("epsilon", "delta", "optin_pct", "M", "seed", "L1", "NDCG", "flags")

    def as_csv_row(self) -> list[str]:
        flags = []
        if self.headlist_short:
            flags.append("headlist_short")
        if self.status != "ok":
            flags.append(self.status)
        return [
            repr(self.epsilon),
            repr(self.delta),
            repr(self.optin_fraction),
            str(self.M),
            str(self.seed),
            repr(self.l1) if math.isfinite(self.l1) else "",
            repr(self.ndcg) if math.isfinite(self.ndcg) else "",
            ";".join(flags),
        ]


@dataclass(frozen=True)
class RunResult:
    head_list: HeadList
    optin_out: optin.OptinOutput
    client_est: EstimateVector
    blended: blend.BlendedOutput
    row: MetricsRow


class ConfigError(ValueError):
    pass


def derive_seed(master_seed: int, *key: int) -> int:
    """Deterministic 64-bit sub-seed for a sweep cell or repetition."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0])


def load_dataset(config: ExperimentConfig) -> data.Dataset:
    if config.dataset_path is not None:
        with open(config.dataset_path, "r", encoding="utf-8") as fh:
            return data.parse_log(fh)
    spec = config.synth
    rng = substream(config.seed, 0xDA7A)
    return data.synth_zipf(spec.users, spec.queries, spec.urls, spec.exponent, rng)


def _truth_on_head_list(
    dataset: data.Dataset,
    sampled: Iterable[Record],
    hl: HeadList,
) -> dict[Record, float]:
    """Ground truth restricted to the final head list.

    Known synthetic truth when available, otherwise the per-user-sampled
    empirical distribution; out-of-list mass folds into the wildcard.
    """
    if dataset.true_distribution is not None:
        source = dataset.true_distribution
    else:
        source = data.empirical_distribution(list(sampled))
    truth: dict[Record, float] = {r: 0.0 for r in hl.records()}
    for rec, mass in source.items():
        truth[canonicalize(rec, hl)] += mass
    return truth


def run_blender(
    config: ExperimentConfig,
    dataset: data.Dataset,
    seed: Optional[int] = None,
    out_dir: Optional[Path] = None,
) -> RunResult:
    """One full pipeline execution. Deterministic given (config, seed)."""
    params = config.params
    run_seed = config.seed if seed is None else seed
    # Fail on bad privacy parameters before any data is touched.
    optin.compute_threshold(params)

    s_users, t_users, c_users = data.partition_users(
        dataset, params.optin_fraction, params.f_O, substream(run_seed, 0)
    )
    s_records = data.sample_per_user(s_users, params.m_O, substream(run_seed, 1))
    t_records = data.sample_per_user(t_users, params.m_O, substream(run_seed, 2))

    hl_initial = optin.create_head_list(params, s_records, substream(run_seed, 3))
    if hl_initial.k <= 1:
        raise ParamError("head-list creation admitted no records (thresholding starved)")
    optin_out = optin.estimate_optin_probabilities(
        params, t_records, hl_initial, substream(run_seed, 4)
    )
    hl_final = optin_out.head_list

    hl_aug = hl_final.augment_for_clients()
    model = client.build_report_model(params, hl_aug)

    # Each client samples and privatizes with its own substream keyed by
    # a stable hash of its user id, so iteration order is irrelevant.
    counts: dict[Record, int] = {}
    n_reports = 0
    for user in c_users:
        crng = substream(run_seed ^ 0x5EED, client_stream_id(user.user_id))
        for rec in data.sample_per_user([user], params.m_C, crng):
            report = client.local_privatize(rec, model, hl_aug, crng)
            counts[report] = counts.get(report, 0) + 1
            n_reports += 1
    client_est = client.client_estimates_from_counts(counts, n_reports, model, hl_aug)

    blended = blend.blend_probabilities(
        optin_out.estimates, client_est, hl_final, project=config.projection
    )

    truth = _truth_on_head_list(dataset, s_records + t_records, hl_final)
    # L1 compares the star-stripped vectors directly; only the NDCG
    # relevance scores are renormalized after discarding the wildcard.
    star_free = [r for r in hl_final.records() if r.query != STAR and r.url != STAR]
    l1 = metrics.l1_distance(
        {r: blended.probs[r] for r in star_free},
        {r: truth.get(r, 0.0) for r in star_free},
    )
    est_ranked = metrics.strip_stars_and_rescale(blended.probs)
    truth_ranked = metrics.strip_stars_and_rescale(truth)
    ndcg = metrics.generalized_ndcg(est_ranked, truth_ranked)

    n_regular_queries = sum(1 for q in hl_final.queries if q != STAR)
    row = MetricsRow(
        epsilon=params.epsilon,
        delta=params.delta,
        optin_fraction=params.optin_fraction,
        M=params.M,
        seed=run_seed,
        l1=l1,
        ndcg=ndcg,
        headlist_short=n_regular_queries < params.M,
    )
    result = RunResult(hl_final, optin_out, client_est, blended, row)
    if out_dir is not None:
        write_artifacts(result, Path(out_dir))
    return result


def write_artifacts(result: RunResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "headlist.tsv").write_text(result.head_list.to_tsv(), encoding="utf-8")

    with open(out_dir / "optin_estimates.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["query", "url", "p_hat", "var_hat"])
        est = result.optin_out.estimates
        for rec in result.head_list.records():
            w.writerow(
                [encode_star(rec.query), encode_star(rec.url),
                 repr(est.record_probs[rec]), repr(est.record_vars[rec])]
            )

    with open(out_dir / "blended.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["query", "url", "p_blend", "w",
             "p_optin", "var_optin", "p_client", "var_client"]
        )
        opt_est = result.optin_out.estimates
        cli_est = result.client_est
        for rec in result.head_list.records():
            w.writerow(
                [
                    encode_star(rec.query),
                    encode_star(rec.url),
                    repr(result.blended.probs[rec]),
                    repr(result.blended.weights[rec]),
                    repr(opt_est.record_probs[rec]),
                    repr(opt_est.record_vars[rec]),
                    repr(cli_est.record_probs[rec]),
                    repr(cli_est.record_vars[rec]),
                ]
            )

    with open(out_dir / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(MetricsRow.FIELDS)
        w.writerow(result.row.as_csv_row())


def sweep(
    config: ExperimentConfig,
    dataset: Optional[data.Dataset] = None,
    out_path: Optional[Path] = None,
) -> list[MetricsRow]:
    """Cartesian product over the configured axes, one run per cell/seed.

    Per-cell failures are recorded as error rows; the sweep continues.
    """
    axes = config.sweep
    eps_axis = axes.epsilon or (config.params.epsilon,)
    optin_axis = axes.optin_fraction or (config.params.optin_fraction,)
    m_axis = axes.M or (config.params.M,)
    rows: list[MetricsRow] = []
    cell = 0
    for eps in eps_axis:
        for frac in optin_axis:
            for m in m_axis:
                params = replace(
                    config.params, epsilon=eps, optin_fraction=frac, M=m
                )
                cell_config = replace(config, params=params)
                for rep in range(axes.seeds):
                    run_seed = derive_seed(config.seed, cell, rep)
                    ds = dataset if dataset is not None else load_dataset(cell_config)
                    try:
                        result = run_blender(cell_config, ds, seed=run_seed)
                        rows.append(result.row)
                    except (ParamError, ValueError) as exc:
                        rows.append(
                            MetricsRow(
                                epsilon=eps,
                                delta=config.params.delta,
                                optin_fraction=frac,
                                M=m,
                                seed=run_seed,
                                l1=float("nan"),
                                ndcg=float("nan"),
                                headlist_short=False,
                                status=f"failed:{type(exc).__name__}",
                            )
                        )
                cell += 1
    if out_path is not None:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(MetricsRow.FIELDS)
            for row in rows:
                w.writerow(row.as_csv_row())
    return rows


# -- config file parsing -------------------------------------------------

_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def parse_config(text: str) -> ExperimentConfig:
    """Flat `key = value` config with an optional [sweep] section."""
    flat: dict[str, str] = {}
    sweep_kv: dict[str, str] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section != "sweep":
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        (sweep_kv if section == "sweep" else flat)[key] = value

    def pop(d, key, cast, default):
        if key not in d:
            return default
        raw = d.pop(key)
        try:
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc

    def num_list(cast):
        return lambda raw: tuple(cast(part.strip()) for part in raw.split(",") if part.strip())

    try:
        params = PrivacyParams(
            epsilon=pop(flat, "epsilon", float, 4.0),
            delta=pop(flat, "delta", float, 1e-5),
            m_O=pop(flat, "m_O", int, 1),
            m_C=pop(flat, "m_C", int, 1),
            f_O=pop(flat, "f_O", float, 0.95),
            f_C=pop(flat, "f_C", float, 0.85),
            M=pop(flat, "M", int, 50),
            optin_fraction=pop(flat, "optin_fraction", float, 0.05),
        )
    except ParamError as exc:
        raise ConfigError(str(exc)) from exc
    synth = SynthSpec(
        users=pop(flat, "synth_users", int, 100_000),
        queries=pop(flat, "synth_queries", int, 500),
        urls=pop(flat, "synth_urls", int, 4),
        exponent=pop(flat, "synth_exponent", float, 1.0),
    )
    axes = SweepAxes(
        epsilon=pop(sweep_kv, "epsilon", num_list(float), ()),
        optin_fraction=pop(sweep_kv, "optin_fraction", num_list(float), ()),
        M=pop(sweep_kv, "M", num_list(int), ()),
        seeds=pop(sweep_kv, "seeds", int, 1),
    )
    dataset_path = flat.pop("dataset", None)
    if dataset_path in (None, "synth", ""):
        dataset_path = None
    config = ExperimentConfig(
        params=params,
        seed=pop(flat, "seed", int, 0),
        dataset_path=dataset_path,
        synth=synth,
        out_dir=flat.pop("out", "results"),
        projection=pop(flat, "projection", lambda s: _BOOL[s.lower()], True),
        sweep=axes,
    )
    for leftover in (flat, sweep_kv):
        if leftover:
            raise ConfigError(f"unknown config keys: {sorted(leftover)}")
    return config
