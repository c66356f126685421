"""Exact brute-force verification tools for the client randomizer.

Everything here enumerates the randomizer's output law in closed form:
the per-input report distribution, the expected report fractions for a
whole population, and a direct check of the (epsilon, delta) inequality
over all input pairs and output sets. High-precision arithmetic keeps
the check's own rounding well below the tolerances being certified.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import mpmath as mp

from .core import STAR, HeadList, ParamError, PrivacyParams, Record, Stage, canonicalize
from .client import ReportModel

_SIZE_GUARD = 10_000  # max k * max(k_q) handled by enumeration
_DPS = 50             # working precision (decimal digits)


def _check_size(hl: HeadList) -> None:
    if hl.k * max(hl.k_q(q) for q in hl.queries) > _SIZE_GUARD:
        raise ParamError("head list too large for exact enumeration")


def _truth_probability_mp(eps, delta, k: int):
    if k == 1:
        return mp.mpf(1)
    e = mp.e**mp.mpf(eps)
    return (e + (mp.mpf(delta) / 2) * (k - 1)) / (e + k - 1)


@dataclass(frozen=True)
class ExactDistribution:
    """Exact output law of the randomizer for one canonical input."""

    probs: Mapping[Record, mp.mpf]

    def __post_init__(self):
        object.__setattr__(self, "probs", dict(self.probs))

    def total(self):
        return sum(self.probs.values())

    def as_float(self) -> dict[Record, float]:
        return {r: float(p) for r, p in self.probs.items()}


def _model_mp(model: ReportModel):
    """Recompute t and t_q from the budgets at high precision."""
    with mp.workdps(_DPS):
        eps_q, delta_q, eps_u, delta_u = model.budgets
        t = _truth_probability_mp(eps_q, delta_q, model.k)
        t_q = {
            q: _truth_probability_mp(eps_u, delta_u, kq)
            for q, kq in model.k_q.items()
        }
    return t, t_q


def enumerate_report_distribution(
    record: Record,
    model: ReportModel,
    hl: HeadList,
) -> ExactDistribution:
    """Closed-form output probabilities for one input record.

    Truthful: t * t_q; same query, other url: t (1 - t_q) / (k_q - 1);
    other query q', any url there: (1 - t) / ((k - 1) k_{q'}).
    """
    if hl.stage is not Stage.CLIENT_AUGMENTED:
        raise ParamError("enumeration requires a client-augmented head list")
    _check_size(hl)
    q, u = canonicalize(record, hl)
    t, t_q = _model_mp(model)
    with mp.workdps(_DPS):
        probs: dict[Record, mp.mpf] = {}
        if model.k == 1:
            for uu in hl.urls(q):
                probs[Record(q, uu)] = mp.mpf(1 if uu == u else 0)
            return ExactDistribution(probs)
        for q2 in hl.queries:
            k_q2 = model.k_q[q2]
            if q2 == q:
                if k_q2 == 1:
                    probs[Record(q2, hl.urls(q2)[0])] = t
                else:
                    for uu in hl.urls(q2):
                        if uu == u:
                            probs[Record(q2, uu)] = t * t_q[q2]
                        else:
                            probs[Record(q2, uu)] = t * (1 - t_q[q2]) / (k_q2 - 1)
            else:
                share = (1 - t) / ((model.k - 1) * k_q2)
                for uu in hl.urls(q2):
                    probs[Record(q2, uu)] = share
    return ExactDistribution(probs)


def forward_report_map(
    p: Mapping[Record, float],
    model: ReportModel,
    hl: HeadList,
) -> tuple[dict[Record, float], dict[str, float]]:
    """Expected report fractions for a population with true distribution p.

    Returns (record-level, query-level) expected fractions; this is the
    exact forward image of the randomizer, i.e. what the aggregation
    stage's denoising inverts.
    """
    _check_size(hl)
    total = sum(p.values())
    if abs(total - 1.0) > 1e-9:
        raise ParamError(f"true distribution sums to {total}, not 1")
    r_records: dict[Record, float] = {rec: 0.0 for rec in hl.records()}
    for rec, mass in p.items():
        if mass == 0:
            continue
        dist = enumerate_report_distribution(rec, model, hl)
        for out, prob in dist.probs.items():
            r_records[out] += mass * float(prob)
    r_queries: dict[str, float] = {q: 0.0 for q in hl.queries}
    for rec, prob in r_records.items():
        r_queries[rec.query] += prob
    return r_records, r_queries


def verify_dp(
    model: ReportModel,
    hl: HeadList,
    eps: float,
    delta: float,
) -> float:
    """Max excess of the additive DP slack over delta; <= 0 means pass.

    Computes max over input pairs (r, r') of
    sum_y max(0, P[y|r] - e^eps P[y|r']), which equals the smallest
    delta' making the channel (eps, delta')-private, then subtracts
    delta.
    """
    _check_size(hl)
    inputs = list(hl.records())
    dists = [enumerate_report_distribution(r, model, hl) for r in inputs]
    outputs = list(hl.records())
    with mp.workdps(_DPS):
        e_eps = mp.e**mp.mpf(eps)
        worst = mp.mpf(0)
        for i, di in enumerate(dists):
            for j, dj in enumerate(dists):
                if i == j:
                    continue
                slack = mp.mpf(0)
                for y in outputs:
                    gap = di.probs[y] - e_eps * dj.probs[y]
                    if gap > 0:
                        slack += gap
                if slack > worst:
                    worst = slack
        return float(worst - mp.mpf(delta))
