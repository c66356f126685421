"""Seeded randomness: Laplace noise, uniform draws, per-client substreams.

All randomness flows through numpy Generators derived from a single
master seed via SeedSequence spawn keys, so any component can be given
an independent, reproducible stream. Not cryptographically secure; a
real deployment would need a CSPRNG on the client side.
"""

from __future__ import annotations

import hashlib
from typing import Sequence, TypeVar

import numpy as np

T = TypeVar("T")


def substream(master_seed: int, stream_id: int) -> np.random.Generator:
    """Deterministic, independent-behaving stream for (seed, id)."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(stream_id,))
    return np.random.Generator(np.random.PCG64(ss))


def client_stream_id(user_id: str) -> int:
    """Stable 64-bit stream id for a user, independent of iteration order."""
    digest = hashlib.blake2b(user_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def laplace_sample(scale: float, rng: np.random.Generator) -> float:
    """One draw from Lap(scale) centered at 0, via the inverse CDF.

    Consumes exactly one uniform per draw, which keeps draw counts (and
    hence downstream reproducibility) independent of the sampling method.
    """
    if not scale > 0:
        raise ValueError("laplace scale must be positive")
    u = rng.random() - 0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * abs(u))


def laplace_samples(scale: float, n: int, rng: np.random.Generator) -> np.ndarray:
    if not scale > 0:
        raise ValueError("laplace scale must be positive")
    u = rng.random(n) - 0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def uniform_choice(items: Sequence[T], rng: np.random.Generator) -> T:
    """Uniformly random element of a non-empty sequence."""
    if len(items) == 0:
        raise ValueError("cannot choose from an empty sequence")
    return items[int(rng.integers(len(items)))]
