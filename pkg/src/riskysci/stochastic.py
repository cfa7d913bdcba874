"""Seeded random streams and the primitive draws used by the simulator.

Every trial owns one :class:`numpy.random.Generator` backed by ``PCG64`` and
seeded through ``SeedSequence(master_seed, spawn_key=(stream_index,))``.
That mapping is pinned: changing it changes every published number.

The draw functions are compiled with numba and accept the generator directly,
so the Python-level model operations and the compiled trial loop share one
code path and consume the stream in exactly the same order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "SeedSpec",
    "derive_trial_rng",
    "bernoulli",
    "draw_success_rate",
    "rate_from_uniform",
    "sample_without_replacement",
    "max_success_rate",
]

_U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class SeedSpec:
    """Identifies one random stream: a master seed plus a stream index."""

    master_seed: int
    trial_index: int

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed <= _U64_MAX:
            raise ValueError(f"master_seed must fit in 64 unsigned bits, got {self.master_seed}")
        if self.trial_index < 0:
            raise ValueError(f"trial_index must be nonnegative, got {self.trial_index}")


def derive_trial_rng(spec: SeedSpec) -> np.random.Generator:
    """Return the generator for ``spec``.

    Distinct ``trial_index`` values map to distinct ``SeedSequence`` spawn
    keys, which numpy guarantees yield independent, non-overlapping streams.
    """
    seq = np.random.SeedSequence(spec.master_seed, spawn_key=(spec.trial_index,))
    return np.random.Generator(np.random.PCG64(seq))


def max_success_rate(c: float, f: float) -> float:
    """Supremum of :func:`draw_success_rate` for slope ``c`` and offset ``f``."""
    return max(0.0, c - f)


@njit(cache=True, nogil=True)
def bernoulli(p, rng):
    """True with probability ``p``. Always consumes exactly one uniform draw."""
    return rng.random() < p


@njit(cache=True, nogil=True)
def rate_from_uniform(x, c, f):
    """Map ``x`` in [0, 1] to a success rate: ``max(0, c*x**2 - f)``."""
    return max(0.0, c * x * x - f)


@njit(cache=True, nogil=True)
def draw_success_rate(c, f, rng):
    """Draw a risky lab's characteristic success rate.

    ``x`` is uniform on [0, 1), so the result lies in [0, max(0, c - f)).
    Low rates are common; a fraction ``min(1, sqrt(f/c))`` of draws are
    exactly zero.
    """
    return rate_from_uniform(rng.random(), c, f)


@njit(cache=True, nogil=True)
def sample_without_replacement(n, k, rng):
    """Draw ``k`` distinct indices from ``range(n)``, uniformly.

    Partial Fisher-Yates shuffle. The returned array is also in uniformly
    random order, which callers rely on for tie-breaking: taking the first
    maximal element of the sample picks uniformly among tied maxima.
    """
    if k < 1 or k > n:
        raise ValueError("sample size must satisfy 1 <= k <= n")
    pool = np.arange(n)
    for i in range(k):
        j = i + rng.integers(0, n - i)
        tmp = pool[i]
        pool[i] = pool[j]
        pool[j] = tmp
    return pool[:k]
