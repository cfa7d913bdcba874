"""Labs, strategies, and the two stages of a simulated round.

A population of ``N`` labs alternates between a *science* stage, where each
lab succeeds at a project with its own probability and banks the matching
credit, and an *evolution* stage, where the eldest of a random sample of
labs closes and the highest-credit lab of a second sample founds its
replacement.

Conservative labs share a fixed success rate ``p_c`` and payoff ``u_c``.
Risky labs earn ``u_r`` on success but each carries its own success rate,
drawn from :func:`~riskysci.stochastic.draw_success_rate`. A risky lab's
student keeps the adviser's rate with probability ``t`` and otherwise draws
a fresh one. Strategy kinds never mutate.

The population is stored column-wise (one numpy array per attribute) so the
compiled trial loop in :mod:`riskysci.engine` can run the very same step
functions defined here.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Optional

import numpy as np
from numba import njit

from .stochastic import (
    bernoulli,
    draw_success_rate,
    max_success_rate,
    sample_without_replacement,
)

__all__ = [
    "Kind",
    "Strategy",
    "Lab",
    "Params",
    "Population",
    "init_population",
    "lab_success_probability",
    "lab_payoff",
    "science_step",
    "evolution_step",
    "spawn_child",
]


class Kind(enum.Enum):
    CONSERVATIVE = "conservative"
    RISKY = "risky"


@dataclass(frozen=True)
class Strategy:
    kind: Kind
    success_rate: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind is Kind.CONSERVATIVE and self.success_rate is not None:
            raise ValueError("a conservative strategy carries no success rate")
        if self.kind is Kind.RISKY:
            if self.success_rate is None or not 0.0 <= self.success_rate <= 1.0:
                raise ValueError(f"risky success rate must be in [0, 1], got {self.success_rate}")

    @classmethod
    def conservative(cls) -> "Strategy":
        return cls(Kind.CONSERVATIVE)

    @classmethod
    def risky(cls, success_rate: float) -> "Strategy":
        return cls(Kind.RISKY, float(success_rate))

    @property
    def is_risky(self) -> bool:
        return self.kind is Kind.RISKY


@dataclass(frozen=True)
class Lab:
    """Snapshot of one lab. Mutation happens on :class:`Population` columns."""

    id: int
    strategy: Strategy
    credit: float = 0.0
    age: int = 0


@dataclass(frozen=True)
class Params:
    """Model and run parameters.

    Parameters
    ----------
    n_labs : int
        Population size ``N``.
    d : int
        Size of the death sample and of the replication sample, ``1 <= d <= N``.
        ``d = 1`` is pure drift; ``d = N`` is deterministic selection.
    p_c, u_c : float
        Success probability and payoff of conservative labs.
    u_r : float
        Payoff of a successful risky project.
    c, f : float
        Slope and offset of the risky success-rate sampler ``max(0, c x^2 - f)``.
    t : float
        Probability a risky lab's student inherits the adviser's success rate.
    rounds : int
        Rounds of science and evolution per trial.
    exact_split : bool
        Start with exactly ``N // 2`` risky labs instead of a fair coin per lab.
    """

    n_labs: int = 100
    d: int = 10
    p_c: float = 0.8
    u_c: float = 1.0
    u_r: float = 10.0
    c: float = 0.2
    f: float = 0.02
    t: float = 0.0
    rounds: int = 1000
    exact_split: bool = False

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Raise ``ValueError`` on impossible values; warn outside the studied regime."""
        if not isinstance(self.n_labs, (int, np.integer)) or self.n_labs < 2:
            raise ValueError(f"n_labs must be an integer >= 2, got {self.n_labs!r}")
        if not isinstance(self.d, (int, np.integer)) or not 1 <= self.d <= self.n_labs:
            raise ValueError(f"d must be an integer in [1, n_labs={self.n_labs}], got {self.d!r}")
        if not isinstance(self.rounds, (int, np.integer)) or self.rounds < 1:
            raise ValueError(f"rounds must be a positive integer, got {self.rounds!r}")
        for name in ("p_c", "t"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be a probability in [0, 1], got {value!r}")
        for name in ("u_c", "u_r"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive real, got {value!r}")
        for name in ("c", "f"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be a nonnegative real, got {value!r}")
        if max_success_rate(self.c, self.f) > 1.0:
            raise ValueError(f"c - f = {self.c - self.f} exceeds 1; risky success rates must be probabilities")

        if self.u_r <= self.u_c:
            warnings.warn(
                f"u_r={self.u_r} <= u_c={self.u_c}: risky science pays no more than conservative",
                stacklevel=3,
            )
        if max_success_rate(self.c, self.f) >= self.p_c:
            warnings.warn(
                f"max risky success rate {max_success_rate(self.c, self.f)} >= p_c={self.p_c}: "
                "some risky labs may out-succeed conservative ones",
                stacklevel=3,
            )

    def with_(self, **changes) -> "Params":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class Population:
    """Column-wise store of ``N`` labs.

    ``rate`` holds NaN for conservative labs. ``next_id`` is the id the next
    founded lab will receive.
    """

    risky: np.ndarray
    rate: np.ndarray
    credit: np.ndarray
    age: np.ndarray
    ids: np.ndarray
    next_id: int = field(default=0)

    def __post_init__(self) -> None:
        n = len(self.risky)
        for name in ("rate", "credit", "age", "ids"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name!r} has length {len(getattr(self, name))}, expected {n}")

    @classmethod
    def empty(cls, n: int) -> "Population":
        return cls(
            risky=np.zeros(n, dtype=np.bool_),
            rate=np.full(n, np.nan),
            credit=np.zeros(n),
            age=np.zeros(n, dtype=np.int64),
            ids=np.arange(n, dtype=np.int64),
            next_id=n,
        )

    @classmethod
    def from_labs(cls, labs: Iterable[Lab]) -> "Population":
        labs = list(labs)
        pop = cls.empty(len(labs))
        for i, lab in enumerate(labs):
            pop.set_lab(i, lab)
        pop.next_id = int(pop.ids.max()) + 1 if labs else 0
        return pop

    def __len__(self) -> int:
        return len(self.risky)

    def copy(self) -> "Population":
        return Population(
            self.risky.copy(), self.rate.copy(), self.credit.copy(),
            self.age.copy(), self.ids.copy(), self.next_id,
        )

    def lab(self, i: int) -> Lab:
        if self.risky[i]:
            strategy = Strategy.risky(float(self.rate[i]))
        else:
            strategy = Strategy.conservative()
        return Lab(int(self.ids[i]), strategy, float(self.credit[i]), int(self.age[i]))

    def set_lab(self, i: int, lab: Lab) -> None:
        self.risky[i] = lab.strategy.is_risky
        self.rate[i] = lab.strategy.success_rate if lab.strategy.is_risky else np.nan
        self.credit[i] = lab.credit
        self.age[i] = lab.age
        self.ids[i] = lab.id

    @property
    def labs(self) -> list[Lab]:
        return [self.lab(i) for i in range(len(self))]

    @property
    def n_risky(self) -> int:
        return int(np.count_nonzero(self.risky))

    def kinds(self) -> set[Kind]:
        n_risky = self.n_risky
        present = set()
        if n_risky:
            present.add(Kind.RISKY)
        if n_risky < len(self):
            present.add(Kind.CONSERVATIVE)
        return present

    def is_homogeneous(self) -> bool:
        return len(self.kinds()) <= 1

    def risky_rates(self) -> np.ndarray:
        return self.rate[self.risky]


# Compiled stage kernels. Shared verbatim by the Python API below and by the
# trial loop; the RNG consumption order documented on each is part of the
# reproducibility contract.


@njit(cache=True, nogil=True)
def _init_arrays(risky, rate, exact_split, c, f, rng):
    # Fair coin per lab (in index order), drawing a risky lab's rate right
    # after its coin. With exact_split, one size-N//2 sample picks the risky
    # labs, then rates are drawn in index order.
    n = risky.size
    if exact_split:
        risky[:] = False
        for j in sample_without_replacement(n, n // 2, rng):
            risky[j] = True
        for i in range(n):
            rate[i] = draw_success_rate(c, f, rng) if risky[i] else np.nan
    else:
        for i in range(n):
            risky[i] = bernoulli(0.5, rng)
            rate[i] = draw_success_rate(c, f, rng) if risky[i] else np.nan


@njit(cache=True, nogil=True)
def _science_arrays(risky, rate, credit, age, p_c, u_c, u_r, rng):
    # One uniform per lab in index order; every lab ages by one.
    for i in range(risky.size):
        if risky[i]:
            if bernoulli(rate[i], rng):
                credit[i] += u_r
        else:
            if bernoulli(p_c, rng):
                credit[i] += u_c
        age[i] += 1


@njit(cache=True, nogil=True)
def _child_rate(parent_risky, parent_rate, t, c, f, rng):
    # Conservative parents consume nothing. Risky parents consume one
    # inheritance coin, plus one sampler draw when the coin fails.
    if not parent_risky:
        return np.nan
    if bernoulli(t, rng):
        return parent_rate
    return draw_success_rate(c, f, rng)


@njit(cache=True, nogil=True)
def _select_dead_and_parent(age, credit, d, rng):
    # Death sample of d from all N; eldest dies. Replication sample of
    # min(d, N-1) from the N-1 survivors; richest parents. Samples come back
    # in random order, so keeping the first maximum breaks ties uniformly.
    n = age.size
    sample = sample_without_replacement(n, d, rng)
    dead = sample[0]
    for j in sample[1:]:
        if age[j] > age[dead]:
            dead = j
    sample = sample_without_replacement(n - 1, min(d, n - 1), rng)
    parent = -1
    for j in sample:
        idx = j + 1 if j >= dead else j
        if parent < 0 or credit[idx] > credit[parent]:
            parent = idx
    return dead, parent


@njit(cache=True, nogil=True)
def _evolution_arrays(risky, rate, credit, age, ids, next_id, d, t, c, f, rng):
    dead, parent = _select_dead_and_parent(age, credit, d, rng)
    child_risky = risky[parent]
    child_rate = _child_rate(child_risky, rate[parent], t, c, f, rng)
    risky[dead] = child_risky
    rate[dead] = child_rate
    credit[dead] = 0.0
    age[dead] = 0
    ids[dead] = next_id
    return dead, parent


def init_population(params: Params, rng: np.random.Generator) -> Population:
    """Found ``params.n_labs`` labs with zero credit and zero age.

    Each lab is independently risky with probability 1/2 (or exactly half are,
    with ``params.exact_split``); every risky lab gets its own success rate.
    """
    pop = Population.empty(params.n_labs)
    _init_arrays(pop.risky, pop.rate, params.exact_split, params.c, params.f, rng)
    return pop


def lab_success_probability(lab: Lab, params: Params) -> float:
    if lab.strategy.is_risky:
        return lab.strategy.success_rate
    return params.p_c


def lab_payoff(lab: Lab, params: Params) -> float:
    return params.u_r if lab.strategy.is_risky else params.u_c


def science_step(pop: Population, params: Params, rng: np.random.Generator) -> Population:
    """Run the science stage in place and return ``pop``."""
    _science_arrays(pop.risky, pop.rate, pop.credit, pop.age, params.p_c, params.u_c, params.u_r, rng)
    return pop


def evolution_step(pop: Population, params: Params, rng: np.random.Generator) -> Population:
    """Replace the eldest of a ``d``-sample with a child of the richest of another.

    Mutates ``pop`` in place and returns it. The dead lab is excluded from the
    replication sample.
    """
    _evolution_arrays(
        pop.risky, pop.rate, pop.credit, pop.age, pop.ids, pop.next_id,
        params.d, params.t, params.c, params.f, rng,
    )
    pop.next_id += 1
    return pop


_spawn_ids = iter(range(-1, -(2**62), -1))


def spawn_child(parent: Lab, params: Params, rng: np.random.Generator, child_id: Optional[int] = None) -> Lab:
    """Found a new lab from ``parent`` with zero credit and age.

    Students of conservative labs are conservative. Students of risky labs are
    risky, keeping the parent's success rate with probability ``params.t`` and
    drawing a fresh one otherwise. Without ``child_id``, a process-unique
    negative id is issued so it cannot clash with population-assigned ids.
    """
    rate = _child_rate(parent.strategy.is_risky, parent.strategy.success_rate or 0.0,
                       params.t, params.c, params.f, rng)
    strategy = Strategy.risky(rate) if parent.strategy.is_risky else Strategy.conservative()
    return Lab(next(_spawn_ids) if child_id is None else child_id, strategy, 0.0, 0)
