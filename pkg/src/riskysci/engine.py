"""Run single trials to completion and classify how they end."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .model import (
    Params,
    Population,
    _evolution_arrays,
    _science_arrays,
    init_population,
)
from .stochastic import SeedSpec, derive_trial_rng

__all__ = ["OutcomeClass", "TrialResult", "TrialTrace", "classify_outcome", "run_trial", "run_population"]


class OutcomeClass(enum.Enum):
    ALL_CONSERVATIVE = "all_conservative"
    ALL_RISKY = "all_risky"
    MIXED = "mixed"


@dataclass(frozen=True)
class TrialTrace:
    """Per-round composition, one entry per completed round (index 0 is the initial state)."""

    n_risky: np.ndarray
    mean_risky_rate: np.ndarray


@dataclass(frozen=True)
class TrialResult:
    outcome: OutcomeClass
    fixation_round: Optional[int]
    seed: SeedSpec
    final_risky_count: int
    mean_final_risky_rate: Optional[float]
    rounds_run: int
    trace: Optional[TrialTrace] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if (self.outcome is OutcomeClass.MIXED) != (self.fixation_round is None):
            raise ValueError("fixation_round must be absent exactly when the outcome is mixed")


def _classify_count(n_risky: int, n: int) -> OutcomeClass:
    if n_risky == 0:
        return OutcomeClass.ALL_CONSERVATIVE
    if n_risky == n:
        return OutcomeClass.ALL_RISKY
    return OutcomeClass.MIXED


def classify_outcome(pop: Population) -> OutcomeClass:
    return _classify_count(pop.n_risky, len(pop))


@njit(cache=True, nogil=True)
def _record(trace_risky, trace_rate, r, risky, rate, n_risky):
    trace_risky[r] = n_risky
    if n_risky == 0:
        trace_rate[r] = np.nan
    else:
        total = 0.0
        for i in range(risky.size):
            if risky[i]:
                total += rate[i]
        trace_rate[r] = total / n_risky


@njit(cache=True, nogil=True)
def _run_rounds(risky, rate, credit, age, ids, next_id,
                p_c, u_c, u_r, c, f, t, d, rounds, early_exit,
                trace, trace_risky, trace_rate, rng):
    # Returns (rounds completed, first homogeneous round or -1, next free id).
    n = risky.size
    n_risky = 0
    for i in range(n):
        if risky[i]:
            n_risky += 1
    fixation = 0 if n_risky == 0 or n_risky == n else -1
    if trace:
        _record(trace_risky, trace_rate, 0, risky, rate, n_risky)
    r = 0
    while r < rounds:
        if early_exit and fixation >= 0:
            break
        _science_arrays(risky, rate, credit, age, p_c, u_c, u_r, rng)
        _evolution_arrays(risky, rate, credit, age, ids, next_id, d, t, c, f, rng)
        next_id += 1
        r += 1
        n_risky = 0
        for i in range(n):
            if risky[i]:
                n_risky += 1
        if fixation < 0 and (n_risky == 0 or n_risky == n):
            fixation = r
        if trace:
            _record(trace_risky, trace_rate, r, risky, rate, n_risky)
    return r, fixation, next_id


def run_population(pop: Population, params: Params, rng: np.random.Generator,
                   *, early_exit: bool = True, trace: bool = False):
    """Advance ``pop`` in place for up to ``params.rounds`` rounds.

    Returns ``(rounds_run, fixation_round, trace)`` where ``fixation_round``
    is None if the population never became homogeneous in kind.
    """
    size = params.rounds + 1 if trace else 1
    trace_risky = np.zeros(size, dtype=np.int64)
    trace_rate = np.full(size, np.nan)
    rounds_run, fixation, next_id = _run_rounds(
        pop.risky, pop.rate, pop.credit, pop.age, pop.ids, pop.next_id,
        params.p_c, params.u_c, params.u_r, params.c, params.f, params.t,
        params.d, params.rounds, early_exit, trace, trace_risky, trace_rate, rng,
    )
    pop.next_id = int(next_id)
    trace_out = None
    if trace:
        trace_out = TrialTrace(trace_risky[: rounds_run + 1], trace_rate[: rounds_run + 1])
    return int(rounds_run), (None if fixation < 0 else int(fixation)), trace_out


def run_trial(params: Params, seed: SeedSpec, *, early_exit: bool = True,
              initial: Optional[Population] = None, trace: bool = False,
              return_population: bool = False):
    """Run one trial: found a population, then alternate science and evolution.

    With ``early_exit`` (the default) the loop stops at the first round the
    population is homogeneous in kind; since kinds never mutate, the outcome
    class is unaffected. ``initial`` replaces the random founding population
    (it is copied, not mutated); the seed still drives every later draw.

    Returns a :class:`TrialResult`, or ``(TrialResult, Population)`` when
    ``return_population`` is set.
    """
    rng = derive_trial_rng(seed)
    if initial is None:
        pop = init_population(params, rng)
    else:
        if len(initial) != params.n_labs:
            raise ValueError(f"initial population has {len(initial)} labs, params expect {params.n_labs}")
        pop = initial.copy()
    rounds_run, fixation, trace_out = run_population(pop, params, rng, early_exit=early_exit, trace=trace)

    outcome = classify_outcome(pop)
    rates = pop.risky_rates()
    result = TrialResult(
        outcome=outcome,
        fixation_round=None if outcome is OutcomeClass.MIXED else fixation,
        seed=seed,
        final_risky_count=pop.n_risky,
        mean_final_risky_rate=float(rates.mean()) if rates.size else None,
        rounds_run=rounds_run,
        trace=trace_out,
    )
    if return_population:
        return result, pop
    return result
