"""Many-trial cells, parameter sweeps, and the analytic checks used to validate them."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, stats

from .engine import OutcomeClass, TrialResult, run_trial
from .model import Params, Population
from .stochastic import SeedSpec

__all__ = [
    "SweepSpec",
    "CellSummary",
    "run_cell",
    "run_sweep",
    "expected_risky_payoff",
    "expected_risky_payoff_quad",
    "zero_success_fraction",
    "wilson_interval",
    "monotone_trend_statistic",
    "SWEEPABLE",
]

SWEEPABLE = tuple(f.name for f in fields(Params) if f.name != "exact_split")
_INTEGER_FIELDS = {"n_labs", "d", "rounds"}


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1 or not 0 <= successes <= n:
        raise ValueError(f"need 0 <= successes <= n and n >= 1, got successes={successes}, n={n}")
    z = float(stats.norm.ppf(0.5 + confidence / 2))
    p = successes / n
    z2n = z * z / n
    centre = (p + z2n / 2) / (1 + z2n)
    half = z / (1 + z2n) * math.sqrt(p * (1 - p) / n + z2n / (4 * n))
    lo, hi = centre - half, centre + half
    # Exact endpoints at the boundaries; rounding otherwise leaves ~1e-17 slop.
    if successes == 0:
        lo = 0.0
    if successes == n:
        hi = 1.0
    return max(0.0, lo), min(1.0, hi)


def expected_risky_payoff(u_r: float, c: float, f: float) -> float:
    """Per-round expected credit of a freshly founded risky lab.

    Closed form of ``u_r * integral_0^1 max(0, c x^2 - f) dx``. The integrand
    is zero below ``x0 = sqrt(f / c)``, giving
    ``u_r * (c/3 - f + (2/3) f**1.5 / sqrt(c))`` when ``f < c`` and 0 otherwise.
    """
    if c <= f:
        return 0.0
    return u_r * (c / 3.0 - f + (2.0 / 3.0) * f**1.5 / math.sqrt(c))


def expected_risky_payoff_quad(u_r: float, c: float, f: float) -> float:
    """Same quantity by adaptive quadrature; the kink at ``x0`` is split out."""
    if c <= f:
        return 0.0
    x0 = math.sqrt(f / c)
    value, _ = integrate.quad(lambda x: c * x * x - f, x0, 1.0, epsabs=0.0, epsrel=1e-13)
    return u_r * value


def zero_success_fraction(c: float, f: float) -> float:
    """Probability that a freshly drawn risky success rate is exactly zero."""
    if c == 0:
        return 1.0
    return min(1.0, math.sqrt(f / c))


@dataclass(frozen=True)
class CellSummary:
    params: Params
    n_trials: int
    n_risky: int
    n_conservative: int
    n_mixed: int
    ci_risky: tuple[float, float]
    ci_conservative: tuple[float, float]
    ci_mixed: tuple[float, float]
    mean_fixation_round: Optional[float]
    master_seed: int
    swept_param: Optional[str] = None
    swept_value: Optional[float] = None

    @property
    def prop_risky(self) -> float:
        return self.n_risky / self.n_trials

    @property
    def prop_conservative(self) -> float:
        return self.n_conservative / self.n_trials

    @property
    def prop_mixed(self) -> float:
        return self.n_mixed / self.n_trials

    def proportion(self, outcome: OutcomeClass) -> float:
        return {
            OutcomeClass.ALL_RISKY: self.prop_risky,
            OutcomeClass.ALL_CONSERVATIVE: self.prop_conservative,
            OutcomeClass.MIXED: self.prop_mixed,
        }[outcome]


def summarize(params: Params, results: Sequence[TrialResult], master_seed: int,
              swept_param: Optional[str] = None, swept_value: Optional[float] = None) -> CellSummary:
    n = len(results)
    counts = {o: 0 for o in OutcomeClass}
    for r in results:
        counts[r.outcome] += 1
    fixed = [r.fixation_round for r in results if r.fixation_round is not None]
    return CellSummary(
        params=params,
        n_trials=n,
        n_risky=counts[OutcomeClass.ALL_RISKY],
        n_conservative=counts[OutcomeClass.ALL_CONSERVATIVE],
        n_mixed=counts[OutcomeClass.MIXED],
        ci_risky=wilson_interval(counts[OutcomeClass.ALL_RISKY], n),
        ci_conservative=wilson_interval(counts[OutcomeClass.ALL_CONSERVATIVE], n),
        ci_mixed=wilson_interval(counts[OutcomeClass.MIXED], n),
        mean_fixation_round=(sum(fixed) / len(fixed)) if fixed else None,
        master_seed=master_seed,
        swept_param=swept_param,
        swept_value=swept_value,
    )


def _resolve_threads(threads: int) -> int:
    if threads < 0:
        raise ValueError(f"threads must be >= 0, got {threads}")
    return threads or os.cpu_count() or 1


def run_trials(params: Params, master_seed: int, stream_indices: Sequence[int], *,
               threads: int = 1, early_exit: bool = True,
               initial: Optional[Population] = None, trace: bool = False) -> list[TrialResult]:
    """Run one trial per stream index, returning results in input order.

    The compiled trial loop releases the GIL, so a thread pool gives real
    parallelism. Results depend only on each trial's stream, never on the
    worker count or scheduling.
    """
    def work(chunk):
        return [run_trial(params, SeedSpec(master_seed, i), early_exit=early_exit, initial=initial,
                          trace=trace)
                for i in chunk]

    workers = _resolve_threads(threads)
    indices = list(stream_indices)
    if workers == 1 or len(indices) < 2:
        return work(indices)
    chunks = [indices[k::workers] for k in range(workers)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(work, chunks))
    out: list[TrialResult] = [None] * len(indices)  # type: ignore[list-item]
    for k, part in enumerate(parts):
        out[k::workers] = part
    return out


def run_cell(params: Params, trials_per_cell: int, master_seed: int, *, cell_index: int = 0,
             threads: int = 1, early_exit: bool = True,
             initial: Optional[Population] = None) -> CellSummary:
    """Run ``trials_per_cell`` independent trials and summarise their outcomes.

    Trial ``i`` of cell ``k`` uses stream ``k * trials_per_cell + i`` so cells
    of a sweep never share streams. ``initial`` overrides the random founding
    population of every trial.
    """
    if trials_per_cell < 1:
        raise ValueError(f"trials_per_cell must be >= 1, got {trials_per_cell}")
    base = cell_index * trials_per_cell
    results = run_trials(params, master_seed, range(base, base + trials_per_cell),
                         threads=threads, early_exit=early_exit, initial=initial)
    return summarize(params, results, master_seed)


@dataclass(frozen=True)
class SweepSpec:
    base_params: Params
    swept_parameter: str
    values: tuple[float, ...]
    trials_per_cell: int
    master_seed: int

    def __post_init__(self) -> None:
        if self.swept_parameter not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.swept_parameter!r}; choose from {', '.join(SWEEPABLE)}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.trials_per_cell < 1:
            raise ValueError(f"trials_per_cell must be >= 1, got {self.trials_per_cell}")
        object.__setattr__(self, "values", tuple(self.values))
        for params in self.cell_params():
            params.validate()

    def cell_params(self) -> list[Params]:
        cells = []
        for value in self.values:
            if self.swept_parameter in _INTEGER_FIELDS:
                if float(value) != int(value):
                    raise ValueError(f"{self.swept_parameter} must take integer values, got {value}")
                value = int(value)
            else:
                value = float(value)
            cells.append(self.base_params.with_(**{self.swept_parameter: value}))
        return cells


def run_sweep(spec: SweepSpec, *, threads: int = 1, early_exit: bool = True) -> list[CellSummary]:
    out = []
    for k, params in enumerate(spec.cell_params()):
        summary = run_cell(params, spec.trials_per_cell, spec.master_seed, cell_index=k,
                           threads=threads, early_exit=early_exit)
        value = getattr(params, spec.swept_parameter)
        out.append(replace(summary, swept_param=spec.swept_parameter, swept_value=value))
    return out


def monotone_trend_statistic(summaries: Sequence[CellSummary], outcome: OutcomeClass) -> float:
    """Spearman rank correlation between swept value and the proportion of ``outcome``.

    Ties get midranks. Returns 0 when either side is constant.
    """
    if len(summaries) < 3:
        raise ValueError(f"trend needs at least 3 cells, got {len(summaries)}")
    xs = [s.swept_value for s in summaries]
    if any(x is None for x in xs):
        raise ValueError("summaries carry no swept value; produce them with run_sweep")
    ys = [s.proportion(outcome) for s in summaries]
    rx = stats.rankdata(xs)
    ry = stats.rankdata(ys)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = math.sqrt(float(np.dot(rx, rx)) * float(np.dot(ry, ry)))
    if denom == 0:
        return 0.0
    return float(np.dot(rx, ry)) / denom
