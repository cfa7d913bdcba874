"""Evolutionary model of conservative vs. high-risk science in a population of labs."""
from .engine import OutcomeClass, TrialResult, classify_outcome, run_trial
from .model import (
    Kind,
    Lab,
    Params,
    Population,
    Strategy,
    evolution_step,
    init_population,
    lab_payoff,
    lab_success_probability,
    science_step,
    spawn_child,
)
from .stochastic import (
    SeedSpec,
    bernoulli,
    derive_trial_rng,
    draw_success_rate,
    sample_without_replacement,
)

__version__ = "0.1.0"
