import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskysci import (
    Kind,
    Lab,
    Params,
    Population,
    SeedSpec,
    Strategy,
    derive_trial_rng,
    evolution_step,
    init_population,
    lab_payoff,
    lab_success_probability,
    science_step,
    spawn_child,
)

from conftest import make_params, sigma3


def conservative(id, credit=0.0, age=0):
    return Lab(id, Strategy.conservative(), credit, age)


def risky(id, rate, credit=0.0, age=0):
    return Lab(id, Strategy.risky(rate), credit, age)


class TestParams:
    def test_defaults(self):
        p = Params()
        assert (p.n_labs, p.p_c, p.u_c, p.f, p.rounds) == (100, 0.8, 1.0, 0.02, 1000)

    @pytest.mark.parametrize("kw", [
        {"d": 0}, {"d": 101}, {"n_labs": 1}, {"p_c": 1.2}, {"t": -0.1},
        {"u_c": 0.0}, {"u_r": -1.0}, {"c": -0.1}, {"rounds": 0}, {"d": 2.5},
        {"c": 2.0, "f": 0.0},
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            make_params(**kw)

    def test_d_message_names_bound(self):
        with pytest.raises(ValueError, match=r"\[1, n_labs=100\]"):
            Params(d=101)

    def test_warns_when_risky_pays_less(self):
        with pytest.warns(UserWarning, match="u_r"):
            Params(u_r=1.0)

    def test_warns_when_risky_can_outperform(self):
        with pytest.warns(UserWarning, match="p_c"):
            Params(c=0.9, f=0.0)

    def test_paper_regime_is_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            Params(u_r=20, c=0.4)


class TestStrategy:
    def test_conservative_has_no_rate(self):
        with pytest.raises(ValueError):
            Strategy(Kind.CONSERVATIVE, 0.1)
        assert Strategy.conservative().success_rate is None

    def test_risky_needs_rate(self):
        with pytest.raises(ValueError):
            Strategy(Kind.RISKY)


class TestInit:
    def test_fresh_labs(self, params, rng):
        pop = init_population(params, rng)
        assert len(pop) == 100
        assert all(lab.credit == 0 and lab.age == 0 for lab in pop.labs)
        assert len({lab.id for lab in pop.labs}) == 100

    def test_half_risky_on_average(self, params):
        counts = [init_population(params, derive_trial_rng(SeedSpec(3, i))).n_risky for i in range(400)]
        # each count ~ Binomial(100, 1/2); the mean of 400 has sd 0.25
        assert abs(np.mean(counts) - 50) <= 3 * 0.25

    def test_rates_capped(self, rng):
        p = make_params(c=0.4)
        for i in range(20):
            pop = init_population(p, derive_trial_rng(SeedSpec(8, i)))
            rates = pop.risky_rates()
            assert np.all((rates >= 0) & (rates <= 0.38))
            assert np.all(np.isnan(pop.rate[~pop.risky]))

    def test_exact_split(self):
        p = make_params(exact_split=True, n_labs=37, d=5)
        for i in range(10):
            assert init_population(p, derive_trial_rng(SeedSpec(1, i))).n_risky == 18


class TestLabAccessors:
    def test_success_probability(self, params):
        assert lab_success_probability(conservative(0), params) == 0.8
        assert lab_success_probability(risky(0, 0.0), params) == 0.0
        assert lab_success_probability(risky(0, 0.38), params) == 0.38

    def test_payoff(self):
        p = Params(u_r=10)
        assert lab_payoff(conservative(0), p) == 1
        assert lab_payoff(risky(0, 0.1), p) == 10
        q = make_params(u_r=1.0)
        assert lab_payoff(risky(0, 0.1), q) == lab_payoff(conservative(1), q)


class TestScience:
    def test_certain_success(self, rng):
        p = make_params(p_c=1.0, u_c=1.0)
        pop = Population.from_labs([conservative(0, credit=5.0, age=2), conservative(1)])
        science_step(pop, p, rng)
        assert pop.lab(0).credit == 6.0 and pop.lab(0).age == 3

    def test_zero_probability(self, params, rng):
        pop = Population.from_labs([risky(0, 0.0, credit=3.0, age=4), conservative(1)])
        science_step(pop, params, rng)
        assert pop.lab(0).credit == 3.0 and pop.lab(0).age == 5

    def test_conservative_mean_gain(self, params, rng):
        pop = Population.from_labs([conservative(0), conservative(1)])
        rounds = 10_000
        for _ in range(rounds):
            science_step(pop, params, rng)
        gain = pop.lab(0).credit / rounds
        assert abs(gain - 0.8) <= sigma3(0.8, rounds)
        assert pop.lab(0).age == rounds


class TestEvolution:
    def test_two_labs_forced(self, rng):
        p = make_params(n_labs=2, d=2)
        pop = Population.from_labs([conservative(0, credit=0, age=5), risky(1, 0.1, credit=9, age=1)])
        evolution_step(pop, p, rng)
        child = pop.lab(0)
        assert child.strategy.is_risky and child.credit == 0 and child.age == 0
        assert child.id == 2
        assert pop.lab(1) == risky(1, 0.1, credit=9, age=1)

    def test_full_sample_is_deterministic_selection(self, rng):
        p = make_params(n_labs=5, d=5, t=1.0)
        labs = [risky(0, 0.1, 3, 4), risky(1, 0.2, 50, 9), conservative(2, 60, 2),
                risky(3, 0.3, 70, 12), conservative(4, 1, 1)]
        for rep in range(20):
            pop = Population.from_labs(labs)
            evolution_step(pop, p, derive_trial_rng(SeedSpec(rep, 0)))
            # lab 3 is eldest and dies; the richest survivor is lab 2
            assert pop.lab(3).strategy == Strategy.conservative()
            assert [pop.lab(i) for i in (0, 1, 2, 4)] == [labs[i] for i in (0, 1, 2, 4)]

    def test_full_sample_ties_broken_uniformly(self):
        p = make_params(n_labs=4, d=4)
        deaths = np.zeros(4)
        reps = 4000
        for rep in range(reps):
            pop = Population.from_labs([conservative(i, 1, 7) for i in range(4)])
            evolution_step(pop, p, derive_trial_rng(SeedSpec(rep, 2)))
            deaths[int(np.argmax(pop.ids >= 4))] += 1
        for k in deaths:
            assert abs(k / reps - 0.25) <= sigma3(0.25, reps)

    def test_no_selection_at_d1(self):
        # distinct rates and t=1 let the child's rate reveal its parent
        p = make_params(n_labs=4, d=1, t=1.0)
        labs = [risky(i, 0.01 * (i + 1), credit=10.0 * i, age=10 - i) for i in range(4)]
        reps = 20_000
        deaths = np.zeros(4)
        parents = np.zeros(4)
        for rep in range(reps):
            pop = Population.from_labs(labs)
            evolution_step(pop, p, derive_trial_rng(SeedSpec(rep, 3)))
            dead = int(np.argmax(pop.ids == 4))
            deaths[dead] += 1
            parents[int(round(pop.rate[dead] / 0.01)) - 1] += 1
        for k in deaths:
            assert abs(k / reps - 0.25) <= sigma3(0.25, reps)
        # the parent is uniform over the 3 survivors, so 3/4 * 1/3 marginally
        for k in parents:
            assert abs(k / reps - 0.25) <= sigma3(0.25, reps)

    def test_dead_lab_never_parents(self):
        # lab 0 is oldest and richest; with d=N it always dies and so cannot parent
        p = make_params(n_labs=3, d=3, t=1.0)
        labs = [risky(0, 0.17, 100, 9), risky(1, 0.05, 1, 1), conservative(2, 2, 1)]
        for rep in range(50):
            pop = Population.from_labs(labs)
            evolution_step(pop, p, derive_trial_rng(SeedSpec(rep, 4)))
            assert not pop.risky[0]


class TestSpawn:
    def test_perfect_heritability(self, rng):
        p = make_params(t=1.0)
        parent = risky(0, 0.3)
        for _ in range(200):
            assert spawn_child(parent, p, rng).strategy.success_rate == 0.3

    def test_conservative_child(self, params, rng):
        child = spawn_child(conservative(0, credit=40, age=30), params, rng)
        assert child.strategy == Strategy.conservative()
        assert (child.credit, child.age) == (0.0, 0)

    def test_no_heritability_uncorrelated(self):
        p = make_params(t=0.0, c=0.4)
        rng = derive_trial_rng(SeedSpec(77, 0))
        n = 100_000
        parent_rates = rng.random(n) * 0.38
        child_rates = np.array([spawn_child(risky(0, r), p, rng).strategy.success_rate for r in parent_rates])
        assert abs(np.corrcoef(parent_rates, child_rates)[0, 1]) <= 3 / np.sqrt(n)
        assert child_rates.max() <= 0.38

    def test_partial_heritability_frequency(self):
        p = make_params(t=0.5, c=0.4)
        rng = derive_trial_rng(SeedSpec(78, 0))
        n = 20_000
        kept = sum(spawn_child(risky(0, 0.123456), p, rng).strategy.success_rate == 0.123456 for _ in range(n))
        assert abs(kept / n - 0.5) <= sigma3(0.5, n)


# -- properties over whole trajectories ------------------------------------

param_sets = st.builds(
    lambda n, dfrac, t, u_r, c, exact: dict(
        n_labs=n, d=max(1, round(dfrac * n)), t=t, u_r=u_r, c=c, exact_split=exact, rounds=50),
    n=st.integers(2, 25),
    dfrac=st.floats(0, 1),
    t=st.sampled_from([0.0, 0.3, 1.0]),
    u_r=st.floats(0.5, 20),
    c=st.floats(0, 0.5),
    exact=st.booleans(),
)


@given(kw=param_sets, seed=st.integers(0, 2**32), rounds=st.integers(1, 60))
@settings(max_examples=80, deadline=None)
def test_round_invariants(kw, seed, rounds):
    p = make_params(**kw)
    rng = derive_trial_rng(SeedSpec(seed, 0))
    pop = init_population(p, rng)
    kinds0 = pop.kinds()
    initial_rates = set(pop.risky_rates().tolist())
    homogeneous_kind = None
    for _ in range(rounds):
        before = {lab.id: lab for lab in pop.labs}
        science_step(pop, p, rng)
        evolution_step(pop, p, rng)
        after = pop.labs

        assert len(pop) == p.n_labs
        assert pop.kinds() <= kinds0
        if homogeneous_kind is not None:
            assert pop.kinds() == homogeneous_kind
        elif pop.is_homogeneous():
            homogeneous_kind = pop.kinds()

        born = [lab for lab in after if lab.id not in before]
        assert len(born) == 1
        assert born[0].credit == 0 and born[0].age == 0
        for lab in after:
            if lab.id in before:
                assert lab.credit >= before[lab.id].credit
                assert lab.age == before[lab.id].age + 1
                assert lab.strategy == before[lab.id].strategy
        if p.t == 1.0:
            assert set(pop.risky_rates().tolist()) <= initial_rates
        rates = pop.risky_rates()
        assert np.all((rates >= 0) & (rates <= max(0.0, p.c - p.f)))


@given(n=st.integers(2, 30), seed=st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_full_sample_kills_an_eldest_and_copies_a_richest(n, seed):
    # t=1 makes the child an exact copy of its parent's strategy
    p = make_params(n_labs=n, d=n, t=1.0, rounds=10)
    rng = derive_trial_rng(SeedSpec(seed, 1))
    pop = init_population(p, rng)
    for _ in range(3 * n):
        science_step(pop, p, rng)
        before = pop.copy()
        evolution_step(pop, p, rng)
        dead = int(np.flatnonzero(pop.ids != before.ids)[0])
        assert before.age[dead] == before.age.max()
        survivors = [i for i in range(n) if i != dead]
        top = max(before.credit[i] for i in survivors)
        candidates = {before.lab(i).strategy for i in survivors if before.credit[i] == top}
        assert pop.lab(dead).strategy in candidates
