import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrapomdp import corpus
from lrapomdp.chain import evaluate, finite_horizon_expectation
from lrapomdp.simulate import simulate, simulate_many, uniforms
from lrapomdp.strategy import constant_strategy

from oracles import random_pomdp, random_transducer


def test_triv1_always_one(triv1):
    for seed in (0, 1, 2**63):
        _, avg = simulate(triv1, [1.0], constant_strategy(0, 1, 1), 100, seed)
        assert avg == 1.0


def test_ex1_constant_a(ex1):
    runs = simulate_many(ex1, [0.25, 0.75], corpus.ex1_constant(), 100_000, range(100))
    assert abs(runs.mean() - 0.5) <= 1e-4


def test_ex2_sigma_star_three_standard_errors(ex2, sigma_star):
    # per-run averages are 1 or about 2/3 depending on the first signal, so the
    # standard error at 100 seeds is about 0.017; a fixed 0.01 band is not a
    # valid statistical check and the comparison uses 3 standard errors
    runs = simulate_many(ex2, ex2.delta("k0"), sigma_star, 100_000, range(100))
    se = runs.std(ddof=1) / np.sqrt(len(runs))
    assert abs(runs.mean() - 5 / 6) <= 3 * se + 1e-4
    # every run settles near one of the two branch gains
    assert np.all((np.abs(runs - 1.0) < 1e-3) | (np.abs(runs - 2 / 3) < 1e-2))


def test_same_seed_same_trace(ex2, sigma_star):
    t1, a1 = simulate(ex2, ex2.delta("k0"), sigma_star, 500, 42)
    t2, a2 = simulate(ex2, ex2.delta("k0"), sigma_star, 500, 42)
    assert a1 == a2
    for f in ("states", "memory", "actions", "signals", "rewards"):
        np.testing.assert_array_equal(getattr(t1, f), getattr(t2, f))
    _, a3 = simulate(ex2, ex2.delta("k0"), sigma_star, 500, 42, record=False)
    assert a3 == a1


def test_trace_is_consistent_with_model(ex2, sigma_star):
    trace, avg = simulate(ex2, ex2.delta("k0"), sigma_star, 2000, 3)
    assert trace.states[0] == 0
    assert avg == pytest.approx(trace.rewards.mean(), abs=1e-15)
    for t in range(len(trace.states)):
        k, m, a = trace.states[t], trace.memory[t], trace.actions[t]
        assert a == sigma_star.act[m]
        assert trace.rewards[t] == ex2.reward[k, a]
        if t + 1 < len(trace.states):
            assert ex2.kernel[k, a, trace.states[t + 1], trace.signals[t]] > 0
            assert trace.memory[t + 1] == sigma_star.update[m, a, trace.signals[t]]
    recs = list(trace.records(ex2, sigma_star))
    assert recs[0] == {"m": 1, "k": "k0", "mem": "m_init", "a": "a",
                       "s": ex2.signals[trace.signals[0]], "g": 0.0}


def test_initial_state_from_first_uniform(ex1):
    # inverse CDF on (1/4, 3/4): u < 1/4 gives k1
    for seed in range(20):
        u0 = uniforms(seed, 1)[0]
        trace, _ = simulate(ex1, [0.25, 0.75], corpus.ex1_constant(), 1, seed)
        assert trace.states[0] == (0 if u0 < 0.25 else 1)


def test_initial_memory_not_zero(ex2, sigma_star):
    m_k1 = sigma_star.memory_states.index("m_k1")
    sigma = sigma_star.with_initial(m_k1)
    trace, _ = simulate(ex2, ex2.delta("k1"), sigma, 10, 0)
    assert trace.memory[0] == m_k1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_short_horizon_mean_matches_exact(seed):
    rng = np.random.default_rng(seed)
    pomdp = random_pomdp(rng, 3, 2, 2)
    sigma = random_transducer(rng, 2, 2, 2)
    n = 4
    exact = finite_horizon_expectation(pomdp, pomdp.initial_belief, sigma, n)
    runs = simulate_many(pomdp, pomdp.initial_belief, sigma, n, range(4000))
    se = runs.std(ddof=1) / np.sqrt(len(runs))
    assert abs(runs.mean() - exact) <= 4 * se + 1e-9


def test_long_run_close_to_exact_gain(rng):
    pomdp = random_pomdp(rng, 3, 2, 2)
    sigma = random_transducer(rng, 3, 2, 2)
    g = evaluate(pomdp, pomdp.initial_belief, sigma).overall
    runs = simulate_many(pomdp, pomdp.initial_belief, sigma, 100_000, range(100))
    se = runs.std(ddof=1) / np.sqrt(len(runs))
    assert abs(runs.mean() - g) <= 3 * se + 1e-4


def test_bad_horizon(triv1):
    with pytest.raises(ValueError):
        simulate(triv1, [1.0], constant_strategy(0, 1, 1), 0, 0)
