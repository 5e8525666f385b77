import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrapomdp import corpus
from lrapomdp.approx import (PromiseQuery, Status, Verdict, anytime_approximate,
                             count_transducers, decide_promise, enumerate_transducers,
                             mdp_exhaustive, mdp_policy_iteration, perfect_info_upper_bound)
from lrapomdp.chain import gain
from lrapomdp.model import Pomdp
from lrapomdp.strategy import canonical_form, transducer

from oracles import (canonical_set, canonicalize, fully_observed, fully_observed_instances,
                     mdp_value_exhaustive, oracle_gain, raw_transducers, random_pomdp)


def _blank(na, ns):
    kernel = np.zeros((1, na, 1, ns))
    kernel[..., 0] = 1.0
    return Pomdp(["k"], [f"a{i}" for i in range(na)], [f"s{i}" for i in range(ns)],
                 kernel, np.zeros((1, na)), [1.0])


def test_counts_trivial():
    assert len(list(enumerate_transducers(_blank(1, 1), 1))) == 1
    assert len(list(enumerate_transducers(_blank(2, 1), 1))) == 2


def test_count_matches_brute_force_canonicalization():
    brute = canonical_set(2, 2, 2)
    emitted = {(t.act, tuple(tuple(int(t.update[m, t.act[m], s]) for s in range(2))
                             for m in range(t.n_memory)))
               for t in enumerate_transducers(_blank(2, 2), 2)}
    assert len(brute) == 48
    assert emitted == brute
    assert count_transducers(2, 2, 2) == 48


@pytest.mark.parametrize("na, ns, n", [(1, 2, 3), (2, 1, 3), (3, 1, 2), (2, 2, 1), (1, 3, 2)])
def test_count_small_cases_brute_force(na, ns, n):
    assert count_transducers(na, ns, n) == len(canonical_set(na, ns, n))


def test_enumeration_is_canonical_and_distinct():
    seen = set()
    for t in enumerate_transducers(_blank(2, 2), 3):
        assert canonical_form(t) == t
        assert t.key() not in seen
        seen.add(t.key())
    assert len(seen) == 1728


def test_canonicalization_completeness(rng):
    """Every raw transducer with |M| <= 2 is evaluation-equivalent to an emitted one."""
    pomdp = random_pomdp(rng, 3, 2, 2)
    p1 = pomdp.initial_belief
    emitted = {}
    for n in (1, 2):
        for t in enumerate_transducers(pomdp, n):
            key = (t.act, tuple(tuple(int(t.update[m, t.act[m], s]) for s in range(2))
                                for m in range(t.n_memory)))
            emitted[key] = gain(pomdp, p1, t)
    for n in (1, 2):
        for act, update in raw_transducers(2, 2, n):
            key = canonicalize(act, update)
            assert key in emitted
    # spot-check evaluation equivalence against the independent oracle
    raws = list(raw_transducers(2, 2, 2))
    for i in rng.choice(len(raws), 60, replace=False):
        act, update = raws[i]
        key = canonicalize(act, update)
        sigma = transducer(act, [[int(update[m, act[m], s]) for s in range(2)] for m in range(2)],
                           2, 2)
        assert emitted[key] == pytest.approx(oracle_gain(pomdp, p1, sigma), abs=1e-9)


def test_upper_bound_examples(ex1, ex2, triv1):
    assert perfect_info_upper_bound(triv1, [1.0]) == pytest.approx(1.0)
    assert perfect_info_upper_bound(ex1, [0.25, 0.75]) == pytest.approx(1.0, abs=1e-9)
    assert perfect_info_upper_bound(ex2, ex2.delta("k0")) == pytest.approx(5 / 6, abs=1e-9)


def test_upper_bound_ex2_against_oracle(ex2):
    P = ex2.kernel.sum(axis=3)
    v = mdp_value_exhaustive(P, np.asarray(ex2.reward))
    np.testing.assert_allclose(v, [5 / 6, 2 / 3, 2 / 3, 1.0, 0.0], atol=1e-9)


def test_policy_iteration_matches_oracle_on_fully_observed():
    for pomdp, P, R in fully_observed_instances(200):
        g, _ = mdp_policy_iteration(P, R)
        np.testing.assert_allclose(g, mdp_value_exhaustive(P, R), atol=1e-9)
        ge, _ = mdp_exhaustive(P, R)
        np.testing.assert_allclose(ge, g, atol=1e-9)


def test_policy_iteration_needs_bias_step():
    # two actions with equal gain from state 0; only the bias separates them
    P = np.zeros((3, 2, 3))
    P[0, 0, 2] = 1.0   # a: straight to the absorbing state
    P[0, 1, 1] = 1.0   # b: visit the rewarding state once first
    P[1, :, 2] = 1.0
    P[2, :, 2] = 1.0
    R = np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]])
    g, policy = mdp_policy_iteration(P, R)
    np.testing.assert_allclose(g, 0.5)
    assert policy[0] == 1


def test_anytime_triv1(triv1):
    rep = anytime_approximate(triv1, [1.0], 0.1, max_memory=3)
    assert rep.status is Status.CONVERGED
    assert rep.lower_bound == rep.upper_bound == 1.0 and rep.witness_memory == 1


def test_anytime_ex1_reports_persistent_gap(ex1):
    rep = anytime_approximate(ex1, [0.25, 0.75], 0.05, max_memory=2)
    assert rep.lower_bound == pytest.approx(0.75, abs=1e-9)
    assert rep.witness_memory == 2
    assert rep.upper_bound == pytest.approx(1.0, abs=1e-9)
    assert rep.status is Status.BUDGET_MEMORY
    assert rep.gap == pytest.approx(0.25, abs=1e-9)


def test_anytime_budget_candidates(ex2):
    rep = anytime_approximate(ex2, ex2.delta("k0"), 0.05, max_candidates=10)
    assert rep.status is Status.BUDGET_CANDIDATES and rep.candidates_evaluated == 10


def test_anytime_lower_bound_is_witness_gain(rng):
    for _ in range(10):
        pomdp = random_pomdp(rng, 3, 2, 2)
        rep = anytime_approximate(pomdp, pomdp.initial_belief, 1e-3, max_memory=2)
        assert rep.lower_bound == pytest.approx(
            oracle_gain(pomdp, pomdp.initial_belief, rep.witness), abs=1e-9)
        assert rep.lower_bound <= rep.upper_bound + 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60), st.integers(1, 60))
def test_lower_bound_monotone_in_budget(seed, c1, c2):
    rng = np.random.default_rng(seed)
    pomdp = random_pomdp(rng, 2, 2, 2)
    lo, hi = sorted((c1, c2))
    r1 = anytime_approximate(pomdp, pomdp.initial_belief, 1e-6, max_candidates=lo)
    r2 = anytime_approximate(pomdp, pomdp.initial_belief, 1e-6, max_candidates=hi)
    m1 = anytime_approximate(pomdp, pomdp.initial_belief, 1e-6, max_memory=1)
    m2 = anytime_approximate(pomdp, pomdp.initial_belief, 1e-6, max_memory=2)
    assert r1.lower_bound <= r2.lower_bound + 1e-12
    assert m1.lower_bound <= m2.lower_bound + 1e-12


def test_decide_examples(ex2, triv1):
    assert decide_promise(ex2, ex2.delta("k0"), PromiseQuery(0.5, 0.1, max_memory=4)) \
        is Verdict.AT_LEAST
    assert decide_promise(triv1, [1.0], PromiseQuery(0.5, 0.1, max_memory=1)) is Verdict.AT_LEAST
    assert decide_promise(ex2, ex2.delta("k0"), PromiseQuery(0.95, 0.05, max_memory=1)) \
        is Verdict.AT_MOST


def test_decide_unknown_on_budget(ex1):
    # memory 1 only reaches L = 1/2 and U = 1, so neither side is certified
    v = decide_promise(ex1, [0.25, 0.75], PromiseQuery(0.7, 0.05, max_memory=1))
    assert v is Verdict.UNKNOWN and v.exit_code == 2


def test_query_validation():
    with pytest.raises(ValueError):
        PromiseQuery(1.5, 0.1)
    with pytest.raises(ValueError):
        PromiseQuery(0.5, 0.0)
    assert [v.exit_code for v in Verdict] == [0, 1, 2]


def test_report_json_is_deterministic(ex2):
    r1 = anytime_approximate(ex2, ex2.delta("k0"), 0.05, max_memory=2).to_json(ex2)
    r2 = anytime_approximate(ex2, ex2.delta("k0"), 0.05, max_memory=2).to_json(ex2)
    assert r1 == r2 and "elapsed_seconds" not in r1
