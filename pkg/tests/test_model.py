import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrapomdp import corpus
from lrapomdp.model import (Pomdp, PomdpSemanticError, PomdpSyntaxError, is_blind, parse_belief,
                            parse_number, parse_pomdp, pomdp_to_dict, render_pomdp, validate)

from oracles import random_pomdp


def test_parse_ex1_shape(ex1):
    p = parse_pomdp(render_pomdp(ex1))
    assert (p.n_states, p.n_actions, p.n_signals) == (2, 2, 1)


def test_parse_triv1_single_row(triv1):
    p = parse_pomdp(render_pomdp(triv1))
    assert p.kernel.shape == (1, 1, 1, 1)
    assert p.kernel[0, 0, 0, 0] == 1.0


def test_parse_ex2_shape(ex2):
    p = parse_pomdp(render_pomdp(ex2))
    assert (p.n_states, p.n_actions, p.n_signals) == (5, 2, 2)


@pytest.mark.parametrize("name", sorted(corpus.MODELS))
def test_round_trip_exact(name):
    p = corpus.MODELS[name]()
    q = parse_pomdp(render_pomdp(p))
    assert q == p
    assert render_pomdp(q) == render_pomdp(p)


def test_fractions_are_accepted():
    doc = {"states": ["x", "y"], "actions": ["a"], "signals": ["s"],
           "transitions": [{"from": "x", "action": "a", "to": "y", "signal": "s", "prob": "1/3"},
                           {"from": "x", "action": "a", "to": "x", "signal": "s", "prob": "2/3"},
                           {"from": "y", "action": "a", "to": "y", "signal": "s", "prob": 1}],
           "rewards": [{"state": "x", "action": "a", "value": "1/2"}]}
    p = parse_pomdp(json.dumps(doc))
    assert p.kernel[0, 0, 1, 0] == 1 / 3
    assert p.reward[0, 0] == 0.5
    assert parse_number("3/4") == 0.75


def test_validate_ok(ex1):
    rep = validate(ex1)
    assert rep.ok and len(rep) == 0 and rep.to_json() == []


def test_validate_row_sum_defect(ex1):
    kernel = np.array(ex1.kernel)
    kernel[0, 0, 1, 0] += 1e-3
    rep = validate(ex1.with_kernel(kernel))
    assert len(rep) == 1
    v = rep.violations[0]
    assert v.kind == "row_sum" and v.location == ("k1", "a")
    assert v.defect == pytest.approx(1e-3, abs=1e-12)


def test_validate_reward_range(ex1):
    reward = np.array(ex1.reward)
    reward[0, 0] = 1.5
    rep = validate(ex1.with_reward(reward))
    assert [v.kind for v in rep.violations] == ["reward_range"]


def test_validate_tolerance_boundary(ex1):
    kernel = np.array(ex1.kernel)
    kernel[0, 0, 1, 0] += 5e-10
    assert validate(ex1.with_kernel(kernel)).ok


def test_validate_negative_entry(ex1):
    kernel = np.array(ex1.kernel)
    kernel[0, 0, 0, 0] = -0.25
    kernel[0, 0, 1, 0] = 1.25
    kinds = {v.kind for v in validate(ex1.with_kernel(kernel)).violations}
    assert kinds == {"negative"}


def test_is_blind(ex1, ex2, triv1):
    assert is_blind(ex1) and not is_blind(ex2) and is_blind(triv1)


def test_syntax_error_has_position():
    with pytest.raises(PomdpSyntaxError) as exc:
        parse_pomdp('{"states": [\n  "k1",\n}')
    assert exc.value.line == 3


@pytest.mark.parametrize("mutate, fragment", [
    (lambda d: d["transitions"].append(dict(d["transitions"][0])), "duplicate"),
    (lambda d: d["transitions"][0].update({"to": "nowhere"}), "unknown state"),
    (lambda d: d["transitions"][0].update({"prob": "0.9"}), "sums to"),
    (lambda d: d.update({"states": ["k1", "k1"]}), "duplicate names"),
])
def test_semantic_errors(ex1, mutate, fragment):
    doc = pomdp_to_dict(ex1)
    mutate(doc)
    with pytest.raises(PomdpSemanticError, match=fragment):
        parse_pomdp(json.dumps(doc))


def test_parse_belief(ex1):
    p = parse_belief(ex1, "k1:1/4,k2:3/4")
    np.testing.assert_array_equal(p, [0.25, 0.75])
    with pytest.raises(ValueError):
        parse_belief(ex1, "k1:1/2")
    with pytest.raises(KeyError):
        parse_belief(ex1, "k9:1")


def test_arrays_are_read_only(ex1):
    with pytest.raises(ValueError):
        ex1.kernel[0, 0, 0, 0] = 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_random_round_trip(nk, na, ns, seed):
    p = random_pomdp(np.random.default_rng(seed), nk, na, ns)
    assert validate(p).ok
    assert parse_pomdp(render_pomdp(p)) == p


def test_pomdp_shape_mismatch():
    with pytest.raises(ValueError):
        Pomdp(["k"], ["a"], ["s"], np.ones((1, 1, 1, 2)), np.ones((1, 1)))
