"""Bundled example models and strategies.

``ex1``
    Two states swapped deterministically whatever is played; action ``a``
    pays 1 in ``k1`` and ``b`` pays 1 in ``k2``.  Blind, initial belief
    ``(1/4, 3/4)``.
``ex2``
    Five states; ``k0`` branches to two sub-systems, ``k4`` is an absorbing
    dump.  Rewards are 1 in ``k1`` and ``k3``.  Value 5/6 from ``k0``, while
    every finite-recall strategy gets at most 1/2.
``triv1``
    One state, one action, one signal, reward 1.
"""

from collections import deque
from fractions import Fraction as F

import numpy as np

from .model import Pomdp
from .strategy import (EventuallyPeriodicStrategy, FiniteRecallStrategy, constant_strategy,
                       recall_words, transducer)


def _build(states, actions, signals, edges, rewards, p1):
    nk, na, ns = len(states), len(actions), len(signals)
    kernel = np.zeros((nk, na, nk, ns))
    for (k, a, k2, s), p in edges.items():
        kernel[states.index(k), actions.index(a), states.index(k2), signals.index(s)] = float(p)
    reward = np.zeros((nk, na))
    for (k, a), g in rewards.items():
        reward[states.index(k), actions.index(a)] = float(g)
    belief = np.zeros(nk)
    for k, p in p1.items():
        belief[states.index(k)] = float(p)
    return Pomdp(states, actions, signals, kernel, reward, belief)


def ex1():
    edges = {}
    for a in "ab":
        edges[("k1", a, "k2", "s")] = 1
        edges[("k2", a, "k1", "s")] = 1
    rewards = {("k1", "a"): 1, ("k2", "b"): 1}
    return _build(["k1", "k2"], ["a", "b"], ["s"], edges, rewards,
                  {"k1": F(1, 4), "k2": F(3, 4)})


def ex2():
    half = F(1, 2)
    edges = {
        # action a
        ("k0", "a", "k1", "s_b"): half, ("k0", "a", "k3", "s_a"): half,
        ("k1", "a", "k2", "s_b"): half, ("k1", "a", "k1", "s_a"): half,
        ("k2", "a", "k4", "s_a"): 1,
        ("k3", "a", "k3", "s_a"): half, ("k3", "a", "k3", "s_b"): half,
        ("k4", "a", "k4", "s_a"): 1,
        # action b
        ("k0", "b", "k1", "s_b"): half, ("k0", "b", "k3", "s_a"): half,
        ("k1", "b", "k4", "s_a"): 1,
        ("k2", "b", "k1", "s_a"): 1,
        ("k3", "b", "k4", "s_a"): 1,
        ("k4", "b", "k4", "s_a"): 1,
    }
    rewards = {(k, a): 1 for k in ("k1", "k3") for a in "ab"}
    return _build(["k0", "k1", "k2", "k3", "k4"], ["a", "b"], ["s_a", "s_b"], edges, rewards,
                  {"k0": 1})


def triv1():
    return _build(["k"], ["a"], ["s"], {("k", "a", "k", "s"): 1}, {("k", "a"): 1}, {"k": 1})


MODELS = {"ex1": ex1, "ex2": ex2, "triv1": triv1}


def ex1_alternating():
    """Plays b, a, b, a, ...: 3/4 from the initial belief (1/4, 3/4)."""
    return transducer([1, 0], [[1], [0]], 2, 1, names=["play_b", "play_a"])


def ex1_constant(action="a"):
    return constant_strategy("ab".index(action), 2, 1, name=f"play_{action}")


def ex2_optimal():
    """Four-memory strategy worth 5/6 from ``k0``.

    The first signal tells the branch: after ``s_a`` (state ``k3``) keep
    playing ``a``; after ``s_b`` (state ``k1``) play ``a`` and answer every
    later ``s_b`` (arrival in ``k2``) with one ``b``.
    """
    names = ["m_init", "m_k3", "m_k1", "m_k2"]
    a, b = 0, 1
    # targets indexed by signal (s_a, s_b)
    return transducer([a, a, a, b], [[1, 2], [1, 1], [2, 3], [2, 2]], 2, 2, names=names)


def consultable_words(pomdp, p1, recall):
    """Recall windows that some strategy can consult on a positive-probability play.

    Breadth-first over (state support, window) pairs with every action
    allowed at every step, so the result over-approximates what any single
    table can reach.  Table entries outside this set never affect play.
    """
    from .belief import propagate_supports, support

    start = (support(p1), ())
    seen = {start}
    queue = deque([start])
    words = set()
    while queue:
        supp, w = queue.popleft()
        words.add(w)
        for a in range(pomdp.n_actions):
            for s in range(pomdp.n_signals):
                (nxt,) = propagate_supports(pomdp, (supp,), a, s)
                if not nxt:
                    continue
                key = (nxt, (w + ((a, s),))[-recall:] if recall else ())
                if key not in seen:
                    seen.add(key)
                    queue.append(key)
    return words


def ex2_recall_tables(recall=1, prune_unconsultable=False):
    """Every finite-recall table over EX2 with the given recall.

    With ``prune_unconsultable`` only the windows returned by
    :func:`consultable_words` from ``k0`` get a free entry; the others are
    fixed to ``a``, which changes no play and hence no gain.
    """
    pomdp = ex2()
    na, ns = pomdp.n_actions, pomdp.n_signals
    words = recall_words(recall, na, ns)
    if prune_unconsultable:
        keep = consultable_words(pomdp, pomdp.initial_belief, recall)
        free = [w for w in words if w in keep]
    else:
        free = words
    fixed = {w: 0 for w in words}
    for bits in range(na ** len(free)):
        table = dict(fixed)
        x = bits
        for w in free:
            table[w] = x % na
            x //= na
        yield FiniteRecallStrategy(recall, table, na, ns)


def strategies_for(name):
    """Named strategies shipped with a model (used by the ``examples`` command)."""
    if name == "ex1":
        return {"ex1_alt": ex1_alternating(), "const_a": ex1_constant("a"),
                "const_b": ex1_constant("b"),
                "ex1_alt_periodic": EventuallyPeriodicStrategy((), (1, 0))}
    if name == "ex2":
        out = {"ex2_opt": ex2_optimal(), "const_a": constant_strategy(0, 2, 2, "play_a")}
        for i, sigma in enumerate(ex2_recall_tables(1)):
            out[f"ex2_recall1_{i:02d}"] = sigma
        return out
    if name == "triv1":
        return {"const_a": constant_strategy(0, 1, 1, "play_a")}
    raise KeyError(name)


def value(name):
    """Known optimal long-run value from the bundled initial belief."""
    return {"ex1": 0.75, "ex2": 5 / 6, "triv1": 1.0}[name]


__all__ = ["MODELS", "ex1", "ex2", "triv1", "ex1_alternating", "ex1_constant", "ex2_optimal",
           "ex2_recall_tables", "strategies_for", "value"]
