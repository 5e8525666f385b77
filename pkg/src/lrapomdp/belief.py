"""Bayes updates, supports and super-supports.

Histories are tuples of ``(action, signal)`` index pairs.  A history of length
``m - 1`` is the information available before stage ``m``.
"""

from dataclasses import dataclass

import numpy as np

SUPPORT_TOL = 1e-12
ZERO_SIGNAL_TOL = 1e-15


class ZeroProbabilityError(ValueError):
    """A signal (or a whole history) has probability zero from the given belief."""


def bayes_update(pomdp, belief, action, signal):
    """One step of Bayes' rule.

    Returns ``(posterior, signal_prob)``.  When the signal has probability at
    most 1e-15 the posterior is ``None``; callers that need a belief should use
    :func:`belief_after_history`, which raises instead.
    """
    joint = np.asarray(belief, dtype=float) @ pomdp.kernel[:, action, :, signal]
    prob = float(joint.sum())
    if prob <= ZERO_SIGNAL_TOL:
        return None, prob
    return joint / prob, prob


def signal_distribution(pomdp, belief, action):
    return np.einsum("k,kjs->s", np.asarray(belief, dtype=float), pomdp.kernel[:, action])


def belief_after_history(pomdp, p1, history):
    p = np.asarray(p1, dtype=float)
    for step, (a, s) in enumerate(history):
        p, prob = bayes_update(pomdp, p, a, s)
        if p is None:
            raise ZeroProbabilityError(
                f"history has probability zero at step {step + 1} "
                f"(action {pomdp.actions[a]!r}, signal {pomdp.signals[s]!r})")
    return p


def support(belief, tol=SUPPORT_TOL):
    return frozenset(int(k) for k in np.flatnonzero(np.asarray(belief) > tol))


def history_from_names(pomdp, pairs):
    return tuple((pomdp.action_index(a), pomdp.signal_index(s)) for a, s in pairs)


def history_to_names(pomdp, history):
    return [[pomdp.actions[a], pomdp.signals[s]] for a, s in history]


@dataclass(frozen=True)
class GainPartition:
    """Blocks of initial states grouped by their limiting gain, one gain per block."""
    blocks: tuple
    gains: tuple

    def __post_init__(self):
        blocks = tuple(frozenset(int(k) for k in b) for b in self.blocks)
        gains = tuple(float(g) for g in self.gains)
        if len(blocks) != len(gains):
            raise ValueError("one gain per block is required")
        seen = set()
        for b in blocks:
            if seen & b:
                raise ValueError("partition blocks overlap")
            seen |= b
        for g in gains:
            if not 0.0 <= g <= 1.0:
                raise ValueError(f"gain {g} outside [0,1]")
        if len(set(gains)) != len(gains):
            raise ValueError("partition gains must be pairwise distinct")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "gains", gains)

    @property
    def r(self):
        return len(self.blocks)

    def covered(self):
        return frozenset().union(*self.blocks)

    def mass(self, belief):
        """Probability mass ``belief`` puts on each block."""
        p = np.asarray(belief, dtype=float)
        return tuple(float(sum(p[k] for k in b)) for b in self.blocks)

    def to_json(self, pomdp):
        return [{"states": sorted(pomdp.states[k] for k in b), "gain": g}
                for b, g in zip(self.blocks, self.gains)]


@dataclass(frozen=True)
class SuperSupport:
    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(frozenset(int(k) for k in b) for b in self.blocks))

    def disjoint(self):
        seen = set()
        for b in self.blocks:
            if seen & b:
                return False
            seen |= b
        return True

    def is_empty(self):
        return not any(self.blocks)

    def names(self, pomdp):
        return [sorted(pomdp.states[k] for k in b) for b in self.blocks]


def super_support_after_history(pomdp, sigma, partition, history):
    """Super-support reached by ``sigma`` after ``history``.

    Block ``i`` is the union over initial states ``k`` in the i-th partition
    block of the support of the state distribution conditioned on
    ``history``, starting from ``k`` and following ``sigma``.  One belief per
    block is propagated forward and renormalised at each signal.
    """
    beliefs = []
    for block in partition.blocks:
        p = np.zeros(pomdp.n_states)
        if block:
            p[list(block)] = 1.0 / len(block)
            beliefs.append(p)
        else:
            beliefs.append(None)
    mem = sigma.initial
    for step, (a, s) in enumerate(history):
        if a != sigma.act[mem]:
            raise ValueError(f"history step {step + 1} plays {pomdp.actions[a]!r} but the "
                             f"strategy plays {pomdp.actions[sigma.act[mem]]!r}")
        beliefs = [None if p is None else bayes_update(pomdp, p, a, s)[0] for p in beliefs]
        if all(p is None for p in beliefs):
            raise ZeroProbabilityError(f"history has probability zero from every block "
                                       f"(step {step + 1})")
        mem = sigma.update[mem, a, s]
    return SuperSupport(tuple(frozenset() if p is None else support(p) for p in beliefs))


def propagate_supports(pomdp, blocks, action, signal, tol=SUPPORT_TOL):
    """Set-level image of each block under one ``(action, signal)`` step."""
    step = pomdp.kernel[:, action, :, signal] > tol
    out = []
    for b in blocks:
        if not b:
            out.append(frozenset())
            continue
        out.append(frozenset(int(k) for k in np.flatnonzero(step[list(b)].any(axis=0))))
    return tuple(out)
