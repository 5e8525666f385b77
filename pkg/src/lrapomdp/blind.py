"""Blind POMDPs: deterministic beliefs, support automata, periodic strategy search."""

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np

from .belief import propagate_supports, support
from .chain import gain
from .model import check_belief, is_blind
from .strategy import EventuallyPeriodicStrategy, to_finite_memory

CANDIDATE_CAP = 10_000_000


class NotBlindError(ValueError):
    pass


def _require_blind(pomdp):
    if not is_blind(pomdp):
        raise NotBlindError(f"expected a blind POMDP, got {pomdp.n_signals} signals")


def blind_step(pomdp, belief, action):
    _require_blind(pomdp)
    return np.asarray(belief, dtype=float) @ pomdp.kernel[:, action, :, 0]


@dataclass(frozen=True)
class SupportAutomaton:
    """Deterministic automaton over tuples of state sets.

    For the plain support automaton every node is a 1-tuple.  ``edges`` maps
    ``(node index, action)`` to a node index; node 0 is initial.
    """
    n_actions: int
    nodes: tuple
    edges: dict

    def run(self, word):
        i = 0
        for a in word:
            i = self.edges[(i, a)]
        return i

    def to_json(self, pomdp):
        return {
            "nodes": [[sorted(pomdp.states[k] for k in b) for b in node] for node in self.nodes],
            "edges": [{"from": i, "action": pomdp.actions[a], "to": j}
                      for (i, a), j in sorted(self.edges.items())],
        }

    def to_dot(self, pomdp):
        lines = ["digraph supports {", "  rankdir=LR;"]
        for i, node in enumerate(self.nodes):
            label = " | ".join("{" + ",".join(pomdp.states[k] for k in sorted(b)) + "}"
                               for b in node)
            lines.append(f'  n{i} [label="{label}"{", peripheries=2" if i == 0 else ""}];')
        for (i, a), j in sorted(self.edges.items()):
            lines.append(f'  n{i} -> n{j} [label="{pomdp.actions[a]}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


SuperSupportAutomaton = SupportAutomaton


def _closure(pomdp, start):
    nodes = [start]
    index = {start: 0}
    edges = {}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for a in range(pomdp.n_actions):
            nxt = propagate_supports(pomdp, nodes[i], a, 0)
            if nxt not in index:
                index[nxt] = len(nodes)
                nodes.append(nxt)
                queue.append(index[nxt])
            edges[(i, a)] = index[nxt]
    return SupportAutomaton(pomdp.n_actions, tuple(nodes), edges)


def support_automaton(pomdp, p1):
    _require_blind(pomdp)
    p1 = check_belief(pomdp, p1)
    return _closure(pomdp, (support(p1),))


def super_support_automaton(pomdp, partition):
    """Closure of ``(K_1, ..., K_r)`` under blockwise one-step images, per action."""
    _require_blind(pomdp)
    return _closure(pomdp, tuple(partition.blocks))


@dataclass(frozen=True)
class PeriodicSearchReport:
    prefix: tuple
    period: tuple
    gain: float
    max_prefix: int
    max_period: int
    candidates: int
    partial: bool

    def strategy(self):
        return EventuallyPeriodicStrategy(self.prefix, self.period)

    def to_json(self, pomdp):
        return {"prefix": [pomdp.actions[a] for a in self.prefix],
                "period": [pomdp.actions[a] for a in self.period],
                "gain": self.gain, "max_prefix": self.max_prefix, "max_period": self.max_period,
                "candidates": self.candidates, "partial": self.partial}


def _primitive(word):
    n = len(word)
    return not any(n % d == 0 and word == word[:d] * (n // d) for d in range(1, n))


def periodic_candidates(n_actions, max_prefix, max_period):
    """(prefix, period) pairs in enumeration order, without redundant encodings.

    Skipped: periods that are powers of a shorter word, and prefixes ending
    with the period's last letter (the same word has a shorter prefix with a
    rotated period).  Prefix length grows in the outer loop.
    """
    letters = range(n_actions)
    for n in range(max_prefix):
        for t in range(1, max_period + 1):
            for prefix in itertools.product(letters, repeat=n):
                for period in itertools.product(letters, repeat=t):
                    if not _primitive(period):
                        continue
                    if prefix and prefix[-1] == period[-1]:
                        continue
                    yield prefix, period


def search_periodic(pomdp, p1, max_prefix, max_period, cap=CANDIDATE_CAP):
    """Exhaustive best eventually periodic strategy within the bounds.

    Prefixes of length ``< max_prefix`` and periods of length ``<= max_period``
    are evaluated exactly; the first candidate reaching the best gain wins.
    """
    _require_blind(pomdp)
    if max_prefix < 1 or max_period < 1:
        raise ValueError("bounds must be >= 1")
    p1 = check_belief(pomdp, p1)
    best = None
    count = 0
    partial = False
    for prefix, period in periodic_candidates(pomdp.n_actions, max_prefix, max_period):
        if count >= cap:
            partial = True
            break
        count += 1
        sigma = to_finite_memory(EventuallyPeriodicStrategy(prefix, period),
                                 n_signals=1, n_actions=pomdp.n_actions)
        g = gain(pomdp, p1, sigma)
        if best is None or g > best[0] + 1e-12:
            best = (g, prefix, period)
    g, prefix, period = best
    return PeriodicSearchReport(tuple(prefix), tuple(period), float(g), max_prefix, max_period,
                                count, partial)
