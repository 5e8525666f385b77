"""Finite-memory, finite-recall and eventually periodic strategies.

Actions and signals are referred to by index; names only appear in the
``.strat.json`` file format, which is resolved against a :class:`Pomdp`.
"""

import itertools
import json
from dataclasses import dataclass

import numpy as np

from . import jsonio


class StrategyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FiniteMemoryStrategy:
    """Deterministic transducer ``(M, m0, act, update)``.

    ``act[m]`` is the action played in memory state ``m``; ``update[m, a, s]``
    is the next memory state after playing ``a`` and observing ``s``.  Entries
    with ``a != act[m]`` are never exercised and conventionally self-loop.
    """
    memory_states: tuple
    initial: int
    act: tuple
    update: np.ndarray

    def __post_init__(self):
        names = tuple(self.memory_states)
        act = tuple(int(a) for a in self.act)
        update = np.array(self.update, dtype=np.int64)
        update.setflags(write=False)
        n = len(names)
        if n == 0:
            raise StrategyError("a transducer needs at least one memory state")
        if len(set(names)) != n:
            raise StrategyError("duplicate memory state names")
        if len(act) != n or update.ndim != 3 or update.shape[0] != n:
            raise StrategyError("act/update do not match the memory states")
        if not 0 <= self.initial < n:
            raise StrategyError(f"initial memory state {self.initial} out of range")
        if update.size and (update.min() < 0 or update.max() >= n):
            raise StrategyError("update points outside the memory states")
        if any(not 0 <= a < update.shape[1] for a in act):
            raise StrategyError("act refers to an unknown action")
        object.__setattr__(self, "memory_states", names)
        object.__setattr__(self, "initial", int(self.initial))
        object.__setattr__(self, "act", act)
        object.__setattr__(self, "update", update)

    @property
    def n_memory(self):
        return len(self.memory_states)

    @property
    def n_actions(self):
        return self.update.shape[1]

    @property
    def n_signals(self):
        return self.update.shape[2]

    def with_initial(self, m):
        return FiniteMemoryStrategy(self.memory_states, m, self.act, self.update)

    def run(self, history, start=None):
        """Memory state after ``history``; raises on an inconsistent action."""
        m = self.initial if start is None else start
        for step, (a, s) in enumerate(history):
            if a != self.act[m]:
                raise StrategyError(
                    f"history step {step + 1} plays action {a} but memory state "
                    f"{self.memory_states[m]!r} plays {self.act[m]}")
            m = int(self.update[m, a, s])
        return m

    def key(self):
        return (self.initial, self.act, self.update.tobytes(), self.update.shape)

    def __eq__(self, other):
        if not isinstance(other, FiniteMemoryStrategy):
            return NotImplemented
        return self.memory_states == other.memory_states and self.key() == other.key()

    def __hash__(self):
        return hash((self.memory_states, self.key()))

    def __repr__(self):
        return f"FiniteMemoryStrategy(|M|={self.n_memory}, initial={self.memory_states[self.initial]!r})"


def transducer(act, targets, n_actions, n_signals, names=None, initial=0):
    """Build a transducer from its exercised edges.

    ``targets[m][s]`` is the successor of ``m`` after playing ``act[m]`` and
    observing ``s``; every other update entry self-loops.
    """
    n = len(act)
    update = np.empty((n, n_actions, n_signals), dtype=np.int64)
    for m in range(n):
        update[m] = m
        update[m, act[m]] = targets[m]
    if names is None:
        names = tuple(f"m{i}" for i in range(n))
    return FiniteMemoryStrategy(tuple(names), initial, tuple(act), update)


def constant_strategy(action, n_actions, n_signals, name="m0"):
    return transducer([action], [[0] * n_signals], n_actions, n_signals, names=[name])


def canonical_form(sigma):
    """Reachable part of ``sigma`` relabelled in breadth-first discovery order.

    Discovery follows exercised edges ``(act[m], s)`` with signals in index
    order; unexercised entries become self-loops.  Two transducers that differ
    only by unreachable states, unexercised entries or a relabelling have the
    same canonical form.
    """
    order = [sigma.initial]
    index = {sigma.initial: 0}
    i = 0
    while i < len(order):
        m = order[i]
        for s in range(sigma.n_signals):
            t = int(sigma.update[m, sigma.act[m], s])
            if t not in index:
                index[t] = len(order)
                order.append(t)
        i += 1
    act = [sigma.act[m] for m in order]
    targets = [[index[int(sigma.update[m, sigma.act[m], s])] for s in range(sigma.n_signals)]
               for m in order]
    return transducer(act, targets, sigma.n_actions, sigma.n_signals)


def history_shift(sigma, history):
    """The strategy ``sigma`` restarted after ``history``: same transducer, new initial state."""
    return sigma.with_initial(sigma.run(history))


@dataclass(frozen=True)
class EventuallyPeriodicStrategy:
    """Blind action word ``prefix + period + period + ...``."""
    prefix: tuple
    period: tuple

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(int(a) for a in self.prefix))
        object.__setattr__(self, "period", tuple(int(a) for a in self.period))
        if not self.period:
            raise StrategyError("period must be nonempty")

    def action(self, stage):
        """Action at 1-based ``stage``."""
        i = stage - 1
        if i < len(self.prefix):
            return self.prefix[i]
        return self.period[(i - len(self.prefix)) % len(self.period)]

    def word(self, n):
        return tuple(self.action(m) for m in range(1, n + 1))


def shift(sigma, m):
    """The ``m``-shift: drop the first ``m - 1`` actions.

    Accepts an :class:`EventuallyPeriodicStrategy` (returned in the same kind
    with shortened prefix or rotated period) or a finite action word.
    """
    if m < 1:
        raise ValueError("shift index must be >= 1")
    drop = m - 1
    if isinstance(sigma, EventuallyPeriodicStrategy):
        if drop <= len(sigma.prefix):
            return EventuallyPeriodicStrategy(sigma.prefix[drop:], sigma.period)
        r = (drop - len(sigma.prefix)) % len(sigma.period)
        return EventuallyPeriodicStrategy((), sigma.period[r:] + sigma.period[:r])
    return tuple(sigma)[drop:]


@dataclass(frozen=True)
class FiniteRecallStrategy:
    """Action table over the last ``recall`` history entries.

    ``table`` maps words of ``(action, signal)`` pairs of length at most
    ``recall`` to actions: the full history while it is shorter than
    ``recall``, its last ``recall`` entries afterwards.
    """
    recall: int
    table: dict
    n_actions: int
    n_signals: int

    def __post_init__(self):
        if self.recall < 0:
            raise StrategyError("recall must be nonnegative")
        table = {tuple((int(a), int(s)) for a, s in w): int(act) for w, act in self.table.items()}
        missing = [w for w in recall_words(self.recall, self.n_actions, self.n_signals)
                   if w not in table]
        if missing:
            raise StrategyError(f"finite-recall table misses {len(missing)} words, e.g. {missing[0]}")
        object.__setattr__(self, "table", table)

    def action(self, history):
        h = tuple(history)
        if self.recall == 0:
            return self.table[()]
        return self.table[h[-self.recall:]] if len(h) >= self.recall else self.table[h]


def recall_words(recall, n_actions, n_signals):
    pairs = [(a, s) for a in range(n_actions) for s in range(n_signals)]
    words = []
    for length in range(recall + 1):
        words.extend(itertools.product(pairs, repeat=length))
    return words


def _word_name(word, actions=None, signals=None):
    if not word:
        return "-"
    if actions is None:
        return ",".join(f"{a}/{s}" for a, s in word)
    return ",".join(f"{actions[a]}/{signals[s]}" for a, s in word)


def to_finite_memory(sigma, n_signals=None, n_actions=None):
    """Transducer realising an eventually periodic or finite-recall strategy.

    An eventually periodic strategy becomes a counter through the prefix
    followed by a cycle through the period (``len(prefix) + len(period)``
    states).  A finite-recall strategy becomes a transducer whose memory is
    the recent-history word.  ``n_signals`` / ``n_actions`` are needed for the
    eventually periodic case only (defaults: 1 signal, max action + 1).
    """
    if isinstance(sigma, FiniteMemoryStrategy):
        return sigma
    if isinstance(sigma, EventuallyPeriodicStrategy):
        ns = 1 if n_signals is None else n_signals
        na = max(sigma.prefix + sigma.period) + 1 if n_actions is None else n_actions
        word = sigma.prefix + sigma.period
        n = len(word)
        act = list(word)
        targets = []
        for i in range(n):
            nxt = i + 1 if i + 1 < n else len(sigma.prefix)
            targets.append([nxt] * ns)
        return transducer(act, targets, na, ns, names=[f"s{i}" for i in range(n)])
    if isinstance(sigma, FiniteRecallStrategy):
        words = recall_words(sigma.recall, sigma.n_actions, sigma.n_signals)
        index = {w: i for i, w in enumerate(words)}
        update = np.empty((len(words), sigma.n_actions, sigma.n_signals), dtype=np.int64)
        act = []
        for i, w in enumerate(words):
            a = sigma.table[w]
            act.append(a)
            update[i] = i
            for s in range(sigma.n_signals):
                nxt = (w + ((a, s),))[-sigma.recall:] if sigma.recall else ()
                update[i, a, s] = index[nxt]
        names = [_word_name(w) for w in words]
        return FiniteMemoryStrategy(tuple(names), index[()], tuple(act), update)
    raise TypeError(f"cannot convert {type(sigma).__name__}")


# -- file format ---------------------------------------------------------------

def strategy_to_dict(sigma, pomdp):
    A, S = pomdp.actions, pomdp.signals
    if isinstance(sigma, EventuallyPeriodicStrategy):
        return {"kind": "eventually_periodic", "prefix": [A[a] for a in sigma.prefix],
                "period": [A[a] for a in sigma.period]}
    if isinstance(sigma, FiniteRecallStrategy):
        entries = sorted(sigma.table.items(), key=lambda kv: (len(kv[0]), kv[0]))
        return {"kind": "finite_recall", "recall": sigma.recall,
                "table": [{"history": [[A[a], S[s]] for a, s in w], "action": A[act]}
                          for w, act in entries]}
    names = sigma.memory_states
    update = {}
    for m, name in enumerate(names):
        row = {}
        for a in range(sigma.n_actions):
            cells = {S[s]: names[int(sigma.update[m, a, s])] for s in range(sigma.n_signals)
                     if a == sigma.act[m] or sigma.update[m, a, s] != m}
            if cells:
                row[A[a]] = cells
        update[name] = row
    return {"kind": "finite_memory", "memory_states": list(names),
            "initial": names[sigma.initial],
            "act": {name: A[sigma.act[m]] for m, name in enumerate(names)},
            "update": update}


def _get(names, name, what):
    try:
        return names.index(name)
    except ValueError:
        raise StrategyError(f"unknown {what} {name!r}") from None


def strategy_from_dict(doc, pomdp):
    if not isinstance(doc, dict) or "kind" not in doc:
        raise StrategyError("strategy document must be an object with a 'kind'")
    A, S = list(pomdp.actions), list(pomdp.signals)
    kind = doc["kind"]
    if kind == "eventually_periodic":
        return EventuallyPeriodicStrategy(tuple(_get(A, a, "action") for a in doc.get("prefix", [])),
                                          tuple(_get(A, a, "action") for a in doc["period"]))
    if kind == "finite_recall":
        table = {}
        for e in doc["table"]:
            w = tuple((_get(A, a, "action"), _get(S, s, "signal")) for a, s in e["history"])
            if w in table:
                raise StrategyError(f"duplicate finite-recall entry {e['history']}")
            table[w] = _get(A, e["action"], "action")
        return FiniteRecallStrategy(int(doc["recall"]), table, len(A), len(S))
    if kind == "finite_memory":
        names = list(doc["memory_states"])
        n = len(names)
        if len(set(names)) != n:
            raise StrategyError("duplicate memory state names")
        act = []
        for name in names:
            if name not in doc["act"]:
                raise StrategyError(f"no action for memory state {name!r}")
            act.append(_get(A, doc["act"][name], "action"))
        update = np.empty((n, len(A), len(S)), dtype=np.int64)
        for m in range(n):
            update[m] = m
        for name, row in doc.get("update", {}).items():
            m = _get(names, name, "memory state")
            for a_name, cells in row.items():
                a = _get(A, a_name, "action")
                for s_name, target in cells.items():
                    update[m, a, _get(S, s_name, "signal")] = _get(names, target, "memory state")
        return FiniteMemoryStrategy(tuple(names), _get(names, doc["initial"], "memory state"),
                                    tuple(act), update)
    raise StrategyError(f"unknown strategy kind {kind!r}")


def render_strategy(sigma, pomdp):
    return jsonio.dumps(strategy_to_dict(sigma, pomdp), indent=1) + "\n"


def load_strategy(path, pomdp):
    with open(path, encoding="utf-8") as fh:
        return strategy_from_dict(json.load(fh), pomdp)
