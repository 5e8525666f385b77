"""Monte Carlo plays of a transducer on a POMDP.

Randomness comes from numpy's PCG64, seeded per run: the first uniform draws
the initial state from ``p1``, and stage ``m`` consumes one uniform to draw
the pair ``(next state, signal)`` by inverse CDF over ``K x S`` in row-major
order.  The same seed therefore gives the same play on every platform.
"""

from dataclasses import dataclass

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def _walk(cum_init, cum, reward, act, update, n_signals, u, record,
          states, mems, actions, signals):
    horizon = u.shape[0] - 1
    nk = cum_init.shape[0]
    k = 0
    while k < nk - 1 and u[0] >= cum_init[k]:
        k += 1
    while k > 0 and cum_init[k] - cum_init[k - 1] <= 0.0:
        k -= 1
    m = 0
    total = 0.0
    width = cum.shape[2]
    for t in range(horizon):
        a = act[m]
        total += reward[k, a]
        row = cum[k, a]
        x = u[t + 1]
        o = 0
        while o < width - 1 and x >= row[o]:
            o += 1
        # round-off: never land on a zero-probability tail outcome
        while o > 0 and row[o] - row[o - 1] <= 0.0:
            o -= 1
        s = o % n_signals
        if record:
            states[t] = k
            mems[t] = m
            actions[t] = a
            signals[t] = s
        k = o // n_signals
        m = update[m, a, s]
    return total


@dataclass(frozen=True)
class Trace:
    states: np.ndarray
    memory: np.ndarray
    actions: np.ndarray
    signals: np.ndarray
    rewards: np.ndarray

    def records(self, pomdp, sigma):
        """JSON-lines-ready dicts, one per stage (1-based ``m``)."""
        for t in range(len(self.states)):
            yield {"m": t + 1, "k": pomdp.states[self.states[t]],
                   "mem": sigma.memory_states[self.memory[t]],
                   "a": pomdp.actions[self.actions[t]], "s": pomdp.signals[self.signals[t]],
                   "g": float(self.rewards[t])}


def _tables(pomdp, sigma, p1):
    nk, na = pomdp.n_states, pomdp.n_actions
    flat = pomdp.kernel.reshape(nk, na, nk * pomdp.n_signals)
    cum = np.cumsum(flat, axis=2)
    cum_init = np.cumsum(np.asarray(p1, dtype=float))
    # memory is relabelled so that the initial state is 0
    order = [sigma.initial] + [m for m in range(sigma.n_memory) if m != sigma.initial]
    pos = np.empty(sigma.n_memory, dtype=np.int64)
    pos[order] = np.arange(sigma.n_memory)
    act = np.array([sigma.act[m] for m in order], dtype=np.int64)
    update = pos[np.asarray(sigma.update)[order]]
    return cum_init, cum, np.ascontiguousarray(pomdp.reward, dtype=float), act, update, order


def uniforms(seed, horizon):
    return np.random.Generator(np.random.PCG64(seed)).random(horizon + 1)


def simulate(pomdp, p1, sigma, horizon, seed, record=True):
    """Play ``horizon`` stages; returns ``(trace, empirical_average)``.

    ``trace`` is ``None`` when ``record`` is false.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    cum_init, cum, reward, act, update, order = _tables(pomdp, sigma, p1)
    u = uniforms(seed, horizon)
    n = horizon if record else 0
    states = np.zeros(n, dtype=np.int64)
    mems = np.zeros(n, dtype=np.int64)
    actions = np.zeros(n, dtype=np.int64)
    signals = np.zeros(n, dtype=np.int64)
    total = _walk(cum_init, cum, reward, act, update, pomdp.n_signals, u, record,
                  states, mems, actions, signals)
    trace = None
    if record:
        mem_orig = np.asarray(order, dtype=np.int64)[mems]
        trace = Trace(states, mem_orig, actions, signals, reward[states, actions])
    return trace, total / horizon


def simulate_many(pomdp, p1, sigma, horizon, seeds):
    """Empirical averages for each seed, in seed order."""
    return np.array([simulate(pomdp, p1, sigma, horizon, int(s), record=False)[1] for s in seeds])
