"""Exact long-run average evaluation of finite-memory strategies.

Running a transducer on a POMDP induces a finite Markov chain on pairs
``(state, memory)``.  On a finite chain the Cesaro averages of the stage
rewards converge almost surely to the gain of the recurrent class the play
is absorbed in, so the liminf payoff is the expected absorbed-class gain and
can be computed with dense linear algebra.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .belief import GainPartition
from .model import check_belief

EDGE_TOL = 1e-12
PIVOT_TOL = 1e-12
GAIN_TOL = 1e-9


class SingularSystemError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class ProductChain:
    """Markov chain on ``K x M``; node ``(k, m)`` has index ``k * |M| + m``."""
    n_states: int
    n_memory: int
    transition: np.ndarray
    reward: np.ndarray

    @property
    def n_nodes(self):
        return self.n_states * self.n_memory

    def node(self, k, m):
        return k * self.n_memory + m

    def split(self, node):
        return divmod(node, self.n_memory)


@dataclass(frozen=True, eq=False)
class ChainAnalysis:
    classes: tuple          # tuple of sorted node-index tuples (closed classes)
    stationary: tuple       # per class, stationary distribution over its nodes
    class_gains: np.ndarray
    absorption: np.ndarray  # (n_nodes, n_classes)
    node_gains: np.ndarray
    reach: np.ndarray       # boolean reachability (reflexive)

    def reachable_classes(self, node):
        return [c for c, cls in enumerate(self.classes) if self.reach[node, cls[0]]]


@dataclass(frozen=True, eq=False)
class EvaluationResult:
    per_state_gain: np.ndarray
    overall: float
    constant_gain: np.ndarray
    chain: ProductChain
    analysis: ChainAnalysis
    initial_memory: int

    def to_json(self, pomdp, memory_names=None):
        chain = self.chain
        def node_name(i):
            k, m = chain.split(i)
            mem = memory_names[m] if memory_names else m
            return [pomdp.states[k], mem]
        return {
            "overall_gain": self.overall,
            "per_state_gain": {pomdp.states[k]: float(g) for k, g in enumerate(self.per_state_gain)},
            "constant_gain": {pomdp.states[k]: bool(c) for k, c in enumerate(self.constant_gain)},
            "classes": [{"nodes": [node_name(i) for i in cls], "gain": float(g),
                         "stationary": [float(x) for x in pi]}
                        for cls, g, pi in zip(self.analysis.classes, self.analysis.class_gains,
                                              self.analysis.stationary)],
        }


def product_chain(pomdp, sigma):
    nk, nm = pomdp.n_states, sigma.n_memory
    P = np.zeros((nk, nm, nk, nm))
    r = np.empty((nk, nm))
    for m in range(nm):
        a = sigma.act[m]
        r[:, m] = pomdp.reward[:, a]
        for s in range(pomdp.n_signals):
            P[:, m, :, sigma.update[m, a, s]] += pomdp.kernel[:, a, :, s]
    n = nk * nm
    return ProductChain(nk, nm, P.reshape(n, n), r.reshape(n))


def _closure(adj):
    reach = adj | np.eye(adj.shape[0], dtype=bool)
    while True:
        f = reach.astype(float)
        nxt = (f @ f) > 0
        if np.array_equal(nxt, reach):
            return reach
        reach = nxt


def _solve(A, B, what):
    lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < PIVOT_TOL:
        raise SingularSystemError(f"singular system while solving for {what}")
    return scipy.linalg.lu_solve((lu, piv), B, check_finite=False)


def analyze_matrix(P, r, tol=EDGE_TOL):
    """Recurrent-class decomposition of a row-stochastic matrix with node rewards."""
    n = P.shape[0]
    adj = P > tol
    reach = _closure(adj)
    # i is recurrent iff everything it reaches reaches back
    recurrent = ~np.any(reach & ~reach.T, axis=1)
    classes = {}
    for i in np.flatnonzero(recurrent):
        classes.setdefault(reach[i].tobytes(), []).append(int(i))
    classes = sorted(tuple(c) for c in classes.values())
    pis, gains = [], []
    for c, cls in enumerate(classes):
        idx = list(cls)
        Pc = P[np.ix_(idx, idx)]
        A = (Pc - np.eye(len(idx))).T
        A[-1, :] = 1.0
        b = np.zeros(len(idx))
        b[-1] = 1.0
        pi = _solve(A, b, f"the stationary distribution of class {c}")
        pis.append(pi)
        gains.append(float(pi @ r[idx]))
    gains = np.array(gains)
    absorb = np.zeros((n, len(classes)))
    for c, cls in enumerate(classes):
        absorb[list(cls), c] = 1.0
    transient = np.flatnonzero(~recurrent)
    if transient.size and classes:
        Q = P[np.ix_(transient, transient)]
        R = np.stack([P[np.ix_(transient, list(cls))].sum(axis=1) for cls in classes], axis=1)
        absorb[transient] = _solve(np.eye(transient.size) - Q, R, "absorption probabilities")
    return ChainAnalysis(tuple(classes), tuple(pis), gains, absorb, absorb @ gains, reach)


def analyze(chain):
    return analyze_matrix(chain.transition, chain.reward)


def evaluate(pomdp, p1, sigma):
    """Exact long-run average payoff of ``sigma`` from belief ``p1``.

    Returns an :class:`EvaluationResult` with the gain from every initial
    state (memory starting at ``sigma.initial``), the ``p1``-average, and a
    per-state flag telling whether the limit is almost surely constant.
    """
    p1 = check_belief(pomdp, p1)
    chain = product_chain(pomdp, sigma)
    an = analyze(chain)
    nodes = [chain.node(k, sigma.initial) for k in range(pomdp.n_states)]
    per_state = an.node_gains[nodes]
    flags = []
    for node in nodes:
        gs = an.class_gains[an.reachable_classes(node)]
        flags.append(bool(gs.max() - gs.min() <= GAIN_TOL))
    return EvaluationResult(per_state, float(p1 @ per_state), np.array(flags), chain, an,
                            sigma.initial)


def gain(pomdp, p1, sigma):
    """Overall gain only, restricted to nodes reachable from the support of ``p1``."""
    p1 = np.asarray(p1, dtype=float)
    chain = product_chain(pomdp, sigma)
    P = chain.transition
    start = [chain.node(int(k), sigma.initial) for k in np.flatnonzero(p1 > 0)]
    seen = np.zeros(chain.n_nodes, dtype=bool)
    seen[start] = True
    frontier = start
    adj = P > EDGE_TOL
    while frontier:
        nxt = np.flatnonzero(adj[frontier].any(axis=0) & ~seen)
        seen[nxt] = True
        frontier = list(nxt)
    idx = np.flatnonzero(seen)
    an = analyze_matrix(P[np.ix_(idx, idx)], chain.reward[idx])
    pos = {int(i): j for j, i in enumerate(idx)}
    return float(sum(p1[k] * an.node_gains[pos[chain.node(int(k), sigma.initial)]]
                     for k in np.flatnonzero(p1 > 0)))


def has_constant_gain(result, support):
    return all(bool(result.constant_gain[k]) for k in support)


def gain_partition(result, support, tol=GAIN_TOL):
    """Group ``support`` by per-state gain; blocks ordered by decreasing gain."""
    if not has_constant_gain(result, support):
        raise ValueError("per-state gains are not almost surely constant on the support")
    groups = []
    for k in sorted(support):
        g = float(result.per_state_gain[k])
        for grp in groups:
            if abs(grp[0] - g) <= tol:
                grp[1].append(k)
                break
        else:
            groups.append([g, [k]])
    groups.sort(key=lambda x: -x[0])
    return GainPartition(tuple(frozenset(ks) for _, ks in groups),
                         tuple(min(max(g, 0.0), 1.0) for g, _ in groups))


def node_distribution(pomdp, sigma, p1):
    x = np.zeros(pomdp.n_states * sigma.n_memory)
    x[np.arange(pomdp.n_states) * sigma.n_memory + sigma.initial] = p1
    return x


def finite_horizon_expectation(pomdp, start, sigma, n):
    """Exact expected ``n``-stage average reward.

    ``start`` is either a belief over states (memory starts at
    ``sigma.initial``) or a distribution over product nodes.
    """
    if n < 1:
        raise ValueError("horizon must be >= 1")
    chain = product_chain(pomdp, sigma)
    x = np.asarray(start, dtype=float)
    if x.shape == (pomdp.n_states,):
        x = node_distribution(pomdp, sigma, x)
    total = 0.0
    for _ in range(n):
        total += x @ chain.reward
        x = x @ chain.transition
    return total / n


def stage_totals(chain, n):
    """Expected ``t``-stage total reward from every node, for ``t = 1..n`` (shape ``(n, nodes)``)."""
    out = np.empty((n, chain.n_nodes))
    v = np.zeros(chain.n_nodes)
    for t in range(n):
        v = chain.reward + chain.transition @ v
        out[t] = v
    return out
