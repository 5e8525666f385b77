"""Anytime two-sided approximation of the long-run value.

Lower bounds come from enumerating deterministic transducers of growing
memory and evaluating each one exactly; any evaluated gain is achieved by a
concrete strategy.  The upper bound is the value of the fully observed MDP
on the same states, which an informed controller can always reach.  Only the
lower side converges in general, so the approximation problem is a
semi-decision procedure: ``decide_promise`` may answer ``UNKNOWN``.
"""

import enum
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .chain import analyze_matrix, gain
from .model import check_belief
from .strategy import transducer

DECISION_TOL = 1e-9
IMPROVE_TOL = 1e-10
EXHAUSTIVE_LIMIT = 20


# -- enumeration ---------------------------------------------------------------

def _canonical_tables(n_actions, n_signals, n):
    """Yield ``(act, targets)`` for canonical transducers with exactly ``n`` states.

    States are numbered in breadth-first discovery order along exercised
    edges; tables come out in lexicographic order of the flattened sequence
    ``act[0], targets[0][0..], act[1], ...``.
    """
    act = [0] * n
    targets = [[0] * n_signals for _ in range(n)]
    total_edges = n * n_signals

    def edges(i, s, found):
        if s == n_signals:
            yield from state(i + 1, found)
            return
        remaining = total_edges - (i * n_signals + s)
        # every undiscovered state needs one of the remaining edges
        if n - found > remaining:
            return
        for t in range(min(found + 1, n)):
            targets[i][s] = t
            yield from edges(i, s + 1, found + (t == found))

    def state(i, found):
        if i == n:
            if found == n:
                yield tuple(act), tuple(tuple(row) for row in targets)
            return
        if i >= found:
            return
        for a in range(n_actions):
            act[i] = a
            yield from edges(i, 0, found)

    yield from state(0, 1)


def enumerate_transducers(pomdp, memory_size):
    """Every canonical transducer with ``memory_size`` reachable memory states.

    Initial state is 0, memory states are numbered in breadth-first order of
    first discovery over signals in declaration order, and unexercised update
    entries self-loop.  The stream order is deterministic.
    """
    if memory_size < 1:
        raise ValueError("memory_size must be >= 1")
    na, ns = pomdp.n_actions, pomdp.n_signals
    for act, targets in _canonical_tables(na, ns, memory_size):
        yield transducer(act, targets, na, ns)


def count_transducers(n_actions, n_signals, memory_size):
    return sum(1 for _ in _canonical_tables(n_actions, n_signals, memory_size))


# -- perfect-information upper bound -----------------------------------------

class PolicyIterationCycle(RuntimeError):
    pass


def _mdp(pomdp):
    return pomdp.kernel.sum(axis=3), np.asarray(pomdp.reward, dtype=float)


def _evaluate_policy(P, R, policy):
    idx = np.arange(P.shape[0])
    Pd = P[idx, policy]
    rd = R[idx, policy]
    an = analyze_matrix(Pd, rd)
    g = an.node_gains
    n = len(rd)
    A = np.eye(n) - Pd
    b = rd - g
    for cls in an.classes:
        ref = cls[0]
        A[ref] = 0.0
        A[ref, ref] = 1.0
        b[ref] = 0.0
    h = np.linalg.solve(A, b)
    return g, h


def _argmax_keep(values, current, tol):
    best = values.max()
    if values[current] >= best - tol:
        return current
    return int(np.flatnonzero(values >= best - tol)[0])


def mdp_policy_iteration(P, R, max_iter=10_000):
    """Multichain policy iteration on a fully observed average-reward MDP.

    ``P`` has shape ``(K, A, K)`` and ``R`` shape ``(K, A)``.  Improvement is
    on the gain first, then on the bias among gain maximisers; the current
    action is kept whenever it is a maximiser, otherwise the smallest
    maximising action index is taken.  Returns ``(gains, policy)``.
    """
    nk, na = R.shape
    policy = np.array([int(np.argmax(R[k])) for k in range(nk)])
    seen = set()
    for _ in range(max_iter):
        key = policy.tobytes()
        if key in seen:
            raise PolicyIterationCycle("policy iteration revisited a policy")
        seen.add(key)
        g, h = _evaluate_policy(P, R, policy)
        q_gain = P @ g                       # (K, A)
        new = np.array([_argmax_keep(q_gain[k], policy[k], IMPROVE_TOL) for k in range(nk)])
        if np.array_equal(new, policy):
            q_bias = R + P @ h
            new = policy.copy()
            for k in range(nk):
                ok = np.flatnonzero(q_gain[k] >= q_gain[k].max() - IMPROVE_TOL)
                vals = np.full(na, -np.inf)
                vals[ok] = q_bias[k, ok]
                new[k] = _argmax_keep(vals, policy[k], IMPROVE_TOL)
            if np.array_equal(new, policy):
                return g, policy
        policy = new
    raise PolicyIterationCycle(f"no convergence after {max_iter} iterations")


def mdp_exhaustive(P, R):
    """Per-state optimal gains by enumerating every deterministic stationary policy."""
    nk, na = R.shape
    best = np.full(nk, -np.inf)
    best_policy = None
    for policy in itertools.product(range(na), repeat=nk):
        policy = np.array(policy)
        idx = np.arange(nk)
        g = analyze_matrix(P[idx, policy], R[idx, policy]).node_gains
        if best_policy is None or np.any(g > best + IMPROVE_TOL):
            best_policy = policy
        best = np.maximum(best, g)
    return best, best_policy


def perfect_info_upper_bound(pomdp, p1, with_policy=False):
    """Value of the fully observed MDP averaged over ``p1``; never below the POMDP value."""
    p1 = check_belief(pomdp, p1)
    P, R = _mdp(pomdp)
    try:
        g, policy = mdp_policy_iteration(P, R)
    except PolicyIterationCycle:
        if pomdp.n_states * pomdp.n_actions > EXHAUSTIVE_LIMIT:
            raise
        g, policy = mdp_exhaustive(P, R)
    u = float(p1 @ g)
    return (u, policy) if with_policy else u


# -- anytime loop ----------------------------------------------------------------

class Status(str, enum.Enum):
    CONVERGED = "converged"
    STOPPED = "stopped"
    BUDGET_CANDIDATES = "budget_candidates"
    BUDGET_MEMORY = "budget_memory"
    BUDGET_TIME = "budget_time"


@dataclass
class ApproxReport:
    lower_bound: float
    upper_bound: float
    witness: object
    witness_memory: int
    candidates_evaluated: int
    memory_sizes_exhausted: list
    status: Status
    epsilon: float
    elapsed: float = field(default=0.0, compare=False)

    @property
    def gap(self):
        return self.upper_bound - self.lower_bound

    def to_json(self, pomdp, with_time=False):
        from .strategy import strategy_to_dict
        out = {"lower_bound": self.lower_bound, "upper_bound": self.upper_bound,
               "gap": self.gap, "epsilon": self.epsilon, "status": self.status.value,
               "witness": strategy_to_dict(self.witness, pomdp) if self.witness else None,
               "witness_memory": self.witness_memory,
               "candidates_evaluated": self.candidates_evaluated,
               "memory_sizes_exhausted": list(self.memory_sizes_exhausted)}
        if with_time:
            out["elapsed_seconds"] = self.elapsed
        return out


def anytime_approximate(pomdp, p1, epsilon, max_memory=None, max_candidates=None,
                        max_seconds=None, stop=None, upper=None):
    """Enumerate transducers by memory size until ``U - L <= epsilon`` or a budget trips.

    ``stop(L, U)`` ends the run early (status ``STOPPED``) when it returns
    true; it is checked after the upper bound is known and after every
    improvement of ``L``.  At least one of the budgets should be finite,
    otherwise the loop only ends on convergence.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    p1 = check_belief(pomdp, p1)
    t0 = time.perf_counter()
    U = perfect_info_upper_bound(pomdp, p1) if upper is None else upper
    L, witness, witness_mem = -np.inf, None, 0
    count = 0
    exhausted = []

    def report(status):
        return ApproxReport(float(L) if witness is not None else 0.0, float(U), witness,
                            witness_mem, count, exhausted, status, epsilon,
                            time.perf_counter() - t0)

    if stop is not None and stop(-np.inf, U):
        return report(Status.STOPPED)
    for size in itertools.count(1):
        if max_memory is not None and size > max_memory:
            return report(Status.BUDGET_MEMORY)
        for sigma in enumerate_transducers(pomdp, size):
            if max_candidates is not None and count >= max_candidates:
                return report(Status.BUDGET_CANDIDATES)
            if max_seconds is not None and time.perf_counter() - t0 > max_seconds:
                return report(Status.BUDGET_TIME)
            count += 1
            g = gain(pomdp, p1, sigma)
            if g > L + 1e-12:
                L, witness, witness_mem = g, sigma, size
                if U - L <= epsilon:
                    return report(Status.CONVERGED)
                if stop is not None and stop(L, U):
                    return report(Status.STOPPED)
        exhausted.append(size)


class Verdict(str, enum.Enum):
    AT_LEAST = "AtLeastXPlusEps"
    AT_MOST = "AtMostXMinusEps"
    UNKNOWN = "Unknown"

    @property
    def exit_code(self):
        return {"AtLeastXPlusEps": 0, "AtMostXMinusEps": 1, "Unknown": 2}[self.value]


@dataclass(frozen=True)
class PromiseQuery:
    x: float
    epsilon: float
    max_memory: int = None
    max_candidates: int = None
    max_seconds: float = None

    def __post_init__(self):
        if not 0.0 <= self.x <= 1.0:
            raise ValueError("x must lie in [0,1]")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def decide_promise(pomdp, p1, query, with_report=False):
    """Decide which side of ``x +/- epsilon`` the value lies on, under the promise.

    ``AT_LEAST`` once an exactly evaluated strategy beats ``x - epsilon``;
    ``AT_MOST`` once the upper bound is below ``x + epsilon``; ``UNKNOWN``
    when the budget runs out first.  Comparisons carry a 1e-9 margin so that
    round-off can never flip a verdict.
    """
    lo = query.x - query.epsilon + DECISION_TOL
    hi = query.x + query.epsilon - DECISION_TOL

    def stop(L, U):
        return L > lo or U < hi

    rep = anytime_approximate(pomdp, p1, query.epsilon, max_memory=query.max_memory,
                              max_candidates=query.max_candidates,
                              max_seconds=query.max_seconds, stop=stop)
    if rep.witness is not None and rep.lower_bound > lo:
        verdict = Verdict.AT_LEAST
    elif rep.upper_bound < hi:
        verdict = Verdict.AT_MOST
    else:
        verdict = Verdict.UNKNOWN
    return (verdict, rep) if with_report else verdict
