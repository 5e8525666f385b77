"""Finite-memory block strategies built from super-supports.

Given a base transducer whose per-state gains are almost surely constant on
the support of a target belief, group those states by gain and track, for
each group, the set of states reachable after the current history (the
super-support).  The block strategy replays the base strategy for a fixed
block length from a representative history of the current super-support,
then jumps to the representative of the super-support reached at the end of
the block.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .belief import SuperSupport, bayes_update, propagate_supports, support
from .chain import (evaluate, gain_partition, has_constant_gain, node_distribution,
                    product_chain)
from .strategy import FiniteMemoryStrategy

INDEX_CAP = 10_000
BLOCK_LENGTH_CAP = 100_000


class BlockConstructionError(RuntimeError):
    pass


class BlockLengthCapExceeded(BlockConstructionError):
    def __init__(self, cap, worst):
        i, j, k, defect = worst
        super().__init__(f"no block length <= {cap} works; worst defect {defect:.3g} "
                         f"for group {i}, index {j}, state {k}")
        self.cap = cap
        self.worst = worst


@dataclass(frozen=True)
class IndexEntry:
    blocks: SuperSupport
    history: tuple      # representative history h^j
    memory: int         # base memory state after h^j


@dataclass(frozen=True, eq=False)
class BlockStrategySpec:
    base: FiniteMemoryStrategy
    partition: object
    p_star: np.ndarray
    block_length: int
    index_set: tuple

    def lookup(self):
        return {e.blocks.blocks: j for j, e in enumerate(self.index_set)}

    def jump(self, pomdp, j, history):
        """Index of the super-support reached from entry ``j`` after ``history``."""
        entry = self.index_set[j]
        blocks = entry.blocks.blocks
        m = entry.memory
        for a, s in history:
            if a != self.base.act[m]:
                raise ValueError("history is inconsistent with the base strategy")
            blocks = propagate_supports(pomdp, blocks, a, s)
            m = int(self.base.update[m, a, s])
        try:
            return self.lookup()[blocks]
        except KeyError:
            raise BlockConstructionError("index set is not closed under jump") from None


def super_support_index(pomdp, base, partition, cap=INDEX_CAP):
    """All super-supports reachable after positive-probability histories.

    Breadth-first over pairs (base memory, super-support), one signal at a
    time; each distinct super-support keeps the first (shortest) history that
    reaches it as representative.  Index 0 is the empty history.
    """
    start = (base.initial, tuple(partition.blocks))
    seen = {start: ()}
    queue = deque([start])
    entries = [IndexEntry(SuperSupport(start[1]), (), base.initial)]
    known = {start[1]}
    while queue:
        m, blocks = queue.popleft()
        h = seen[(m, blocks)]
        a = base.act[m]
        for s in range(pomdp.n_signals):
            nxt = propagate_supports(pomdp, blocks, a, s)
            if not any(nxt):
                continue
            key = (int(base.update[m, a, s]), nxt)
            if key in seen:
                continue
            seen[key] = h + ((a, s),)
            queue.append(key)
            if nxt not in known:
                known.add(nxt)
                entries.append(IndexEntry(SuperSupport(nxt), seen[key], key[0]))
                if len(entries) > cap:
                    raise BlockConstructionError(f"more than {cap} distinct super-supports")
    return tuple(entries)


def choose_block_length(pomdp, base, partition, index_set, epsilon, cap=BLOCK_LENGTH_CAP):
    """Smallest block length for which every replay is epsilon-good over one block.

    For every index entry ``j``, group ``i`` and state ``k`` in its i-th
    block, the exact expected one-block average of the base strategy started
    in memory ``m_j`` from ``k`` must be at least ``gain_i - epsilon``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    chain = product_chain(pomdp, base)
    reqs = []
    for j, e in enumerate(index_set):
        for i, (blk, g) in enumerate(zip(e.blocks.blocks, partition.gains)):
            for k in sorted(blk):
                reqs.append((i, j, k, chain.node(k, e.memory), g - epsilon))
    nodes = np.array([r[3] for r in reqs], dtype=np.int64)
    thresholds = np.array([r[4] for r in reqs])
    v = np.zeros(chain.n_nodes)
    worst = None
    for n in range(1, cap + 1):
        v = chain.reward + chain.transition @ v
        slack = v[nodes] / n - thresholds
        if slack.min() >= 0:
            return n
        w = int(np.argmin(slack))
        worst = (*reqs[w][:3], float(-slack[w]))
    raise BlockLengthCapExceeded(cap, worst)


def make_block_spec(pomdp, base, p_star, epsilon, block_length=None,
                    cap=BLOCK_LENGTH_CAP, index_cap=INDEX_CAP):
    """Check the constant-gain precondition and assemble a :class:`BlockStrategySpec`."""
    p_star = np.asarray(p_star, dtype=float)
    supp = support(p_star)
    result = evaluate(pomdp, p_star, base)
    if not has_constant_gain(result, supp):
        raise BlockConstructionError("base strategy does not have almost surely constant "
                                     "per-state gains on the support of the target belief")
    partition = gain_partition(result, supp)
    index_set = super_support_index(pomdp, base, partition, index_cap)
    if block_length is None:
        block_length = choose_block_length(pomdp, base, partition, index_set, epsilon, cap)
    return BlockStrategySpec(base, partition, p_star, int(block_length), index_set)


def _block_name(pomdp, c, mem_name, blocks):
    parts = ["{" + ",".join(pomdp.states[k] for k in sorted(b)) + "}" for b in blocks]
    return f"c{c}/{mem_name}/" + "|".join(parts)


def build_block_strategy(pomdp, spec, with_layout=False):
    """Transducer of the block strategy described by ``spec``.

    Memory is ``(stage in block, base memory, running super-support)``; at the
    start of each block the running super-support equals an index entry,
    whose representative memory seeds the base replay.  Only memory nodes
    reachable along positive-probability histories are created.

    With ``with_layout`` also return the list of ``(c, base_memory, blocks)``
    per memory state.
    """
    base, n0 = spec.base, spec.block_length
    lookup = spec.lookup()
    first = spec.index_set[0]
    start = (0, first.memory, first.blocks.blocks)
    index = {start: 0}
    layout = [start]
    edges = []
    i = 0
    while i < len(layout):
        c, m, blocks = layout[i]
        a = base.act[m]
        row = []
        for s in range(pomdp.n_signals):
            nxt_blocks = propagate_supports(pomdp, blocks, a, s)
            if not any(nxt_blocks):
                row.append(None)
                continue
            nxt_mem = int(base.update[m, a, s])
            if c + 1 == n0:
                if nxt_blocks not in lookup:
                    raise BlockConstructionError("index set is not closed under jump")
                e = spec.index_set[lookup[nxt_blocks]]
                key = (0, e.memory, e.blocks.blocks)
            else:
                key = (c + 1, nxt_mem, nxt_blocks)
            if key not in index:
                index[key] = len(layout)
                layout.append(key)
            row.append(index[key])
        edges.append((a, row))
        i += 1
    n = len(layout)
    update = np.empty((n, pomdp.n_actions, pomdp.n_signals), dtype=np.int64)
    act = []
    for i, (a, row) in enumerate(edges):
        update[i] = i
        act.append(a)
        for s, t in enumerate(row):
            if t is not None:
                update[i, a, s] = t
    names = [_block_name(pomdp, c, base.memory_states[m], b) for c, m, b in layout]
    sigma = FiniteMemoryStrategy(tuple(names), 0, tuple(act), update)
    if with_layout:
        return sigma, layout
    return sigma


def block_weights(pomdp, spec, sigma, layout, stages):
    """Mass on each group's super-support at the start of blocks ``0..stages``.

    Returns an array ``(stages + 1, r)`` whose row ``s`` is
    the probability that the state at the start of block ``s`` lies in the
    i-th set of the current super-support, under ``sigma`` from ``spec.p_star``.
    """
    chain = product_chain(pomdp, sigma)
    x = node_distribution(pomdp, sigma, spec.p_star)
    n0 = spec.block_length
    r = spec.partition.r
    masks = np.zeros((r, chain.n_nodes), dtype=bool)
    for node_m, (c, _, blocks) in enumerate(layout):
        if c:
            continue
        for i, b in enumerate(blocks):
            for k in b:
                masks[i, chain.node(k, node_m)] = True
    out = np.empty((stages + 1, r))
    for s in range(stages + 1):
        out[s] = masks.astype(float) @ x
        for _ in range(n0):
            x = x @ chain.transition
    return out


def block_averages(pomdp, spec, sigma, blocks):
    """Exact expected average over the first ``S`` whole blocks for ``S = 1..blocks``."""
    chain = product_chain(pomdp, sigma)
    x = node_distribution(pomdp, sigma, spec.p_star)
    n0 = spec.block_length
    total = 0.0
    out = []
    for s in range(blocks):
        for _ in range(n0):
            total += x @ chain.reward
            x = x @ chain.transition
        out.append(total / ((s + 1) * n0))
    return np.array(out)


def _word(pomdp, h):
    return ",".join(f"{pomdp.actions[a]}.{pomdp.signals[s]}" for a, s in h) or "-"


def compose_after_prefix(pomdp, p1, prefix, stages, continuation):
    """Play ``prefix`` for ``stages`` stages, then ``continuation(history)``.

    ``continuation`` maps each positive-probability history of length
    ``stages`` (from ``p1`` under ``prefix``) to a transducer, which starts in
    its own initial memory state.  Returns a single transducer whose first
    memory states form the prefix tree.
    """
    if stages == 0:
        return continuation(())
    tree = []
    pending = deque([((), prefix.initial, np.asarray(p1, dtype=float))])
    while pending:
        h, m, p = pending.popleft()
        tree.append((h, m))
        if len(h) == stages:
            continue
        a = prefix.act[m]
        for s in range(pomdp.n_signals):
            post, _ = bayes_update(pomdp, p, a, s)
            if post is not None:
                pending.append((h + ((a, s),), int(prefix.update[m, a, s]), post))
    inner = [(h, m) for h, m in tree if len(h) < stages]
    position = {h: i for i, (h, _) in enumerate(inner)}
    conts = {}
    total = len(inner)
    for h, _ in tree:
        if len(h) == stages:
            conts[h] = (total, continuation(h))
            total += conts[h][1].n_memory
    update = np.empty((total, pomdp.n_actions, pomdp.n_signals), dtype=np.int64)
    update[:] = np.arange(total)[:, None, None]
    act, names = [], []
    for idx, (h, m) in enumerate(inner):
        a = prefix.act[m]
        act.append(a)
        names.append("pre/" + _word(pomdp, h))
        for s in range(pomdp.n_signals):
            child = h + ((a, s),)
            if child in position:
                update[idx, a, s] = position[child]
            elif child in conts:
                off, sigma = conts[child]
                update[idx, a, s] = off + sigma.initial
    for h, (off, sigma) in conts.items():
        tag = _word(pomdp, h)
        for m in range(sigma.n_memory):
            act.append(sigma.act[m])
            names.append(f"[{tag}]{sigma.memory_states[m]}")
            update[off + m] = np.asarray(sigma.update[m]) + off
    return FiniteMemoryStrategy(tuple(names), 0, tuple(act), update)


@dataclass(frozen=True, eq=False)
class ConditionedBlocks:
    """Block strategies built separately after each history of a short prefix."""
    stages: int
    branches: dict          # history -> (probability, posterior, spec, strategy, layout)
    strategy: FiniteMemoryStrategy


def conditioned_block_strategy(pomdp, p1, base, stages, epsilon, block_length=None):
    """Play ``base`` for ``stages`` stages, then a block strategy per history.

    After each positive-probability history ``h`` the base strategy shifted
    by ``h`` is used as the block base, with the posterior as target belief.
    Conditioning on a short prefix is what makes per-state gains constant on
    the target support for strategies whose early memory still hedges between
    branches.
    """
    branches = {}
    pending = deque([((), np.asarray(p1, dtype=float), 1.0, base.initial)])
    while pending:
        h, p, prob, m = pending.popleft()
        if len(h) == stages:
            shifted = base.with_initial(m)
            spec = make_block_spec(pomdp, shifted, p, epsilon, block_length)
            sigma, layout = build_block_strategy(pomdp, spec, with_layout=True)
            branches[h] = (prob, p, spec, sigma, layout)
            continue
        a = base.act[m]
        for s in range(pomdp.n_signals):
            post, z = bayes_update(pomdp, p, a, s)
            if post is not None:
                pending.append((h + ((a, s),), post, prob * z, int(base.update[m, a, s])))
    composed = compose_after_prefix(pomdp, p1, base, stages, lambda h: branches[h][3])
    return ConditionedBlocks(stages, branches, composed)
