"""POMDP model, validation and the ``.pomdp.json`` file format.

A POMDP is a tuple (states, actions, signals, kernel, reward).  The kernel is
stored dense as an array of shape ``(K, A, K, S)``: ``kernel[k, a, k2, s]`` is
the probability of moving from ``k`` to ``k2`` and emitting ``s`` when ``a`` is
played.  Rewards have shape ``(K, A)``.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import jsonio

VALIDATION_TOL = 1e-9


class PomdpError(ValueError):
    """Raised when a POMDP document cannot be turned into a valid model."""


class PomdpSyntaxError(PomdpError):
    def __init__(self, msg, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(msg + where)
        self.line = line
        self.column = column


class PomdpSemanticError(PomdpError):
    pass


def _frozen(arr, dtype=float):
    arr = np.array(arr, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pomdp:
    states: tuple
    actions: tuple
    signals: tuple
    kernel: np.ndarray
    reward: np.ndarray
    initial_belief: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "signals", tuple(self.signals))
        nk, na, ns = len(self.states), len(self.actions), len(self.signals)
        kernel = _frozen(self.kernel)
        reward = _frozen(self.reward)
        if kernel.shape != (nk, na, nk, ns):
            raise ValueError(f"kernel shape {kernel.shape} != {(nk, na, nk, ns)}")
        if reward.shape != (nk, na):
            raise ValueError(f"reward shape {reward.shape} != {(nk, na)}")
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "reward", reward)
        if self.initial_belief is not None:
            p1 = _frozen(self.initial_belief)
            if p1.shape != (nk,):
                raise ValueError(f"initial belief shape {p1.shape} != {(nk,)}")
            object.__setattr__(self, "initial_belief", p1)

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_actions(self):
        return len(self.actions)

    @property
    def n_signals(self):
        return len(self.signals)

    def state_index(self, name):
        return _lookup(self.states, name, "state")

    def action_index(self, name):
        return _lookup(self.actions, name, "action")

    def signal_index(self, name):
        return _lookup(self.signals, name, "signal")

    def delta(self, state):
        """Dirac belief on ``state`` (index or name)."""
        k = state if isinstance(state, (int, np.integer)) else self.state_index(state)
        p = np.zeros(self.n_states)
        p[k] = 1.0
        return p

    def state_transition(self, action):
        """Signal-marginalised transition matrix ``K x K`` for ``action``."""
        return self.kernel[:, action, :, :].sum(axis=2)

    def with_kernel(self, kernel):
        return Pomdp(self.states, self.actions, self.signals, kernel, self.reward,
                     self.initial_belief)

    def with_reward(self, reward):
        return Pomdp(self.states, self.actions, self.signals, self.kernel, reward,
                     self.initial_belief)

    def __eq__(self, other):
        if not isinstance(other, Pomdp):
            return NotImplemented
        same_p1 = (self.initial_belief is None and other.initial_belief is None) or (
            self.initial_belief is not None and other.initial_belief is not None
            and np.array_equal(self.initial_belief, other.initial_belief))
        return (self.states == other.states and self.actions == other.actions
                and self.signals == other.signals
                and np.array_equal(self.kernel, other.kernel)
                and np.array_equal(self.reward, other.reward) and same_p1)

    def __repr__(self):
        return (f"Pomdp(states={list(self.states)}, actions={list(self.actions)}, "
                f"signals={list(self.signals)})")


def _lookup(names, name, what):
    try:
        return names.index(name)
    except ValueError:
        raise KeyError(f"unknown {what} {name!r}") from None


@dataclass(frozen=True)
class Violation:
    kind: str          # "row_sum" | "negative" | "reward_range" | "names"
    location: tuple
    defect: float
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return bool(self.violations)

    def __len__(self):
        return len(self.violations)

    def to_json(self):
        return [{"kind": v.kind, "location": list(v.location), "defect": v.defect,
                 "message": v.message} for v in self.violations]


def _name_violations(names, what):
    out = []
    seen = set()
    for i, name in enumerate(names):
        if not isinstance(name, str) or not name:
            out.append(Violation("names", (what, i), 1.0, f"{what} #{i} has an empty name"))
        elif name in seen:
            out.append(Violation("names", (what, i), 1.0, f"duplicate {what} name {name!r}"))
        seen.add(name)
    return out


def validate(pomdp, tol=VALIDATION_TOL):
    """Return every invariant violation of ``pomdp`` (empty report when valid)."""
    out = []
    out += _name_violations(pomdp.states, "state")
    out += _name_violations(pomdp.actions, "action")
    out += _name_violations(pomdp.signals, "signal")
    if not (pomdp.states and pomdp.actions and pomdp.signals):
        out.append(Violation("names", (), 1.0, "states, actions and signals must be nonempty"))
    for k, a in np.ndindex(pomdp.n_states, pomdp.n_actions):
        row = pomdp.kernel[k, a]
        sk, sa = pomdp.states[k], pomdp.actions[a]
        neg = row.min() if row.size else 0.0
        if neg < 0:
            out.append(Violation("negative", (sk, sa), float(-neg),
                                 f"q({sk},{sa}) has a negative entry {neg!r}"))
        defect = abs(float(row.sum()) - 1.0)
        if defect > tol:
            out.append(Violation("row_sum", (sk, sa), defect,
                                 f"q({sk},{sa}) sums to {row.sum()!r}"))
        g = float(pomdp.reward[k, a])
        if not 0.0 <= g <= 1.0:
            out.append(Violation("reward_range", (sk, sa), max(-g, g - 1.0),
                                 f"g({sk},{sa}) = {g!r} outside [0,1]"))
    if pomdp.initial_belief is not None:
        p1 = pomdp.initial_belief
        defect = abs(float(p1.sum()) - 1.0)
        if p1.min() < 0 or defect > tol:
            out.append(Violation("row_sum", ("initial_belief",), max(defect, float(-p1.min())),
                                 "initial belief is not a probability vector"))
    return ValidationReport(tuple(out))


def is_blind(pomdp):
    return pomdp.n_signals == 1


def check_belief(pomdp, belief, tol=VALIDATION_TOL):
    p = np.asarray(belief, dtype=float)
    if p.shape != (pomdp.n_states,):
        raise ValueError(f"belief has shape {p.shape}, expected ({pomdp.n_states},)")
    if p.min() < 0 or abs(p.sum() - 1.0) > tol:
        raise ValueError(f"belief {p} is not a probability vector")
    return p


def parse_number(text):
    """Parse a decimal or ``p/q`` string (or a JSON number) exactly, then round to float."""
    if isinstance(text, bool):
        raise ValueError(f"not a number: {text!r}")
    if isinstance(text, (int, float)):
        return float(Fraction(text))
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a number: {text!r}") from None


def _names(doc, key):
    names = doc.get(key)
    if not isinstance(names, list) or not names:
        raise PomdpSemanticError(f"{key!r} must be a nonempty list of names")
    for n in names:
        if not isinstance(n, str) or not n:
            raise PomdpSemanticError(f"{key!r} entries must be nonempty strings, got {n!r}")
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise PomdpSemanticError(f"duplicate names in {key!r}: {dupes}")
    return names


def _index(names, name, what):
    if name not in names:
        raise PomdpSemanticError(f"unknown {what} {name!r}")
    return names.index(name)


def _prob(entry, key, where):
    if key not in entry:
        raise PomdpSemanticError(f"{where}: missing {key!r}")
    try:
        return parse_number(entry[key])
    except ValueError as exc:
        raise PomdpSemanticError(f"{where}: {exc}") from None


def pomdp_from_dict(doc):
    if not isinstance(doc, dict):
        raise PomdpSemanticError("top-level document must be an object")
    states = _names(doc, "states")
    actions = _names(doc, "actions")
    signals = _names(doc, "signals")
    nk, na, ns = len(states), len(actions), len(signals)
    kernel = np.zeros((nk, na, nk, ns))
    seen = set()
    for i, t in enumerate(doc.get("transitions", [])):
        where = f"transitions[{i}]"
        if not isinstance(t, dict):
            raise PomdpSemanticError(f"{where} must be an object")
        try:
            key = (_index(states, t.get("from"), "state"), _index(actions, t.get("action"), "action"),
                   _index(states, t.get("to"), "state"), _index(signals, t.get("signal"), "signal"))
        except PomdpSemanticError as exc:
            raise PomdpSemanticError(f"{where}: {exc}") from None
        if key in seen:
            raise PomdpSemanticError(f"{where}: duplicate transition entry")
        seen.add(key)
        kernel[key] = _prob(t, "prob", where)
    reward = np.zeros((nk, na))
    seen = set()
    for i, r in enumerate(doc.get("rewards", [])):
        where = f"rewards[{i}]"
        if not isinstance(r, dict):
            raise PomdpSemanticError(f"{where} must be an object")
        try:
            key = (_index(states, r.get("state"), "state"), _index(actions, r.get("action"), "action"))
        except PomdpSemanticError as exc:
            raise PomdpSemanticError(f"{where}: {exc}") from None
        if key in seen:
            raise PomdpSemanticError(f"{where}: duplicate reward entry")
        seen.add(key)
        reward[key] = _prob(r, "value", where)
    p1 = None
    if "initial_belief" in doc:
        p1 = np.zeros(nk)
        for i, e in enumerate(doc["initial_belief"]):
            where = f"initial_belief[{i}]"
            try:
                k = _index(states, e.get("state"), "state")
            except (PomdpSemanticError, AttributeError) as exc:
                raise PomdpSemanticError(f"{where}: {exc}") from None
            p1[k] += _prob(e, "prob", where)
    pomdp = Pomdp(states, actions, signals, kernel, reward, p1)
    report = validate(pomdp)
    if report:
        raise PomdpSemanticError("; ".join(v.message for v in report.violations))
    return pomdp


def parse_pomdp(text):
    """Parse a ``.pomdp.json`` document into a validated :class:`Pomdp`.

    Index order of states, actions and signals is their declaration order.
    Probabilities and rewards may be decimals or ``"p/q"`` fractions; rows are
    checked against a 1e-9 tolerance but never renormalised.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PomdpSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    return pomdp_from_dict(doc)


def load_pomdp(path):
    with open(path, encoding="utf-8") as fh:
        return parse_pomdp(fh.read())


def pomdp_to_dict(pomdp):
    doc = {
        "states": list(pomdp.states),
        "actions": list(pomdp.actions),
        "signals": list(pomdp.signals),
        "transitions": [],
        "rewards": [],
    }
    for k, a, k2, s in zip(*np.nonzero(pomdp.kernel)):
        doc["transitions"].append({
            "from": pomdp.states[k], "action": pomdp.actions[a], "to": pomdp.states[k2],
            "signal": pomdp.signals[s], "prob": repr(float(pomdp.kernel[k, a, k2, s]))})
    for k, a in zip(*np.nonzero(pomdp.reward)):
        doc["rewards"].append({"state": pomdp.states[k], "action": pomdp.actions[a],
                               "value": repr(float(pomdp.reward[k, a]))})
    if pomdp.initial_belief is not None:
        doc["initial_belief"] = [{"state": pomdp.states[k], "prob": repr(float(p))}
                                 for k, p in enumerate(pomdp.initial_belief) if p != 0]
    return doc


def render_pomdp(pomdp):
    """Canonical text rendering; ``parse_pomdp(render_pomdp(p)) == p``."""
    return jsonio.dumps(pomdp_to_dict(pomdp), indent=1) + "\n"


def parse_belief(pomdp, text):
    """Parse ``"k1:1/4,k2:3/4"`` into a belief vector."""
    p = np.zeros(pomdp.n_states)
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, sep, prob = item.rpartition(":")
        if not sep:
            raise ValueError(f"belief entry {item!r} is not 'state:prob'")
        p[pomdp.state_index(name.strip())] += parse_number(prob)
    return check_belief(pomdp, p)
