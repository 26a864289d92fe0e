"""Markov chains, MDPs, finite-memory strategies and their products.

All probabilities are exact ``fractions.Fraction`` values. State, action and
proposition names are strings in files; internally states and actions are
interned to dense integers in declaration order, and that order is the
tie-breaker for every enumeration in the package.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from .errors import InputError, ModelError

Rational = Fraction


def parse_rational(text) -> Fraction:
    """Parse ``"num/den"``, ``"1"`` or ``"0"`` (ints are accepted too)."""
    if isinstance(text, bool):
        raise ModelError(f"not a rational: {text!r}")
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise ModelError(f"probabilities must be strings like \"1/2\", got {text!r}")
    s = text.strip()
    if "." in s or "e" in s.lower():
        raise ModelError(f"decimal probabilities are not accepted: {text!r}")
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise ModelError(f"not a rational: {text!r}") from None


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


class Distribution(Mapping):
    """Finite distribution over integer targets with exact weights.

    Entries are kept sorted by target; zero weights are dropped.
    """

    __slots__ = ("_items", "_map")

    def __init__(self, weights: Mapping[int, Fraction] | Iterable[Tuple[int, Fraction]]):
        pairs = weights.items() if isinstance(weights, Mapping) else weights
        acc: Dict[int, Fraction] = {}
        for t, p in pairs:
            p = Fraction(p)
            if p < 0 or p > 1:
                raise ModelError(f"probability {format_rational(p)} outside [0,1]")
            if p:
                acc[t] = acc.get(t, Fraction(0)) + p
        total = sum(acc.values(), Fraction(0))
        if total != 1:
            raise ModelError(f"distribution sum ≠ 1 (got {format_rational(total)})")
        self._items = tuple(sorted(acc.items()))
        self._map = dict(self._items)

    def __getitem__(self, key):
        return self._map[key]

    def __iter__(self):
        return (t for t, _ in self._items)

    def __len__(self):
        return len(self._items)

    def items(self):
        return self._items

    def __eq__(self, other):
        if isinstance(other, Distribution):
            return self._items == other._items
        return NotImplemented

    def __hash__(self):
        return hash(self._items)

    def __repr__(self):
        body = ", ".join(f"{t}: {format_rational(p)}" for t, p in self._items)
        return f"Distribution({{{body}}})"


@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite MDP; every (state, action) pair has a distribution."""

    states: Tuple[str, ...]
    actions: Tuple[str, ...]
    initial: int
    props: Tuple[str, ...]
    labels: Tuple[frozenset, ...]
    trans: Tuple[Tuple[Distribution, ...], ...]
    sink: Optional[int] = None
    _sindex: Dict[str, int] = field(default_factory=dict, repr=False)
    _aindex: Dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        _check_names("state", self.states)
        _check_names("action", self.actions)
        if not self.actions:
            raise ModelError("an MDP needs at least one action")
        self._sindex.update({s: i for i, s in enumerate(self.states)})
        self._aindex.update({a: i for i, a in enumerate(self.actions)})
        n = len(self.states)
        if not 0 <= self.initial < n:
            raise ModelError("initial state is not declared")
        if len(self.labels) != n or len(self.trans) != n:
            raise ModelError("labels/transitions must cover every state")
        props = set(self.props)
        for s, lab in enumerate(self.labels):
            extra = set(lab) - props
            if extra:
                raise ModelError(f"state {self.states[s]}: labels {sorted(extra)} not in props")
        for s, row in enumerate(self.trans):
            if len(row) != len(self.actions):
                raise ModelError(f"state {self.states[s]}: missing action rows")
            for a, d in enumerate(row):
                if not isinstance(d, Distribution):
                    raise ModelError("transitions must be Distribution objects")
                for t in d:
                    if not 0 <= t < n:
                        raise ModelError(
                            f"({self.states[s]},{self.actions[a]}): undeclared target {t}")

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def state_index(self, name: str) -> int:
        try:
            return self._sindex[name]
        except KeyError:
            raise ModelError(f"undeclared state {name!r}") from None

    def action_index(self, name: str) -> int:
        try:
            return self._aindex[name]
        except KeyError:
            raise ModelError(f"undeclared action {name!r}") from None

    def succ(self, s: int, a: int):
        """Positive-probability successors of (s, a) as ((target, prob), ...)."""
        return self.trans[s][a].items()

    def has_label(self, s: int, prop: str) -> bool:
        return prop in self.labels[s]


@dataclass(frozen=True, eq=False)
class Mc:
    """Finite Markov chain."""

    states: Tuple[str, ...]
    initial: int
    props: Tuple[str, ...]
    labels: Tuple[frozenset, ...]
    trans: Tuple[Distribution, ...]
    _sindex: Dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        _check_names("state", self.states)
        self._sindex.update({s: i for i, s in enumerate(self.states)})
        n = len(self.states)
        if not 0 <= self.initial < n:
            raise ModelError("initial state is not declared")
        if len(self.labels) != n or len(self.trans) != n:
            raise ModelError("labels/transitions must cover every state")
        props = set(self.props)
        for s, lab in enumerate(self.labels):
            extra = set(lab) - props
            if extra:
                raise ModelError(f"state {self.states[s]}: labels {sorted(extra)} not in props")
        for s, d in enumerate(self.trans):
            if not isinstance(d, Distribution):
                raise ModelError("transitions must be Distribution objects")
            for t in d:
                if not 0 <= t < n:
                    raise ModelError(f"{self.states[s]}: undeclared target {t}")

    @property
    def n_states(self) -> int:
        return len(self.states)

    def state_index(self, name: str) -> int:
        try:
            return self._sindex[name]
        except KeyError:
            raise ModelError(f"undeclared state {name!r}") from None

    def succ(self, s: int):
        return self.trans[s].items()

    def has_label(self, s: int, prop: str) -> bool:
        return prop in self.labels[s]

    def as_mdp(self, action: str = "tau") -> Mdp:
        """View the chain as a one-action MDP."""
        return Mdp(self.states, (action,), self.initial, self.props, self.labels,
                   tuple((d,) for d in self.trans))

    def distribution(self, name: str) -> Dict[str, Fraction]:
        """Outgoing distribution of a state, keyed by state names."""
        return {self.states[t]: p for t, p in self.trans[self.state_index(name)].items()}


def _check_names(kind, names):
    if len(set(names)) != len(names):
        raise ModelError(f"duplicate {kind} names")
    for n in names:
        if not isinstance(n, str) or not n:
            raise ModelError(f"{kind} names must be non-empty strings")


# --------------------------------------------------------------------------
# builders and file format


def make_mc(states: Sequence[str], initial: str, transitions: Mapping[str, Mapping[str, object]],
            labels: Mapping[str, Iterable[str]] | None = None,
            props: Iterable[str] | None = None) -> Mc:
    """Build an MC from name-keyed tables; probabilities may be strings or Fractions."""
    states = tuple(states)
    idx = {s: i for i, s in enumerate(states)}
    labels = labels or {}
    props = tuple(props) if props is not None else tuple(sorted({p for ls in labels.values() for p in ls}))
    trans = []
    for s in states:
        row = transitions.get(s)
        if row is None:
            raise ModelError(f"state {s}: no outgoing transitions")
        trans.append(Distribution({_lookup(idx, t): _prob(p) for t, p in row.items()}))
    labs = tuple(frozenset(labels.get(s, ())) for s in states)
    if initial not in idx:
        raise ModelError("initial state is not declared")
    return Mc(states, idx[initial], props, labs, tuple(trans))


def make_mdp(states: Sequence[str], actions: Sequence[str], initial: str,
             transitions: Mapping[Tuple[str, str], Mapping[str, object]],
             labels: Mapping[str, Iterable[str]] | None = None,
             props: Iterable[str] | None = None, sink: str | None = None) -> Mdp:
    """Build an MDP from a (state, action) → {target: prob} table.

    Missing rows are only allowed when ``sink`` names a declared state; they
    then go to the sink with probability 1.
    """
    states = tuple(states)
    actions = tuple(actions)
    idx = {s: i for i, s in enumerate(states)}
    labels = labels or {}
    props = tuple(props) if props is not None else tuple(sorted({p for ls in labels.values() for p in ls}))
    if sink is not None and sink not in idx:
        raise ModelError(f"sink {sink!r} is not a declared state")
    trans = []
    for s in states:
        row = []
        for a in actions:
            dist = transitions.get((s, a))
            if dist is None:
                if sink is None:
                    raise ModelError(f"({s},{a}): missing distribution and no sink declared")
                row.append(Distribution({idx[sink]: Fraction(1)}))
            else:
                try:
                    row.append(Distribution({_lookup(idx, t): _prob(p) for t, p in dist.items()}))
                except ModelError as e:
                    raise ModelError(f"({s},{a}): {e}") from None
        trans.append(tuple(row))
    labs = tuple(frozenset(labels.get(s, ())) for s in states)
    if initial not in idx:
        raise ModelError("initial state is not declared")
    return Mdp(states, actions, idx[initial], props, labs, tuple(trans),
               idx[sink] if sink is not None else None)


def _lookup(idx, name):
    try:
        return idx[name]
    except KeyError:
        raise ModelError(f"undeclared state {name!r}") from None


def _prob(p):
    return p if isinstance(p, Fraction) else parse_rational(p)


def load_model(text: str) -> Mdp | Mc:
    """Parse and validate a model file (JSON)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"parse error at line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise InputError("model file must be a JSON object")
    kind = data.get("type")
    if kind not in ("mdp", "mc"):
        raise InputError('field "type" must be "mdp" or "mc"')
    states = _field(data, "states", list)
    initial = _field(data, "initial", str)
    props = data.get("props", [])
    labels = data.get("labels", {})
    if not isinstance(props, list) or not isinstance(labels, dict):
        raise InputError('fields "props" must be a list and "labels" an object')
    for s, ls in labels.items():
        if s not in states:
            raise ModelError(f"labels: undeclared state {s!r}")
        if not isinstance(ls, list):
            raise InputError(f"labels of {s!r} must be a list")
    rows = _field(data, "transitions", list)
    if kind == "mc":
        table: Dict[str, Dict[str, Fraction]] = {}
        for i, t in enumerate(rows):
            src, dst, p = _edge(t, i, False)
            table.setdefault(src, {})
            table[src][dst] = table[src].get(dst, Fraction(0)) + p
        for s in states:
            if s not in table:
                raise ModelError(f"state {s}: no outgoing transitions")
        try:
            return make_mc(states, initial, table, labels, props)
        except ModelError as e:
            raise ModelError(_with_state(e, table)) from None
    actions = _field(data, "actions", list)
    table2: Dict[Tuple[str, str], Dict[str, Fraction]] = {}
    for i, t in enumerate(rows):
        src, dst, p, act = _edge(t, i, True)
        if act not in actions:
            raise ModelError(f"transitions[{i}]: undeclared action {act!r}")
        d = table2.setdefault((src, act), {})
        d[dst] = d.get(dst, Fraction(0)) + p
    return make_mdp(states, actions, initial, table2, labels, props, data.get("sink"))


def _with_state(err, table):
    return str(err)


def _field(data, name, typ):
    if name not in data:
        raise InputError(f'missing field "{name}"')
    v = data[name]
    if not isinstance(v, typ):
        raise InputError(f'field "{name}" has the wrong type')
    return v


def _edge(t, i, with_action):
    if not isinstance(t, dict):
        raise InputError(f"transitions[{i}] must be an object")
    for k in ("from", "to", "prob") + (("action",) if with_action else ()):
        if k not in t:
            raise InputError(f'transitions[{i}]: missing field "{k}"')
    try:
        p = parse_rational(t["prob"])
    except ModelError as e:
        raise ModelError(f"transitions[{i}]: {e}") from None
    if with_action:
        return t["from"], t["to"], p, t["action"]
    return t["from"], t["to"], p


def model_to_dict(m: Mdp | Mc) -> dict:
    labels = {m.states[s]: sorted(m.labels[s]) for s in range(m.n_states) if m.labels[s]}
    out = {"type": "mdp" if isinstance(m, Mdp) else "mc", "states": list(m.states),
           "initial": m.states[m.initial]}
    if isinstance(m, Mdp):
        out["actions"] = list(m.actions)
    out["props"] = list(m.props)
    out["labels"] = labels
    rows = []
    for s in range(m.n_states):
        if isinstance(m, Mdp):
            for a in range(m.n_actions):
                for t, p in m.succ(s, a):
                    rows.append({"from": m.states[s], "action": m.actions[a],
                                 "to": m.states[t], "prob": format_rational(p)})
        else:
            for t, p in m.succ(s):
                rows.append({"from": m.states[s], "to": m.states[t], "prob": format_rational(p)})
    out["transitions"] = rows
    if isinstance(m, Mdp) and m.sink is not None:
        out["sink"] = m.states[m.sink]
    return out


def dump_model(m: Mdp | Mc) -> str:
    return json.dumps(model_to_dict(m), indent=1)


# --------------------------------------------------------------------------
# strategies


class FiniteMemoryStrategy:
    """Mealy-machine strategy over an MDP.

    ``act`` maps (memory, state) to an action index or to a dict
    {action: weight}; ``update`` maps (memory, state, action, next) to the next
    memory. Memory elements are strings. A missing update entry keeps the
    memory unchanged when ``sticky_memory`` is set (the memoryless case).
    """

    def __init__(self, memory: Sequence[str], initial_memory: str,
                 act: Mapping[Tuple[str, int], object],
                 update: Mapping[Tuple[str, int, int, int], str] | None = None,
                 sticky_memory: bool = False):
        self.memory = tuple(memory)
        if initial_memory not in self.memory:
            raise InputError("initial memory is not a declared memory state")
        self.initial_memory = initial_memory
        self._act = {}
        for key, choice in act.items():
            if isinstance(choice, int):
                self._act[key] = {choice: Fraction(1)}
            else:
                w = {a: Fraction(p) for a, p in dict(choice).items() if Fraction(p)}
                if sum(w.values(), Fraction(0)) != 1 or any(p < 0 for p in w.values()):
                    raise InputError(f"randomized choice at {key} must sum to 1")
                self._act[key] = w
        self._update = dict(update or {})
        self.sticky_memory = sticky_memory

    @classmethod
    def memoryless(cls, choice: Mapping[int, object]) -> "FiniteMemoryStrategy":
        """Memoryless strategy from {state: action | {action: weight}}."""
        return cls(("m",), "m", {("m", s): c for s, c in choice.items()}, sticky_memory=True)

    def act(self, m: str, s: int) -> Dict[int, Fraction]:
        try:
            return self._act[(m, s)]
        except KeyError:
            raise InputError(f"strategy undefined on memory {m!r}, state {s}") from None

    def update(self, m: str, s: int, a: int, t: int) -> str:
        key = (m, s, a, t)
        if key in self._update:
            return self._update[key]
        if self.sticky_memory:
            return m
        raise InputError(f"strategy update undefined on {key}")

    def to_dict(self, mdp: Mdp) -> dict:
        acts = []
        for (m, s), w in sorted(self._act.items()):
            acts.append({"memory": m, "state": mdp.states[s],
                         "dist": {mdp.actions[a]: format_rational(p) for a, p in sorted(w.items())}})
        ups = [{"memory": m, "state": mdp.states[s], "action": mdp.actions[a],
                "to": mdp.states[t], "next": n}
               for (m, s, a, t), n in sorted(self._update.items())]
        return {"memory": list(self.memory), "initial_memory": self.initial_memory,
                "act": acts, "update": ups, "sticky_memory": self.sticky_memory}

    @classmethod
    def from_dict(cls, data: dict, mdp: Mdp) -> "FiniteMemoryStrategy":
        try:
            act = {}
            for e in data["act"]:
                s = mdp.state_index(e["state"])
                if "action" in e:
                    act[(e["memory"], s)] = mdp.action_index(e["action"])
                else:
                    act[(e["memory"], s)] = {mdp.action_index(a): parse_rational(p)
                                             for a, p in e["dist"].items()}
            upd = {(e["memory"], mdp.state_index(e["state"]), mdp.action_index(e["action"]),
                    mdp.state_index(e["to"])): e["next"] for e in data.get("update", [])}
            return cls(data["memory"], data["initial_memory"], act, upd,
                       bool(data.get("sticky_memory", False)))
        except (KeyError, TypeError, AttributeError) as e:
            raise InputError(f"malformed strategy file: {e}") from None


def induced_mc(mdp: Mdp, strategy: FiniteMemoryStrategy) -> Mc:
    """Reachable part of the product of ``mdp`` with ``strategy``.

    Product states are named ``s@m``, or just ``s`` when the strategy has a
    single memory state.
    """
    single = len(strategy.memory) == 1
    start = (mdp.initial, strategy.initial_memory)
    index = {start: 0}
    order = [start]
    rows = []
    queue = deque([start])
    while queue:
        s, m = queue.popleft()
        out: Dict[int, Fraction] = {}
        for a, w in strategy.act(m, s).items():
            for t, p in mdp.succ(s, a):
                n = strategy.update(m, s, a, t)
                if n not in strategy.memory:
                    raise InputError(f"update leads to undeclared memory {n!r}")
                key = (t, n)
                if key not in index:
                    index[key] = len(order)
                    order.append(key)
                    queue.append(key)
                j = index[key]
                out[j] = out.get(j, Fraction(0)) + w * p
        rows.append(out)
    names = tuple(mdp.states[s] if single else f"{mdp.states[s]}@{m}" for s, m in order)
    labels = tuple(mdp.labels[s] for s, _ in order)
    return Mc(names, 0, mdp.props, labels, tuple(Distribution(r) for r in rows))


def self_compose(mc: Mc, low: str, left: str = "l", right: str = "l'",
                 init_name: str = "init") -> Mc:
    """Self-product with a fresh initial state fanning out uniformly to S×S."""
    if low not in mc.props:
        raise ModelError(f"proposition {low!r} not in the model")
    n = mc.n_states
    pairs = [(i, j) for i in range(n) for j in range(n)]
    names = [f"({mc.states[i]},{mc.states[j]})" for i, j in pairs]
    while init_name in names:
        init_name += "_"
    idx = {pr: k + 1 for k, pr in enumerate(pairs)}
    trans = [Distribution({k + 1: Fraction(1, n * n) for k in range(n * n)})]
    labels = [frozenset()]
    for i, j in pairs:
        d: Dict[int, Fraction] = {}
        for ti, pi in mc.succ(i):
            for tj, pj in mc.succ(j):
                d[idx[(ti, tj)]] = pi * pj
        trans.append(Distribution(d))
        lab = set()
        if low in mc.labels[i]:
            lab.add(left)
        if low in mc.labels[j]:
            lab.add(right)
        labels.append(frozenset(lab))
    return Mc(tuple([init_name] + names), 0, (left, right), tuple(labels), tuple(trans))


def reachable_states(m: Mdp | Mc, start: int | None = None) -> list:
    """States reachable from ``start`` (default: initial), BFS order."""
    start = m.initial if start is None else start
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        s = queue.popleft()
        succs = ([t for a in range(m.n_actions) for t, _ in m.succ(s, a)]
                 if isinstance(m, Mdp) else [t for t, _ in m.succ(s)])
        for t in succs:
            if t not in seen:
                seen.add(t)
                order.append(t)
                queue.append(t)
    return order
