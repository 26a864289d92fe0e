"""Exact L-PCTL model checking on finite Markov chains.

Bounded operators are evaluated by backward iteration over the horizon;
unbounded U is a rational linear system solved after graph pre-processing,
and unbounded W is obtained from U through the duality
not(a W b) = (not b) U (not a and not b).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import InputError
from .logic import (TRUE_PROP, And, Atom, LinIneq, NegAtom, Next, Or, PathFormula,
                    StateFormula, Until, iter_paths)
from .model import Mc

ZERO = Fraction(0)
ONE = Fraction(1)


class Checker:
    """Bottom-up evaluator with a per-chain cache of subformula results."""

    def __init__(self, mc: Mc):
        self.mc = mc
        self._props = set(mc.props)
        self._sat: Dict[StateFormula, List[bool]] = {}
        self._val: Dict[PathFormula, List[Fraction]] = {}

    def sat(self, phi: StateFormula) -> List[bool]:
        got = self._sat.get(phi)
        if got is not None:
            return got
        mc = self.mc
        n = mc.n_states
        if isinstance(phi, (Atom, NegAtom)):
            if phi.prop == TRUE_PROP:
                res = [isinstance(phi, NegAtom)] * n
            else:
                if phi.prop not in self._props:
                    raise InputError(f"proposition {phi.prop!r} is not declared by the model")
                pos = isinstance(phi, Atom)
                res = [(phi.prop in mc.labels[s]) == pos for s in range(n)]
        elif isinstance(phi, And):
            a, b = self.sat(phi.left), self.sat(phi.right)
            res = [x and y for x, y in zip(a, b)]
        elif isinstance(phi, Or):
            a, b = self.sat(phi.left), self.sat(phi.right)
            res = [x or y for x, y in zip(a, b)]
        elif isinstance(phi, LinIneq):
            vals = [(c, self.value(p)) for c, p in phi.terms]
            res = []
            for s in range(n):
                tot = sum((c * v[s] for c, v in vals), ZERO)
                res.append(tot >= phi.bound if phi.cmp == ">=" else tot > phi.bound)
        else:
            raise TypeError(f"not a state formula: {phi!r}")
        self._sat[phi] = res
        return res

    def value(self, path: PathFormula) -> List[Fraction]:
        got = self._val.get(path)
        if got is not None:
            return got
        if isinstance(path, Next):
            v = [ONE if b else ZERO for b in self.sat(path.sub)]
            for _ in range(path.horizon):
                v = self._step(v)
        elif path.horizon is not None:
            a, b = self.sat(path.left), self.sat(path.right)
            if isinstance(path, Until):
                v = [ONE if y else ZERO for y in b]
            else:
                v = [ONE if (x or y) else ZERO for x, y in zip(a, b)]
            for _ in range(path.horizon):
                nxt = self._step(v)
                v = [ONE if y else (nxt[s] if x else ZERO)
                     for s, (x, y) in enumerate(zip(a, b))]
        elif isinstance(path, Until):
            v = until_unbounded(self.mc, self.sat(path.left), self.sat(path.right))
        else:
            a, b = self.sat(path.left), self.sat(path.right)
            dual = until_unbounded(self.mc, [not y for y in b],
                                   [not x and not y for x, y in zip(a, b)])
            v = [ONE - d for d in dual]
        self._val[path] = v
        return v

    def _step(self, v: Sequence[Fraction]) -> List[Fraction]:
        return [sum((p * v[t] for t, p in self.mc.succ(s)), ZERO) for s in range(self.mc.n_states)]


def until_unbounded(mc: Mc, a: Sequence[bool], b: Sequence[bool]) -> List[Fraction]:
    """P(a U b) per state: graph pre-processing, then an exact linear solve."""
    n = mc.n_states
    pred: List[List[int]] = [[] for _ in range(n)]
    for s in range(n):
        for t, _ in mc.succ(s):
            pred[t].append(s)
    # states that reach b through a-states
    can = [bool(x) for x in b]
    queue = deque(s for s in range(n) if b[s])
    while queue:
        t = queue.popleft()
        for s in pred[t]:
            if not can[s] and a[s]:
                can[s] = True
                queue.append(s)
    unknown = [s for s in range(n) if can[s] and not b[s]]
    res = [ONE if b[s] else ZERO for s in range(n)]
    if not unknown:
        return res
    col = {s: i for i, s in enumerate(unknown)}
    m = len(unknown)
    rows = []
    for s in unknown:
        row = [ZERO] * (m + 1)
        row[col[s]] += ONE
        for t, p in mc.succ(s):
            if t in col:
                row[col[t]] -= p
            elif b[t]:
                row[m] += p
        rows.append(row)
    sol = solve_linear(rows)
    for s, i in col.items():
        res[s] = sol[i]
    return res


def solve_linear(aug: List[List[Fraction]]) -> List[Fraction]:
    """Gauss-Jordan elimination on an augmented square system over Q."""
    m = len(aug)
    rows = [list(r) for r in aug]
    for c in range(m):
        piv = next((r for r in range(c, m) if rows[r][c] != 0), None)
        if piv is None:
            raise AssertionError("singular system after qualitative pre-processing")
        rows[c], rows[piv] = rows[piv], rows[c]
        pr = rows[c]
        inv = ONE / pr[c]
        if inv != 1:
            pr = [x * inv for x in pr]
            rows[c] = pr
        for r in range(m):
            if r != c and rows[r][c] != 0:
                f = rows[r][c]
                rr = rows[r]
                rows[r] = [x - f * y for x, y in zip(rr, pr)]
    return [rows[i][m] for i in range(m)]


def measure_path(mc: Mc, path: PathFormula, checker: Checker | None = None) -> Dict[str, Fraction]:
    """Exact measure of a path formula from every state, keyed by state name."""
    v = (checker or Checker(mc)).value(path)
    return {mc.states[s]: v[s] for s in range(mc.n_states)}


def check_state(mc: Mc, phi: StateFormula, checker: Checker | None = None) -> frozenset:
    """Names of the states satisfying phi."""
    v = (checker or Checker(mc)).sat(phi)
    return frozenset(mc.states[s] for s in range(mc.n_states) if v[s])


@dataclass(frozen=True)
class GlobalResult:
    holds: bool
    counterexample: Optional[str] = None
    path: Tuple[str, ...] = ()

    def __bool__(self):
        return self.holds


def check_global_window(mc: Mc, phi: StateFormula, checker: Checker | None = None) -> GlobalResult:
    """True iff every state reachable from the initial state satisfies phi.

    On failure the shortest path to a violating state is returned.
    """
    v = (checker or Checker(mc)).sat(phi)
    start = mc.initial
    parent = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        if not v[s]:
            trail = []
            cur = s
            while cur is not None:
                trail.append(mc.states[cur])
                cur = parent[cur]
            return GlobalResult(False, mc.states[s], tuple(reversed(trail)))
        for t, _ in mc.succ(s):
            if t not in parent:
                parent[t] = s
                queue.append(t)
    return GlobalResult(True)


def measures_report(mc: Mc, phi: StateFormula, checker: Checker | None = None):
    """Distinct path subformulas of phi in syntax order, with their measure vectors."""
    checker = checker or Checker(mc)
    seen = []
    for p in iter_paths(phi):
        if p not in seen:
            seen.append(p)
    return [(p, checker.value(p)) for p in seen]
