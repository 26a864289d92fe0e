"""Exact evaluation of IR formulas at a rational point, without a solver.

Free variables are fixed by the caller. Bound variables are resolved by
propagation: an equality with a single unknown that occurs linearly is solved,
and a disjunction with one live disjunct becomes required. When propagation
stalls the search branches on an unresolved 0/1 variable. A real variable
that stays undetermined on a required constraint is reported, since the
evaluator does not search over reals.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Tuple

from .errors import LpctlError
from .reals import BOOL01, Cmp, Conj, Disj, Exists, Poly, RealFormula, RNode, _Const

ZERO = Fraction(0)


class UndeterminedError(LpctlError):
    """A real-valued bound variable is not fixed by the constraints."""


def _flatten(node: RNode) -> RNode:
    """Drop existential blocks (names are unique by construction)."""
    if isinstance(node, Exists):
        return _flatten(node.body)
    if isinstance(node, Conj):
        return Conj(tuple(_flatten(x) for x in node.items))
    if isinstance(node, Disj):
        return Disj(tuple(_flatten(x) for x in node.items))
    return node


def _status_cmp(node: Cmp, env: Dict[str, Fraction]) -> Tuple[Optional[bool], Poly]:
    p = node.poly.substitute(env)
    if p.is_const():
        c = p.const_value()
        ok = c >= 0 if node.op == ">=" else (c > 0 if node.op == ">" else c == 0)
        return ok, p
    return None, p


def _solve_linear(p: Poly) -> Optional[Tuple[str, Fraction]]:
    """If p = a*v + b with a single variable v of degree 1, return v = -b/a."""
    vs = p.variables()
    if len(vs) != 1:
        return None
    v = next(iter(vs))
    a = ZERO
    b = ZERO
    for m, c in p.terms:
        if not m:
            b += c
        elif m == (v,):
            a += c
        else:
            return None
    if a == 0:
        return None
    return v, -b / a


class _Conflict(Exception):
    pass


class _Search:
    def __init__(self, sorts: Mapping[str, str]):
        self.sorts = sorts

    def status(self, node: RNode, env) -> Optional[bool]:
        if isinstance(node, _Const):
            return node.value
        if isinstance(node, Cmp):
            return _status_cmp(node, env)[0]
        if isinstance(node, Conj):
            res = True
            for it in node.items:
                s = self.status(it, env)
                if s is False:
                    return False
                if s is None:
                    res = None
            return res
        if isinstance(node, Disj):
            res = False
            for it in node.items:
                s = self.status(it, env)
                if s is True:
                    return True
                if s is None:
                    res = None
            return res
        raise TypeError(node)

    def propagate(self, required: List[RNode], env: Dict[str, Fraction]) -> List[RNode]:
        """Fix variables forced by required nodes; return the unresolved ones."""
        pending = list(required)
        while True:
            changed = False
            rest: List[RNode] = []
            for node in pending:
                progressed, leftovers = self._force(node, env)
                changed |= progressed
                rest.extend(leftovers)
            pending = rest
            if not changed:
                return pending

    def _force(self, node: RNode, env) -> Tuple[bool, List[RNode]]:
        if isinstance(node, _Const):
            if not node.value:
                raise _Conflict()
            return False, []
        if isinstance(node, Cmp):
            st, p = _status_cmp(node, env)
            if st is True:
                return False, []
            if st is False:
                raise _Conflict()
            if node.op == "=":
                sol = _solve_linear(p)
                if sol is not None:
                    v, val = sol
                    if self.sorts.get(v) == BOOL01 and val not in (0, 1):
                        raise _Conflict()
                    env[v] = val
                    return True, []
            return False, [node]
        if isinstance(node, Conj):
            changed = False
            rest: List[RNode] = []
            for it in node.items:
                c, r = self._force(it, env)
                changed |= c
                rest.extend(r)
            return changed, rest
        live = []
        for it in node.items:
            s = self.status(it, env)
            if s is True:
                return False, []
            if s is None:
                live.append(it)
        if not live:
            raise _Conflict()
        if len(live) == 1:
            c, r = self._force(live[0], env)
            return True, r
        return False, [node]

    def run(self, required: List[RNode], env: Dict[str, Fraction]) -> Optional[Dict[str, Fraction]]:
        env = dict(env)
        try:
            pending = self.propagate(required, env)
        except _Conflict:
            return None
        if not pending:
            return env
        unknown = set()
        for node in pending:
            unknown |= _node_vars_unassigned(node, env)
        bools = sorted(v for v in unknown if self.sorts.get(v) == BOOL01)
        if not bools:
            raise UndeterminedError(
                f"real variables {sorted(unknown)[:5]} are not determined by the constraints")
        v = bools[0]
        for val in (Fraction(0), Fraction(1)):
            env2 = dict(env)
            env2[v] = val
            got = self.run(pending, env2)
            if got is not None:
                return got
        return None


def _node_vars_unassigned(node: RNode, env) -> set:
    out = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Cmp):
            out |= {v for v in n.poly.variables() if v not in env}
        elif isinstance(n, (Conj, Disj)):
            stack.extend(n.items)
    return out


def satisfying_extension(f: RealFormula, point: Mapping[str, Fraction]) -> Optional[Dict[str, Fraction]]:
    """An assignment of all variables extending ``point`` that satisfies ``f``,
    or None when no extension exists."""
    missing = [v.name for v in f.free if v.name not in point]
    if missing:
        raise LpctlError(f"point does not assign free variables {missing[:5]}")
    env = {k: Fraction(v) for k, v in point.items()}
    search = _Search(f.sorts())
    return search.run([_flatten(f.body)], env)


def holds_at(f: RealFormula, point: Mapping[str, Fraction]) -> bool:
    """Whether the existential closure of f holds with the free variables fixed."""
    return satisfying_extension(f, point) is not None


def check_assignment(node: RNode, env: Mapping[str, Fraction]) -> bool:
    """Plain evaluation of a body under a total assignment (existentials ignored)."""
    return _Search({}).status(_flatten(node), dict(env)) is True
