"""Existential real-arithmetic formulas and the window-strategy encodings.

The IR is negation-free: polynomial constraints ``p cmp 0`` with cmp in
{'>=', '>', '='}, conjunctions, disjunctions and existential blocks.
Variables carry a sort (``real01`` or ``bool01``) that only informs the
exact evaluator; every bound is an explicit constraint in the body.

Variable families:
  x(path,action)   probability the window strategy picks action after path
  y(path,Sk)       0/1 truth of state subformula Sk after path
  z(path,Pk)       measure of path subformula Pk after path
  r(s,t)           0/1 reachability of t from s under a memoryless strategy
Memoryless encodings index by the last state instead of the whole path.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from .errors import FormulaClassError, InputError
from .logic import (TRUE_PROP, And, Atom, LinIneq, NegAtom, Next, Or, PathFormula,
                    StateFormula, Until, formula_size, iter_state, needed_by_depth, negate,
                    pretty, pretty_path, require_window, subformula_closure, window_length,
                    with_horizon)
from .model import Mdp

ZERO = Fraction(0)
ONE = Fraction(1)

REAL01 = "real01"
BOOL01 = "bool01"


# --------------------------------------------------------------------------
# polynomials


Monomial = Tuple[str, ...]


class Poly:
    """Polynomial with rational coefficients; monomials are sorted name tuples."""

    __slots__ = ("terms", "_h")

    def __init__(self, terms: Mapping[Monomial, Fraction] | Iterable = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: Dict[Monomial, Fraction] = {}
        for m, c in items:
            if c:
                acc[m] = acc.get(m, ZERO) + c
        self.terms = tuple(sorted(((m, c) for m, c in acc.items() if c),
                                  key=lambda mc: (len(mc[0]), mc[0])))
        self._h = None

    @staticmethod
    def const(c) -> "Poly":
        return Poly({(): Fraction(c)})

    @staticmethod
    def var(name: str) -> "Poly":
        return Poly({(name,): ONE})

    def is_const(self) -> bool:
        return all(not m for m, _ in self.terms)

    def const_value(self) -> Fraction:
        for m, c in self.terms:
            if not m:
                return c
        return ZERO

    def variables(self) -> set:
        return {v for m, _ in self.terms for v in m}

    def degree(self) -> int:
        return max((len(m) for m, _ in self.terms), default=0)

    def __add__(self, other):
        other = _lift(other)
        return Poly(list(self.terms) + list(other.terms))

    __radd__ = __add__

    def __neg__(self):
        return Poly([(m, -c) for m, c in self.terms])

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        other = _lift(other)
        out: Dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = tuple(sorted(m1 + m2))
                out[m] = out.get(m, ZERO) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        if self._h is None:
            self._h = hash(self.terms)
        return self._h

    def __repr__(self):
        return f"Poly({render_poly(self)})"

    def evaluate(self, env: Mapping[str, Fraction]) -> Fraction:
        tot = ZERO
        for m, c in self.terms:
            v = c
            for name in m:
                v *= env[name]
            tot += v
        return tot

    def substitute(self, env: Mapping[str, Fraction]) -> "Poly":
        out: Dict[Monomial, Fraction] = {}
        for m, c in self.terms:
            rest = []
            for name in m:
                if name in env:
                    c = c * env[name]
                else:
                    rest.append(name)
            if c:
                key = tuple(rest)
                out[key] = out.get(key, ZERO) + c
        return Poly(out)

    def rename(self, f) -> "Poly":
        return Poly([(tuple(sorted(f(v) for v in m)), c) for m, c in self.terms])


def _lift(x) -> Poly:
    return x if isinstance(x, Poly) else Poly.const(x)


def render_poly(p: Poly) -> str:
    if not p.terms:
        return "0"
    parts = []
    for m, c in p.terms:
        body = "*".join(m)
        if not m:
            parts.append(str(c))
        elif c == 1:
            parts.append(body)
        else:
            parts.append(f"{c}*{body}")
    return " + ".join(parts)


# --------------------------------------------------------------------------
# formula nodes


@dataclass(frozen=True)
class Var:
    name: str
    sort: str = REAL01


class RNode:
    """Base class of IR formula nodes."""


@dataclass(frozen=True)
class Cmp(RNode):
    poly: Poly
    op: str

    def __post_init__(self):
        if self.op not in (">=", ">", "="):
            raise ValueError(f"bad comparison {self.op!r}")


@dataclass(frozen=True)
class Conj(RNode):
    items: Tuple[RNode, ...]


@dataclass(frozen=True)
class Disj(RNode):
    items: Tuple[RNode, ...]


@dataclass(frozen=True)
class Exists(RNode):
    vars: Tuple[Var, ...]
    body: RNode


@dataclass(frozen=True)
class _Const(RNode):
    value: bool


TRUE = _Const(True)
FALSE = _Const(False)


def _cmp_const(c: Fraction, op: str) -> bool:
    return c >= 0 if op == ">=" else (c > 0 if op == ">" else c == 0)


def mk_cmp(poly, op: str) -> RNode:
    poly = _lift(poly)
    if poly.is_const():
        return TRUE if _cmp_const(poly.const_value(), op) else FALSE
    return Cmp(poly, op)


def ge(a, b=0) -> RNode:
    return mk_cmp(_lift(a) - _lift(b), ">=")


def gt(a, b=0) -> RNode:
    return mk_cmp(_lift(a) - _lift(b), ">")


def eq(a, b=0) -> RNode:
    return mk_cmp(_lift(a) - _lift(b), "=")


def le(a, b=0) -> RNode:
    return ge(b, a)


def mk_and(*items) -> RNode:
    out: Dict[RNode, None] = {}
    for it in _flat(items):
        if it is FALSE:
            return FALSE
        if it is TRUE:
            continue
        if isinstance(it, Conj):
            for sub in it.items:
                out.setdefault(sub, None)
        else:
            out.setdefault(it, None)
    if not out:
        return TRUE
    if len(out) == 1:
        return next(iter(out))
    return Conj(tuple(out))


def mk_or(*items) -> RNode:
    out: Dict[RNode, None] = {}
    for it in _flat(items):
        if it is TRUE:
            return TRUE
        if it is FALSE:
            continue
        if isinstance(it, Disj):
            for sub in it.items:
                out.setdefault(sub, None)
        else:
            out.setdefault(it, None)
    if not out:
        return FALSE
    if len(out) == 1:
        return next(iter(out))
    return Disj(tuple(out))


def mk_exists(vars_: Sequence[Var], body: RNode) -> RNode:
    if body is TRUE or body is FALSE or not vars_:
        return body
    return Exists(tuple(vars_), body)


def _flat(items):
    for it in items:
        if isinstance(it, (list, tuple)):
            yield from _flat(it)
        else:
            yield it


def rename_node(node: RNode, f) -> RNode:
    if isinstance(node, Cmp):
        return Cmp(node.poly.rename(f), node.op)
    if isinstance(node, Conj):
        return Conj(tuple(rename_node(x, f) for x in node.items))
    if isinstance(node, Disj):
        return Disj(tuple(rename_node(x, f) for x in node.items))
    if isinstance(node, Exists):
        return Exists(tuple(Var(f(v.name), v.sort) for v in node.vars), rename_node(node.body, f))
    return node


def node_vars(node: RNode) -> set:
    out = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Cmp):
            out |= n.poly.variables()
        elif isinstance(n, (Conj, Disj)):
            stack.extend(n.items)
        elif isinstance(n, Exists):
            stack.append(n.body)
    return out


def iter_nodes(node: RNode):
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, (Conj, Disj)):
            stack.extend(n.items)
        elif isinstance(n, Exists):
            stack.append(n.body)


def node_size(node: RNode) -> int:
    return sum(1 for _ in iter_nodes(node))


@dataclass(frozen=True)
class RealFormula:
    """exists bound . body, with ``free`` variables left open."""

    free: Tuple[Var, ...]
    bound: Tuple[Var, ...]
    body: RNode
    comments: Tuple[str, ...] = ()

    def all_vars(self) -> List[Var]:
        out = list(self.free) + list(self.bound)
        stack = [self.body]
        while stack:
            n = stack.pop()
            if isinstance(n, Exists):
                out.extend(n.vars)
                stack.append(n.body)
            elif isinstance(n, (Conj, Disj)):
                stack.extend(n.items)
        return out

    def sorts(self) -> Dict[str, str]:
        return {v.name: v.sort for v in self.all_vars()}

    def size(self) -> int:
        return node_size(self.body)

    def with_constraints(self, *extra: RNode) -> "RealFormula":
        return RealFormula(self.free, self.bound, mk_and(self.body, *extra), self.comments)

    def rename(self, f) -> "RealFormula":
        return RealFormula(tuple(Var(f(v.name), v.sort) for v in self.free),
                           tuple(Var(f(v.name), v.sort) for v in self.bound),
                           rename_node(self.body, f), self.comments)


def is_nonstrict(node: RNode) -> bool:
    """No strict comparison anywhere (the IR has no negation by construction)."""
    return all(not (isinstance(n, Cmp) and n.op == ">") for n in iter_nodes(node))


# --------------------------------------------------------------------------
# variable names


_SAFE = re.compile(r"[A-Za-z0-9_\-]")


def escape_id(name: str) -> str:
    return "".join(ch if _SAFE.match(ch) else "".join(f"%{b:02X}" for b in ch.encode()) for ch in name)


def path_key(mdp: Mdp, path: Tuple[int, ...]) -> str:
    return ".".join(escape_id(mdp.states[x] if i % 2 == 0 else mdp.actions[x])
                    for i, x in enumerate(path))


def xname(pos: str, action: str) -> str:
    return f"x({pos},{escape_id(action)})"


def yname(pos: str, fid: str) -> str:
    return f"y({pos},{fid})"


def zname(pos: str, fid: str) -> str:
    return f"z({pos},{fid})"


def rname(s: str, t: str) -> str:
    return f"r({escape_id(s)},{escape_id(t)})"


class FormulaIds:
    """Stable ids Sk / Pk for the subformulas of a window formula."""

    def __init__(self, phi: StateFormula):
        s0, s1, pp = subformula_closure(phi)
        states = sorted(s0 | s1, key=lambda f: (formula_size(f), pretty(f)))
        paths = sorted(pp, key=lambda p: (p.horizon, len(pretty_path(p)), pretty_path(p)))
        self.state_ids = {f: f"S{i}" for i, f in enumerate(states)}
        self.path_ids = {p: f"P{i}" for i, p in enumerate(paths)}
        self._extra_state: Dict[StateFormula, str] = {}

    def sid(self, f: StateFormula) -> str:
        got = self.state_ids.get(f)
        if got is None:
            got = self._extra_state.get(f)
            if got is None:
                got = f"S{len(self.state_ids) + len(self._extra_state)}"
                self._extra_state[f] = got
        return got

    def pid(self, p: PathFormula) -> str:
        return self.path_ids[p]

    def comments(self) -> Tuple[str, ...]:
        out = [f"{i} = {pretty(f)}" for f, i in self.state_ids.items()
               if not (isinstance(f, (Atom, NegAtom)) and f.prop == TRUE_PROP)]
        out += [f"{i} = {pretty_path(p)}" for p, i in self.path_ids.items()]
        return tuple(out)


def label_determined(f: StateFormula) -> bool:
    return not any(isinstance(g, LinIneq) for g in iter_state(f))


def _eval_labels(mdp: Mdp, s: int, f: StateFormula) -> bool:
    if isinstance(f, (Atom, NegAtom)):
        if f.prop == TRUE_PROP:
            return isinstance(f, NegAtom)
        if f.prop not in mdp.props:
            raise InputError(f"proposition {f.prop!r} is not declared by the model")
        return mdp.has_label(s, f.prop) == isinstance(f, Atom)
    if isinstance(f, And):
        return _eval_labels(mdp, s, f.left) and _eval_labels(mdp, s, f.right)
    if isinstance(f, Or):
        return _eval_labels(mdp, s, f.left) or _eval_labels(mdp, s, f.right)
    raise TypeError("formula depends on measures")


# --------------------------------------------------------------------------
# window encodings


class _Positions:
    """Tree positions: whole paths (general) or last states (memoryless)."""

    def __init__(self, mdp: Mdp, start: int, memoryless: bool):
        self.mdp = mdp
        self.start = start
        self.memoryless = memoryless

    def root(self):
        return self.start if self.memoryless else (self.start,)

    def state(self, pos) -> int:
        return pos if self.memoryless else pos[-1]

    def key(self, pos) -> str:
        return escape_id(self.mdp.states[pos]) if self.memoryless else path_key(self.mdp, pos)

    def child(self, pos, a: int, t: int):
        return t if self.memoryless else pos + (a, t)

    def by_depth(self, depth: int) -> List[List]:
        """Positions at each depth 0..depth, deduplicated per depth."""
        layers = [[self.root()]]
        for _ in range(depth):
            nxt: Dict = {}
            for pos in layers[-1]:
                s = self.state(pos)
                for a in range(self.mdp.n_actions):
                    for t, _ in self.mdp.succ(s, a):
                        nxt.setdefault(self.child(pos, a, t), None)
            layers.append(list(nxt))
        return layers


@dataclass
class WindowEncoding:
    """Pieces of the window encoding; ``formula`` is their conjunction."""

    free: Tuple[Var, ...]
    bound: Tuple[Var, ...]
    wdx: RNode
    defs: RNode
    goal: RNode
    neg_goal: RNode
    ids: FormulaIds

    @property
    def formula(self) -> RealFormula:
        return RealFormula(self.free, self.bound, mk_and(self.wdx, self.defs, self.goal),
                           self.ids.comments())

    def negated_goal_query(self) -> RealFormula:
        """Points of WD(X) whose window strategy violates the formula."""
        return RealFormula(self.free, self.bound, mk_and(self.wdx, self.defs, self.neg_goal),
                           self.ids.comments())


class _Encoder:
    def __init__(self, mdp: Mdp, phi: StateFormula, ell: int, memoryless: bool,
                 deterministic: bool, ids: FormulaIds | None = None):
        self.mdp = mdp
        self.phi = phi
        self.ell = ell
        self.memoryless = memoryless
        self.deterministic = deterministic
        self.ids = ids or FormulaIds(phi)
        self.np, self.ns = needed_by_depth(phi, ell)
        self.xsort = BOOL01 if deterministic else REAL01
        self.bound: Dict[str, Var] = {}
        self.defs: List[RNode] = []
        self._zterm: Dict[Tuple[str, PathFormula], Poly] = {}
        self._yterm: Dict[Tuple[str, StateFormula], Poly] = {}

    # x variables and their well-definedness

    def window_vars(self, P: _Positions, layers) -> Tuple[List[Var], RNode]:
        free: List[Var] = []
        cons: List[RNode] = []
        seen = set()
        for k in range(min(self.ell, len(layers))):
            for pos in layers[k]:
                key = P.key(pos)
                if key in seen:
                    continue
                seen.add(key)
                total = Poly()
                for a in range(self.mdp.n_actions):
                    v = xname(key, self.mdp.actions[a])
                    free.append(Var(v, self.xsort))
                    xv = Poly.var(v)
                    cons.append(ge(xv))
                    cons.append(le(xv, 1))
                    if self.deterministic:
                        cons.append(mk_or(eq(xv), eq(xv, 1)))
                    total = total + xv
                cons.append(eq(total, 1))
        return free, mk_and(*cons)

    def x(self, P: _Positions, pos, a: int) -> Poly:
        return Poly.var(xname(P.key(pos), self.mdp.actions[a]))

    # y / z terms

    def yterm(self, P: _Positions, pos, f: StateFormula, k: int) -> Poly:
        s = P.state(pos)
        if label_determined(f):
            return Poly.const(1 if _eval_labels(self.mdp, s, f) else 0)
        key = (P.key(pos), f)
        got = self._yterm.get(key)
        if got is not None:
            return got
        name = yname(key[0], self.ids.sid(f))
        self.bound[name] = Var(name, BOOL01)
        yv = Poly.var(name)
        self._yterm[key] = yv
        self.defs.append(mk_or(eq(yv), eq(yv, 1)))
        self.defs.append(mk_or(eq(yv), self.state(P, pos, f, k)))
        self.defs.append(mk_or(eq(yv, 1), self.state(P, pos, negate(f), k)))
        return yv

    def state(self, P: _Positions, pos, f: StateFormula, k: int) -> RNode:
        """STATE^pos(f) as an IR node."""
        if isinstance(f, (Atom, NegAtom)):
            return TRUE if _eval_labels(self.mdp, P.state(pos), f) else FALSE
        if isinstance(f, And):
            return mk_and(self.state(P, pos, f.left, k), self.state(P, pos, f.right, k))
        if isinstance(f, Or):
            return mk_or(self.state(P, pos, f.left, k), self.state(P, pos, f.right, k))
        lhs = Poly()
        for c, p in f.terms:
            lhs = lhs + c * self.zterm(P, pos, p, k)
        return mk_cmp(lhs - f.bound, f.cmp)

    def step_sum(self, P: _Positions, pos, p: PathFormula, k: int) -> Poly:
        sub = with_horizon(p, p.horizon - 1)
        s = P.state(pos)
        tot = Poly()
        for a in range(self.mdp.n_actions):
            inner = Poly()
            for t, pr in self.mdp.succ(s, a):
                inner = inner + pr * self.zterm(P, P.child(pos, a, t), sub, k + 1)
            if inner.terms:
                tot = tot + self.x(P, pos, a) * inner
        return tot

    def zterm(self, P: _Positions, pos, p: PathFormula, k: int) -> Poly:
        key = (P.key(pos), p)
        got = self._zterm.get(key)
        if got is not None:
            return got
        if p.horizon is None:
            raise FormulaClassError("unbounded path operator in a window formula")
        h = p.horizon
        if h > 0 and k >= self.ell:
            raise FormulaClassError("window length too small for the formula")
        if isinstance(p, Next):
            expr = self.yterm(P, pos, p.sub, k) if h == 0 else self.step_sum(P, pos, p, k)
        else:
            y1 = self.yterm(P, pos, p.left, k)
            y2 = self.yterm(P, pos, p.right, k)
            if h == 0:
                expr = y2 if isinstance(p, Until) else y1 + y2 - y1 * y2
            elif y2.is_const() and y2.const_value() == 1:
                expr = Poly.const(1)
            elif y1.is_const() and y1.const_value() == 0:
                expr = y2
            else:
                sm = self.step_sum(P, pos, p, k)
                expr = y2 + y1 * sm - y1 * y2 * sm
        if expr.is_const():
            self._zterm[key] = expr
            return expr
        name = zname(key[0], self.ids.pid(p))
        self.bound[name] = Var(name, REAL01)
        zv = Poly.var(name)
        self._zterm[key] = zv
        self.defs.append(ge(zv))
        self.defs.append(le(zv, 1))
        self.defs.append(eq(zv, expr))
        return zv

    def encode(self, start: int) -> WindowEncoding:
        P = _Positions(self.mdp, start, self.memoryless)
        layers = P.by_depth(self.ell - 1)
        free, wdx = self.window_vars(P, layers)
        root = P.root()
        goal = self.state(P, root, self.phi, 0)
        neg_goal = self.state(P, root, negate(self.phi), 0)
        return WindowEncoding(tuple(free), tuple(self.bound.values()), wdx, mk_and(*self.defs),
                              goal, neg_goal, self.ids)


def encode_window_parts(mdp: Mdp, start: int, phi: StateFormula, mode: str = "general",
                        deterministic: bool = False, ell: int | None = None,
                        ids: FormulaIds | None = None) -> WindowEncoding:
    if mode not in ("general", "memoryless"):
        raise InputError(f"unknown window encoding mode {mode!r}")
    require_window(phi)
    ell = window_length(phi) if ell is None else ell
    enc = _Encoder(mdp, phi, ell, mode == "memoryless", deterministic, ids)
    return enc.encode(start)


def encode_window(mdp: Mdp, start: int, phi: StateFormula, mode: str = "general",
                  deterministic: bool = False) -> RealFormula:
    """exists Y Z . WD(X) and WD(Y) and WD(Z) and STATE^start(phi); x free."""
    return encode_window_parts(mdp, start, phi, mode, deterministic).formula


def window_free_vars(mdp: Mdp, start: int, ell: int, deterministic: bool = False) -> List[Var]:
    P = _Positions(mdp, start, False)
    enc = _Encoder(mdp, Atom(TRUE_PROP), ell, False, deterministic)
    free, _ = enc.window_vars(P, P.by_depth(ell - 1))
    return free


def window_wd(mdp: Mdp, start: int, ell: int, deterministic: bool = False) -> Tuple[List[Var], RNode]:
    """Free x variables of the window tree at start and their WD(X) constraints."""
    P = _Positions(mdp, start, False)
    enc = _Encoder(mdp, Atom(TRUE_PROP), ell, False, deterministic)
    return enc.window_vars(P, P.by_depth(ell - 1))


def window_x(mdp: Mdp, path: Sequence[int], action: int) -> Poly:
    """The x variable of a general-mode path (int tuple) and action."""
    return Poly.var(xname(path_key(mdp, tuple(path)), mdp.actions[action]))


def memoryless_x(mdp: Mdp, state: int, action: int) -> Poly:
    return Poly.var(xname(escape_id(mdp.states[state]), mdp.actions[action]))


# --------------------------------------------------------------------------
# the fixpoint operator


def initial_portfolio(mdp: Mdp, phi: StateFormula, deterministic: bool = False) -> Dict[int, RealFormula]:
    """R^0: the window encoding at every state, sharing one id table."""
    ids = FormulaIds(phi)
    return {s: encode_window_parts(mdp, s, phi, "general", deterministic, ids=ids).formula
            for s in range(mdp.n_states)}


def _unfold_paths(mdp: Mdp, start: int, max_len: int) -> List[Tuple[int, ...]]:
    if max_len < 0:
        return []
    out = []
    stack = [(start,)]
    while stack:
        p = stack.pop()
        out.append(p)
        if (len(p) - 1) // 2 >= max_len:
            continue
        for a in reversed(range(mdp.n_actions)):
            for t, _ in reversed(mdp.succ(p[-1], a)):
                stack.append(p + (a, t))
    return out


def encode_f_step(mdp: Mdp, prev: Mapping[int, RealFormula], ell: int, iteration: int = 1,
                  product_form: bool = False) -> Dict[int, RealFormula]:
    """f applied to a portfolio given as per-state formulas over window x's.

    R'_s = R_s and, for every edge s -a-> s', x(s,a) = 0 or
    exists X_{s'} . R_{s'} and the compatibility constraints, with the
    copy of R_{s'} renamed by the suffix #edge.iteration.
    """
    out: Dict[int, RealFormula] = {}
    for s in range(mdp.n_states):
        base = prev[s]
        conj: List[RNode] = [base.body]
        edge = 0
        for a in range(mdp.n_actions):
            xa = window_x(mdp, (s,), a)
            for t, _ in mdp.succ(s, a):
                suffix = f"#{edge}.{iteration}"
                edge += 1
                conj.append(mk_or(eq(xa), _continuation(mdp, s, a, t, prev[t], ell, suffix,
                                                        product_form)))
        out[s] = RealFormula(base.free, base.bound, mk_and(*conj), base.comments)
    return out


def _continuation(mdp: Mdp, s: int, a: int, t: int, rt: RealFormula, ell: int, suffix: str,
                  product_form: bool) -> RNode:
    ren = rt.rename(lambda v: v + suffix)
    compat: List[RNode] = []
    for rho in _unfold_paths(mdp, t, ell - 2):
        poly = Poly.const(1)
        for i in range(0, len(rho) - 1, 2):
            st, ac, nx = rho[i], rho[i + 1], rho[i + 2]
            xv = Poly.var(xname(path_key(mdp, rho[:i + 1]), mdp.actions[ac]) + suffix)
            poly = poly * xv * mdp.trans[st][ac][nx]
        shifted = (s, a) + rho
        agree = []
        for b in range(mdp.n_actions):
            mine = window_x(mdp, shifted, b)
            theirs = Poly.var(xname(path_key(mdp, rho), mdp.actions[b]) + suffix)
            if product_form:
                agree.append(eq(poly * (mine - theirs)))
            else:
                agree.append(eq(mine, theirs))
        if product_form:
            compat.extend(agree)
        else:
            compat.append(mk_or(eq(poly), mk_and(*agree)))
    return mk_exists(list(ren.free) + list(ren.bound), mk_and(ren.body, *compat))


def f_iterates(mdp: Mdp, phi: StateFormula, n: int, product_form: bool = False,
               deterministic: bool = False) -> List[Dict[int, RealFormula]]:
    """[R^0, ..., R^n]."""
    ell = window_length(phi)
    cur = initial_portfolio(mdp, phi, deterministic)
    out = [cur]
    for i in range(1, n + 1):
        cur = encode_f_step(mdp, cur, ell, i, product_form)
        out.append(cur)
    return out


# --------------------------------------------------------------------------
# memoryless global window


def encode_global_memoryless(mdp: Mdp, start: int, phi: StateFormula) -> RealFormula:
    """Memoryless strategies enforcing AG phi from start.

    r(start,t) over-approximates reachability: r(start,start) = 1 and
    r(start,t) x(t,a) P(t,a,u) (1 - r(start,u)) = 0. Each reachable t must
    satisfy the memoryless window goal, guarded by r(start,t) = 0.
    """
    require_window(phi)
    ell = window_length(phi)
    ids = FormulaIds(phi)
    enc = _Encoder(mdp, phi, ell, True, False, ids)
    free: List[Var] = []
    wd: List[RNode] = []
    for s in range(mdp.n_states):
        total = Poly()
        for a in range(mdp.n_actions):
            v = memoryless_x(mdp, s, a)
            free.append(Var(next(iter(v.variables())), REAL01))
            wd += [ge(v), le(v, 1)]
            total = total + v
        wd.append(eq(total, 1))
    sname = mdp.states[start]
    rvars = {t: Var(rname(sname, mdp.states[t]), BOOL01) for t in range(mdp.n_states)}
    rp = {t: Poly.var(v.name) for t, v in rvars.items()}
    reach: List[RNode] = [eq(rp[start], 1)]
    for t in range(mdp.n_states):
        reach.append(mk_or(eq(rp[t]), eq(rp[t], 1)))
    for t in range(mdp.n_states):
        for a in range(mdp.n_actions):
            for u, p in mdp.succ(t, a):
                if u != t:
                    reach.append(eq(rp[t] * memoryless_x(mdp, t, a) * p * (1 - rp[u])))
    guarded: List[RNode] = []
    for t in range(mdp.n_states):
        P = _Positions(mdp, t, True)
        goal = enc.state(P, t, phi, 0)
        guarded.append(mk_or(eq(rp[t]), goal))
    bound = list(rvars.values()) + list(enc.bound.values())
    body = mk_and(*wd, *reach, *enc.defs, *guarded)
    return RealFormula(tuple(free), tuple(bound), body, ids.comments())
