"""L-PCTL syntax: AST in negation normal form, parser, printer and metrics.

State formulas are Atom, NegAtom, And, Or and LinIneq. Path formulas are
Next, Until and WeakUntil with an integer horizon, or ``None`` for the
unbounded U and W. Truth and falsity are encoded with a reserved
proposition that no state carries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, List, Optional, Tuple, Union

from .errors import FormulaClassError, FormulaSyntaxError

TRUE_PROP = "__true"


class _Node:
    """Cached structural hash; the ASTs are used heavily as dict keys."""

    def __hash__(self):
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((type(self).__name__,) + tuple(getattr(self, f) for f in self._fields))
            object.__setattr__(self, "_h", h)
        return h


@dataclass(frozen=True, eq=True)
class Atom(_Node):
    prop: str
    _fields = ("prop",)
    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class NegAtom(_Node):
    prop: str
    _fields = ("prop",)
    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class And(_Node):
    left: "StateFormula"
    right: "StateFormula"
    _fields = ("left", "right")
    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Or(_Node):
    left: "StateFormula"
    right: "StateFormula"
    _fields = ("left", "right")
    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class LinIneq(_Node):
    """sum(c * P(path) for c, path in terms) cmp bound, with cmp in {'>=', '>'}."""

    terms: Tuple[Tuple[Fraction, "PathFormula"], ...]
    cmp: str
    bound: Fraction
    _fields = ("terms", "cmp", "bound")
    __hash__ = _Node.__hash__

    def __post_init__(self):
        if not self.terms:
            raise FormulaClassError("linear inequality without terms")
        if self.cmp not in (">=", ">"):
            raise FormulaClassError(f"comparison {self.cmp!r} is not in normal form")


@dataclass(frozen=True, eq=True)
class Next(_Node):
    horizon: int
    sub: "StateFormula"
    _fields = ("horizon", "sub")
    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Until(_Node):
    left: "StateFormula"
    horizon: Optional[int]
    right: "StateFormula"
    _fields = ("left", "horizon", "right")
    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class WeakUntil(_Node):
    left: "StateFormula"
    horizon: Optional[int]
    right: "StateFormula"
    _fields = ("left", "horizon", "right")
    __hash__ = _Node.__hash__


StateFormula = Union[Atom, NegAtom, And, Or, LinIneq]
PathFormula = Union[Next, Until, WeakUntil]

TOP = Or(Atom(TRUE_PROP), NegAtom(TRUE_PROP))
BOT = And(Atom(TRUE_PROP), NegAtom(TRUE_PROP))


def conj(parts: Iterable[StateFormula]) -> StateFormula:
    parts = list(parts)
    if not parts:
        return TOP
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def disj(parts: Iterable[StateFormula]) -> StateFormula:
    parts = list(parts)
    if not parts:
        return BOT
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Or(p, out)
    return out


def F(sub: StateFormula, horizon: Optional[int] = None) -> Until:
    return Until(TOP, horizon, sub)


def G(sub: StateFormula, horizon: Optional[int] = None) -> WeakUntil:
    return WeakUntil(sub, horizon, BOT)


def prob_ge(path: PathFormula, bound, coeff=1) -> LinIneq:
    return LinIneq(((Fraction(coeff), path),), ">=", Fraction(bound))


def prob_le(path: PathFormula, bound, coeff=1) -> LinIneq:
    return LinIneq(((-Fraction(coeff), path),), ">=", -Fraction(bound))


def prob_eq(path: PathFormula, bound, coeff=1) -> StateFormula:
    return And(prob_ge(path, bound, coeff), prob_le(path, bound, coeff))


def lin_eq(terms, bound) -> StateFormula:
    """sum c*P(path) = bound as a pair of non-strict inequalities."""
    terms = tuple((Fraction(c), p) for c, p in terms)
    return And(LinIneq(terms, ">=", Fraction(bound)),
               LinIneq(tuple((-c, p) for c, p in terms), ">=", -Fraction(bound)))


def implies(a: StateFormula, b: StateFormula) -> StateFormula:
    return Or(negate(a), b)


def negate(phi: StateFormula) -> StateFormula:
    """Negation pushed to the atoms."""
    if isinstance(phi, Atom):
        return NegAtom(phi.prop)
    if isinstance(phi, NegAtom):
        return Atom(phi.prop)
    if isinstance(phi, And):
        return Or(negate(phi.left), negate(phi.right))
    if isinstance(phi, Or):
        return And(negate(phi.left), negate(phi.right))
    if isinstance(phi, LinIneq):
        neg = tuple((-c, p) for c, p in phi.terms)
        return LinIneq(neg, ">" if phi.cmp == ">=" else ">=", -phi.bound)
    raise TypeError(f"not a state formula: {phi!r}")


def is_path(x) -> bool:
    return isinstance(x, (Next, Until, WeakUntil))


def path_operands(path: PathFormula) -> Tuple[StateFormula, ...]:
    if isinstance(path, Next):
        return (path.sub,)
    return (path.left, path.right)


def with_horizon(path: PathFormula, horizon: Optional[int]) -> PathFormula:
    if isinstance(path, Next):
        return Next(horizon, path.sub)
    return type(path)(path.left, horizon, path.right)


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<pbr>P\[)
  | (?P<op>->|>=|<=|!=|[()\]&|!<>=+\-*^/])
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
""", re.VERBOSE)

_KEYWORDS = {"X", "F", "G", "U", "W", "AG", "true", "false"}


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> List[_Tok]:
    out = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[i]!r}", i)
        kind = m.lastgroup
        if kind != "ws":
            t = m.group()
            if kind == "ident" and t in _KEYWORDS:
                kind = "kw"
            out.append(_Tok(kind, t, i))
        i = m.end()
    out.append(_Tok("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k=1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.cur.text == text and self.cur.kind in ("op", "kw", "pbr")

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            raise FormulaSyntaxError(f"expected {text!r}, found {self.cur.text or 'end of input'!r}",
                                     self.cur.pos)
        return self.take()

    def error(self, what: str):
        raise FormulaSyntaxError(f"{what}, found {self.cur.text or 'end of input'!r}", self.cur.pos)

    def formula(self) -> Tuple[StateFormula, bool]:
        glob = False
        if self.at("AG"):
            self.take()
            glob = True
        phi = self.impl()
        if self.cur.kind != "eof":
            self.error("unexpected trailing input")
        return phi, glob

    def impl(self) -> StateFormula:
        left = self.disj()
        if self.at("->"):
            self.take()
            return implies(left, self.impl())
        return left

    def disj(self) -> StateFormula:
        out = self.conj()
        while self.at("|"):
            self.take()
            out = Or(out, self.conj())
        return out

    def conj(self) -> StateFormula:
        out = self.unary()
        while self.at("&"):
            self.take()
            out = And(out, self.unary())
        return out

    def unary(self) -> StateFormula:
        if self.at("!"):
            self.take()
            return negate(self.unary())
        return self.primary()

    def primary(self) -> StateFormula:
        t = self.cur
        if self.at("true"):
            self.take()
            return TOP
        if self.at("false"):
            self.take()
            return BOT
        if t.kind == "ident":
            self.take()
            if t.text == TRUE_PROP:
                raise FormulaSyntaxError(f"proposition name {TRUE_PROP!r} is reserved", t.pos)
            return Atom(t.text)
        if self.at("("):
            self.take()
            phi = self.impl()
            self.expect(")")
            return phi
        if t.kind in ("int", "pbr") or self.at("-"):
            return self.lin()
        if self.at("AG"):
            self.error("AG may only prefix the whole formula")
        self.error("expected a state formula")

    def rational(self) -> Fraction:
        neg = False
        if self.at("-"):
            self.take()
            neg = True
        if self.cur.kind != "int":
            self.error("expected a number")
        num = int(self.take().text)
        den = 1
        if self.at("/"):
            self.take()
            if self.cur.kind != "int":
                self.error("expected a denominator")
            den = int(self.take().text)
            if den == 0:
                raise FormulaSyntaxError("zero denominator", self.toks[self.i - 1].pos)
        q = Fraction(num, den)
        return -q if neg else q

    def linterm(self, sign: int) -> Tuple[Fraction, PathFormula]:
        coeff = Fraction(sign)
        if self.at("-"):
            self.take()
            coeff = -coeff
        if self.cur.kind == "int":
            coeff *= self.rational()
            self.expect("*")
        if self.cur.kind != "pbr":
            self.error("expected 'P['")
        self.take()
        path = self.path()
        self.expect("]")
        return coeff, path

    def lin(self) -> StateFormula:
        terms = [self.linterm(1)]
        while self.at("+") or self.at("-"):
            sign = 1 if self.take().text == "+" else -1
            terms.append(self.linterm(sign))
        ct = self.cur
        if ct.text not in (">=", ">", "<=", "<", "=", "!=") or ct.kind != "op":
            self.error("expected a comparison")
        self.take()
        bound = self.rational()
        terms = tuple(terms)
        neg = tuple((-c, p) for c, p in terms)
        cmp = ct.text
        if cmp == ">=":
            return LinIneq(terms, ">=", bound)
        if cmp == ">":
            return LinIneq(terms, ">", bound)
        if cmp == "<=":
            return LinIneq(neg, ">=", -bound)
        if cmp == "<":
            return LinIneq(neg, ">", -bound)
        if cmp == "=":
            return And(LinIneq(terms, ">=", bound), LinIneq(neg, ">=", -bound))
        return Or(LinIneq(terms, ">", bound), LinIneq(neg, ">", -bound))

    def horizon(self, default: Optional[int]) -> Optional[int]:
        if not self.at("^"):
            return default
        self.take()
        t = self.cur
        if t.kind != "int":
            self.error("expected a horizon")
        self.take()
        n = int(t.text)
        if n == 0:
            raise FormulaSyntaxError("horizon must be at least 1", t.pos)
        return n

    def path(self) -> PathFormula:
        if self.at("X"):
            self.take()
            n = self.horizon(1)
            return Next(n, self.impl())
        if self.at("F"):
            self.take()
            n = self.horizon(None)
            return Until(TOP, n, self.impl())
        if self.at("G"):
            self.take()
            n = self.horizon(None)
            return WeakUntil(self.impl(), n, BOT)
        left = self.impl()
        if self.at("U") or self.at("W"):
            op = self.take().text
            n = self.horizon(None)
            right = self.impl()
            return (Until if op == "U" else WeakUntil)(left, n, right)
        self.error("expected a path operator")


def parse_formula(text: str) -> Tuple[StateFormula, bool]:
    """Parse concrete syntax into (normal-form formula, global flag)."""
    return _Parser(text).formula()


def parse_path(text: str) -> PathFormula:
    p = _Parser(text)
    path = p.path()
    if p.cur.kind != "eof":
        p.error("unexpected trailing input")
    return path


# --------------------------------------------------------------------------
# printer


def _fmt_q(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _operand(phi: StateFormula) -> str:
    s = pretty(phi)
    if isinstance(phi, (Atom, NegAtom)) or phi == TOP or phi == BOT:
        return s
    return s if s.startswith("(") and _balanced_outer(s) else f"({s})"


def _balanced_outer(s: str) -> bool:
    depth = 0
    for i, ch in enumerate(s):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0 and i != len(s) - 1:
                return False
    return True


def pretty_path(path: PathFormula) -> str:
    def hz(n, default):
        if n == default:
            return ""
        return f"^{n}"
    if isinstance(path, Next):
        return f"X{hz(path.horizon, 1)} {_operand(path.sub)}"
    if isinstance(path, Until) and path.left == TOP:
        return f"F{hz(path.horizon, None)} {_operand(path.right)}"
    if isinstance(path, WeakUntil) and path.right == BOT:
        return f"G{hz(path.horizon, None)} {_operand(path.left)}"
    op = "U" if isinstance(path, Until) else "W"
    return f"{_operand(path.left)} {op}{hz(path.horizon, None)} {_operand(path.right)}"


def pretty(phi: StateFormula, global_: bool = False) -> str:
    """Concrete syntax that parses back to the same normal form."""
    if global_:
        return f"AG {_operand(phi)}"
    if phi == TOP:
        return "true"
    if phi == BOT:
        return "false"
    if isinstance(phi, Atom):
        return phi.prop
    if isinstance(phi, NegAtom):
        return f"!{phi.prop}"
    if isinstance(phi, And):
        return f"({pretty(phi.left)} & {pretty(phi.right)})"
    if isinstance(phi, Or):
        return f"({pretty(phi.left)} | {pretty(phi.right)})"
    if isinstance(phi, LinIneq):
        parts = []
        for k, (c, p) in enumerate(phi.terms):
            body = f"P[{pretty_path(p)}]"
            mag = abs(c)
            term = body if mag == 1 else f"{_fmt_q(mag)}*{body}"
            if k == 0:
                parts.append(term if c >= 0 else f"-{term}")
            else:
                parts.append(f" + {term}" if c >= 0 else f" - {term}")
        return f"{''.join(parts)} {phi.cmp} {_fmt_q(phi.bound)}"
    raise TypeError(f"not a state formula: {phi!r}")


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class FormulaMeta:
    ellmax: int
    window_length: int
    is_window: bool
    is_flat: bool
    is_nonstrict: bool
    is_global_window: bool
    size: int

    def to_dict(self) -> dict:
        return {"ellmax": self.ellmax, "Ell": self.window_length, "window": self.is_window,
                "flat": self.is_flat, "nonstrict": self.is_nonstrict,
                "global_window": self.is_global_window, "size": self.size}


def iter_state(phi: StateFormula) -> Iterator[StateFormula]:
    """All state subformulas, including those under path operators."""
    stack = [phi]
    while stack:
        f = stack.pop()
        yield f
        if isinstance(f, (And, Or)):
            stack += [f.right, f.left]
        elif isinstance(f, LinIneq):
            for _, p in reversed(f.terms):
                stack += reversed(path_operands(p))


def iter_paths(phi: StateFormula) -> Iterator[PathFormula]:
    for f in iter_state(phi):
        if isinstance(f, LinIneq):
            for _, p in f.terms:
                yield p


def props_of(phi: StateFormula) -> set:
    return {f.prop for f in iter_state(phi) if isinstance(f, (Atom, NegAtom))} - {TRUE_PROP}


def _ell_state(phi) -> int:
    if isinstance(phi, (Atom, NegAtom)):
        return 0
    if isinstance(phi, (And, Or)):
        return max(_ell_state(phi.left), _ell_state(phi.right))
    return max(_ell_path(p) for _, p in phi.terms)


def _ell_path(path) -> int:
    h = path.horizon or 0
    return h + max(_ell_state(s) for s in path_operands(path))


def window_length(phi: StateFormula) -> int:
    return max(1, _ell_state(phi))


def _size_state(phi) -> int:
    if isinstance(phi, (Atom, NegAtom)):
        return 1
    if isinstance(phi, (And, Or)):
        return 1 + _size_state(phi.left) + _size_state(phi.right)
    n = 1 + _bits(phi.bound)
    for c, p in phi.terms:
        n += _bits(c) + _size_path(p)
    return n


def _size_path(path) -> int:
    h = path.horizon if path.horizon is not None else 1
    return 1 + h + sum(_size_state(s) for s in path_operands(path))


def _bits(q: Fraction) -> int:
    return max(1, abs(q.numerator).bit_length()) + max(1, q.denominator.bit_length())


def formula_size(phi: StateFormula) -> int:
    return _size_state(phi)


def analyze(phi: StateFormula, global_: bool = False) -> FormulaMeta:
    paths = list(iter_paths(phi))
    finite = [p.horizon for p in paths if p.horizon is not None]
    window = all(p.horizon is not None for p in paths)
    flat = all(not isinstance(s, LinIneq)
               for p in paths for op in path_operands(p) for s in iter_state(op))
    nonstrict = all(f.cmp == ">=" for f in iter_state(phi) if isinstance(f, LinIneq))
    return FormulaMeta(max([1] + finite), window_length(phi), window, flat, nonstrict,
                       global_ and window, formula_size(phi))


def horizon_variants(path: PathFormula) -> List[PathFormula]:
    """The path formula with every horizon 0..ℓ, highest first."""
    if path.horizon is None:
        raise FormulaClassError("unbounded path operator in a window formula")
    return [with_horizon(path, h) for h in range(path.horizon, -1, -1)]


def subformula_closure(phi: StateFormula) -> Tuple[frozenset, frozenset, frozenset]:
    """(S0, S1, P): top-level state subformulas, those inside a path formula,
    and all path subformulas with their lower-horizon variants."""
    s0, s1, pp = set(), set(), set()

    def visit(f, inside):
        (s1 if inside else s0).add(f)
        if isinstance(f, (And, Or)):
            visit(f.left, inside)
            visit(f.right, inside)
        elif isinstance(f, LinIneq):
            for _, p in f.terms:
                pp.update(horizon_variants(p))
                for op in path_operands(p):
                    visit(op, True)

    visit(phi, False)
    return frozenset(s0), frozenset(s1), frozenset(pp)


def require_window(phi: StateFormula) -> None:
    for p in iter_paths(phi):
        if p.horizon is None:
            raise FormulaClassError("formula has an unbounded path operator; a window formula is required")


def needed_by_depth(phi: StateFormula, ell: int) -> Tuple[List[set], List[set]]:
    """Path and state formulas whose values are needed at each depth 0..ell
    when phi is evaluated at depth 0 along a window of length ell.

    A path formula with horizon h > 0 at depth k needs its h-1 variant at
    depth k+1; everything else is needed at the same depth.
    """
    paths: List[set] = [set() for _ in range(ell + 1)]
    states: List[set] = [set() for _ in range(ell + 1)]
    stack = [(phi, 0, False)]
    while stack:
        f, k, is_p = stack.pop()
        if is_p:
            if f in paths[k]:
                continue
            if f.horizon is None:
                raise FormulaClassError("unbounded path operator in a window formula")
            paths[k].add(f)
            for op in path_operands(f):
                if not (isinstance(f, Next) and f.horizon > 0):
                    stack.append((op, k, False))
            if f.horizon > 0:
                if k + 1 > ell:
                    raise FormulaClassError("window length too small for the formula")
                stack.append((with_horizon(f, f.horizon - 1), k + 1, True))
        else:
            if f in states[k]:
                continue
            states[k].add(f)
            if isinstance(f, (And, Or)):
                stack += [(f.left, k, False), (f.right, k, False)]
            elif isinstance(f, LinIneq):
                stack += [(p, k, True) for _, p in f.terms]
    return paths, states
