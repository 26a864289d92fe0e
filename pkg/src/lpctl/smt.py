"""SMT-LIB v2 emission and a text-only subprocess adapter for the solver.

The solver command comes from ``PCTL_SMT_CMD`` (default ``z3 -smt2 {}``),
where ``{}`` is replaced by the script path.
"""

from __future__ import annotations

import os
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import SolverError
from .reals import (TRUE, Cmp, Conj, Disj, Exists, RealFormula, RNode, Var, _Const)

DEFAULT_CMD = "z3 -smt2 {}"
DEFAULT_TIMEOUT = 60.0


def _sym(name: str) -> str:
    return f"|{name}|"


def _num(q: Fraction) -> str:
    q = Fraction(q)
    mag = abs(q)
    body = str(mag.numerator) if mag.denominator == 1 else f"(/ {mag.numerator} {mag.denominator})"
    return f"(- {body})" if q < 0 else body


def _mono(m: Tuple[str, ...], c: Fraction) -> str:
    factors = [_sym(v) for v in m]
    prod = factors[0] if len(factors) == 1 else f"(* {' '.join(factors)})"
    if c == 1:
        return prod
    if c == -1:
        return f"(- {prod})"
    return f"(* {_num(c)} {' '.join(factors)})"


_FLIP = {">=": "<=", ">": "<", "=": "="}


def _cmp(node: Cmp) -> str:
    p = node.poly
    op = node.op
    terms = [(m, c) for m, c in p.terms if m]
    if terms[0][1] < 0:
        p = -p
        op = _FLIP[op]
        terms = [(m, c) for m, c in p.terms if m]
    rhs = -p.const_value()
    lhs = _mono(*terms[0]) if len(terms) == 1 else f"(+ {' '.join(_mono(m, c) for m, c in terms)})"
    return f"({op} {lhs} {_num(rhs)})"


def _emit(node: RNode, flatten: bool, out: List[str]) -> None:
    if isinstance(node, Cmp):
        out.append(_cmp(node))
    elif isinstance(node, _Const):
        out.append("true" if node.value else "false")
    elif isinstance(node, (Conj, Disj)):
        out.append("(and" if isinstance(node, Conj) else "(or")
        for it in node.items:
            out.append(" ")
            _emit(it, flatten, out)
        out.append(")")
    elif isinstance(node, Exists):
        if flatten:
            _emit(node.body, flatten, out)
        else:
            decl = " ".join(f"({_sym(v.name)} Real)" for v in node.vars)
            out.append(f"(exists ({decl}) ")
            _emit(node.body, flatten, out)
            out.append(")")
    else:
        raise TypeError(f"not an IR node: {node!r}")


def _top_conjuncts(node: RNode, flatten: bool) -> List[RNode]:
    if isinstance(node, Conj):
        out = []
        for it in node.items:
            out.extend(_top_conjuncts(it, flatten))
        return out
    if flatten and isinstance(node, Exists):
        return _top_conjuncts(node.body, flatten)
    return [node]


def _ordered_vars(f: RealFormula, flatten: bool) -> List[Var]:
    seen: Dict[str, Var] = {}
    for v in f.free:
        seen.setdefault(v.name, v)
    if flatten:
        for v in f.all_vars():
            seen.setdefault(v.name, v)
    else:
        for v in f.bound:
            seen.setdefault(v.name, v)
    return list(seen.values())


def to_smtlib(f: RealFormula, want_model: bool = False, flatten: bool = True,
              negate_bodies: Sequence[RealFormula] = ()) -> str:
    """Deterministic SMT-LIB script asserting ``f``.

    Every formula in ``negate_bodies`` is asserted negated as a closed
    existential over its bound variables (its free variables are shared
    with ``f``); this needs a quantified logic.
    """
    quantified = not flatten or bool(negate_bodies)
    lines = ["; lpctl encoding"]
    for c in f.comments:
        lines.append(f"; {c}")
    lines.append("(set-logic NRA)" if quantified else "(set-logic QF_NRA)")
    for v in _ordered_vars(f, flatten):
        lines.append(f"(declare-const {_sym(v.name)} Real)")
    names = {v.name for v in _ordered_vars(f, flatten)}
    for g in negate_bodies:
        for v in g.free:
            if v.name not in names:
                names.add(v.name)
                lines.append(f"(declare-const {_sym(v.name)} Real)")
    for part in _top_conjuncts(f.body, flatten):
        if part is TRUE:
            continue
        buf: List[str] = []
        _emit(part, flatten, buf)
        lines.append(f"(assert {''.join(buf)})")
    for g in negate_bodies:
        buf = []
        _emit(g.body, False, buf)
        bvars = [v for v in g.all_vars() if v.name not in {w.name for w in g.free}]
        inner = "".join(buf)
        if bvars:
            decl = " ".join(f"({_sym(v.name)} Real)" for v in _dedup(bvars))
            inner = f"(exists ({decl}) {inner})"
        lines.append(f"(assert (not {inner}))")
    lines.append("(check-sat)")
    if want_model:
        lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def _dedup(vs: Sequence[Var]) -> List[Var]:
    seen = {}
    for v in vs:
        seen.setdefault(v.name, v)
    return list(seen.values())


# --------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class Sat:
    model: Dict[str, Optional[Fraction]] = field(default_factory=dict)
    rational: bool = True
    raw: str = ""

    verdict = "sat"


@dataclass(frozen=True)
class Unsat:
    raw: str = ""
    verdict = "unsat"


@dataclass(frozen=True)
class Unknown:
    reason: str = ""
    raw: str = ""
    verdict = "unknown"


SolveResult = Sat | Unsat | Unknown


# --------------------------------------------------------------------------
# s-expressions


_SEXP_TOKEN = re.compile(r'\s+|;[^\n]*|\(|\)|\|[^|]*\||"(?:[^"]|"")*"|[^\s()|";]+')


def parse_sexps(text: str) -> List:
    toks = [t for t in _SEXP_TOKEN.findall(text) if t.strip() and not t.startswith(";")]
    stack: List[List] = [[]]
    for t in toks:
        if t == "(":
            stack.append([])
        elif t == ")":
            if len(stack) == 1:
                raise SolverError(f"unbalanced solver output:\n{text}")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(t[1:-1] if t.startswith("|") else t)
    if len(stack) != 1:
        raise SolverError(f"unbalanced solver output:\n{text}")
    return stack[0]


class _Irrational(Exception):
    pass


def _value(e) -> Fraction:
    if isinstance(e, str):
        try:
            return Fraction(e)
        except ValueError:
            raise SolverError(f"cannot read model value {e!r}") from None
    if not e:
        raise SolverError("empty model value")
    head = e[0]
    if head == "/" and len(e) == 3:
        return _value(e[1]) / _value(e[2])
    if head == "-" and len(e) == 2:
        return -_value(e[1])
    if head == "-" and len(e) == 3:
        return _value(e[1]) - _value(e[2])
    if head == "+":
        return sum((_value(x) for x in e[1:]), Fraction(0))
    if head == "*":
        out = Fraction(1)
        for x in e[1:]:
            out *= _value(x)
        return out
    if head in ("root-obj", "_"):
        raise _Irrational()
    raise SolverError(f"cannot read model value {e!r}")


def parse_model(text: str) -> Tuple[Dict[str, Optional[Fraction]], bool]:
    """Variable assignment from a (get-model) answer; irrational entries are None."""
    model: Dict[str, Optional[Fraction]] = {}
    rational = True

    def walk(e):
        nonlocal rational
        if isinstance(e, list):
            if len(e) == 5 and e[0] == "define-fun" and e[2] == []:
                try:
                    model[e[1]] = _value(e[4])
                except _Irrational:
                    model[e[1]] = None
                    rational = False
            else:
                for x in e:
                    walk(x)

    walk(parse_sexps(text))
    return model, rational


# --------------------------------------------------------------------------
# running the solver


def solver_command(env_var: str = "PCTL_SMT_CMD") -> Optional[str]:
    cmd = os.environ.get(env_var)
    if cmd:
        return cmd
    return DEFAULT_CMD if env_var == "PCTL_SMT_CMD" else None


def run_script(script: str, cmd: str | None = None, timeout: float | None = None) -> SolveResult:
    cmd = cmd or solver_command()
    timeout = DEFAULT_TIMEOUT if timeout is None else timeout
    with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as fh:
        fh.write(script)
        path = fh.name
    try:
        argv = [a.replace("{}", path) for a in shlex.split(cmd)]
        if not any(path in a for a in argv):
            argv.append(path)
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        except FileNotFoundError:
            raise SolverError(f"solver not found: {argv[0]!r}") from None
        except subprocess.TimeoutExpired:
            return Unknown("timeout")
    finally:
        try:
            os.unlink(path)
        except OSError:
            pass
    out = proc.stdout
    first, _, rest = out.strip().partition("\n")
    first = first.strip()
    if first == "unsat":
        return Unsat(out)
    if first == "unknown":
        return Unknown("solver answered unknown", out)
    if first == "sat":
        if "(get-model)" in script:
            model, rational = parse_model(rest)
            return Sat(model, rational, out)
        return Sat({}, True, out)
    if "timeout" in out or "canceled" in out:
        return Unknown("timeout", out)
    raise SolverError(f"unreadable solver output (exit {proc.returncode}):\n{out}{proc.stderr}")


def solve(f: RealFormula, want_model: bool = False, cmd: str | None = None,
          timeout: float | None = None) -> SolveResult:
    """Decide the existential closure of f with the external solver."""
    return run_script(to_smtlib(f, want_model), cmd, timeout)


def solve_equivalence_side(f: RealFormula, negated: Sequence[RealFormula], cmd: str | None = None,
                           timeout: float | None = None) -> SolveResult:
    """Satisfiability of f together with the negation of each formula in ``negated``."""
    return run_script(to_smtlib(f, False, True, negated), cmd, timeout)
