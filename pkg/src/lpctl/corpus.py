"""Instance generators and their oracles.

Two-counter machines are compiled into an MDP and a flat, non-strict window
formula whose global satisfiability means the machine does not halt. The
gadget topologies are documented in docs/gadgets.md. Also here: the
generalized reachability reduction with an attractor game solver as oracle,
the self-composition noninterference example and seeded random models.
"""

from __future__ import annotations

import random
import re
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, List, Mapping, Sequence, Tuple

from .errors import InputError
from .logic import (Atom, NegAtom, Next, StateFormula, Until, WeakUntil, conj, disj, LinIneq, TOP,
                    BOT, parse_formula)
from .model import Mc, Mdp, make_mdp, self_compose

# --------------------------------------------------------------------------
# two-counter machines


@dataclass(frozen=True)
class Inc:
    counter: int
    target: int


@dataclass(frozen=True)
class Branch:
    """If the counter is zero goto ``zero`` else decrement and goto ``pos``."""

    counter: int
    zero: int
    pos: int


@dataclass(frozen=True)
class Halt:
    pass


Instruction = Inc | Branch | Halt


@dataclass(frozen=True)
class MinskyMachine:
    instructions: Tuple[Instruction, ...]

    def __post_init__(self):
        n = len(self.instructions)
        if n == 0:
            raise InputError("a machine needs at least one instruction")
        for i, ins in enumerate(self.instructions, 1):
            if isinstance(ins, (Inc, Branch)) and ins.counter not in (2, 3):
                raise InputError(f"line {i}: counters are 2 and 3")
            targets = ((ins.target,) if isinstance(ins, Inc) else
                       (ins.zero, ins.pos) if isinstance(ins, Branch) else ())
            for t in targets:
                if not 1 <= t <= n:
                    raise InputError(f"line {i}: target {t} out of range 1..{n}")


_LINE = re.compile(r"^(INC2|INC3)\s+(\d+)$|^(BR2|BR3)\s+(\d+)\s+(\d+)$|^HALT$")


def parse_minsky(text: str) -> MinskyMachine:
    """One instruction per line: INC2 k | INC3 k | BR2 k m | BR3 k m | HALT; '#' comments."""
    out: List[Instruction] = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(" ".join(line.upper().split()))
        if not m:
            raise InputError(f"line {no}: cannot parse {raw.strip()!r}")
        if m.group(1):
            out.append(Inc(int(m.group(1)[-1]), int(m.group(2))))
        elif m.group(3):
            out.append(Branch(int(m.group(3)[-1]), int(m.group(4)), int(m.group(5))))
        else:
            out.append(Halt())
    return MinskyMachine(tuple(out))


def format_minsky(m: MinskyMachine) -> str:
    lines = []
    for ins in m.instructions:
        if isinstance(ins, Inc):
            lines.append(f"INC{ins.counter} {ins.target}")
        elif isinstance(ins, Branch):
            lines.append(f"BR{ins.counter} {ins.zero} {ins.pos}")
        else:
            lines.append("HALT")
    return "\n".join(lines) + "\n"


@dataclass
class Halted:
    step: int
    trace: List[Tuple[int, int, int]]


@dataclass
class RunningAfter:
    steps: int
    trace: List[Tuple[int, int, int]]


def simulate_minsky(m: MinskyMachine, max_steps: int) -> Halted | RunningAfter:
    """Run from instruction 1 with zero counters; trace holds (pc, c2, c3) before each step."""
    pc, c = 1, {2: 0, 3: 0}
    trace: List[Tuple[int, int, int]] = []
    for step in range(1, max_steps + 1):
        trace.append((pc, c[2], c[3]))
        ins = m.instructions[pc - 1]
        if isinstance(ins, Halt):
            return Halted(step, trace)
        if isinstance(ins, Inc):
            c[ins.counter] += 1
            pc = ins.target
        elif c[ins.counter] == 0:
            pc = ins.zero
        else:
            c[ins.counter] -= 1
            pc = ins.pos
    trace.append((pc, c[2], c[3]))
    return RunningAfter(max_steps, trace)


def encoded_value(x2: int, x3: int) -> Fraction:
    """The probability that encodes counter values (x2, x3)."""
    return Fraction(5, 6) / (2 ** x2 * 3 ** x3)


# --------------------------------------------------------------------------
# gadgets

GADGET_PROPS = ("P", "Pq", "keep", "inc2", "inc3", "dec2", "dec3", "mark2", "mark3", "plus",
                "minus", "choose", "z01", "z01q", "five6", "five6q", "dupl", "en", "ext", "exb")

_GADGET_FORMULAS = (
    "keep -> P[F^1 P] - 6*P[F^4 Pq] = 0",
    "inc2 -> P[F^2 mark2] - 12*P[F^3 plus] = 0",
    "inc3 -> P[F^2 mark3] - 18*P[F^3 plus] = 0",
    "dec2 -> P[F^2 mark2] - 3*P[F^3 minus] = 0",
    "dec3 -> P[F^2 mark3] - 2*P[F^3 minus] = 0",
    "choose -> (P[X z01] = 1 | P[X z01q] = 1)",
    "five6 -> P[F^2 five6q] = 5/6",
    "dupl -> (P[F^2 en] - 12*P[F^3 ext] = 0 & P[F^2 en] - 12*P[F^3 exb] = 0)",
)


def gadget_formula() -> StateFormula:
    """Conjunction of every guarded gadget constraint (flat, non-strict, Ell 4)."""
    return conj(parse_formula(t)[0] for t in _GADGET_FORMULAS)


LEAK = "leak"


@dataclass(frozen=True)
class Entry:
    """Where a link lands: a carrier (reached through a dummy) or a choice state."""

    kind: str
    state: str


class GadgetBuilder:
    """Accumulates gadget states; two actions a and b everywhere."""

    def __init__(self):
        self.states: List[str] = []
        self.labels: Dict[str, set] = {}
        self.trans: Dict[Tuple[str, str], Dict[str, Fraction]] = {}
        self.dummies: Dict[str, str] = {}
        self.state(LEAK)
        self.uniform(LEAK, {LEAK: 1})

    def state(self, name: str, labels=()) -> str:
        if name in self.labels:
            raise InputError(f"gadget state {name!r} defined twice")
        self.states.append(name)
        self.labels[name] = set(labels)
        return name

    def uniform(self, s: str, dist: Mapping[str, object]) -> None:
        for a in ("a", "b"):
            self.trans[(s, a)] = {t: Fraction(p) for t, p in dist.items()}

    def carrier(self, name: str, labels=(), top=()) -> str:
        """Action a leads to name.t (labels ``top``), b to name.u."""
        self.state(name, labels)
        self.state(name + ".t", top)
        self.state(name + ".u")
        self.trans[(name, "a")] = {name + ".t": Fraction(1)}
        self.trans[(name, "b")] = {name + ".u": Fraction(1)}
        return name

    def outlet(self, carrier: str, dist: Mapping[str, Fraction]) -> None:
        """Both outcomes of a carrier continue with ``dist``; the rest leaks."""
        rest = 1 - sum(dist.values(), Fraction(0))
        full = dict(dist)
        if rest:
            full[LEAK] = full.get(LEAK, 0) + rest
        for side in (".t", ".u"):
            self.uniform(carrier + side, full)

    def target(self, entry: Entry) -> str:
        if entry.kind == "choose":
            return entry.state
        d = self.dummies.get(entry.state)
        if d is None:
            d = self.state(entry.state + ".d")
            self.uniform(d, {entry.state: 1})
            self.dummies[entry.state] = d
        return d

    def link(self, carrier: str, entry: Entry) -> None:
        """Keep-link: the next carrier sits three steps after ``carrier``."""
        self.outlet(carrier, {self.target(entry): Fraction(1, 6)})

    def build(self, initial: str) -> Mdp:
        return make_mdp(self.states, ("a", "b"), initial, self.trans,
                        labels={s: sorted(l) for s, l in self.labels.items()},
                        props=GADGET_PROPS)

    # individual gadgets; each returns its entry and exit carriers

    def g_init(self, pre: str) -> str:
        """pre -> x; the value of x is pinned to 5/6 = p(0,0)."""
        self.state(pre, {"five6"})
        x = self.carrier(pre + ".x", {"keep"}, {"P", "five6q"})
        self.uniform(pre, {x: 1})
        return x

    def g_halt(self, pre: str) -> Entry:
        h = self.state(pre, {"keep"})
        hp = self.state(pre + ".p", {"P"})
        self.uniform(h, {hp: 1})
        self.uniform(hp, {hp: 1})
        return Entry("carrier", h)

    def _scale(self, pre: str, guard: str, mark: str, out: str, extra=()) -> Tuple[Entry, str]:
        w = self.carrier(pre, {guard, *extra}, {"Pq", mark})
        x = self.carrier(pre + ".x", {"keep"}, {"P", out})
        self.outlet(w, {x: Fraction(1, 6)})
        return Entry("carrier", w), x

    def g_inc(self, pre: str, counter: int, extra=()) -> Tuple[Entry, str]:
        return self._scale(pre, f"inc{counter}", f"mark{counter}", "plus", extra)

    def g_dec(self, pre: str, counter: int, extra=()) -> Tuple[Entry, str]:
        return self._scale(pre, f"dec{counter}", f"mark{counter}", "minus", extra)

    def g_dupl(self, pre: str, extra=()) -> Tuple[Entry, str, str]:
        w = self.carrier(pre, {"dupl", *extra}, {"Pq", "en"})
        xt = self.carrier(pre + ".xt", {"keep"}, {"P", "ext"})
        xb = self.carrier(pre + ".xb", {"keep"}, {"P", "exb"})
        self.outlet(w, {xt: Fraction(1, 12), xb: Fraction(1, 12)})
        return Entry("carrier", w), xt, xb

    def g_five6(self, pre: str, extra=()) -> Entry:
        w = self.carrier(pre, {"five6", *extra}, {"Pq", "five6q"})
        self.outlet(w, {})
        return Entry("carrier", w)

    def g_choose(self, pre: str, a: Entry, b: Entry) -> Entry:
        c = self.state(pre, {"choose"})
        self.trans[(c, "a")] = {a.state: Fraction(1)}
        self.trans[(c, "b")] = {b.state: Fraction(1)}
        return Entry("choose", c)

    def g_test_zero(self, pre: str, counter: int) -> Entry:
        """Passes iff the counter is zero: drain the other counter, then check 5/6."""
        other = 5 - counter
        done = self.g_five6(pre + ".z", ("z01",))
        dec, x = self.g_dec(pre + ".o", other, ("z01q",))
        c = self.g_choose(pre, done, dec)
        self.link(x, c)
        return c

    def g_test_pos(self, pre: str, counter: int) -> Entry:
        """Passes iff the counter is positive: decrement once, drain, then test zero."""
        other = 5 - counter
        first, x1 = self.g_dec(pre, counter)
        inc, xi = self.g_inc(pre + ".i", other, ("z01",))
        dec_o, xo = self.g_dec(pre + ".j", other)
        more, xm = self.g_dec(pre + ".m", counter, ("z01q",))
        c = self.g_choose(pre + ".c", inc, more)
        self.link(x1, c)
        self.link(xm, c)
        self.link(xi, dec_o)
        self.link(xo, self.g_test_zero(pre + ".zt", counter))
        return first


def _instr_prefix(i: int) -> str:
    return f"L{i}"


def compile_minsky(m: MinskyMachine) -> Tuple[Mdp, StateFormula, bool]:
    """MDP, window formula and the global flag: AG phi is satisfiable iff m never halts."""
    g = GadgetBuilder()
    x0 = g.g_init("init")
    entries: Dict[int, Entry] = {}
    pending: List[Tuple[str, int]] = []
    for i, ins in enumerate(m.instructions, 1):
        pre = _instr_prefix(i)
        if isinstance(ins, Halt):
            entries[i] = g.g_halt(pre)
        elif isinstance(ins, Inc):
            entries[i], x = g.g_inc(pre, ins.counter)
            pending.append((x, ins.target))
        else:
            j = ins.counter
            dz, zt, zb = g.g_dupl(pre + ".dz", ("z01",))
            dp, pt, pb = g.g_dupl(pre + ".dp", ("z01q",))
            entries[i] = g.g_choose(pre, dz, dp)
            g.link(zt, g.g_test_zero(pre + ".tz", j))
            pending.append((zb, ins.zero))
            g.link(pt, g.g_test_pos(pre + ".tp", j))
            dec, xd = g.g_dec(pre + ".dec", j)
            g.link(pb, dec)
            pending.append((xd, ins.pos))
    g.link(x0, entries[1])
    for x, t in pending:
        g.link(x, entries[t])
    return g.build("init"), gadget_formula(), True


@dataclass
class GadgetInstance:
    """A gadget between a feeder carrier and free terminal carriers."""

    mdp: Mdp
    formula: StateFormula
    anchors: Dict[str, str]


def _terminal(g: GadgetBuilder, name: str) -> Entry:
    t = g.carrier(name, (), {"Pq"})
    g.outlet(t, {})
    return Entry("carrier", t)


def gadget_fragment(kind: str, counter: int = 2) -> GadgetInstance:
    """Fragments for the gadget tests.

    Anchors: ``in`` is the feeder carrier (value chosen by the test), ``out``
    / ``out_t`` / ``out_b`` are terminal carriers whose value mirrors the exit.
    Kinds: init, keep, dupl, inc, dec, test_zero.
    """
    g = GadgetBuilder()
    anchors: Dict[str, str] = {}
    if kind == "init":
        x = g.g_init("init")
        anchors.update(exit=x, out=_terminal(g, "out").state)
        g.link(x, Entry("carrier", anchors["out"]))
        return GadgetInstance(g.build("init"), gadget_formula(), anchors)
    g.state("src")
    v = g.carrier("in", {"keep"}, {"P"})
    g.uniform("src", {v: 1})
    anchors["in"] = v
    if kind == "keep":
        out = _terminal(g, "out")
        g.link(v, out)
        anchors["out"] = out.state
    elif kind == "dupl":
        e, xt, xb = g.g_dupl("g")
        g.link(v, e)
        ot, ob = _terminal(g, "out_t"), _terminal(g, "out_b")
        g.link(xt, ot)
        g.link(xb, ob)
        anchors.update(entry=e.state, exit_t=xt, exit_b=xb, out_t=ot.state, out_b=ob.state)
    elif kind in ("inc", "dec"):
        e, x = (g.g_inc if kind == "inc" else g.g_dec)("g", counter)
        g.link(v, e)
        out = _terminal(g, "out")
        g.link(x, out)
        anchors.update(entry=e.state, exit=x, out=out.state)
    elif kind == "test_zero":
        c = g.g_test_zero("g", counter)
        g.link(v, c)
        anchors.update(choose=c.state, check="g.z", drain="g.o", drain_exit="g.o.x")
    else:
        raise InputError(f"unknown gadget kind {kind!r}")
    return GadgetInstance(g.build("src"), gadget_formula(), anchors)


# --------------------------------------------------------------------------
# generalized reachability games


@dataclass(frozen=True)
class Arena:
    """Two-player arena; owner 1 chooses, owner 2 is adversarial."""

    vertices: Tuple[str, ...]
    owner: Tuple[int, ...]
    succ: Tuple[Tuple[int, ...], ...]
    targets: Tuple[FrozenSet[int], ...]
    initial: int = 0

    def __post_init__(self):
        for v, out in zip(self.vertices, self.succ):
            if not out:
                raise InputError(f"vertex {v!r} has no outgoing edge")


def reachability_target_props(k: int) -> List[str]:
    return [f"x{i}" for i in range(1, k + 1)]


def gen_reachability_instance(arena: Arena) -> Tuple[Mdp, StateFormula]:
    """Player 1 picks an edge per action; player 2 vertices move uniformly;
    the formula asks for every target set within n*k steps with probability 1."""
    n = len(arena.vertices)
    k = len(arena.targets)
    width = max(len(s) for s in arena.succ)
    actions = [f"e{i}" for i in range(width)]
    trans = {}
    for v, name in enumerate(arena.vertices):
        out = arena.succ[v]
        for i, a in enumerate(actions):
            if arena.owner[v] == 1:
                trans[(name, a)] = {arena.vertices[out[min(i, len(out) - 1)]]: 1}
            else:
                trans[(name, a)] = {arena.vertices[t]: Fraction(1, len(out)) for t in out}
    props = reachability_target_props(k)
    labels = {name: [props[i] for i, f in enumerate(arena.targets) if v in f]
              for v, name in enumerate(arena.vertices)}
    mdp = make_mdp(arena.vertices, actions, arena.vertices[arena.initial], trans, labels, props)
    ge1 = [LinIneq(((Fraction(1), Until(TOP, n * k, Atom(p))),), ">=", Fraction(1)) for p in props]
    return mdp, conj(ge1) if ge1 else TOP


def solve_reachability_game(arena: Arena) -> bool:
    """Attractor on (vertex, visited targets): can player 1 force visiting all targets?"""
    k = len(arena.targets)
    full = frozenset(range(k))

    def hit(v):
        return frozenset(i for i, f in enumerate(arena.targets) if v in f)

    nodes = []
    start = (arena.initial, hit(arena.initial))
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        nodes.append(node)
        v, got = node
        for t in arena.succ[v]:
            nxt = (t, got | hit(t))
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    win = {nd for nd in nodes if nd[1] == full}
    changed = True
    while changed:
        changed = False
        for nd in nodes:
            if nd in win:
                continue
            v, got = nd
            succs = [(t, got | hit(t)) for t in arena.succ[v]]
            ok = (any(s in win for s in succs) if arena.owner[v] == 1
                  else all(s in win for s in succs))
            if ok:
                win.add(nd)
                changed = True
    return start in win


def gen_random_arena(seed: int, n: int = 5, k: int = 2) -> Arena:
    rng = random.Random(seed)
    nv = rng.randint(1, n)
    owner = tuple(rng.choice((1, 2)) for _ in range(nv))
    succ = tuple(tuple(sorted(rng.sample(range(nv), rng.randint(1, min(3, nv))))) for _ in range(nv))
    kk = rng.randint(1, k)
    targets = tuple(frozenset(v for v in range(nv) if rng.random() < 0.35) for _ in range(kk))
    return Arena(tuple(f"v{i}" for i in range(nv)), owner, succ, targets)


# --------------------------------------------------------------------------
# noninterference


def pni_formula(left: str = "l", right: str = "l'") -> StateFormula:
    """Both copies see the low proposition next with equal probability."""
    return parse_formula(f"P[X ({left} & {right} -> P[X {left}] - P[X {right}] = 0)] = 1")[0]


def gen_noninterference(mc: Mc, low: str) -> Tuple[Mc, StateFormula]:
    if low not in mc.props:
        raise InputError(f"low proposition {low!r} is not declared")
    if not any(low in lab for lab in mc.labels):
        raise InputError(f"low proposition {low!r} labels no state")
    return self_compose(mc, low), pni_formula()


# --------------------------------------------------------------------------
# random models and formulas


def _random_dist(rng: random.Random, n_states: int, granularity: int) -> Dict[int, Fraction]:
    den = rng.randint(1, granularity)
    k = rng.randint(1, min(den, n_states))
    targets = rng.sample(range(n_states), k)
    cuts = sorted(rng.sample(range(1, den), k - 1))
    parts = [b - a for a, b in zip([0] + cuts, cuts + [den])]
    return {t: Fraction(p, den) for t, p in zip(targets, parts)}


def gen_random(seed: int, n_states: int, n_actions: int, granularity: int,
               props: Sequence[str] = ("p", "q")) -> Mdp:
    """Seeded MDP; every probability is a/b with b <= granularity."""
    if n_states < 1 or n_actions < 1 or granularity < 1:
        raise InputError("sizes and granularity must be at least 1")
    rng = random.Random(seed)
    states = [f"s{i}" for i in range(n_states)]
    actions = [f"a{i}" for i in range(n_actions)]
    trans = {}
    for s in states:
        for a in actions:
            trans[(s, a)] = {states[t]: p for t, p in _random_dist(rng, n_states, granularity).items()}
    labels = {s: [p for p in props if rng.random() < 0.5] for s in states}
    return make_mdp(states, actions, states[0], trans, labels, props)


def _rand_state(rng: random.Random, props: Sequence[str], budget: int, depth: int) -> StateFormula:
    r = rng.random()
    if depth <= 0 or r < 0.3:
        p = rng.choice(props)
        return Atom(p) if rng.random() < 0.7 else NegAtom(p)
    if r < 0.5:
        a = _rand_state(rng, props, budget, depth - 1)
        b = _rand_state(rng, props, budget, depth - 1)
        return conj([a, b]) if rng.random() < 0.5 else disj([a, b])
    if budget < 1:
        return Atom(rng.choice(props))
    h = rng.randint(1, budget)
    inner = budget - h
    kind = rng.choice(("X", "U", "W", "F", "G"))

    def sub():
        return _rand_state(rng, props, inner, depth - 1)

    if kind == "X":
        path = Next(h, sub())
    elif kind == "U":
        path = Until(sub(), h, sub())
    elif kind == "W":
        path = WeakUntil(sub(), h, sub())
    elif kind == "F":
        path = Until(TOP, h, sub())
    else:
        path = WeakUntil(sub(), h, BOT)
    bound = Fraction(rng.randint(0, 4), 4)
    if rng.random() < 0.5:
        return LinIneq(((Fraction(1), path),), ">=", bound)
    return LinIneq(((Fraction(-1), path),), ">=", -bound)


def gen_random_formula(seed: int, props: Sequence[str] = ("p", "q"), max_ell: int = 3,
                       depth: int = 3) -> StateFormula:
    """Seeded window formula with window length at most ``max_ell``."""
    rng = random.Random(seed)
    return _rand_state(rng, props, max_ell, depth)
