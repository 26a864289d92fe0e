"""Deterministic window strategies: evaluation, synthesis, enumeration and
the portfolio greatest fixpoint for global window formulas.

A window strategy of horizon Ell rooted at s is a decision tree that assigns
an action to every path of length < Ell from s that has positive probability
under the tree itself. Paths are int tuples (s0, a0, s1, ..., sk).
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from .errors import FormulaClassError, InputError, LpctlError, ResourceError
from .logic import (TRUE_PROP, And, Atom, LinIneq, NegAtom, Next, Or, PathFormula,
                    StateFormula, Until, WeakUntil, needed_by_depth, path_operands,
                    pretty_path, require_window, window_length, with_horizon)
from .model import FiniteMemoryStrategy, Mdp

Path = Tuple[int, ...]
ZERO = Fraction(0)
ONE = Fraction(1)

DEFAULT_ENUM_CAP = 2 ** 20
DEFAULT_MAX_ROUNDS = 10 ** 6


def path_length(path: Path) -> int:
    return (len(path) - 1) // 2


@dataclass(frozen=True, eq=False)
class DetWindowStrategy:
    """Deterministic window strategy; ``decisions`` maps paths to action ids."""

    root: int
    horizon: int
    decisions: Mapping[Path, int]
    key: Tuple[Tuple[Path, int], ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "key", tuple(sorted(self.decisions.items())))

    def __eq__(self, other):
        if not isinstance(other, DetWindowStrategy):
            return NotImplemented
        return (self.root, self.horizon, self.key) == (other.root, other.horizon, other.key)

    def __hash__(self):
        return hash((self.root, self.horizon, self.key))

    def __lt__(self, other):
        return (self.root, self.key) < (other.root, other.key)

    @property
    def first_action(self) -> int:
        return self.decisions[(self.root,)]

    def to_dict(self, mdp: Mdp) -> dict:
        return {"root": mdp.states[self.root], "horizon": self.horizon,
                "decisions": {render_path(mdp, p): mdp.actions[a] for p, a in self.key}}


def render_path(mdp: Mdp, path: Path) -> str:
    return ".".join(mdp.states[x] if i % 2 == 0 else mdp.actions[x] for i, x in enumerate(path))


def full_tree_sizes_ok(w: DetWindowStrategy, mdp: Mdp) -> bool:
    """Decisions are defined exactly on the positive paths of length < horizon."""
    expected = set()
    stack = [(w.root,)]
    while stack:
        p = stack.pop()
        if path_length(p) >= w.horizon:
            continue
        if p not in w.decisions:
            return False
        expected.add(p)
        a = w.decisions[p]
        for t, _ in mdp.succ(p[-1], a):
            stack.append(p + (a, t))
    return expected == set(w.decisions)


# --------------------------------------------------------------------------
# direct evaluation


def eval_window(mdp: Mdp, w: DetWindowStrategy, phi: StateFormula) -> bool:
    """root |=_w phi, by recursion over the positive paths of the tree."""
    require_window(phi)
    if window_length(phi) > w.horizon:
        raise FormulaClassError(
            f"window length {window_length(phi)} exceeds the strategy horizon {w.horizon}")
    props = set(mdp.props)
    sat_memo: Dict[Tuple[Path, StateFormula], bool] = {}
    val_memo: Dict[Tuple[Path, PathFormula], Fraction] = {}

    def decision(path):
        try:
            return w.decisions[path]
        except KeyError:
            raise InputError(f"window strategy undefined on {render_path(mdp, path)}") from None

    def step(path, sub):
        a = decision(path)
        return sum((p * val(path + (a, t), sub) for t, p in mdp.succ(path[-1], a)), ZERO)

    def sat(path, f):
        key = (path, f)
        if key in sat_memo:
            return sat_memo[key]
        if isinstance(f, (Atom, NegAtom)):
            if f.prop == TRUE_PROP:
                r = isinstance(f, NegAtom)
            else:
                if f.prop not in props:
                    raise InputError(f"proposition {f.prop!r} is not declared by the model")
                r = mdp.has_label(path[-1], f.prop) == isinstance(f, Atom)
        elif isinstance(f, And):
            r = sat(path, f.left) and sat(path, f.right)
        elif isinstance(f, Or):
            r = sat(path, f.left) or sat(path, f.right)
        else:
            tot = sum((c * val(path, p) for c, p in f.terms), ZERO)
            r = tot >= f.bound if f.cmp == ">=" else tot > f.bound
        sat_memo[key] = r
        return r

    def val(path, phi_p):
        key = (path, phi_p)
        if key in val_memo:
            return val_memo[key]
        h = phi_p.horizon
        if isinstance(phi_p, Next):
            r = (ONE if sat(path, phi_p.sub) else ZERO) if h == 0 else step(path, Next(h - 1, phi_p.sub))
        else:
            if sat(path, phi_p.right):
                r = ONE
            elif h == 0:
                r = ONE if isinstance(phi_p, WeakUntil) and sat(path, phi_p.left) else ZERO
            elif sat(path, phi_p.left):
                r = step(path, with_horizon(phi_p, h - 1))
            else:
                r = ZERO
        val_memo[key] = r
        return r

    return sat((w.root,), phi)


# --------------------------------------------------------------------------
# enumeration


def count_window_trees(mdp: Mdp, start: int, horizon: int) -> int:
    @lru_cache(maxsize=None)
    def count(s, depth):
        if depth == 0:
            return 1
        tot = 0
        for a in range(mdp.n_actions):
            prod = 1
            for t, _ in mdp.succ(s, a):
                prod *= count(t, depth - 1)
            tot += prod
        return tot
    return count(start, horizon)


def iter_window_trees(mdp: Mdp, start: int, horizon: int) -> Iterator[DetWindowStrategy]:
    """All full deterministic trees of the given horizon, canonical order."""

    def subtrees(path, depth) -> Iterator[List[Tuple[Path, int]]]:
        if depth == 0:
            yield []
            return
        s = path[-1]
        for a in range(mdp.n_actions):
            succ = [t for t, _ in mdp.succ(s, a)]
            for combo in _product([lambda t=t: subtrees(path + (a, t), depth - 1) for t in succ]):
                yield [(path, a)] + [d for part in combo for d in part]

    trees = [DetWindowStrategy(start, horizon, dict(d)) for d in subtrees((start,), horizon)]
    trees.sort()
    return iter(trees)


def _product(factories):
    if not factories:
        yield ()
        return
    head, rest = factories[0], factories[1:]
    for x in head():
        for tail in _product(rest):
            yield (x,) + tail


def enumerate_det_window(mdp: Mdp, start: int, phi: StateFormula, horizon: int | None = None,
                         cap: int = DEFAULT_ENUM_CAP) -> List[DetWindowStrategy]:
    """Every deterministic window strategy from ``start`` satisfying phi."""
    require_window(phi)
    horizon = window_length(phi) if horizon is None else horizon
    n = count_window_trees(mdp, start, horizon)
    if n > cap:
        raise ResourceError(f"{n} window strategies at {mdp.states[start]} exceed the cap {cap}")
    return [w for w in iter_window_trees(mdp, start, horizon) if eval_window(mdp, w, phi)]


# --------------------------------------------------------------------------
# synthesis by profile-set dynamic programming


class _Spec:
    """Per-depth bookkeeping for a window formula.

    ``iface[k]`` lists the path formulas whose values a node at depth k hands
    to its parent; ``pol[k][phi]`` is how the root verdict depends on that
    value: +1 increasing, -1 decreasing, 0 both ways, absent means not at all.
    """

    def __init__(self, phi: StateFormula, ell: int):
        self.phi = phi
        self.ell = ell
        self.np, _ = needed_by_depth(phi, ell)
        key = lambda p: (p.horizon, pretty_path(p))
        self.iface: List[List[PathFormula]] = [[]]
        for k in range(1, ell + 1):
            lower = {with_horizon(p, p.horizon - 1) for p in self.np[k - 1] if p.horizon > 0}
            self.iface.append(sorted(lower, key=key))
        self.iface.append([])
        self.leaf = [k >= ell or not any(p.horizon > 0 for p in self.np[k]) for k in range(ell + 1)]
        self.pol = self._polarity()

    def _polarity(self):
        signs: Dict[Tuple[int, object], set] = {}
        stack = [(self.phi, 0, 1)]
        while stack:
            f, k, sg = stack.pop()
            got = signs.setdefault((k, f), set())
            if sg in got:
                continue
            got.add(sg)
            if isinstance(f, (And, Or)):
                stack += [(f.left, k, sg), (f.right, k, sg)]
            elif isinstance(f, LinIneq):
                if _box_constant(f) is not None:
                    continue
                for c, p in f.terms:
                    if c:
                        stack.append((p, k, sg if c > 0 else -sg))
            elif isinstance(f, (Next, Until, WeakUntil)):
                if not (isinstance(f, Next) and f.horizon > 0):
                    stack += [(op, k, sg) for op in path_operands(f)]
                if f.horizon > 0:
                    stack.append((with_horizon(f, f.horizon - 1), k + 1, sg))
        pol: List[Dict[PathFormula, int]] = []
        for k in range(self.ell + 2):
            d = {}
            for p in self.iface[k]:
                sg = signs.get((k, p), set())
                if sg:
                    d[p] = 1 if sg == {1} else (-1 if sg == {-1} else 0)
            pol.append(d)
        return pol


def _box_constant(f: LinIneq) -> Optional[bool]:
    """Truth value of f if it is constant for all path values in [0,1]."""
    agg: Dict[PathFormula, Fraction] = {}
    for c, p in f.terms:
        agg[p] = agg.get(p, ZERO) + c
    lo = sum((c for c in agg.values() if c < 0), ZERO)
    hi = sum((c for c in agg.values() if c > 0), ZERO)
    if f.cmp == ">=":
        if lo >= f.bound:
            return True
        if hi < f.bound:
            return False
    else:
        if lo > f.bound:
            return True
        if hi <= f.bound:
            return False
    return None


def _evaluate_node(mdp: Mdp, spec: _Spec, s: int, k: int,
                   sums: Optional[Dict[PathFormula, Fraction]]) -> Tuple:
    """Values handed to the parent by a node at (s, k) given child sums."""
    props = set(mdp.props)
    ys: Dict[StateFormula, bool] = {}
    zs: Dict[PathFormula, Fraction] = {}

    def y(f):
        got = ys.get(f)
        if got is not None:
            return got
        if isinstance(f, (Atom, NegAtom)):
            if f.prop == TRUE_PROP:
                r = isinstance(f, NegAtom)
            else:
                if f.prop not in props:
                    raise InputError(f"proposition {f.prop!r} is not declared by the model")
                r = mdp.has_label(s, f.prop) == isinstance(f, Atom)
        elif isinstance(f, And):
            r = y(f.left) and y(f.right)
        elif isinstance(f, Or):
            r = y(f.left) or y(f.right)
        else:
            tot = sum((c * z(p) for c, p in f.terms), ZERO)
            r = tot >= f.bound if f.cmp == ">=" else tot > f.bound
        ys[f] = r
        return r

    def child(p):
        if sums is None:
            raise FormulaClassError("window length too small for the formula")
        return sums[with_horizon(p, p.horizon - 1)]

    def z(p):
        got = zs.get(p)
        if got is not None:
            return got
        h = p.horizon
        if isinstance(p, Next):
            r = (ONE if y(p.sub) else ZERO) if h == 0 else child(p)
        elif y(p.right):
            r = ONE
        elif h == 0:
            r = ONE if isinstance(p, WeakUntil) and y(p.left) else ZERO
        else:
            r = child(p) if y(p.left) else ZERO
        zs[p] = r
        return r

    if k == 0:
        return (y(spec.phi),)
    return tuple(z(p) for p in spec.iface[k])


def _prune(entries: Dict[Tuple, object], coords: Sequence[PathFormula],
           pol: Mapping[PathFormula, int]) -> Dict[Tuple, object]:
    """Drop entries dominated under the polarity of each coordinate."""
    if not entries:
        return entries
    groups: Dict[Tuple, List[Tuple[Tuple, Tuple, object]]] = {}
    for vec, wit in entries.items():
        eq_key = []
        score = []
        for p, v in zip(coords, vec):
            sg = pol.get(p)
            if sg is None:
                continue
            if sg == 0:
                eq_key.append(v)
            else:
                score.append(v if sg > 0 else -v)
        groups.setdefault(tuple(eq_key), []).append((tuple(score), vec, wit))
    out = {}
    for members in groups.values():
        members.sort(key=lambda m: m[0], reverse=True)
        kept: List[Tuple] = []
        for score, vec, wit in members:
            if any(all(a >= b for a, b in zip(ks, score)) for ks in kept):
                continue
            kept.append(score)
            out[vec] = wit
    return out


def _profiles(mdp: Mdp, spec: _Spec, s: int, k: int, memo: dict) -> Dict[Tuple, object]:
    key = (s, k)
    if key in memo:
        return memo[key]
    if spec.leaf[k]:
        res = {_evaluate_node(mdp, spec, s, k, None): None}
        memo[key] = res
        return res
    coords = spec.iface[k + 1]
    cpol = spec.pol[k + 1]
    result: Dict[Tuple, object] = {}
    for a in range(mdp.n_actions):
        partial: Dict[Tuple, Tuple] = {tuple(ZERO for _ in coords): ()}
        for t, p in mdp.succ(s, a):
            kids = _profiles(mdp, spec, t, k + 1, memo)
            nxt: Dict[Tuple, Tuple] = {}
            for vec, wl in partial.items():
                for cvec, cw in kids.items():
                    key2 = tuple(x + p * c for x, c in zip(vec, cvec))
                    if key2 not in nxt:
                        nxt[key2] = wl + (cw,)
            partial = _prune(nxt, coords, cpol)
        for vec, wl in partial.items():
            prof = _evaluate_node(mdp, spec, s, k, dict(zip(coords, vec)))
            if prof not in result:
                result[prof] = (a, wl)
    if k == 0:
        res = result
    else:
        res = _prune(result, spec.iface[k], spec.pol[k])
    memo[key] = res
    return res


def _expand(mdp: Mdp, s: int, horizon: int, wit) -> Dict[Path, int]:
    dec: Dict[Path, int] = {}
    stack = [((s,), wit)]
    while stack:
        path, w = stack.pop()
        if path_length(path) >= horizon:
            continue
        a, kids = (0, None) if w is None else w
        dec[path] = a
        for i, (t, _) in enumerate(mdp.succ(path[-1], a)):
            stack.append((path + (a, t), None if kids is None else kids[i]))
    return dec


def synth_det_window(mdp: Mdp, start: int, phi: StateFormula,
                     horizon: int | None = None) -> Optional[DetWindowStrategy]:
    """A deterministic window strategy from start satisfying phi, or None."""
    require_window(phi)
    ell = window_length(phi) if horizon is None else horizon
    if ell < window_length(phi):
        raise FormulaClassError("horizon smaller than the window length")
    spec = _Spec(phi, window_length(phi))
    table = _profiles(mdp, spec, start, 0, {})
    wit = table.get((True,), False)
    if wit is False:
        return None
    return DetWindowStrategy(start, ell, _expand(mdp, start, ell, wit))


# --------------------------------------------------------------------------
# compatibility and the portfolio fixpoint


def signature(w: DetWindowStrategy) -> frozenset:
    """Decisions on the tree's positive paths of length <= horizon - 2."""
    lim = w.horizon - 2
    return frozenset((p, a) for p, a in w.decisions.items() if path_length(p) <= lim)


def shifted_signature(w: DetWindowStrategy, action: int, target: int) -> frozenset:
    """Decisions of w below the edge (root, action, target), re-rooted at target."""
    lim = w.horizon - 1
    return frozenset((p[2:], a) for p, a in w.decisions.items()
                     if len(p) >= 3 and p[1] == action and p[2] == target
                     and path_length(p) <= lim)


def compatible_det(w: DetWindowStrategy, w2: DetWindowStrategy, edge: Tuple[int, int, int]) -> bool:
    """w2 continues w along edge: agreement on every shared positive path."""
    s, a, s2 = edge
    if w.root != s or w2.root != s2:
        raise InputError("edge does not connect the strategy roots")
    if w.horizon != w2.horizon:
        raise InputError("window strategies have different horizons")
    if w.first_action != a:
        return True
    return shifted_signature(w, a, s2) == signature(w2)


@dataclass
class DetPortfolio:
    """Per-state canonically ordered sets of deterministic window strategies."""

    horizon: int
    members: Dict[int, Tuple[DetWindowStrategy, ...]]
    rounds: int = 0
    removed_per_round: List[int] = field(default_factory=list)

    def at(self, s: int) -> Tuple[DetWindowStrategy, ...]:
        return self.members.get(s, ())

    def is_empty(self, s: int) -> bool:
        return not self.members.get(s)

    def total(self) -> int:
        return sum(len(v) for v in self.members.values())

    def to_dict(self, mdp: Mdp) -> dict:
        return {mdp.states[s]: [w.to_dict(mdp) for w in ws] for s, ws in sorted(self.members.items())}


def det_window_portfolio(mdp: Mdp, phi: StateFormula, cap: int = DEFAULT_ENUM_CAP) -> DetPortfolio:
    """The full satisfying portfolio: all deterministic window strategies per state."""
    ell = window_length(phi)
    return DetPortfolio(ell, {s: tuple(enumerate_det_window(mdp, s, phi, ell, cap))
                              for s in range(mdp.n_states)})


def _survives(mdp: Mdp, w: DetWindowStrategy, sigs: Mapping[int, frozenset]) -> bool:
    a = w.first_action
    for t, _ in mdp.succ(w.root, a):
        if shifted_signature(w, a, t) not in sigs[t]:
            return False
    return True


def f_step(mdp: Mdp, portfolio: DetPortfolio, jobs: int = 1) -> DetPortfolio:
    """One application of f: drop members lacking a compatible continuation."""
    sigs = {s: frozenset(signature(w) for w in portfolio.at(s)) for s in range(mdp.n_states)}

    def filt(s):
        return s, tuple(w for w in portfolio.at(s) if _survives(mdp, w, sigs))

    states = range(mdp.n_states)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            pairs = list(pool.map(filt, states))
    else:
        pairs = [filt(s) for s in states]
    return DetPortfolio(portfolio.horizon, dict(pairs), portfolio.rounds,
                        list(portfolio.removed_per_round))


def gfp_det(mdp: Mdp, phi: StateFormula, cap: int = DEFAULT_ENUM_CAP,
            max_rounds: int = DEFAULT_MAX_ROUNDS, jobs: int = 1,
            start: DetPortfolio | None = None) -> DetPortfolio:
    """Greatest fixpoint of f below the full satisfying portfolio."""
    cur = start if start is not None else det_window_portfolio(mdp, phi, cap)
    rounds = 0
    removed: List[int] = []
    while True:
        nxt = f_step(mdp, cur, jobs)
        gone = cur.total() - nxt.total()
        if gone == 0:
            break
        rounds += 1
        removed.append(gone)
        if rounds > max_rounds:
            raise ResourceError(f"fixpoint did not stabilise within {max_rounds} rounds")
        cur = nxt
    return DetPortfolio(cur.horizon, cur.members, rounds, removed)


def extract_strategy(mdp: Mdp, portfolio: DetPortfolio, start: int) -> Optional[FiniteMemoryStrategy]:
    """Finite-memory strategy whose memory is the current window strategy."""
    if portfolio.is_empty(start):
        return None
    first_by_sig: Dict[int, Dict[frozenset, int]] = {}
    for s in range(mdp.n_states):
        d: Dict[frozenset, int] = {}
        for i, w in enumerate(portfolio.at(s)):
            d.setdefault(signature(w), i)
        first_by_sig[s] = d

    def name(s, i):
        return f"{mdp.states[s]}:{i}"

    act = {}
    update = {}
    seen = {(start, 0)}
    order = [(start, 0)]
    queue = deque(order)
    while queue:
        s, i = queue.popleft()
        w = portfolio.at(s)[i]
        a = w.first_action
        act[(name(s, i), s)] = a
        for t, _ in mdp.succ(s, a):
            j = first_by_sig[t].get(shifted_signature(w, a, t))
            if j is None:
                raise LpctlError("portfolio is not a fixpoint: no compatible continuation")
            update[(name(s, i), s, a, t)] = name(t, j)
            if (t, j) not in seen:
                seen.add((t, j))
                order.append((t, j))
                queue.append((t, j))
    return FiniteMemoryStrategy([name(s, i) for s, i in order], name(start, 0), act, update)
