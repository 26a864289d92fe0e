"""Satisfiability of global window formulas over MCs of bounded granularity.

The question reduces to deterministic global window synthesis on an MDP whose
states are label sets times copy indices and whose actions are all
distributions of granularity at most N over indexed supports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from .detsynth import DEFAULT_ENUM_CAP, extract_strategy, gfp_det
from .errors import InputError, ResourceError
from .logic import Atom, Or, StateFormula, props_of, require_window, TRUE_PROP
from .mccheck import check_global_window
from .model import Distribution, Mc, Mdp, induced_mc, reachable_states

DEFAULT_STATE_CAP = 64
DEFAULT_ACTION_CAP = 10 ** 4
INIT = "init"


def granularity_values(n: int) -> List[Fraction]:
    """All a/b in (0,1] with b <= n, ascending."""
    return sorted({Fraction(a, b) for b in range(1, n + 1) for a in range(1, b + 1)})


def prob_vectors(n: int, k: int) -> Iterator[Tuple[Fraction, ...]]:
    """Ordered k-tuples of granularity-n probabilities summing to 1."""
    vals = granularity_values(n)

    def go(prefix, rest, left):
        if left == 0:
            if rest == 0:
                yield prefix
            return
        for v in vals:
            if v > rest:
                break
            if left > 1 and v == rest:
                continue
            yield from go(prefix + (v,), rest - v, left - 1)

    yield from go((), Fraction(1), k)


def label_sets(props: Sequence[str]) -> List[frozenset]:
    props = sorted(props)
    out = []
    for r in range(len(props) + 1):
        out.extend(frozenset(c) for c in combinations(props, r))
    return out


def _lname(labels: frozenset) -> str:
    return "{" + ",".join(sorted(labels)) + "}"


@dataclass(frozen=True)
class SatMdp:
    mdp: Mdp
    marker: str
    props: Tuple[str, ...]
    granularity: int


def _count_dists(n: int, n_labels: int) -> int:
    return sum(n_labels ** k * sum(1 for _ in prob_vectors(n, k)) for k in range(1, n + 1))


def build_sat_mdp(props: Iterable[str], n: int, state_cap: int = DEFAULT_STATE_CAP,
                  action_cap: int = DEFAULT_ACTION_CAP) -> SatMdp:
    """States init and (L, i) for label sets L, i in 1..n!; actions jump to
    one (L, i) or play a distribution of granularity n over (L1,1)..(Lk,k)."""
    if n < 1:
        raise InputError("granularity must be at least 1")
    props = tuple(sorted(set(props)))
    if TRUE_PROP in props:
        raise InputError(f"proposition {TRUE_PROP!r} is reserved")
    marker = "init"
    while marker in props:
        marker = "_" + marker
    ls = label_sets(props)
    copies = math.factorial(n)
    n_states = 1 + len(ls) * copies
    if n_states > state_cap:
        raise ResourceError(f"sat MDP needs {n_states} states (cap {state_cap})")
    n_dists = _count_dists(n, len(ls))
    n_actions = len(ls) * copies + n_dists
    if n_dists > action_cap or n_actions > action_cap:
        raise ResourceError(f"sat MDP needs {n_actions} actions, {n_dists} distributions "
                            f"(cap {action_cap})")

    states = [INIT] + [f"{_lname(L)}#{i}" for i in range(1, copies + 1) for L in ls]
    index = {(L, i): 1 + (i - 1) * len(ls) + j for i in range(1, copies + 1)
             for j, L in enumerate(ls)}
    actions: List[str] = []
    dists: List[Distribution] = []
    for i in range(1, copies + 1):
        for L in ls:
            actions.append(f"go{_lname(L)}#{i}")
            dists.append(Distribution({index[(L, i)]: Fraction(1)}))
    for k in range(1, n + 1):
        vecs = list(prob_vectors(n, k))
        for labs in product(ls, repeat=k):
            for vec in vecs:
                tgt = {index[(L, j + 1)]: q for j, (L, q) in enumerate(zip(labs, vec))}
                actions.append("d[" + ",".join(f"{_lname(L)}#{j + 1}={q}" for j, (L, q)
                                               in enumerate(zip(labs, vec))) + "]")
                dists.append(Distribution(tgt))
    row = tuple(dists)
    labels = (frozenset({marker}),) + tuple(L for i in range(1, copies + 1) for L in ls)
    mdp = Mdp(tuple(states), tuple(actions), 0, props + (marker,), labels,
              tuple(row for _ in states), None)
    return SatMdp(mdp, marker, props, n)


def max_denominator(mc: Mc) -> int:
    return max((q.denominator for s in range(len(mc.states)) for _, q in mc.succ(s)), default=1)


def sat_bounded(phi: StateFormula, n: int, props: Iterable[str] = (),
                state_cap: int = DEFAULT_STATE_CAP, action_cap: int = DEFAULT_ACTION_CAP,
                cap: int = DEFAULT_ENUM_CAP, jobs: int = 1) -> Optional[Mc]:
    """A finite MC of granularity <= n satisfying AG phi from its initial state, or None."""
    require_window(phi)
    allp = set(props) | (props_of(phi) - {TRUE_PROP})
    sm = build_sat_mdp(allp, n, state_cap, action_cap)
    guarded = Or(Atom(sm.marker), phi)
    pf = gfp_det(sm.mdp, guarded, cap=cap, jobs=jobs)
    strat = extract_strategy(sm.mdp, pf, 0)
    if strat is None:
        return None
    full = induced_mc(sm.mdp, strat)
    first = full.succ(full.initial)[0][0]
    mc = _restrict(full, first, sm.props)
    if max_denominator(mc) > n:
        raise AssertionError("witness exceeds the granularity bound")
    if not check_global_window(mc, phi).holds:
        raise AssertionError("witness fails the global window check")
    return mc


def _restrict(mc: Mc, root: int, props: Tuple[str, ...]) -> Mc:
    """Sub-chain reachable from root, with the reserved marker dropped."""
    keep = sorted(reachable_states(mc, root))
    new = {s: i for i, s in enumerate(keep)}
    trans = tuple(Distribution({new[t]: q for t, q in mc.succ(s)}) for s in keep)
    labels = tuple(frozenset(mc.labels[s] & set(props)) for s in keep)
    names = tuple(mc.states[s] for s in keep)
    return Mc(names, new[root], props, labels, trans)
