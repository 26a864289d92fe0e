"""Refutation of global window formulas and a budgeted decision driver.

Refutation iterates the encoded fixpoint operator from the full window
portfolio and asks the solver whether the start state still has a member.
It is only complete for flat, non-strict formulas, so other inputs are
rejected outright.
"""

from __future__ import annotations

import logging
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional

from .detsynth import DEFAULT_ENUM_CAP, extract_strategy, gfp_det
from .errors import LpctlError, NotFlatError, ResourceError, SolverError, StrictComparisonError
from .logic import StateFormula, analyze, require_window, window_length
from .mccheck import check_global_window
from .model import FiniteMemoryStrategy, Mc, Mdp, induced_mc
from .realeval import UndeterminedError, holds_at
from .reals import encode_f_step, encode_global_memoryless, initial_portfolio, memoryless_x
from .smt import Sat, Unknown, Unsat, solve, solver_command

log = logging.getLogger(__name__)


@dataclass
class Refuted:
    iteration: int
    sizes: List[int] = field(default_factory=list)
    unknown_at: List[int] = field(default_factory=list)
    rechecked: Optional[bool] = None


@dataclass
class NotRefutedWithinBudget:
    iterations: int
    sizes: List[int] = field(default_factory=list)
    unknown_at: List[int] = field(default_factory=list)


def check_refutable_class(phi: StateFormula) -> None:
    require_window(phi)
    meta = analyze(phi)
    if not meta.is_flat:
        raise NotFlatError("refutation needs a flat formula (no nested P operators)")
    if not meta.is_nonstrict:
        raise StrictComparisonError("refutation needs a non-strict formula (no > or <)")


def refute_global(mdp: Mdp, start: int, phi: StateFormula, max_iters: int = 4,
                  timeout: float | None = None, cmd: str | None = None,
                  recheck_cmd: str | None = None) -> Refuted | NotRefutedWithinBudget:
    """Look for i <= max_iters with f^i(full portfolio) empty at start."""
    check_refutable_class(phi)
    ell = window_length(phi)
    recheck_cmd = recheck_cmd or solver_command("PCTL_SMT_CMD2")
    cur = initial_portfolio(mdp, phi)
    sizes: List[int] = []
    unknown: List[int] = []
    for i in range(max_iters + 1):
        if i > 0:
            cur = encode_f_step(mdp, cur, ell, i)
        f = cur[start]
        sizes.append(f.size())
        log.info("refutation iteration %d: formula size %d", i, sizes[-1])
        res = solve(f, False, cmd, timeout)
        if isinstance(res, Unsat):
            rechecked = None
            if recheck_cmd:
                again = solve(f, False, recheck_cmd, timeout)
                if isinstance(again, Sat):
                    raise SolverError(f"solvers disagree on iteration {i}: second solver says sat")
                rechecked = isinstance(again, Unsat)
            return Refuted(i, sizes, unknown, rechecked)
        if isinstance(res, Unknown):
            unknown.append(i)
    return NotRefutedWithinBudget(max_iters, sizes, unknown)


# --------------------------------------------------------------------------
# combined driver


@dataclass
class Budget:
    iters: int = 4
    timeout: float | None = None
    cap: int = DEFAULT_ENUM_CAP
    jobs: int = 1
    cmd: str | None = None


@dataclass
class Yes:
    lane: str
    strategy: FiniteMemoryStrategy
    mc: Mc
    notes: Dict[str, str] = field(default_factory=dict)
    verdict = "yes"


@dataclass
class No:
    iteration: int
    lane: str = "refute"
    notes: Dict[str, str] = field(default_factory=dict)
    verdict = "no"


@dataclass
class Undecided:
    notes: Dict[str, str] = field(default_factory=dict)
    verdict = "unknown"


def _lane_det(mdp, start, phi, budget):
    try:
        pf = gfp_det(mdp, phi, cap=budget.cap, jobs=budget.jobs)
    except ResourceError as e:
        return None, f"resource: {e}"
    strat = extract_strategy(mdp, pf, start)
    if strat is None:
        return None, f"deterministic fixpoint empty after {pf.rounds} rounds"
    mc = induced_mc(mdp, strat)
    if not check_global_window(mc, phi).holds:
        raise LpctlError("extracted deterministic strategy fails verification")
    return Yes("det", strat, mc), "verified"


def _lane_memoryless(mdp, start, phi, budget):
    f = encode_global_memoryless(mdp, start, phi)
    res = solve(f, True, budget.cmd, budget.timeout)
    if isinstance(res, Unsat):
        return None, "no memoryless strategy"
    if isinstance(res, Unknown):
        return None, f"solver unknown ({res.reason})"
    if not res.rational:
        return None, "solver model has irrational values"
    point = {v.name: res.model.get(v.name, Fraction(0)) for v in f.free}
    try:
        if not holds_at(f, point):
            return None, "solver model fails exact substitution"
    except UndeterminedError as e:
        return None, f"exact substitution inconclusive: {e}"
    choice = {}
    for s in range(mdp.n_states):
        w = {a: point[_xname(mdp, s, a)] for a in range(mdp.n_actions)}
        choice[s] = {a: p for a, p in w.items() if p}
    strat = FiniteMemoryStrategy.memoryless(choice)
    mc = induced_mc(mdp, strat)
    if not check_global_window(mc, phi).holds:
        return None, "solver model fails model checking"
    return Yes("memoryless", strat, mc), "verified"


def _xname(mdp: Mdp, s: int, a: int) -> str:
    return next(iter(memoryless_x(mdp, s, a).variables()))


def _lane_refute(mdp, start, phi, budget):
    try:
        check_refutable_class(phi)
    except (NotFlatError, StrictComparisonError) as e:
        return None, f"skipped: {e}"
    res = refute_global(mdp, start, phi, budget.iters, budget.timeout, budget.cmd)
    if isinstance(res, Refuted):
        return No(res.iteration), f"refuted at iteration {res.iteration}"
    return None, f"not refuted within {res.iterations} iterations"


_LANES = (("det", _lane_det), ("memoryless", _lane_memoryless), ("refute", _lane_refute))


def _run_lane(name, fn, args):
    try:
        return fn(*args)
    except LpctlError as e:
        raise type(e)(f"lane {name}: {e}") from e


def decide_with_budget(mdp: Mdp, start: int, phi: StateFormula,
                       budget: Budget | None = None) -> Yes | No | Undecided:
    """Deterministic fixpoint, memoryless encoding and refutation; first conclusive wins."""
    budget = budget or Budget()
    if isinstance(mdp, Mc):
        mdp = mdp.as_mdp()
    require_window(phi)
    args = (mdp, start, phi, budget)
    notes: Dict[str, str] = {}
    if budget.jobs <= 1:
        for name, fn in _LANES:
            res, note = _run_lane(name, fn, args)
            notes[name] = note
            if res is not None:
                res.notes = notes
                return res
        return Undecided(notes)
    with ThreadPoolExecutor(max_workers=len(_LANES)) as pool:
        futs = {pool.submit(_run_lane, name, fn, args): name for name, fn in _LANES}
        pending = set(futs)
        while pending:
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            for fut in sorted(done, key=lambda f: [n for n, _ in _LANES].index(futs[f])):
                res, note = fut.result()
                notes[futs[fut]] = note
                if res is not None:
                    for p in pending:
                        p.cancel()
                    res.notes = notes
                    return res
    return Undecided(notes)
