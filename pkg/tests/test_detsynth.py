import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conftest import bundled
from lpctl.corpus import gen_random, gen_random_formula
from lpctl.detsynth import (DetPortfolio, DetWindowStrategy, compatible_det, count_window_trees,
                            det_window_portfolio, enumerate_det_window, eval_window,
                            extract_strategy, f_step, gfp_det, iter_window_trees,
                            synth_det_window)
from lpctl.errors import FormulaClassError, ResourceError
from lpctl.logic import BOT, TOP, parse_formula, window_length
from lpctl.mccheck import Checker, check_global_window
from lpctl.model import Distribution, FiniteMemoryStrategy, Mc, induced_mc, make_mdp

EX = "P[F^2 s1] = 5/8 & (P[X s1] >= 1/2 | P[X s1] <= 1/4)"
S0, S1 = 0, 1
A, B = 0, 1


def ex_phi(guard=False):
    text = f"s0 -> ({EX})" if guard else EX
    return parse_formula(text)[0]


def tree_mc(mdp, w):
    """The window tree as an MC over its paths; leaves self-loop."""
    paths = [(w.root,)]
    rows = []
    i = 0
    while i < len(paths):
        p = paths[i]
        if len(p) // 2 < w.horizon:
            a = w.decisions[p]
            out = {}
            for t, q in mdp.succ(p[-1], a):
                out[len(paths)] = q
                paths.append(p + (a, t))
            rows.append(out)
        else:
            rows.append({i: Fraction(1)})
        i += 1
    return Mc(tuple(str(p) for p in paths), 0, mdp.props,
              tuple(mdp.labels[p[-1]] for p in paths), tuple(Distribution(r) for r in rows))


def oracle_eval(mdp, w, phi):
    return Checker(tree_mc(mdp, w)).sat(phi)[0]


def test_eval_alternating_tree_on_middle():
    m = bundled("middle")
    w = DetWindowStrategy(S0, 2, {(S0,): A, (S0, A, S0): B, (S0, A, S1): A})
    assert eval_window(m, w, ex_phi())
    assert oracle_eval(m, w, ex_phi())


def test_eval_right_tree_value_from_cylinders():
    m = bundled("right")
    s1, s3 = m.states.index("s1"), m.states.index("s3")
    w = DetWindowStrategy(S0, 2, {(S0,): A, (S0, A, s1): B, (S0, A, s3): A})
    phi, _ = parse_formula("P[F^2 s2] >= 9/16")
    # s0 a s3 s2 carries 1/2 and s0 a s1 b s2 carries 1/4
    assert Checker(tree_mc(m, w)).value(phi.terms[0][1])[0] == Fraction(3, 4)
    assert eval_window(m, w, phi)
    strict, _ = parse_formula("P[F^2 s2] >= 4/5")
    assert not eval_window(m, w, strict)


def test_eval_true_and_horizon_guard():
    m = bundled("middle")
    for w in iter_window_trees(m, S0, 1):
        assert eval_window(m, w, TOP)
    w = next(iter_window_trees(m, S0, 1))
    with pytest.raises(FormulaClassError):
        eval_window(m, w, ex_phi())


def test_synth_window_only_has_deterministic_first_move():
    m = bundled("middle")
    w = synth_det_window(m, S0, ex_phi())
    assert w is not None and eval_window(m, w, ex_phi())
    nxt = w.decisions[(S0, w.first_action, S0)]
    assert nxt != w.first_action


def test_synth_false_formula():
    assert synth_det_window(bundled("middle"), S0, BOT) is None


def test_enumerate_next_constraint_picks_first_move_a():
    m = bundled("middle")
    phi, _ = parse_formula("P[X s1] >= 1/2")
    ws = enumerate_det_window(m, S0, phi)
    assert ws and all(w.first_action == A for w in ws)
    assert len(ws) == sum(1 for w in iter_window_trees(m, S0, 1) if w.first_action == A)


def test_enumerate_true_single_state():
    m = make_mdp(["s"], ["a"], "s", {("s", "a"): {"s": 1}})
    assert len(enumerate_det_window(m, 0, TOP, horizon=2)) == 1


def test_enumerate_example_alternates():
    m = bundled("middle")
    ws = enumerate_det_window(m, S0, ex_phi())
    shapes = {(w.first_action, w.decisions[(S0, w.first_action, S0)]) for w in ws}
    assert shapes == {(A, B), (B, A)}
    assert len(ws) == 4  # the s0.x.s1 decision is free


def test_enumerate_cap():
    m = bundled("right")
    with pytest.raises(ResourceError):
        enumerate_det_window(m, S0, TOP, horizon=3, cap=10)


def test_compatible_self_shift_and_conflict():
    w = DetWindowStrategy(S0, 2, {(S0,): A, (S0, A, S0): B, (S0, A, S1): A})
    shift = DetWindowStrategy(S0, 2, {(S0,): B, (S0, B, S0): A, (S0, B, S1): A})
    assert compatible_det(w, shift, (S0, A, S0))
    clash = DetWindowStrategy(S0, 2, {(S0,): A, (S0, A, S0): B, (S0, A, S1): A})
    assert not compatible_det(w, clash, (S0, A, S0))
    # w never plays b at the root, so the b-edge imposes nothing
    assert compatible_det(w, clash, (S0, B, S0))


def test_gfp_right_is_empty_at_s0():
    pf = gfp_det(bundled("right"), parse_formula("P[F^2 s2] >= 9/16")[0])
    assert pf.is_empty(S0) and pf.is_empty(1)


def test_gfp_true_removes_nothing():
    m = bundled("middle")
    pf = gfp_det(m, TOP)
    assert pf.rounds == 0 and pf.total() == det_window_portfolio(m, TOP).total()


def test_gfp_unguarded_example_is_empty():
    # s1 is absorbing, so P[F^2 s1] = 1 there and the formula fails at s1
    m = bundled("middle")
    assert not Checker(induced_mc(m, _always(A))).sat(ex_phi())[S1]
    pf = gfp_det(m, ex_phi())
    assert pf.is_empty(S0) and pf.is_empty(S1)
    assert extract_strategy(m, pf, S0) is None


def _always(a):
    return FiniteMemoryStrategy.memoryless({0: a, 1: a})


def test_gfp_guarded_example_alternates():
    m = bundled("middle")
    phi = ex_phi(guard=True)
    pf = gfp_det(m, phi)
    shapes = {(w.first_action, w.decisions[(S0, w.first_action, S0)]) for w in pf.at(S0)}
    assert shapes == {(A, B), (B, A)}
    strat = extract_strategy(m, pf, S0)
    mc = induced_mc(m, strat)
    assert check_global_window(mc, phi).holds
    # follow the s0 self-loop: actions alternate
    mem, seen = strat.initial_memory, []
    for _ in range(4):
        (a, _), = strat.act(mem, S0).items()
        seen.append(a)
        mem = strat.update(mem, S0, a, S0)
    assert seen in ([A, B, A, B], [B, A, B, A])
    s0_memories = {n for n in mc.states if n.startswith("s0@")}
    assert len(s0_memories) == 2


def test_extract_true_is_single_class_per_state():
    m = bundled("middle")
    strat = extract_strategy(m, gfp_det(m, TOP), S0)
    mc = induced_mc(m, strat)
    assert len(mc.states) == 2


def _small(seed):
    rng = random.Random(seed)
    m = gen_random(seed, rng.randint(1, 3), rng.randint(1, 2), 2)
    phi = gen_random_formula(seed + 1, max_ell=2)
    return m, phi


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_synth_agrees_with_enumeration(seed):
    m, phi = _small(seed)
    if count_window_trees(m, 0, window_length(phi)) > 5000:
        return
    ws = enumerate_det_window(m, 0, phi)
    w = synth_det_window(m, 0, phi)
    assert (w is not None) == bool(ws)
    if w is not None:
        assert eval_window(m, w, phi) and oracle_eval(m, w, phi)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_eval_window_matches_tree_oracle(seed):
    m, phi = _small(seed)
    ell = window_length(phi)
    if count_window_trees(m, 0, ell) > 500:
        return
    for w in iter_window_trees(m, 0, ell):
        assert eval_window(m, w, phi) == oracle_eval(m, w, phi)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_f_is_deflationary_and_monotone(seed):
    m, phi = _small(seed)
    if any(count_window_trees(m, s, window_length(phi)) > 2000 for s in range(m.n_states)):
        return
    full = det_window_portfolio(m, phi)
    rng = random.Random(seed)
    sub = DetPortfolio(full.horizon, {s: tuple(w for w in ws if rng.random() < 0.6)
                                      for s, ws in full.members.items()})
    f_full, f_sub = f_step(m, full), f_step(m, sub)
    for s in range(m.n_states):
        assert set(f_full.at(s)) <= set(full.at(s))
        assert set(f_sub.at(s)) <= set(f_full.at(s))
    pf = gfp_det(m, phi)
    assert pf.rounds <= full.total()
    assert f_step(m, pf).total() == pf.total()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_extracted_strategies_are_sound(seed):
    m, phi = _small(seed)
    if any(count_window_trees(m, s, window_length(phi)) > 2000 for s in range(m.n_states)):
        return
    pf = gfp_det(m, phi)
    strat = extract_strategy(m, pf, m.initial)
    assert (strat is None) == pf.is_empty(m.initial)
    if strat is not None:
        assert check_global_window(induced_mc(m, strat), phi).holds
