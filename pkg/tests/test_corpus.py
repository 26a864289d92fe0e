from fractions import Fraction

import pytest

from conftest import requires_solver
from lpctl.corpus import (Arena, Branch, Halt, Halted, Inc, MinskyMachine, RunningAfter,
                          compile_minsky, encoded_value, format_minsky, gadget_formula,
                          gadget_fragment, gen_noninterference, gen_random, gen_random_arena,
                          gen_random_formula, gen_reachability_instance, parse_minsky,
                          simulate_minsky, solve_reachability_game)
from lpctl.detsynth import synth_det_window
from lpctl.errors import InputError
from lpctl.logic import analyze, window_length
from lpctl.mccheck import check_global_window, check_state
from lpctl.model import FiniteMemoryStrategy, dump_model, induced_mc, load_model, make_mc
from lpctl.semi import NotRefutedWithinBudget, Refuted, refute_global

F56 = Fraction(5, 6)


# --------------------------------------------------------------------------
# machines


def test_simulate_halt():
    assert simulate_minsky(MinskyMachine((Halt(),)), 10) == Halted(1, [(1, 0, 0)])


def test_simulate_diverging_increment():
    res = simulate_minsky(MinskyMachine((Inc(2, 1),)), 7)
    assert isinstance(res, RunningAfter) and res.trace[-1] == (1, 7, 0)


def test_simulate_hand_trace():
    m = parse_minsky("INC2 2\nBR2 3 2  # loop while positive\nHALT\n")
    res = simulate_minsky(m, 20)
    assert isinstance(res, Halted) and res.step == 4
    assert res.trace == [(1, 0, 0), (2, 1, 0), (2, 0, 0), (3, 0, 0)]


def test_parse_format_round_trip():
    m = MinskyMachine((Inc(3, 2), Branch(3, 3, 1), Halt()))
    assert parse_minsky(format_minsky(m)) == m


@pytest.mark.parametrize("text", ["INC4 1", "BR2 1", "INC2 5", "JMP 1", ""])
def test_parse_errors(text):
    with pytest.raises(InputError):
        parse_minsky(text)


def test_compiled_formula_class():
    mdp, phi, glob = compile_minsky(parse_minsky("INC2 2\nBR2 3 2\nHALT"))
    meta = analyze(phi, glob)
    assert glob and meta.is_flat and meta.is_nonstrict and meta.window_length <= 4
    assert mdp.states[mdp.initial] == "init"
    load_model(dump_model(mdp))


@requires_solver
def test_halting_machine_is_refuted():
    mdp, phi, _ = compile_minsky(MinskyMachine((Halt(),)))
    res = refute_global(mdp, mdp.initial, phi, max_iters=2)
    assert isinstance(res, Refuted) and res.iteration == 1


@requires_solver
def test_diverging_machine_is_not_refuted_early():
    mdp, phi, _ = compile_minsky(MinskyMachine((Inc(2, 1),)))
    res = refute_global(mdp, mdp.initial, phi, max_iters=1)
    assert isinstance(res, NotRefutedWithinBudget)


# --------------------------------------------------------------------------
# gadget fragments, checked on explicit finite strategies


def run(inst, value, choose=None, update=None, memory=("m",)):
    """Model-check the fragment under a finite strategy.

    value(m, s) gives the probability of action a at carrier s, choose(m, s)
    the action at choice states; all other states play a.
    """
    mdp = inst.mdp
    act = {}
    bad = set()
    for m in memory:
        for s, name in enumerate(mdp.states):
            v = value(m, name)
            if v is None and choose is not None:
                c = choose(m, name)
                v = None if c is None else Fraction(int(c == "a"))
            if v is None:
                act[(m, s)] = 0
            elif 0 <= v <= 1:
                act[(m, s)] = {0: v, 1: 1 - v}
            else:
                # only matters if the product actually reaches it
                act[(m, s)] = 0
                bad.add(name if len(memory) == 1 else f"{name}@{m}")
    upd = {}
    if update is not None:
        for m in memory:
            for s, name in enumerate(mdp.states):
                for a in range(2):
                    for t, _ in mdp.succ(s, a):
                        upd[(m, s, a, t)] = update(m, name, "ab"[a])
    strat = FiniteMemoryStrategy(memory, memory[0], act, upd, sticky_memory=update is None)
    mc = induced_mc(mdp, strat)
    if bad & set(mc.states):
        return False
    return check_global_window(mc, inst.formula).holds


def const(table):
    return lambda m, s: table.get(s)


def test_fragment_formula_is_the_gadget_formula():
    assert gadget_fragment("keep").formula == gadget_formula()


@pytest.mark.parametrize("v", [F56, Fraction(2, 3), Fraction(1, 2)])
def test_init_exits_only_at_five_sixths(v):
    inst = gadget_fragment("init")
    a = inst.anchors
    assert run(inst, const({a["exit"]: v, a["out"]: v})) == (v == F56)


@pytest.mark.parametrize("p", [F56, Fraction(5, 12), Fraction(1, 7)])
def test_keep_link_preserves_value(p):
    inst = gadget_fragment("keep")
    a = inst.anchors
    assert run(inst, const({a["in"]: p, a["out"]: p}))
    assert not run(inst, const({a["in"]: p, a["out"]: p / 2}))


@pytest.mark.parametrize("p", [F56, Fraction(5, 36)])
def test_duplicate_gives_equal_exits(p):
    inst = gadget_fragment("dupl")
    a = inst.anchors
    vals = {a["in"]: p, a["entry"]: p, a["exit_t"]: p, a["exit_b"]: p, a["out_t"]: p, a["out_b"]: p}
    assert run(inst, const(vals))
    vals[a["exit_b"]] = vals[a["out_b"]] = p / 2
    assert not run(inst, const(vals))


@pytest.mark.parametrize("counter", [2, 3])
@pytest.mark.parametrize("x2", [0, 1, 2])
@pytest.mark.parametrize("x3", [0, 1, 2])
def test_increment_moves_to_next_encoding(counter, x2, x3):
    inst = gadget_fragment("inc", counter)
    a = inst.anchors
    p = encoded_value(x2, x3)
    q = encoded_value(x2 + 1, x3) if counter == 2 else encoded_value(x2, x3 + 1)
    vals = {a["in"]: p, a["entry"]: p, a["exit"]: q, a["out"]: q}
    assert run(inst, const(vals))
    vals[a["exit"]] = vals[a["out"]] = p
    assert not run(inst, const(vals))


@pytest.mark.parametrize("counter", [2, 3])
@pytest.mark.parametrize("x2", [0, 1, 2])
@pytest.mark.parametrize("x3", [0, 1, 2])
def test_decrement_moves_to_previous_encoding(counter, x2, x3):
    inst = gadget_fragment("dec", counter)
    a = inst.anchors
    p = encoded_value(x2, x3)
    q = p * (2 if counter == 2 else 3)
    vals = {a["in"]: p, a["entry"]: p, a["exit"]: q, a["out"]: q}
    # the gadget only scales; a zero counter shows up as a value above 1
    assert run(inst, const(vals)) == (q <= 1)
    if (x2 if counter == 2 else x3) > 0:
        assert q == (encoded_value(x2 - 1, x3) if counter == 2 else encoded_value(x2, x3 - 1))


def zero_check_run(x2, x3, drains):
    """Feed p(x2, x3), drain counter 3 `drains` times, then take the 5/6 check."""
    inst = gadget_fragment("test_zero", 2)
    a = inst.anchors
    p = encoded_value(x2, x3)
    memory = tuple(f"m{k}" for k in range(drains + 1))

    def value(m, s):
        k = int(m[1:])
        if s == a["in"]:
            return p
        if s == a["drain"]:
            return p * Fraction(3) ** (k - 1)
        if s == a["drain_exit"]:
            return p * Fraction(3) ** k
        if s == a["check"]:
            return p * Fraction(3) ** k
        return None

    def choose(m, s):
        if s != a["choose"]:
            return None
        return "b" if int(m[1:]) < drains else "a"

    def update(m, s, act):
        k = int(m[1:])
        return f"m{k + 1}" if s == a["choose"] and act == "b" else m

    return run(inst, value, choose, update, memory)


@pytest.mark.parametrize("x2", [0, 1, 2])
@pytest.mark.parametrize("x3", [0, 1, 2])
def test_zero_passes_iff_counter_two_is_zero(x2, x3):
    passes = any(zero_check_run(x2, x3, n) for n in range(4))
    assert passes == (x2 == 0)
    if x2 == 0:
        assert zero_check_run(x2, x3, x3)


# --------------------------------------------------------------------------
# generalized reachability


def test_reach_single_vertex():
    arena = Arena(("v",), (1,), ((0,),), (frozenset({0}),))
    mdp, phi = gen_reachability_instance(arena)
    assert solve_reachability_game(arena)
    assert synth_det_window(mdp, mdp.initial, phi) is not None


def test_reach_adversary_avoids_target():
    # v0 belongs to player 2 and may loop on itself or go to the sink v1
    arena = Arena(("v0", "v1", "v2"), (2, 1, 1), ((0, 1), (1,), (2,)), (frozenset({2}),))
    mdp, phi = gen_reachability_instance(arena)
    assert not solve_reachability_game(arena)
    assert synth_det_window(mdp, mdp.initial, phi) is None


def test_reach_diamond_two_targets():
    # player 1 at v0 and v3 chooses; targets v1 then v2 must both be visited
    arena = Arena(("v0", "v1", "v2", "v3"), (1, 1, 1, 1),
                  ((1, 2), (3,), (3,), (1, 2)), (frozenset({1}), frozenset({2})))
    mdp, phi = gen_reachability_instance(arena)
    assert window_length(phi) == 4 * 2
    assert solve_reachability_game(arena)
    w = synth_det_window(mdp, mdp.initial, phi)
    assert w is not None and w.horizon == 8


@pytest.mark.parametrize("seed", range(20))
def test_reach_matches_attractor(seed):
    arena = gen_random_arena(seed)
    mdp, phi = gen_reachability_instance(arena)
    assert (synth_det_window(mdp, mdp.initial, phi) is not None) == solve_reachability_game(arena)


# --------------------------------------------------------------------------
# noninterference


def test_pni_symmetric_two_state():
    mc = make_mc(["u", "v"], "u", {"u": {"u": "1/2", "v": "1/2"}, "v": {"u": "1/2", "v": "1/2"}},
                 {"u": ["l"], "v": []}, ["l"])
    comp, phi = gen_noninterference(mc, "l")
    assert comp.n_states == 1 + 2 * 2
    assert comp.states[comp.initial] in check_state(comp, phi)


def test_pni_three_state_counterexample():
    mc = make_mc(["s0", "s1", "s2"], "s0",
                 {"s0": {"s1": "1/2", "s2": "1/2"}, "s1": {"s1": 1}, "s2": {"s0": 1}},
                 {"s0": [], "s1": ["l"], "s2": ["l"]}, ["l"])
    comp, phi = gen_noninterference(mc, "l")
    assert comp.states[comp.initial] not in check_state(comp, phi)


def test_pni_single_state():
    mc = make_mc(["s"], "s", {"s": {"s": 1}}, {"s": ["l"]}, ["l"])
    comp, phi = gen_noninterference(mc, "l")
    assert check_state(comp, phi) == set(comp.states)


def test_pni_rejects_unused_low():
    mc = make_mc(["s"], "s", {"s": {"s": 1}}, {"s": []}, ["l"])
    with pytest.raises(InputError):
        gen_noninterference(mc, "l")


# --------------------------------------------------------------------------
# random instances


def test_random_is_deterministic():
    assert dump_model(gen_random(1, 2, 2, 2)) == dump_model(gen_random(1, 2, 2, 2))
    assert gen_random_formula(5) == gen_random_formula(5)


def test_random_granularity():
    m = gen_random(7, 3, 2, 3)
    load_model(dump_model(m))
    assert all(q.denominator <= 3 for row in m.trans for d in row for q in d.values())


@pytest.mark.parametrize("seed", range(30))
def test_random_formula_respects_budget(seed):
    phi = gen_random_formula(seed, max_ell=2)
    assert window_length(phi) <= 2 and analyze(phi).is_window
