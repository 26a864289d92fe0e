import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from lpctl.corpus import gen_random
from lpctl.errors import InputError, ModelError
from lpctl.model import (Distribution, FiniteMemoryStrategy, Mc, dump_model, induced_mc,
                         load_model, make_mc, make_mdp, parse_rational, reachable_states,
                         self_compose)

from conftest import bundled


def test_parse_rational_forms():
    assert parse_rational("1/2") == Fraction(1, 2)
    assert parse_rational("1") == 1
    assert parse_rational(0) == 0


@pytest.mark.parametrize("bad", ["0.5", "1e-1", "x", "1/0", True])
def test_parse_rational_rejects(bad):
    with pytest.raises(ModelError):
        parse_rational(bad)


def test_distribution_sum_error_names_total():
    with pytest.raises(ModelError, match="got 3/4"):
        Distribution({0: Fraction(1, 2), 1: Fraction(1, 4)})


def test_distribution_drops_zeros_and_sorts():
    d = Distribution({2: Fraction(1, 2), 0: Fraction(1, 2), 1: 0})
    assert d.items() == ((0, Fraction(1, 2)), (2, Fraction(1, 2)))


def test_bundled_models_load():
    left, middle, right = bundled("left"), bundled("middle"), bundled("right")
    assert isinstance(left, Mc)
    assert middle.n_actions == 2 and right.n_states == 6


def test_load_model_reports_edge_index():
    text = json.dumps({"type": "mc", "states": ["s"], "initial": "s",
                       "transitions": [{"from": "s", "to": "s", "prob": "0.5"}]})
    with pytest.raises(ModelError, match=r"transitions\[0\]"):
        load_model(text)


def test_load_model_sum_error():
    text = json.dumps({"type": "mc", "states": ["s", "t"], "initial": "s",
                       "transitions": [{"from": "s", "to": "t", "prob": "1/2"},
                                       {"from": "t", "to": "t", "prob": "1"}]})
    with pytest.raises(ModelError, match="sum"):
        load_model(text)


def test_missing_row_needs_sink():
    with pytest.raises(ModelError, match="no sink"):
        make_mdp(["s"], ["a", "b"], "s", {("s", "a"): {"s": 1}})
    m = make_mdp(["s", "z"], ["a", "b"], "s", {("s", "a"): {"s": 1}, ("z", "a"): {"z": 1}}, sink="z")
    assert m.succ(0, 1) == ((1, Fraction(1)),)


def test_induced_mc_memoryless_names(right):
    strat = FiniteMemoryStrategy.memoryless({s: 0 for s in range(right.n_states)})
    mc = induced_mc(right, strat)
    assert mc.states[0] == "s0"
    assert all("@" not in n for n in mc.states)


def test_strategy_round_trip(middle):
    strat = FiniteMemoryStrategy(("0", "1"), "0", {("0", 0): 0, ("1", 0): 1, ("0", 1): 0, ("1", 1): 0},
                                 {("0", 0, 0, 0): "1", ("1", 0, 1, 0): "0"}, sticky_memory=True)
    back = FiniteMemoryStrategy.from_dict(strat.to_dict(middle), middle)
    assert back.to_dict(middle) == strat.to_dict(middle)
    assert induced_mc(middle, back).states == induced_mc(middle, strat).states


def test_randomized_choice_must_sum_to_one():
    with pytest.raises(InputError):
        FiniteMemoryStrategy.memoryless({0: {0: Fraction(1, 2)}})


def test_self_compose_shape():
    mc = make_mc(["u", "v"], "u", {"u": {"u": "1/2", "v": "1/2"}, "v": {"v": 1}}, {"u": ["l"]}, ["l"])
    sc = self_compose(mc, "l")
    assert sc.n_states == 5
    assert dict(sc.succ(0)) == {k: Fraction(1, 4) for k in range(1, 5)}
    assert sc.labels[sc.state_index("(u,u)")] == frozenset({"l", "l'"})
    assert sc.labels[sc.state_index("(u,v)")] == frozenset({"l"})


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 4), st.integers(1, 3), st.integers(1, 4))
def test_dump_load_round_trip(seed, n, k, g):
    m = gen_random(seed, n, k, g)
    again = load_model(dump_model(m))
    assert dump_model(again) == dump_model(m)
    assert reachable_states(again) == reachable_states(m)
