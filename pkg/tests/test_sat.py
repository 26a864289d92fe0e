from fractions import Fraction
from itertools import product

import pytest

from lpctl.corpus import gen_random_formula
from lpctl.errors import ResourceError
from lpctl.logic import TRUE_PROP, analyze, parse_formula
from lpctl.mccheck import check_global_window
from lpctl.model import dump_model, load_model, make_mc
from lpctl.sat import build_sat_mdp, granularity_values, max_denominator, prob_vectors, sat_bounded


def oracle_vectors(n, k):
    vals = sorted({Fraction(a, b) for b in range(1, n + 1) for a in range(1, b + 1)})
    return sorted(v for v in product(vals, repeat=k) if sum(v) == 1)


@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (2, 2), (3, 2), (3, 3), (4, 3), (4, 4)])
def test_prob_vectors_match_enumeration(n, k):
    assert sorted(prob_vectors(n, k)) == oracle_vectors(n, k)


def test_granularity_values():
    assert granularity_values(3) == [Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(1)]


def test_sat_mdp_sizes():
    one = build_sat_mdp({"p"}, 1)
    assert one.mdp.n_states == 3
    # 2 jumps and the 2 point distributions
    assert one.mdp.n_actions == 4
    two = build_sat_mdp({"p"}, 2)
    assert two.mdp.n_states == 5
    # 4 jumps, 2 point distributions, 4 half-half pairs
    assert two.mdp.n_actions == 10
    halves = [a for a in two.mdp.actions if "=1/2" in a]
    assert len(halves) == 4


def test_sat_mdp_is_well_formed():
    sm = build_sat_mdp({"p", "q"}, 2)
    # loading re-runs every model invariant
    assert load_model(dump_model(sm.mdp)).n_actions == sm.mdp.n_actions
    assert sm.mdp.labels[0] == {sm.marker}
    assert all(sm.marker not in sm.mdp.labels[s] for s in range(1, sm.mdp.n_states))


def test_sat_mdp_caps():
    with pytest.raises(ResourceError, match="states"):
        build_sat_mdp({"p", "q"}, 4)
    with pytest.raises(ResourceError, match="actions"):
        build_sat_mdp({"p"}, 3, action_cap=20)


def test_half_next_needs_granularity_two():
    phi, _ = parse_formula("P[X p] = 1/2")
    assert sat_bounded(phi, 1) is None
    mc = sat_bounded(phi, 2)
    assert mc is not None and check_global_window(mc, phi).holds
    assert max_denominator(mc) == 2


def test_hand_built_half_model_exists():
    mc = make_mc(["u", "v"], "u", {"u": {"u": "1/2", "v": "1/2"}, "v": {"u": "1/2", "v": "1/2"}},
                 {"u": ["p"], "v": []}, ["p"])
    assert check_global_window(mc, parse_formula("P[X p] = 1/2")[0]).holds


def test_contradiction_has_no_model():
    phi, _ = parse_formula("P[X p] >= 1 & P[X p] <= 0")
    assert sat_bounded(phi, 2) is None


def test_atom_forces_labels():
    mc = sat_bounded(parse_formula("p")[0], 1)
    assert mc is not None and all("p" in l for l in mc.labels)
    assert TRUE_PROP not in mc.props


def test_third_needs_granularity_three():
    phi, _ = parse_formula("P[X p] = 1/3")
    assert sat_bounded(phi, 2) is None
    mc = sat_bounded(phi, 3)
    assert mc is not None and max_denominator(mc) <= 3


@pytest.mark.parametrize("seed", range(25))
def test_witnesses_are_sound_and_monotone_in_n(seed):
    phi = gen_random_formula(seed, props=("p",), max_ell=1, depth=2)
    prev = None
    for n in (1, 2):
        mc = sat_bounded(phi, n)
        if mc is not None:
            assert max_denominator(mc) <= n
            assert check_global_window(mc, phi).holds
        if prev is not None:
            assert mc is not None
        prev = mc
    assert analyze(phi).is_window
