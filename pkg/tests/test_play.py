import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from common_agency.contracts import Contract, general_contract, menu
from common_agency.game import GameError, observe_communication
from common_agency.play import (
    CONFIRMED_DEVIATION,
    Belief,
    StrategyError,
    TableCandidate,
    bayes_posterior,
    conditional_principal_payoff,
    induced_allocation,
    outcome,
    parse_allocation,
)
from common_agency.scenarios import example1_game, example2_game

from helpers import PROTOCOLS, oracle_posterior, random_contract, random_game, random_table_candidate


def setup(seed, protocol, n_types):
    rng = random.Random(seed)
    game = random_game(rng, (2, 2), n_types, protocol)
    on = (random_contract(rng, 0, 2, rng.randint(1, 3)), random_contract(rng, 1, 2, rng.randint(1, 3)))
    devs = [random_contract(rng, j, 2, rng.randint(1, 3)) for j in (0, 1)]
    profiles = [on, (devs[0], on[1]), (on[0], devs[1])]
    profiles = list(dict.fromkeys(profiles))
    return game, random_table_candidate(rng, game, profiles), devs


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9), st.sampled_from(PROTOCOLS), st.integers(1, 3))
def test_bayes_posterior_matches_joint_filter(seed, protocol, n_types):
    game, cand, devs = setup(seed, protocol, n_types)
    for viewer in (0, 1):
        for dev in (None, devs[viewer]):
            anchor = list(cand.profile)
            if dev is not None:
                anchor[viewer] = dev
            anchor = tuple(anchor)
            seen = {observe_communication(game, viewer, m) for m in itertools.product(*(c.alphabet for c in anchor))}
            for beta in seen:
                got = bayes_posterior(game, cand, viewer, dev, beta)
                want = oracle_posterior(game, cand, viewer, anchor, beta)
                if want == CONFIRMED_DEVIATION:
                    assert got == CONFIRMED_DEVIATION
                else:
                    assert sorted(got) == want
                    assert sum(p for p, _, _ in got) == 1


def test_example2_unilateral_posterior():
    # Both types send the same message to principal 2 under private communication.
    from common_agency.scenarios import get_scenario

    sc = get_scenario("example2")
    game = sc.game("public-private")
    cand = sc.candidate("construction", game, sc.k)
    m = cand.message(cand.profile, 0)
    post = bayes_posterior(game, cand, 1, None, m[1])
    assert post != CONFIRMED_DEVIATION
    assert sum(p for p, _, _ in post) == 1
    assert all(p in (Fraction(1, 2), Fraction(1)) for p, _, _ in post)


def test_confirmed_deviation_when_no_type_matches():
    game = example1_game("public-private")
    c = (menu(0, [0, 1]), menu(1, [0, 1]))
    cand = TableCandidate(c, game, agent={(c, 0): (("y", 1), ("y", 1))})
    assert bayes_posterior(game, cand, 0, None, ("y", 0)) == CONFIRMED_DEVIATION
    assert bayes_posterior(game, cand, 0, None, ("y", 1)) == [(1, (("y", 1), ("y", 1)), 0)]


def test_induced_allocation_and_feasibility():
    game = example1_game("public-public")
    c = (menu(0, [0, 1]), menu(1, [1]))
    m = (("y", 1), ("y", 1))
    cand = TableCandidate(c, game, agent={(c, 0): m}, actions={(0, c, m): 1})
    assert induced_allocation(game, cand) == ((1, 1),)
    cand.actions[(0, c, m)] = 0
    with pytest.raises(StrategyError):
        outcome(game, cand, c, m)


def test_missing_action_is_reported():
    game = example1_game("public-public")
    c = (general_contract(0, [("both", 0b11)]), menu(1, [1]))
    m = (("m", "both"), ("y", 1))
    cand = TableCandidate(c, game, agent={})
    with pytest.raises(StrategyError):
        induced_allocation(game, cand)
    cand.agent[(c, 0)] = m
    # principal 2's singleton image is filled in, principal 1's choice is not
    with pytest.raises(StrategyError, match="undefined"):
        induced_allocation(game, cand)


def test_message_outside_alphabet():
    game = example1_game("public-public")
    c = (menu(0, [0]), menu(1, [1]))
    cand = TableCandidate(c, game, agent={(c, 0): (("y", 1), ("y", 1))})
    with pytest.raises(StrategyError):
        induced_allocation(game, cand)


def test_conditional_payoff_prices_own_alternatives():
    game = example1_game("public-public")
    c = (menu(0, [0, 1]), menu(1, [0, 1]))
    m = (("y", 0), ("y", 1))
    cand = TableCandidate(c, game, actions={(0, c, m): 0, (1, c, m): 1})
    b = Belief.point(c, m, 0)
    assert conditional_principal_payoff(game, 0, cand, b) == 8
    assert conditional_principal_payoff(game, 0, cand, b, own_action=1) == 1
    half = Belief.mixture([(Fraction(1, 2), c, m, 0), (Fraction(1, 2), c, m, 0)])
    assert half.total() == 1


def test_parse_allocation_forms():
    game = example2_game()
    z = parse_allocation(game, {1: [1, 1], 4: [4, 4]})
    assert z == ((0, 0), (3, 3))
    assert parse_allocation(game, [[1, 1], [4, 4]]) == z
    assert parse_allocation(game, [1, 4]) == ((0, 3), (0, 3))
    with pytest.raises(GameError):
        parse_allocation(game, {1: [1, 1]})


def renamed(c: Contract, tag: str) -> Contract:
    return Contract(c.owner, tuple((tag, m) for m in c.alphabet), c.images, c.kind)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9), st.sampled_from(PROTOCOLS))
def test_message_relabeling_keeps_allocation_and_posteriors(seed, protocol):
    game, cand, _ = setup(seed, protocol, 2)
    c = cand.profile
    c2 = tuple(renamed(x, "r") for x in c)

    def ren_m(m):
        return tuple(("r", x) for x in m)

    def ren_key(j, alpha, beta):
        a = tuple(renamed(x, "r") for x in alpha) if game.protocol.public_announcement else renamed(alpha, "r")
        b = ren_m(beta) if game.protocol.public_communication else ("r", beta)
        return j, a, b

    agent = {(c2, t): ren_m(cand.message(c, t)) for t in range(game.n_types)}
    actions = {}
    for (j, alpha, beta), a in cand.actions.items():
        if alpha == (c if game.protocol.public_announcement else c[j]):
            actions[ren_key(j, alpha, beta)] = a
    twin = TableCandidate(c2, game, agent, actions)
    assert induced_allocation(game, twin) == induced_allocation(game, cand)
    for viewer in (0, 1):
        for t in range(game.n_types):
            beta = observe_communication(game, viewer, cand.message(c, t))
            beta2 = observe_communication(game, viewer, ren_m(cand.message(c, t)))
            p1 = sorted((p, th) for p, _, th in bayes_posterior(game, cand, viewer, None, beta))
            p2 = sorted((p, th) for p, _, th in bayes_posterior(game, twin, viewer, None, beta2))
            assert p1 == p2
