import itertools
import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from common_agency.contracts import menu, recommendation_messages
from common_agency.game import (
    GameError,
    ImperfectCommitmentSpec,
    Protocol,
    dumps_game,
    from_imperfect_commitment,
    game_from_dict,
    loads_game,
    make_game,
    observe_announcement,
    observe_communication,
    reverse_embedding,
    to_nondelegated,
)
from common_agency.scenarios import counterexample_game, example1_game, example2_game, matching_pennies_game

from helpers import PROTOCOLS, random_game


def test_protocol_parse_round_trip():
    for text in PROTOCOLS:
        assert str(Protocol.parse(text)) == text
    assert len(Protocol.all()) == 4
    with pytest.raises(GameError):
        Protocol.parse("open-private")
    with pytest.raises(GameError):
        Protocol.parse("public")


def test_example1_payoff_table():
    g = example1_game()
    assert g.payoff(0, (0, 1), 0) == 8
    assert g.payoff(1, (0, 1), 0) == -8
    assert g.payoff("agent", (1, 1), 0) == 1


def test_counterexample_agent_payoff():
    g = counterexample_game()
    a = {v: g.action_index(0, v) for v in (1, 2, 3, 4)}
    for y in g.profiles():
        for t in range(g.n_types):
            expected = 1 if y == (a[1], g.action_index(1, 4)) else 0
            assert g.payoff("agent", y, t) == expected


def test_matching_pennies_signs():
    g = matching_pennies_game()
    H, T = 0, 1
    assert g.payoff(0, (H, H), 0) == 1 and g.payoff(1, (H, H), 0) == -1
    assert g.payoff(0, (H, T), 0) == -1 and g.payoff(1, (H, T), 0) == 1


def test_example2_even_sum_payoffs():
    g = example2_game()
    t1 = g.type_index(1)
    idx = lambda y: g.profile_index(list(y))  # noqa: E731
    assert g.payoff(0, idx((1, 1)), t1) == 8
    assert g.payoff(0, idx((1, 3)), t1) == 1
    assert g.payoff(0, idx((1, 2)), t1) == -1


def test_observation_keys_follow_protocol():
    c = (menu(0, [0, 1]), menu(1, [0]))
    m = (("y", 0), ("y", 0))
    for text in PROTOCOLS:
        g = example1_game(text)
        alpha = observe_announcement(g, 0, c)
        beta = observe_communication(g, 0, m)
        assert alpha == (c if g.protocol.public_announcement else c[0])
        assert beta == (m if g.protocol.public_communication else m[0])


def test_prior_must_be_a_distribution():
    with pytest.raises(GameError):
        make_game([1], [0, 1], [Fraction(1, 2), Fraction(1, 3)], [[0]], lambda y, t: 0, lambda j, y, t: 0)


def test_game_file_missing_field_is_named():
    data = {"principals": [1], "types": [0]}
    with pytest.raises(GameError, match="prior"):
        game_from_dict(data)


def test_game_file_parse_error_reports_line():
    with pytest.raises(GameError, match="line 3"):
        loads_game('{\n  "principals": [1,\n}')


@pytest.mark.parametrize("make", [example1_game, example2_game, counterexample_game, matching_pennies_game])
def test_registry_games_round_trip_bit_exact(make):
    g = make()
    text = dumps_game(g)
    back = loads_game(text)
    assert back == g
    assert dumps_game(back) == text


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**9), st.sampled_from(PROTOCOLS), st.integers(1, 3))
def test_random_games_round_trip(seed, protocol, n_types):
    g = random_game(random.Random(seed), (2, 3), n_types, protocol)
    text = dumps_game(g)
    assert loads_game(text) == g
    assert dumps_game(loads_game(text)) == text


def test_prior_is_written_as_exact_fractions():
    g = random_game(random.Random(3), (2, 2), 3)
    data = json.loads(dumps_game(g))
    assert [Fraction(v) for v in data["prior"].values()] == list(g.prior)
    assert game_from_dict(data).prior == g.prior


def test_imperfect_commitment_pairs():
    spec = ImperfectCommitmentSpec(
        contractible=(("lo", "hi"), ("x",)),
        noncontractible=(("a", "b"), ("c",)),
        feasibility=({"lo": ("a",), "hi": ("a", "b")}, {"x": ("c",)}),
    )
    assert spec.feasible_pairs(0) == [("lo", "a"), ("hi", "a"), ("hi", "b")]
    game, hints = from_imperfect_commitment(spec, [1, 2], [0], None, lambda y, t: 0, lambda j, y, t: 0)
    assert [game.n_actions(j) for j in range(2)] == [3, 1]
    assert hints[0] == spec.feasible_pairs(0)


def test_empty_feasibility_image_rejected():
    with pytest.raises(GameError):
        ImperfectCommitmentSpec((("x",),), (("a",),), ({"x": ()},))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_reverse_embedding_matches_recommendation_messages(n):
    report = to_nondelegated(list(range(n)))
    assert report["bijective"]
    assert report["pairs"] == report["messages"] == len(recommendation_messages(n)) == n * 2 ** (n - 1)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_reverse_embedding_pairs_are_menu_choices(n):
    ys = tuple(range(n))
    pairs = reverse_embedding(ys).feasible_pairs(0)
    assert len(pairs) == len(set(pairs))
    expected = {(frozenset(s), y) for r in range(1, n + 1) for s in itertools.combinations(ys, r) for y in s}
    assert set(pairs) == expected
    assert {y for _, y in pairs} == set(ys)
