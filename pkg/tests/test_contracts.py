import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from common_agency.contracts import (
    CapError,
    Contract,
    ContractError,
    extension_map,
    find_surjection,
    full_rec_contract,
    is_extension,
    make_space,
    menu,
    rec_contract,
    recommendation_messages,
    relation_check,
    section_map,
    subset_masks,
)

from helpers import oracle_is_extension, random_contract


def brute_counts(n):
    """Count the canonical spaces by building every candidate alphabet by hand."""
    subsets = [frozenset(s) for r in range(1, n + 1) for s in itertools.combinations(range(n), r)]
    recs = [(E, y) for E in subsets for y in E]
    full = set()
    for E in subsets:
        rest = [L for L in subsets if L != E]
        for bits in itertools.product([0, 1], repeat=len(rest)):
            L = frozenset(x for x, b in zip(rest, bits) if b)
            full.add((E, L))
    return {
        "P": len(subsets),
        "MR": len(recs),
        "R": 2 ** len(recs) - 1,
        "F": len(full),
        "F*": len(full) + n,
    }


@pytest.mark.parametrize("n", [1, 2, 3])
def test_space_sizes_match_closed_forms(n):
    brute = brute_counts(n)
    closed = {
        "P": 2**n - 1,
        "MR": n * 2 ** (n - 1),
        "R": 2 ** (n * 2 ** (n - 1)) - 1,
        "F": (2**n - 1) * 2 ** (2**n - 2),
        "F*": (2**n - 1) * 2 ** (2**n - 2) + n,
    }
    assert brute == closed
    assert len(recommendation_messages(n)) == closed["MR"]
    for tag in ("P", "R", "F", "F*"):
        space = make_space(tag, [n, n])
        assert space.size(0) == closed[tag]
        listed = list(space.iter(0))
        assert len(listed) == len(set(listed)) == closed[tag]


def test_sizes_at_two_and_four_actions():
    two = {t: make_space(t, [2, 2]).size(0) for t in ("P", "R", "F", "F*")}
    assert two == {"P": 3, "R": 15, "F": 12, "F*": 14}
    assert make_space("F", [4, 4]).size(0) == 245760
    assert make_space("F*", [4, 4]).size(0) == 245764


def test_uncapped_R_space_names_the_cap():
    with pytest.raises(CapError) as info:
        next(make_space("R", [4, 4]).iter(0))
    assert "cap" in str(info.value)
    capped = make_space("R", [4, 4], r_cap=1)
    assert sum(1 for _ in capped.iter(0)) == 32 == capped.size(0)


def test_general_space_sizes():
    assert make_space("A(3)", [2, 2]).size(0) == 27
    assert make_space("A-delegated(2)", [3, 3]).size(0) == 9
    assert sum(1 for _ in make_space("A(2)+const", [2, 2]).iter(0)) == 9 + 2


@pytest.mark.parametrize("tag", ["P", "R", "F", "F*", "const", "A(3)", "A-delegated(2)", "A(3)+const", "R(cap=2)"])
def test_space_labels_round_trip(tag):
    r_cap = 2 if "cap" in tag else None
    space = make_space(tag.replace("(cap=2)", ""), [2, 2], r_cap=r_cap)
    assert space.label() == tag
    assert make_space(space.label().replace("(cap=2)", ""), [2, 2], r_cap=r_cap).label() == tag


def test_unknown_space_is_rejected():
    with pytest.raises(ContractError):
        make_space("Q", [2, 2])
    with pytest.raises(ContractError):
        make_space("A", [2, 2])


def test_space_membership():
    F = make_space("F", [2, 2])
    R = make_space("R", [2, 2])
    assert all(F.contains(c) for c in F.iter(1))
    assert all(R.contains(c) for c in R.iter(0))
    assert not F.contains(menu(0, [0]))
    assert not make_space("R", [2, 2], r_cap=1).contains(rec_contract(0, recommendation_messages(2)[:2]))


def test_contract_rejects_bad_input():
    with pytest.raises(ContractError):
        Contract(0, (), ())
    with pytest.raises(ContractError):
        Contract(0, ("a",), (0,))
    with pytest.raises(ContractError):
        full_rec_contract(0, 1, [1])
    with pytest.raises(ContractError):
        rec_contract(0, [("R", 2, 0)])
    with pytest.raises(ContractError):
        menu(0, [0])(("y", 1))


def test_full_rec_alphabet():
    c = full_rec_contract(0, 0b11, [0b01])
    assert c.alphabet == (("E", 1), ("R", 3, 0), ("R", 3, 1))
    assert c.images == (1, 3, 3)


contract_seeds = st.tuples(st.integers(0, 10**9), st.integers(1, 4), st.integers(1, 4))


@settings(max_examples=300, deadline=None)
@given(contract_seeds, contract_seeds)
def test_is_extension_matches_exhaustive_search(a, b):
    c1 = random_contract(random.Random(a[0]), 0, 2, a[1])
    c2 = random_contract(random.Random(b[0]), 0, 2, b[1])
    assert is_extension(c1, c2) == oracle_is_extension(c1, c2)
    assert is_extension(c1, c2) == (find_surjection(c1, c2) is not None)


@settings(max_examples=200, deadline=None)
@given(contract_seeds, contract_seeds)
def test_extension_map_is_image_preserving_surjection(a, b):
    c1 = random_contract(random.Random(a[0]), 0, 3, a[1])
    c2 = random_contract(random.Random(b[0]), 0, 3, b[1])
    iota = extension_map(c1, c2)
    if iota is None:
        assert not is_extension(c1, c2)
        return
    assert set(iota) == set(c1.alphabet)
    assert set(iota.values()) == set(c2.alphabet)
    assert all(c1(m) == c2(iota[m]) for m in c1.alphabet)
    back = section_map(c1, c2)
    assert len(set(back.values())) == len(back) == len(c2.alphabet)
    assert all(iota[back[m]] == m for m in c2.alphabet)


@settings(max_examples=200, deadline=None)
@given(contract_seeds, contract_seeds, contract_seeds)
def test_extension_is_reflexive_and_transitive(a, b, c):
    cs = [random_contract(random.Random(s), 0, 2, k) for s, k, _ in (a, b, c)]
    assert all(is_extension(x, x) for x in cs)
    if is_extension(cs[0], cs[1]) and is_extension(cs[1], cs[2]):
        assert is_extension(cs[0], cs[2])


def test_extension_needs_same_owner():
    with pytest.raises(ContractError):
        is_extension(menu(0, [0]), menu(1, [0]))


# -- relation suite at two actions per principal ---------------------------------------------


N2 = [2, 2]


def S(tag, **kw):
    return make_space(tag, N2, **kw)


def test_star_chain_holds():
    A = S("A", k=4)
    for outer, inner in ((A, S("R")), (S("R"), S("F")), (S("F"), S("P"))):
        result = relation_check(outer, inner, "*")
        assert result.holds
        for small, big in result.witness.items():
            assert is_extension(big, small)


def test_general_space_needs_every_recommendation_message():
    # A contract in R with all four messages has no extension over three messages.
    assert not relation_check(S("A", k=3), S("R"), "*").holds


def test_double_star_into_F_holds():
    for space in (S("A", k=2), S("A", k=4), S("P")):
        result = relation_check(space, S("F"), "**")
        assert result.holds
        assert all(is_extension(big, small) for big, small in result.witness.items())


def test_F_does_not_reduce_to_menus():
    result = relation_check(S("F"), S("P"), "**")
    assert not result.holds
    bad = result.counterexample
    assert bad is not None and make_space("F", N2).contains(bad)
    assert not any(is_extension(bad, m) for m in S("P").iter(bad.owner))


def test_relation_kind_is_checked():
    with pytest.raises(ContractError):
        relation_check(S("P"), S("F"), "***")


def test_subset_masks_order():
    assert subset_masks(3) == [1, 2, 4, 3, 5, 6, 7]
