import pytest

from common_agency.checks import registry_certificate
from common_agency.contracts import make_space, members
from common_agency.equilibrium import verify
from common_agency.replication import (
    PIPELINES,
    ReplicationError,
    canonicalize,
    extend_equilibrium,
    reduce_on_path_to_P,
    reduce_on_path_to_R,
    replace_deviation_space,
)
from common_agency.scenarios import get_scenario

N2 = [2, 2]


def example1(protocol):
    sc = get_scenario("example1")
    exp = next(e for e in sc.expectations if e.kind == "verified" and e.protocol == protocol)
    game = sc.game(protocol)
    return registry_certificate(sc, exp), sc.space(game, exp.k)


def menus_equilibrium():
    sc = get_scenario("matching_pennies")
    exp = next(e for e in sc.expectations if e.kind == "verified")
    return registry_certificate(sc, exp)


@pytest.mark.parametrize(
    "protocol,theorem,kind",
    [
        ("public-private", "T2", "canonicalize_RF"),
        ("public-public", "T2", "canonicalize_RF"),
        ("private-private", "T3", "canonicalize_PF"),
    ],
)
def test_example1_canonicalizes(protocol, theorem, kind):
    cert, space = example1(protocol)
    assert cert.verified
    rmap = canonicalize(cert, space)
    assert rmap.ok and rmap.kind == kind
    assert rmap.target.allocation == cert.allocation
    assert rmap.sanity and all(rmap.sanity.values())
    on, dev, _ = PIPELINES[theorem]
    assert rmap.target.on_space == on and rmap.target.dev_space == dev
    assert rmap.to_dict()["allocation_preserved"]


def test_recommendation_sets_cover_on_path_play():
    cert, space = example1("public-public")
    rmap = reduce_on_path_to_R(cert, space, space)
    game, cand = cert.game, cert.candidate
    for j, (target, _) in rmap.gamma.items():
        for t in range(game.n_types):
            m = cand.message(cand.profile, t)
            token = ("R", cand.profile[j](m[j]), cert.allocation[t][j])
            assert token in target.alphabet
        # every K token is a recommendation inside its own menu
        assert all(tok[0] == "R" and tok[2] in members(tok[1]) for tok in target.alphabet)


def test_tau_translator_preserves_images():
    cert, space = example1("public-private")
    rmap = reduce_on_path_to_R(cert, space, space)
    for j, table in rmap.translators["tau"].items():
        src = cert.candidate.profile[j]
        target = rmap.gamma[j][0]
        for tok, m in table.items():
            assert src(m) == target(tok)


def test_menu_reduction_needs_private_private():
    cert, space = example1("public-public")
    with pytest.raises(ReplicationError):
        reduce_on_path_to_P(cert, space)


def test_pipeline_model_mismatch_is_refused():
    cert, space = example1("public-public")
    with pytest.raises(ReplicationError, match="T3 does not cover"):
        canonicalize(cert, space, "T3")
    with pytest.raises(ReplicationError, match="unknown pipeline"):
        canonicalize(cert, space, "T7")


def test_menu_equilibrium_is_not_a_general_source():
    cert = menus_equilibrium()
    with pytest.raises(ReplicationError, match="A\\(k\\)"):
        canonicalize(cert, make_space("P", N2))


def test_unverified_source_is_refused():
    cert, space = example1("public-public")
    bad = verify(cert.game, cert.candidate, None)
    with pytest.raises(ReplicationError, match="not verified"):
        canonicalize(bad, space)


def test_extend_menus_to_full_recommendations():
    cert = menus_equilibrium()
    rmap = extend_equilibrium(cert, make_space("F", N2), make_space("P", N2))
    assert rmap.ok
    assert all(rmap.sanity.values())
    assert rmap.target.allocation == cert.allocation


def test_extension_needs_double_star_relation():
    cert = menus_equilibrium()
    with pytest.raises(ReplicationError, match="extends no contract of P"):
        replace_deviation_space(cert, make_space("F", N2), make_space("P", N2))


def test_deviation_replacement_by_extension():
    cert = menus_equilibrium()
    rmap = replace_deviation_space(cert, make_space("A-delegated(2)", N2), make_space("P", N2))
    assert rmap.ok
    assert rmap.target.dev_space == "A-delegated(2)"


def test_extension_mode_needs_source_space():
    cert = menus_equilibrium()
    with pytest.raises(ReplicationError):
        replace_deviation_space(cert, make_space("F", N2))
    with pytest.raises(ReplicationError, match="unknown mode"):
        replace_deviation_space(cert, make_space("F", N2), mode="other")


def test_star_relation_failure_is_reported():
    # A(1) cannot extend a two-message menu, so the on-path swap is refused.
    cert = menus_equilibrium()
    with pytest.raises(ReplicationError, match="has no extension"):
        extend_equilibrium(cert, make_space("A(1)", N2))
