import json
from itertools import islice

import pytest

from common_agency.checks import registry_certificate
from common_agency.contracts import make_space
from common_agency.scenarios import example2_game, get_scenario
from common_agency.serialize import (
    FormatError,
    dumps_certificate,
    load_certificate,
    loads_document,
    reverify,
    space_from_dict,
    space_to_dict,
    stable_json,
)


def certificate(sid, protocol=None):
    sc = get_scenario(sid)
    exp = next(e for e in sc.expectations if e.kind == "verified" and (protocol is None or e.protocol == protocol))
    return registry_certificate(sc, exp)


@pytest.mark.parametrize("tag", ["P", "R", "F", "F*", "const", "A(3)", "A-delegated(2)", "A(3)+const"])
def test_space_round_trip(tag):
    game = example2_game()
    space = make_space(tag, [4, 4], k=3, r_cap=2 if tag == "R" else None, names=["m1", "m4", "m2"])
    back = space_from_dict(space_to_dict(space, game), game)
    assert back.label() == space.label()
    assert list(islice(back.iter(1), 20)) == list(islice(space.iter(1), 20))


@pytest.mark.parametrize(
    "sid,protocol",
    [("matching_pennies", None), ("example1", "public-private"), ("example1", "public-public"), ("example1", "private-private")],
)
def test_certificate_round_trip_reverifies(sid, protocol):
    cert = certificate(sid, protocol)
    assert cert.verified
    text = dumps_certificate(cert)
    data = loads_document(text)
    again = reverify(data)
    assert again.verified and again.allocation == cert.allocation
    assert dumps_certificate(again) == text


def test_tampered_action_is_caught():
    data = loads_document(dumps_certificate(certificate("matching_pennies")))
    row = next(r for r in data["actions"] if r["principal"] == 2 and r["profile"] == "p0" and r["observed"] == ["H"])
    row["action"] = "T"
    cert = reverify(data)
    assert not cert.verified
    assert cert.violation_count > 0


def test_bad_json_reports_position():
    with pytest.raises(FormatError, match="line 1"):
        loads_document("{")
    with pytest.raises(FormatError, match="object"):
        loads_document("[1]")


def test_missing_game_field():
    with pytest.raises(FormatError, match="game"):
        load_certificate({"kind": "certificate"})


def test_missing_deviation_space():
    data = loads_document(dumps_certificate(certificate("matching_pennies")))
    data["spaces"].pop("dev")
    with pytest.raises(FormatError):
        reverify(data)


def test_stable_json_sorts_keys():
    text = stable_json([{"b": 1, "a": [2, 1]}, {"z": None}])
    assert text == '{"a": [2, 1], "b": 1}\n{"z": null}\n'
    assert [json.loads(line) for line in text.splitlines()] == [{"a": [2, 1], "b": 1}, {"z": None}]
