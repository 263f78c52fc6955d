import json

import pytest

from common_agency.cli import EXIT_BUDGET, EXIT_INPUT, EXIT_OK, main
from common_agency.game import dumps_game
from common_agency.scenarios import example1_game


def records(capsys):
    return [json.loads(line) for line in capsys.readouterr().out.splitlines() if line.startswith("{")]


def test_spaces_counts(capsys):
    assert main(["spaces", "--actions", "2", "3", "--format", "machine"]) == EXIT_OK
    out = records(capsys)
    assert out[0]["counts"] == {"P": 3, "M^R": 4, "R": 15, "F": 12, "F*": 14}
    assert out[1]["counts"]["F"] == (2**3 - 1) * 2 ** (2**3 - 2)


def test_spaces_text_mode(capsys):
    assert main(["spaces", "example1"]) == EXIT_OK
    assert "P:3, M^R:4, R:15, F:12, F*:14" in capsys.readouterr().out


def test_reproduce_matching_pennies(capsys, tmp_path):
    path = tmp_path / "mp.jsonl"
    assert main(["reproduce", "matching_pennies", "--format", "machine", "--out", str(path)]) == EXIT_OK
    out = records(capsys)
    checks, summary = out[:-1], out[-1]
    assert len(checks) == 3 and all(r["passed"] for r in checks)
    assert summary["passed"] == summary["total"] == 3
    assert [json.loads(line) for line in path.read_text().splitlines()] == out


def test_reproduce_digests_are_stable(capsys):
    main(["reproduce", "example1", "--format", "machine"])
    first = [r["digest"] for r in records(capsys) if "check" in r]
    main(["reproduce", "example1", "--format", "machine"])
    assert [r["digest"] for r in records(capsys) if "check" in r] == first
    assert len(first) == 3


def test_verify_and_certificate_file(capsys, tmp_path):
    cert = tmp_path / "cert.json"
    assert main(["verify", "example1", "--protocol", "public-public", "--write-certificate", str(cert), "--format", "machine"]) == EXIT_OK
    first = records(capsys)[0]
    assert first["verified"] is True
    assert main(["verify", str(cert), "--format", "machine"]) == EXIT_OK
    again = records(capsys)[0]
    assert again["verified"] is True and again["allocation"] == first["allocation"]


def test_search_on_game_file(capsys, tmp_path):
    spec = tmp_path / "game.json"
    spec.write_text(dumps_game(example1_game("public-public")))
    code = main(["search", str(spec), "--target", "[1, 1]", "--on", "P", "--dev", "P", "--format", "machine"])
    assert code == EXIT_OK
    assert records(capsys)[-1]["status"] == "NotFound"


def test_search_budget_exit_code(capsys):
    code = main(["search", "example1", "--target", "[1, 1]", "--on", "F", "--dev", "F", "--max-candidates", "0"])
    assert code == EXIT_BUDGET


def test_replicate_writes_map(capsys, tmp_path):
    path = tmp_path / "map.json"
    code = main(["replicate", "example1", "--to", "T2", "--protocol", "public-private", "--write-map", str(path), "--format", "machine"])
    assert code == EXIT_OK
    data = json.loads(path.read_text())
    assert data["allocation_preserved"] and all(data["sanity"].values())


def test_probe(capsys):
    assert main(["probe", "example1", "--theorem", "T1", "--format", "machine"]) == EXIT_OK
    assert records(capsys)[0]["holds"] is True


@pytest.mark.parametrize(
    "argv",
    [
        ["reproduce", "nosuch"],
        ["verify", "/nonexistent/cert.json"],
        ["search", "example1", "--target", "not json", "--on", "P", "--dev", "P"],
        ["search", "example1", "--target", "[1, 1]", "--on", "Q", "--dev", "P"],
        ["replicate", "matching_pennies", "--to", "T2"],
    ],
)
def test_bad_input_exits_with_input_code(argv, capsys):
    assert main(argv) == EXIT_INPUT
    assert capsys.readouterr().err.startswith("error:")


def test_corrupt_certificate(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "certificate",\n')
    assert main(["verify", str(bad)]) == EXIT_INPUT
    assert "line" in capsys.readouterr().err
