"""Command-line frontend: verify, search, reproduce, spaces, probe, replicate.

Exit codes: 0 success, 2 an expected outcome was not met, 3 a search ran
out of budget, 4 bad input or a refused operation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Any, Sequence

from .checks import CheckResult, reproduce
from .contracts import (
    ContractError,
    FullRecSpace,
    FullRecStarSpace,
    GeneralSpace,
    MenuSpace,
    RecSpace,
    contract_str,
    make_space,
    recommendation_messages,
)
from .equilibrium import verify
from .game import Game, GameError, game_from_dict
from .play import parse_allocation
from .replication import PIPELINES, ReplicationError, canonicalize, extend_equilibrium, reduce_on_path_to_P, reduce_on_path_to_R
from .scenarios import get_scenario, registry
from .search import FAMILIES, THEOREMS, Budget, SearchProblem, implementable, theorem_probe
from .serialize import FormatError, dumps_certificate, load_certificate, loads_document, stable_json, verdict_to_dict

EXIT_OK = 0
EXIT_EXPECTATION = 2
EXIT_BUDGET = 3
EXIT_INPUT = 4
PROGRESS_SECONDS = 5.0


class InputError(Exception):
    pass


class Output:
    """Collects records; text mode prints them as ``key: value`` lines."""

    def __init__(self, fmt: str, out_path: str | None) -> None:
        self.fmt = fmt
        self.out_path = out_path
        self.records: list[dict] = []

    def emit(self, record: dict, text: str | None = None) -> None:
        self.records.append(record)
        if self.fmt == "machine":
            sys.stdout.write(stable_json([record]))
        else:
            print(text if text is not None else _text(record))
        sys.stdout.flush()

    def close(self) -> None:
        if self.out_path:
            Path(self.out_path).write_text(stable_json(self.records))


def _text(record: dict, indent: str = "") -> str:
    lines = []
    for key, value in record.items():
        if isinstance(value, dict) and value and all(not isinstance(v, (dict, list)) for v in value.values()):
            inner = ", ".join(f"{k}={v}" for k, v in value.items())
            lines.append(f"{indent}{key}: {inner}")
        elif isinstance(value, (dict, list)):
            lines.append(f"{indent}{key}: {json.dumps(value, default=str)}")
        else:
            lines.append(f"{indent}{key}: {value}")
    return "\n".join(lines)


# -- inputs -------------------------------------------------------------------------


def _is_scenario(name: str) -> bool:
    return any(s.id == name for s in registry())


def _read_document(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise InputError(f"{path}: no such scenario or file (scenarios: {', '.join(s.id for s in registry())})")
    try:
        return loads_document(p.read_text())
    except FormatError as exc:
        raise InputError(f"{path}: {exc}") from exc


def load_game(source: str, protocol: str | None = None) -> Game:
    if _is_scenario(source):
        sc = get_scenario(source)
        return sc.game(protocol)
    data = _read_document(source)
    try:
        game = game_from_dict(data["game"] if "game" in data else data)
    except GameError as exc:
        raise InputError(f"{source}: {exc}") from exc
    return game.with_protocol(protocol) if protocol else game


def _space(tag: str, game: Game, k: int | None, r_cap: int | None, names: Sequence[str] | None = None):
    n = [game.n_actions(j) for j in range(game.n_principals)]
    try:
        return make_space(tag, n, k=k, r_cap=r_cap, names=names)
    except ContractError as exc:
        raise InputError(str(exc)) from exc


def _budget(args: argparse.Namespace) -> Budget:
    return Budget(max_candidates=args.max_candidates, max_seconds=args.max_seconds)


def _scenario_defaults(sc, candidate: str | None, protocol: str | None) -> tuple[str, str, str, str, int]:
    """Candidate, protocol, spaces and k of the scenario's matching verified claim."""
    name = candidate or next(iter(sc.candidates))
    if name not in sc.candidates:
        raise InputError(f"scenario {sc.id} has no candidate {name!r}; known: {', '.join(sc.candidates)}")
    for exp in sc.expectations:
        if exp.candidate == name and exp.kind in ("verified", "violation") and (protocol is None or exp.protocol == protocol):
            return name, exp.protocol, exp.on, exp.dev, exp.k if exp.k is not None else sc.k
    return name, protocol or sc.protocols[0], "A", "A", sc.k


# -- commands -----------------------------------------------------------------------


def cmd_verify(args: argparse.Namespace, out: Output) -> int:
    if _is_scenario(args.source):
        sc = get_scenario(args.source)
        name, protocol, on_tag, dev_tag, k = _scenario_defaults(sc, args.candidate, args.protocol)
        k = args.k or k
        game = sc.game(protocol)
        cand = sc.candidate(name, game, k)
        names = sc.names if k == sc.k else None
        on = _space(args.on or on_tag, game, k, args.r_cap, names)
        dev = _space(args.dev or dev_tag, game, k, args.r_cap, names)
    else:
        try:
            game, cand, on, dev = load_certificate(_read_document(args.source))
        except FormatError as exc:
            raise InputError(f"{args.source}: {exc}") from exc
        if args.protocol:
            raise InputError("--protocol cannot override a certificate file")
        if args.on:
            on = _space(args.on, game, args.k, args.r_cap)
        if args.dev:
            dev = _space(args.dev, game, args.k, args.r_cap)
        if dev is None:
            raise InputError("the certificate names no deviation space; pass --dev")
    cert = verify(game, cand, dev, on, jobs=args.jobs)
    record = {"command": "verify", "protocol": str(game.protocol), **verdict_to_dict(cert), "elapsed": round(cert.elapsed, 3)}
    out.emit(record)
    if args.write_certificate:
        Path(args.write_certificate).write_text(dumps_certificate(cert, limit=None))
    return EXIT_OK


def cmd_search(args: argparse.Namespace, out: Output) -> int:
    game = load_game(args.source, args.protocol)
    try:
        z = parse_allocation(game, json.loads(args.target))
    except (json.JSONDecodeError, GameError, TypeError) as exc:
        raise InputError(f"--target: {exc}") from exc
    names = get_scenario(args.source).names if _is_scenario(args.source) and args.k == get_scenario(args.source).k else None
    on = _space(args.on, game, args.k, args.r_cap, names)
    dev = _space(args.dev, game, args.k, args.r_cap, names)
    problem = SearchProblem(game, z, on, dev, args.belief_family, _budget(args))

    last = [time.monotonic()]

    def progress(event: dict) -> None:
        # found events always; refutations at most every PROGRESS_SECONDS
        now = time.monotonic()
        if event["event"] != "found" and now - last[0] < PROGRESS_SECONDS:
            return
        last[0] = now
        if args.format == "machine":
            sys.stdout.write(stable_json([{"progress": event}]))
        else:
            print(f"... {event['event']} after {event['examined']} candidates", file=sys.stderr)

    result = implementable(problem, progress)
    record = {"command": "search", **result.summary(), "notes": result.notes, "elapsed": round(result.elapsed, 3)}
    out.emit(record)
    if args.write_certificate and result.certificate is not None:
        Path(args.write_certificate).write_text(dumps_certificate(result.certificate, limit=None))
    return EXIT_BUDGET if result.status == "Inconclusive" else EXIT_OK


def cmd_reproduce(args: argparse.Namespace, out: Output) -> int:
    if args.scenario != "all" and not _is_scenario(args.scenario):
        raise InputError(f"unknown scenario {args.scenario!r}; known: {', '.join(s.id for s in registry())}")

    def show(c: CheckResult) -> None:
        mark = "PASS" if c.passed else ("INCONCLUSIVE" if c.inconclusive else "FAIL")
        caps = ", ".join(f"{k}={v}" for k, v in c.caps.items()) or "none"
        text = f"{mark}  {c.scenario}: {c.name}  {c.spaces} {c.protocol}  caps: {caps}  {c.elapsed:.2f}s  digest {c.digest}"
        out.emit({"command": "reproduce", **c.record()}, text)

    start = time.perf_counter()
    report = reproduce(args.scenario, args.jobs, args.include_extra, _budget(args), on_result=show)
    passed = sum(c.passed for c in report.checks)
    out.emit(
        {"command": "reproduce", "scenario": args.scenario, "passed": passed, "total": len(report.checks)},
        f"{passed}/{len(report.checks)} checks pass ({time.perf_counter() - start:.1f}s)",
    )
    if report.passed:
        return EXIT_OK
    failed = [c for c in report.checks if not c.passed]
    return EXIT_BUDGET if all(c.inconclusive for c in failed) else EXIT_EXPECTATION


def space_counts(n: int, k: int | None = None, r_cap: int | None = None) -> dict[str, int]:
    sizes = [n]
    counts = {
        "P": MenuSpace(sizes).size(0),
        "M^R": len(recommendation_messages(n)),
        "R": RecSpace(sizes, r_cap).size(0),
        "F": FullRecSpace(sizes).size(0),
        "F*": FullRecStarSpace(sizes).size(0),
    }
    if k is not None:
        counts[f"A({k})"] = GeneralSpace(sizes, k).size(0)
    return counts


def cmd_spaces(args: argparse.Namespace, out: Output) -> int:
    if args.source is None and not args.actions:
        raise InputError("give a game file, a scenario id or --actions")
    if args.source is not None:
        game = load_game(args.source)
        sizes = [game.n_actions(j) for j in range(game.n_principals)]
        labels = [game.principals[j] for j in range(game.n_principals)]
    else:
        sizes = list(args.actions)
        labels = list(range(1, len(sizes) + 1))
        game = None
    for j, n in enumerate(sizes):
        counts = space_counts(n, args.k, args.r_cap)
        text = f"principal {labels[j]} (|Y|={n}): " + ", ".join(f"{tag}:{v}" for tag, v in counts.items())
        out.emit({"command": "spaces", "principal": labels[j], "actions": n, "counts": counts}, text)
        if args.list and game is not None:
            space = _space(args.list, game, args.k, args.r_cap)
            for i, c in enumerate(space.iter(j)):
                if i >= args.limit:
                    out.emit({"truncated_at": args.limit}, f"  ... (first {args.limit} shown)")
                    break
                out.emit({"principal": labels[j], "contract": contract_str(c, game.actions[j])}, "  " + contract_str(c, game.actions[j]))
    return EXIT_OK


def cmd_probe(args: argparse.Namespace, out: Output) -> int:
    game = load_game(args.source, args.protocol)
    try:
        rep = theorem_probe(game, args.theorem, args.k, args.r_cap, args.belief_family, _budget(args))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    record = {"command": "probe", **rep.summary()}
    record["left_set"] = [_alloc(game, z) for z in rep.left_set]
    record["right_set"] = [_alloc(game, z) for z in rep.right_set]
    record["inconclusive"] = [_alloc(game, z) for z in rep.inconclusive]
    out.emit(record)
    return EXIT_BUDGET if rep.inconclusive else EXIT_OK


def _alloc(game: Game, z: Any) -> Any:
    try:
        return {str(game.types[t]): list(game.profile_labels(y)) for t, y in enumerate(z)}
    except (TypeError, IndexError):
        return z


def _parse_pair(text: str) -> tuple[str, str]:
    text = text.strip().strip("[]").replace("C^", "")
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(parts):
        raise InputError(f"--to expects a pair like 'R,F' or a theorem T2/T3/T5, got {text!r}")
    return parts[0], parts[1]


def cmd_replicate(args: argparse.Namespace, out: Output) -> int:
    if _is_scenario(args.source):
        sc = get_scenario(args.source)
        name, protocol, on_tag, dev_tag, k = _scenario_defaults(sc, args.candidate, args.protocol)
        k = args.k or k
        game = sc.game(protocol)
        names = sc.names if k == sc.k else None
        on = _space(on_tag, game, k, None, names)
        dev = _space(dev_tag, game, k, None, names)
        cert = verify(game, sc.candidate(name, game, k), dev, on, jobs=args.jobs)
    else:
        try:
            game, cand, on, dev = load_certificate(_read_document(args.source))
        except FormatError as exc:
            raise InputError(f"{args.source}: {exc}") from exc
        cert = verify(game, cand, dev, on, jobs=args.jobs)
    source_space = cert.spaces[1]
    to = args.to.strip().upper()
    if to in PIPELINES:
        rmap = canonicalize(cert, source_space, to, jobs=args.jobs)
    else:
        on_tag, dev_tag = _parse_pair(args.to)
        pipeline = next((t for t, (o, d, _) in PIPELINES.items() if (o, d) == (on_tag.upper(), dev_tag.upper())), None)
        same_dev = dev_tag.upper() in ("SAME", source_space.label().upper())
        if pipeline is not None:
            rmap = canonicalize(cert, source_space, pipeline, jobs=args.jobs)
        elif on_tag.upper() == "R" and same_dev:
            rmap = reduce_on_path_to_R(cert, source_space, jobs=args.jobs)
        elif on_tag.upper() == "P" and same_dev:
            rmap = reduce_on_path_to_P(cert, source_space)
        elif same_dev:
            rmap = extend_equilibrium(cert, _space(on_tag, game, args.k, None))
        else:
            raise InputError(f"no replication route to [{on_tag}, {dev_tag}]")
    record = {"command": "replicate", "ok": rmap.ok, **rmap.to_dict()}
    out.emit(record)
    if args.write_map:
        Path(args.write_map).write_text(json.dumps(rmap.to_dict(), indent=1, default=str) + "\n")
    return EXIT_OK if rmap.ok else EXIT_EXPECTATION


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["text", "machine"], default="text")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for verification (default 1)")
    common.add_argument("--out", help="also write the line-delimited records to this file")

    budget = argparse.ArgumentParser(add_help=False)
    budget.add_argument("--max-candidates", type=int, default=None)
    budget.add_argument("--max-seconds", type=float, default=None)

    caps = argparse.ArgumentParser(add_help=False)
    caps.add_argument("--k", type=int, default=None, help="alphabet size of general contracts A(k)")
    caps.add_argument("--r-cap", type=int, default=None, help="largest |K| enumerated in R")

    parser = argparse.ArgumentParser(prog="common-agency", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common, caps], help="verify a registry candidate or a certificate file")
    p.add_argument("source", help="scenario id or certificate file")
    p.add_argument("candidate", nargs="?", help="candidate name within the scenario")
    p.add_argument("--protocol")
    p.add_argument("--on")
    p.add_argument("--dev")
    p.add_argument("--write-certificate", metavar="PATH")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("search", parents=[common, caps, budget], help="search for an equilibrium inducing a target")
    p.add_argument("source", help="game spec file or scenario id")
    p.add_argument("--target", required=True, help='JSON allocation, e.g. \'{"1": [1, 1], "4": [4, 4]}\'')
    p.add_argument("--on", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--protocol")
    p.add_argument("--belief-family", default="point", choices=list(FAMILIES))
    p.add_argument("--write-certificate", metavar="PATH")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("reproduce", parents=[common, budget], help="check a scenario's expected outcomes")
    p.add_argument("scenario", help="scenario id or 'all'")
    p.add_argument("--include-extra", action="store_true", help="also check equilibria kept for replication")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("spaces", parents=[common, caps], help="canonical space sizes")
    p.add_argument("source", nargs="?", help="game spec file or scenario id")
    p.add_argument("--actions", type=int, nargs="+", help="action counts per principal instead of a game")
    p.add_argument("--counts", action="store_true", help="print counts (the default output)")
    p.add_argument("--list", metavar="SPACE", help="also list contracts of this space")
    p.add_argument("--limit", type=int, default=50)
    p.set_defaults(func=cmd_spaces)

    p = sub.add_parser("probe", parents=[common, caps, budget], help="compare the allocation sets a theorem relates")
    p.add_argument("source", help="game spec file or scenario id")
    p.add_argument("--theorem", required=True, choices=sorted(THEOREMS) + [t.lower() for t in sorted(THEOREMS)])
    p.add_argument("--protocol")
    p.add_argument("--belief-family", default="point", choices=list(FAMILIES))
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("replicate", parents=[common, caps], help="carry a verified equilibrium into another space pair")
    p.add_argument("source", help="scenario id or certificate file")
    p.add_argument("--to", required=True, help="target pair such as R,F or R,F* or a theorem T2/T3/T5")
    p.add_argument("--candidate")
    p.add_argument("--protocol")
    p.add_argument("--write-map", metavar="PATH")
    p.set_defaults(func=cmd_replicate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "k", None) is None and args.command == "probe":
        args.k = 2
    out = Output(args.format, args.out)
    try:
        code = args.func(args, out)
    except (InputError, FormatError, GameError, ContractError, ReplicationError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    out.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
