"""File format for candidates, certificates and contract spaces.

A certificate file is JSON with a stable field order:

* ``game``: the game spec (see :func:`game.game_to_dict`);
* ``spaces``: descriptors of the on-path and deviation spaces;
* ``profiles``: contract profiles by id, on-path profile first;
* ``agent``, ``actions``, ``beliefs``: strategy and belief literals keyed by
  profile id, type and observation;
* ``verdict``: what the verifier concluded when the file was written.

Tables cover every profile the verifier evaluates: the on-path profile,
every unilateral deviation in the deviation space, and the support points
of every supplied belief.
"""

from __future__ import annotations

import itertools
import json
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .contracts import (
    ConstantsSpace,
    ContractError,
    ContractSpace,
    ExplicitSpace,
    FullRecSpace,
    FullRecStarSpace,
    GeneralSpace,
    MenuSpace,
    RecSpace,
    UnionSpace,
    contract_from_literal,
    contract_str,
    contract_to_literal,
    token_str,
)
from .equilibrium import Certificate, Violation, relevant_profiles, verify
from .game import Game, GameError, format_fraction, game_from_dict, game_to_dict, parse_fraction
from .play import Belief, BeliefPoint, Candidate, StrategyError, TableCandidate, allocation_labels

FORMAT_VERSION = 1
DEFAULT_TABLE_LIMIT = 20000  # relevant profiles


class FormatError(ValueError):
    """A file does not follow the certificate or scenario format."""


# -- spaces ---------------------------------------------------------------------------


def space_to_dict(space: ContractSpace | None, game: Game) -> dict | None:
    if space is None:
        return None
    if isinstance(space, MenuSpace):
        return {"tag": "P"}
    if isinstance(space, RecSpace):
        return {"tag": "R", "r_cap": space.cap}
    if isinstance(space, FullRecStarSpace):
        return {"tag": "F*"}
    if isinstance(space, FullRecSpace):
        return {"tag": "F"}
    if isinstance(space, GeneralSpace):
        return {"tag": "A", "k": space.k, "names": list(space.names), "delegated": space.delegated}
    if isinstance(space, ConstantsSpace):
        return {"tag": "const"}
    if isinstance(space, UnionSpace):
        return {"tag": "union", "label": space.tag, "parts": [space_to_dict(p, game) for p in space.parts]}
    if isinstance(space, ExplicitSpace):
        return {
            "tag": "explicit",
            "label": space.tag,
            "contracts": [[contract_to_literal(c, game.actions[j]) for c in cs] for j, cs in enumerate(space.contracts)],
        }
    raise FormatError(f"cannot describe space {space.label()}")


def space_from_dict(data: Mapping | None, game: Game) -> ContractSpace | None:
    if data is None:
        return None
    n = [game.n_actions(j) for j in range(game.n_principals)]
    tag = data.get("tag")
    if tag == "P":
        return MenuSpace(n)
    if tag == "R":
        return RecSpace(n, data.get("r_cap"))
    if tag == "F":
        return FullRecSpace(n)
    if tag == "F*":
        return FullRecStarSpace(n)
    if tag == "A":
        return GeneralSpace(n, int(data["k"]), data.get("names"), bool(data.get("delegated", False)))
    if tag == "const":
        return ConstantsSpace(n)
    if tag == "union":
        return UnionSpace([space_from_dict(p, game) for p in data["parts"]], data.get("label"))
    if tag == "explicit":
        contracts = [
            [contract_from_literal(j, lit, game.actions[j]) for lit in lits] for j, lits in enumerate(data["contracts"])
        ]
        return ExplicitSpace(n, contracts, data.get("label", "explicit"))
    raise FormatError(f"unknown space descriptor {data!r}")


# -- tabulation -----------------------------------------------------------------------


class _Profiles:
    """Profile ids in order of first appearance."""

    def __init__(self) -> None:
        self.ids: dict[tuple, str] = {}
        self.order: list[tuple] = []

    def id(self, profile: tuple) -> str:
        pid = self.ids.get(profile)
        if pid is None:
            pid = f"p{len(self.order)}"
            self.ids[profile] = pid
            self.order.append(profile)
        return pid


def tabulate(
    game: Game,
    cand: Candidate,
    dev_space: ContractSpace | None,
    limit: int | None = DEFAULT_TABLE_LIMIT,
) -> TableCandidate:
    """Explicit tables of ``cand`` on everything the verifier evaluates."""
    J, T = game.n_principals, game.n_types
    agent: dict = {}
    actions: dict = {}
    beliefs: dict = {}
    pending: list[tuple] = []
    pub_ann = game.protocol.public_announcement
    pub_com = game.protocol.public_communication

    def key(k: int, profile: tuple, m: tuple) -> tuple:
        return (k, profile if pub_ann else profile[k], m if pub_com else m[k])

    origins: dict = {}

    def record_actions(profile: tuple, m: tuple) -> None:
        for k in range(J):
            kk = key(k, profile, m)
            if kk not in actions:
                actions[kk] = cand.action(*kk)
                origins[kk] = profile

    count = 0
    for profile, _ in relevant_profiles(tuple(cand.profile), dev_space):
        count += 1
        if limit is not None and count > limit:
            raise FormatError(f"more than {limit} relevant profiles; raise the table limit to write this certificate")
        for theta in range(T):
            agent[(profile, theta)] = tuple(cand.message(profile, theta))
        rows = _rows(profile)
        for m in rows:
            record_actions(profile, m)
            for k in range(J):
                kk = key(k, profile, m)
                if kk in beliefs:
                    continue
                try:
                    b = cand.belief(*kk)
                except StrategyError:
                    b = None
                if b is not None:
                    beliefs[kk] = b
                    pending.extend((pt.profile, pt.messages) for pt in b.points)
    for profile, m in pending:
        try:
            record_actions(profile, m)
        except StrategyError:
            pass
    return TableCandidate(tuple(cand.profile), game, agent, actions, beliefs, origins=origins)


def _rows(profile: tuple) -> list[tuple]:
    return list(itertools.product(*(c.alphabet for c in profile)))


# -- literals -------------------------------------------------------------------------


def _tok(c: Any, tok: Any, game: Game) -> str:
    return token_str(tok, game.actions[c.owner])


def _parse_tok(c: Any, text: str, game: Game) -> Any:
    for tok in c.alphabet:
        if token_str(tok, game.actions[c.owner]) == text:
            return tok
    raise FormatError(f"message {text!r} is not in the alphabet of {contract_str(c, game.actions[c.owner])}")


def _type_label(game: Game, theta: int) -> Any:
    return game.types[theta]


def candidate_to_dict(game: Game, table: TableCandidate) -> dict:
    """Profiles plus agent, action and belief literals."""
    ids = _Profiles()
    on = tuple(table.profile)
    ids.id(on)
    pub_com = game.protocol.public_communication

    def msgs(profile: tuple, m: tuple) -> list:
        return [_tok(c, t, game) for c, t in zip(profile, m)]

    def observed(k: int, profile: tuple, beta: Any) -> list:
        if pub_com:
            return msgs(profile, beta)
        return [_tok(profile[k], beta, game)]

    agent = []
    for (profile, theta), m in table.agent.items():
        agent.append({"profile": ids.id(profile), "type": _type_label(game, theta), "messages": msgs(profile, m)})

    def obs_profile(k: int, alpha: Any, beta: Any) -> tuple:
        if game.protocol.public_announcement:
            return tuple(alpha)
        origin = table.origins.get((k, alpha, beta))
        if origin is not None:
            return origin
        if pub_com:
            raise FormatError("an observation without an origin profile cannot be written")
        return on[:k] + (alpha,) + on[k + 1 :]

    actions = []
    for (k, alpha, beta), a in table.actions.items():
        profile = obs_profile(k, alpha, beta)
        actions.append(
            {
                "principal": game.principals[k],
                "profile": ids.id(profile),
                "observed": observed(k, profile, beta),
                "action": game.actions[k][a],
            }
        )
    beliefs = []
    for (k, alpha, beta), b in table.beliefs.items():
        profile = obs_profile(k, alpha, beta)
        beliefs.append(
            {
                "principal": game.principals[k],
                "profile": ids.id(profile),
                "observed": observed(k, profile, beta),
                "points": [
                    {
                        "prob": format_fraction(pt.prob),
                        "profile": ids.id(tuple(pt.profile)),
                        "messages": msgs(tuple(pt.profile), tuple(pt.messages)),
                        "type": _type_label(game, pt.theta),
                    }
                    for pt in b.points
                ],
            }
        )
    profiles = [
        {"id": ids.ids[p], "contracts": [contract_to_literal(c, game.actions[j]) for j, c in enumerate(p)]}
        for p in ids.order
    ]
    return {"profiles": profiles, "agent": agent, "actions": actions, "beliefs": beliefs}


def candidate_from_dict(game: Game, data: Mapping) -> TableCandidate:
    try:
        profiles: dict[str, tuple] = {}
        for entry in data["profiles"]:
            lits = entry["contracts"]
            if len(lits) != game.n_principals:
                raise FormatError(f"profile {entry['id']} needs one contract per principal")
            profiles[entry["id"]] = tuple(contract_from_literal(j, lit, game.actions[j]) for j, lit in enumerate(lits))
        if not profiles:
            raise FormatError("no profiles")
        on = profiles[data["profiles"][0]["id"]]

        def prof(pid: str) -> tuple:
            if pid not in profiles:
                raise FormatError(f"unknown profile id {pid!r}")
            return profiles[pid]

        def msgs(profile: tuple, texts: Sequence[str]) -> tuple:
            if len(texts) != len(profile):
                raise FormatError(f"expected {len(profile)} messages, got {texts!r}")
            return tuple(_parse_tok(c, t, game) for c, t in zip(profile, texts))

        pub_ann = game.protocol.public_announcement
        pub_com = game.protocol.public_communication

        def obs_key(entry: Mapping) -> tuple:
            k = game.principal_index(entry["principal"])
            profile = prof(entry["profile"])
            alpha = profile if pub_ann else profile[k]
            texts = entry["observed"]
            beta = msgs(profile, texts) if pub_com else _parse_tok(profile[k], _single(texts), game)
            return (k, alpha, beta)

        agent = {}
        for entry in data.get("agent", []):
            profile = prof(entry["profile"])
            agent[(profile, game.type_index(entry["type"]))] = msgs(profile, entry["messages"])
        actions = {}
        for entry in data.get("actions", []):
            k, alpha, beta = obs_key(entry)
            actions[(k, alpha, beta)] = game.action_index(k, entry["action"])
        beliefs = {}
        for entry in data.get("beliefs", []):
            key = obs_key(entry)
            points = []
            for pt in entry["points"]:
                profile = prof(pt["profile"])
                points.append(
                    BeliefPoint(
                        parse_fraction(pt["prob"]), profile, msgs(profile, pt["messages"]), game.type_index(pt["type"])
                    )
                )
            beliefs[key] = Belief(tuple(points))
    except (KeyError, TypeError, ContractError, GameError) as exc:
        raise FormatError(f"malformed candidate tables: {exc}") from exc
    return TableCandidate(on, game, agent, actions, beliefs)


def _single(texts: Any) -> str:
    if isinstance(texts, str):
        return texts
    if len(texts) != 1:
        raise FormatError(f"expected one observed message, got {texts!r}")
    return texts[0]


# -- certificates ---------------------------------------------------------------------


def _jsonable(value: Any) -> Any:
    if isinstance(value, Fraction):
        return format_fraction(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


def violation_to_dict(game: Game, v: Violation) -> dict:
    out = {"condition": v.condition, "who": v.who, "gap": format_fraction(v.gap), "detail": _jsonable(v.detail)}
    if v.profile is not None:
        out["profile"] = [contract_str(c, game.actions[c.owner]) for c in v.profile]
    return out


def verdict_to_dict(cert: Certificate) -> dict:
    game = cert.game
    return {
        "verified": cert.verified,
        "allocation": None if cert.allocation is None else allocation_labels(game, cert.allocation),
        "on_space": cert.on_space,
        "dev_space": cert.dev_space,
        "caps": cert.caps,
        "violation_count": cert.violation_count,
        "violations": [violation_to_dict(game, v) for v in cert.violations],
        "checks": cert.checks,
    }


def certificate_to_dict(cert: Certificate, limit: int | None = DEFAULT_TABLE_LIMIT) -> dict:
    """Certificate with full tables; the deviation space must be enumerable."""
    game = cert.game
    on_space, dev_space = cert.spaces
    table = tabulate(game, cert.candidate, dev_space, limit)
    return {
        "format": FORMAT_VERSION,
        "kind": "certificate",
        "game": game_to_dict(game),
        "spaces": {"on": space_to_dict(on_space, game), "dev": space_to_dict(dev_space, game)},
        **candidate_to_dict(game, table),
        "verdict": verdict_to_dict(cert),
    }


def dumps_certificate(cert: Certificate, limit: int | None = DEFAULT_TABLE_LIMIT) -> str:
    return json.dumps(certificate_to_dict(cert, limit), indent=1, ensure_ascii=False) + "\n"


def loads_document(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise FormatError("top level must be an object")
    return data


def load_certificate(data: Mapping) -> tuple[Game, TableCandidate, ContractSpace | None, ContractSpace | None]:
    """Game, tabulated candidate and spaces from a certificate document."""
    if "game" not in data:
        raise FormatError("certificate has no 'game' field")
    try:
        game = game_from_dict(data["game"])
    except GameError as exc:
        raise FormatError(f"field 'game': {exc}") from exc
    cand = candidate_from_dict(game, data)
    spaces = data.get("spaces") or {}
    try:
        on_space = space_from_dict(spaces.get("on"), game)
        dev_space = space_from_dict(spaces.get("dev"), game)
    except (KeyError, ContractError) as exc:
        raise FormatError(f"field 'spaces': {exc}") from exc
    return game, cand, on_space, dev_space


def reverify(data: Mapping, jobs: int = 1) -> Certificate:
    """Verify a serialized certificate from its tables alone."""
    game, cand, on_space, dev_space = load_certificate(data)
    if dev_space is None:
        raise FormatError("certificate names no deviation space")
    return verify(game, cand, dev_space, on_space, jobs=jobs)


def stable_json(records: Iterable[Mapping]) -> str:
    """Line-delimited records with sorted keys."""
    return "".join(json.dumps(_jsonable(r), sort_keys=True, ensure_ascii=False) + "\n" for r in records)
