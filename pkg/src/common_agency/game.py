"""Finite common-agency games.

A game has an ordered set of principals, a finite type set with a prior,
one finite action set per principal, and exact rational utility tables for
the agent and each principal. The announcement/communication protocol pair
is attached to the game because every downstream check depends on it.

Actions, types and principals are handled internally as dense integer
indices. Labels are kept only for reports and files.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

Profile = tuple  # action profile as a tuple of action indices


class GameError(ValueError):
    """Structural problem with a game or an input referring to one."""


class Visibility(Enum):
    PUBLIC = "public"
    PRIVATE = "private"


@dataclass(frozen=True)
class Protocol:
    """Announcement and communication visibility."""

    announcement: Visibility
    communication: Visibility

    @classmethod
    def parse(cls, text: str) -> Protocol:
        """Parse ``"public-private"`` style text (announcement first)."""
        parts = text.replace("_", "-").replace(",", "-").lower().split("-")
        if len(parts) != 2:
            raise GameError(f"protocol must look like 'public-private', got {text!r}")
        try:
            return cls(Visibility(parts[0]), Visibility(parts[1]))
        except ValueError as exc:
            raise GameError(f"unknown protocol {text!r}") from exc

    @classmethod
    def all(cls) -> list[Protocol]:
        return [cls(a, c) for a in Visibility for c in Visibility]

    @property
    def public_announcement(self) -> bool:
        return self.announcement is Visibility.PUBLIC

    @property
    def public_communication(self) -> bool:
        return self.communication is Visibility.PUBLIC

    def __str__(self) -> str:
        return f"{self.announcement.value}-{self.communication.value}"


def parse_fraction(value: Any) -> Fraction:
    if isinstance(value, bool):
        raise GameError(f"not a rational: {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise GameError(f"not a rational: {value!r}") from exc
    raise GameError(f"not a rational: {value!r}")


def format_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True, eq=False)
class Game:
    """A finite common-agency game with exact rational payoffs.

    ``agent_utility[theta]`` and ``principal_utility[j][theta]`` map action
    profiles (tuples of action indices) to rationals.
    """

    principals: tuple
    types: tuple
    prior: tuple[Fraction, ...]
    actions: tuple[tuple, ...]
    agent_utility: tuple[dict[Profile, Fraction], ...]
    principal_utility: tuple[tuple[dict[Profile, Fraction], ...], ...]
    protocol: Protocol = Protocol(Visibility.PUBLIC, Visibility.PUBLIC)
    _scale: int = field(init=False, repr=False)
    _prior_weight: tuple[int, ...] = field(init=False, repr=False)
    _u_int: tuple = field(init=False, repr=False)
    _v_int: tuple = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.principals) < 2:
            raise GameError("a common-agency game needs at least two principals")
        if len(self.actions) != len(self.principals):
            raise GameError("one action set per principal is required")
        if not self.types:
            raise GameError("type set is empty")
        if len(self.prior) != len(self.types):
            raise GameError("prior must assign a probability to every type")
        if any(p <= 0 for p in self.prior):
            raise GameError("prior must have full support")
        if sum(self.prior) != 1:
            raise GameError(f"prior sums to {sum(self.prior)}, not 1")
        for j, ys in enumerate(self.actions):
            if not ys:
                raise GameError(f"principal {self.principals[j]} has no actions")
            if len(set(ys)) != len(ys):
                raise GameError(f"duplicate action labels for principal {self.principals[j]}")
        if len(set(self.types)) != len(self.types):
            raise GameError("duplicate type labels")
        profiles = list(self.profiles())
        tables = [self.agent_utility] + list(self.principal_utility)
        if len(self.principal_utility) != len(self.principals):
            raise GameError("one utility table per principal is required")
        for table in tables:
            if len(table) != len(self.types):
                raise GameError("utility tables must cover every type")
            for per_type in table:
                missing = [y for y in profiles if y not in per_type]
                if missing or len(per_type) != len(profiles):
                    raise GameError(f"utility table not total over Y (missing {missing[:3]})")
        denominators = [v.denominator for table in tables for per_type in table for v in per_type.values()]
        scale = math.lcm(*denominators) if denominators else 1
        object.__setattr__(self, "_scale", scale)
        prior_lcm = math.lcm(*(p.denominator for p in self.prior))
        object.__setattr__(self, "_prior_weight", tuple(int(p * prior_lcm) for p in self.prior))
        object.__setattr__(
            self,
            "_u_int",
            tuple({y: int(v * scale) for y, v in per_type.items()} for per_type in self.agent_utility),
        )
        object.__setattr__(
            self,
            "_v_int",
            tuple(
                tuple({y: int(v * scale) for y, v in per_type.items()} for per_type in table)
                for table in self.principal_utility
            ),
        )

    # -- shape ---------------------------------------------------------------

    @property
    def n_principals(self) -> int:
        return len(self.principals)

    @property
    def n_types(self) -> int:
        return len(self.types)

    def n_actions(self, j: int) -> int:
        return len(self.actions[j])

    def profiles(self) -> Iterable[Profile]:
        return itertools.product(*(range(len(ys)) for ys in self.actions))

    def with_protocol(self, protocol: Protocol | str) -> Game:
        if isinstance(protocol, str):
            protocol = Protocol.parse(protocol)
        return Game(
            self.principals,
            self.types,
            self.prior,
            self.actions,
            self.agent_utility,
            self.principal_utility,
            protocol,
        )

    # -- label lookups -------------------------------------------------------

    def principal_index(self, label: Any) -> int:
        return _index_of(self.principals, label, "principal")

    def type_index(self, label: Any) -> int:
        return _index_of(self.types, label, "type")

    def action_index(self, j: int, label: Any) -> int:
        return _index_of(self.actions[j], label, f"action of principal {self.principals[j]}")

    def profile_index(self, labels: Sequence) -> Profile:
        if len(labels) != self.n_principals:
            raise GameError(f"action profile {labels!r} has wrong length")
        return tuple(self.action_index(j, a) for j, a in enumerate(labels))

    def profile_labels(self, y: Profile) -> tuple:
        return tuple(self.actions[j][a] for j, a in enumerate(y))

    # -- payoffs -------------------------------------------------------------

    def payoff(self, who: str | int, y: Profile, theta: int) -> Fraction:
        """Exact utility of ``who`` ("agent" or a principal index) at (y, theta)."""
        self._check_profile(y, theta)
        if who == "agent":
            return self.agent_utility[theta][tuple(y)]
        if isinstance(who, int) and 0 <= who < self.n_principals:
            return self.principal_utility[who][theta][tuple(y)]
        raise GameError(f"unknown player {who!r}")

    def expected_principal_payoff(self, j: int, z: Sequence[Profile]) -> Fraction:
        """Ex-ante payoff of principal j from allocation z (one profile per type)."""
        if len(z) != self.n_types:
            raise GameError("allocation must assign a profile to every type")
        return sum(
            (self.prior[t] * self.payoff(j, z[t], t) for t in range(self.n_types)),
            Fraction(0),
        )

    def _check_profile(self, y: Profile, theta: int) -> None:
        if not 0 <= theta < self.n_types:
            raise GameError(f"type index {theta} out of range")
        if len(y) != self.n_principals or any(
            not 0 <= a < len(ys) for a, ys in zip(y, self.actions)
        ):
            raise GameError(f"action profile {y!r} out of range")

    # Scaled integer views used by the hot loops. Multiplying every utility by
    # the same positive constant and the prior by another preserves every
    # comparison the equilibrium checks make.

    @property
    def scale(self) -> int:
        return self._scale

    @property
    def prior_weight(self) -> tuple[int, ...]:
        return self._prior_weight

    def u_int(self, y: Profile, theta: int) -> int:
        return self._u_int[theta][y]

    def v_int(self, j: int, y: Profile, theta: int) -> int:
        return self._v_int[j][theta][y]

    # -- equality / hashing ----------------------------------------------------

    def _key(self) -> tuple:
        key = self.__dict__.get("_cached_key")
        if key is None:
            key = (
                self.principals,
                self.types,
                self.prior,
                self.actions,
                tuple(tuple(sorted(d.items())) for d in self.agent_utility),
                tuple(tuple(tuple(sorted(d.items())) for d in table) for table in self.principal_utility),
                self.protocol,
            )
            object.__setattr__(self, "_cached_key", key)
            object.__setattr__(self, "_cached_hash", hash(key))
        return key

    def __eq__(self, other: object) -> bool:
        return self is other or (isinstance(other, Game) and self._key() == other._key())

    def __hash__(self) -> int:
        self._key()
        return self.__dict__["_cached_hash"]


def _index_of(labels: Sequence, label: Any, what: str) -> int:
    for i, existing in enumerate(labels):
        if existing == label or str(existing) == str(label):
            return i
    raise GameError(f"unknown {what}: {label!r}")


def make_game(
    principals: Sequence,
    types: Sequence,
    prior: Sequence | Mapping | None,
    actions: Sequence[Sequence],
    agent_utility: Callable[[tuple, Any], Any],
    principal_utility: Callable[[int, tuple, Any], Any],
    protocol: Protocol | str = "public-public",
) -> Game:
    """Build a game from label-level utility callables.

    ``agent_utility(y_labels, theta_label)`` and
    ``principal_utility(j, y_labels, theta_label)`` receive action labels.
    A missing prior means uniform.
    """
    types = tuple(types)
    if prior is None:
        prior_t = tuple(Fraction(1, len(types)) for _ in types)
    elif isinstance(prior, Mapping):
        prior_t = tuple(parse_fraction(prior[t]) for t in types)
    else:
        prior_t = tuple(parse_fraction(p) for p in prior)
    actions_t = tuple(tuple(ys) for ys in actions)
    profiles = list(itertools.product(*(range(len(ys)) for ys in actions_t)))

    def labels(y: tuple) -> tuple:
        return tuple(actions_t[j][a] for j, a in enumerate(y))

    u = tuple({y: parse_fraction(agent_utility(labels(y), th)) for y in profiles} for th in types)
    v = tuple(
        tuple({y: parse_fraction(principal_utility(j, labels(y), th)) for y in profiles} for th in types)
        for j in range(len(actions_t))
    )
    if isinstance(protocol, str):
        protocol = Protocol.parse(protocol)
    return Game(tuple(principals), types, prior_t, actions_t, u, v, protocol)


# -- observations ----------------------------------------------------------------


def observe_announcement(game: Game, viewer: int, contracts: Sequence) -> Any:
    """Key of the viewer's announcement information set.

    Public announcement reveals the whole profile; private reveals only the
    viewer's own contract. Keys compare equal iff the information sets do.
    """
    if len(contracts) != game.n_principals or any(c is None for c in contracts):
        raise GameError("contract profile is incomplete")
    if game.protocol.public_announcement:
        return tuple(contracts)
    return contracts[viewer]


def observe_communication(game: Game, viewer: int, messages: Sequence) -> Any:
    """Key of the viewer's communication information set."""
    if len(messages) != game.n_principals or any(m is None for m in messages):
        raise GameError("message profile is incomplete")
    if game.protocol.public_communication:
        return tuple(messages)
    return messages[viewer]


# -- file format ---------------------------------------------------------------


def game_to_dict(game: Game) -> dict:
    """Serializable form. Utilities are listed as ``[y-labels, type, value]`` rows."""

    def rows(table: tuple[dict[Profile, Fraction], ...]) -> list:
        out = []
        for t, per_type in enumerate(table):
            for y in sorted(per_type):
                out.append([list(game.profile_labels(y)), game.types[t], format_fraction(per_type[y])])
        return out

    return {
        "principals": list(game.principals),
        "types": list(game.types),
        "prior": {str(t): format_fraction(p) for t, p in zip(game.types, game.prior)},
        "actions": [list(ys) for ys in game.actions],
        "agent_utility": rows(game.agent_utility),
        "principal_utility": [rows(table) for table in game.principal_utility],
        "protocol": {
            "announcement": game.protocol.announcement.value,
            "communication": game.protocol.communication.value,
        },
    }


def game_from_dict(data: Mapping) -> Game:
    required = ["principals", "types", "prior", "actions", "agent_utility", "principal_utility"]
    for key in required:
        if key not in data:
            raise GameError(f"game spec is missing field '{key}'")
    principals = tuple(data["principals"])
    types = tuple(data["types"])
    prior_raw = data["prior"]
    if isinstance(prior_raw, Mapping):
        try:
            prior = tuple(parse_fraction(prior_raw[str(t)]) for t in types)
        except KeyError as exc:
            raise GameError(f"prior has no entry for type {exc}") from exc
    else:
        prior = tuple(parse_fraction(p) for p in prior_raw)
    actions = tuple(tuple(ys) for ys in data["actions"])
    if len(actions) != len(principals):
        raise GameError("field 'actions' needs one list per principal")

    def table(rows: Any, name: str) -> tuple:
        per_type: list[dict] = [dict() for _ in types]
        if not isinstance(rows, list):
            raise GameError(f"field '{name}' must be a list of [actions, type, value] rows")
        for row in rows:
            if not isinstance(row, list) or len(row) != 3:
                raise GameError(f"bad row in '{name}': {row!r}")
            labels, theta, value = row
            try:
                y = tuple(_index_of(actions[j], a, "action") for j, a in enumerate(labels))
            except IndexError as exc:
                raise GameError(f"bad action profile in '{name}': {labels!r}") from exc
            if len(y) != len(actions):
                raise GameError(f"bad action profile in '{name}': {labels!r}")
            per_type[_index_of(types, theta, "type")][y] = parse_fraction(value)
        return tuple(per_type)

    agent = table(data["agent_utility"], "agent_utility")
    if len(data["principal_utility"]) != len(principals):
        raise GameError("field 'principal_utility' needs one table per principal")
    principal = tuple(table(rows, "principal_utility") for rows in data["principal_utility"])
    proto = data.get("protocol", {"announcement": "public", "communication": "public"})
    if isinstance(proto, str):
        protocol = Protocol.parse(proto)
    else:
        try:
            protocol = Protocol(Visibility(proto["announcement"]), Visibility(proto["communication"]))
        except (KeyError, ValueError) as exc:
            raise GameError(f"bad protocol {proto!r}") from exc
    return Game(principals, types, prior, actions, agent, principal, protocol)


def dumps_game(game: Game) -> str:
    return json.dumps(game_to_dict(game), indent=1, ensure_ascii=False) + "\n"


def loads_game(text: str) -> Game:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameError(f"line {exc.lineno}: {exc.msg}") from exc
    return game_from_dict(data)


# -- imperfect commitment -----------------------------------------------------------


@dataclass(frozen=True)
class ImperfectCommitmentSpec:
    """Per principal: contractible part Y1, free part Y2, feasibility phi."""

    contractible: tuple[tuple, ...]
    noncontractible: tuple[tuple, ...]
    feasibility: tuple[dict, ...]

    def __post_init__(self) -> None:
        for j, (y1s, phi) in enumerate(zip(self.contractible, self.feasibility)):
            for y1 in y1s:
                image = phi.get(y1)
                if not image:
                    raise GameError(f"feasibility map of principal {j} has empty image at {y1!r}")
                if not set(image) <= set(self.noncontractible[j]):
                    raise GameError(f"feasibility image of principal {j} leaves Y2 at {y1!r}")

    def feasible_pairs(self, j: int) -> list[tuple]:
        """The combined action set {(y1, y2): y2 in phi_j(y1)}."""
        return [(y1, y2) for y1 in self.contractible[j] for y2 in self.feasibility[j][y1]]


def from_imperfect_commitment(
    spec: ImperfectCommitmentSpec,
    principals: Sequence,
    types: Sequence,
    prior: Sequence | Mapping | None,
    agent_utility: Callable[[tuple, Any], Any],
    principal_utility: Callable[[int, tuple, Any], Any],
    protocol: Protocol | str = "public-public",
) -> tuple[Game, list[list[tuple]]]:
    """Common-agency game whose principal-j actions are the feasible pairs.

    Returns the game plus, per principal, the message hints: message
    ``(y1, y2)`` fixes ``y1`` and recommends ``y2`` from ``phi_j(y1)``.
    """
    actions = [spec.feasible_pairs(j) for j in range(len(principals))]
    game = make_game(principals, types, prior, actions, agent_utility, principal_utility, protocol)
    return game, [list(a) for a in actions]


def reverse_embedding(actions: Sequence) -> ImperfectCommitmentSpec:
    """Embed a plain action set as contractible menus with identity feasibility."""
    ys = tuple(actions)
    menus = tuple(
        frozenset(s)
        for r in range(1, len(ys) + 1)
        for s in itertools.combinations(ys, r)
    )
    return ImperfectCommitmentSpec((menus,), (ys,), ({E: tuple(sorted(E, key=ys.index)) for E in menus},))


def to_nondelegated(actions: Sequence) -> dict:
    """Check the reverse embedding against recommendation messages.

    The pairs (E, y) with y in E must biject with the recommendation
    messages generated for the same action set.
    """
    from .contracts import recommendation_messages

    ys = tuple(actions)
    spec = reverse_embedding(ys)
    pairs = {(frozenset(E), y) for E, y in spec.feasible_pairs(0)}
    rec = {
        (frozenset(ys[i] for i in range(len(ys)) if mask >> i & 1), ys[y])
        for _, mask, y in recommendation_messages(len(ys))
    }
    return {"pairs": len(pairs), "messages": len(rec), "bijective": pairs == rec}
