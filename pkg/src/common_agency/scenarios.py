"""The four worked games and their hand-built equilibrium candidates."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .constructions import (
    CE_NAMES,
    EX2_NAMES,
    Counterexample,
    Example1PrivatePrivate,
    Example1PublicPrivate,
    Example1PublicPublic,
    Example2,
    MatchingPenniesMenus,
)
from .contracts import GeneralSpace, MenuSpace, menu
from .game import Game, Protocol, make_game
from .play import Candidate


def example1_game(protocol: str = "public-private") -> Game:
    table = {(0, 0): (0, 0), (0, 1): (8, -8), (1, 0): (0, 0), (1, 1): (1, 1)}
    return make_game(
        principals=[1, 2],
        types=["t"],
        prior=None,
        actions=[[0, 1], [0, 1]],
        agent_utility=lambda y, th: table[y][0],
        principal_utility=lambda j, y, th: table[y][j],
        protocol=protocol,
    )


def _ex2_v(y: tuple, theta: int) -> int:
    if y == (theta, theta):
        return 8
    return 1 if (y[0] + y[1]) % 2 == 0 else -1


def example2_game(protocol: str = "public-public") -> Game:
    return make_game(
        principals=[1, 2],
        types=[1, 4],
        prior=None,
        actions=[[1, 2, 3, 4], [1, 2, 3, 4]],
        agent_utility=lambda y, th: 1 if y == (1, 4) else 0,
        principal_utility=lambda j, y, th: _ex2_v(y, th),
        protocol=protocol,
    )


def _ce_v(y: tuple, theta: int) -> int:
    y1, y2 = y
    if y == (theta, theta):
        return 8
    if theta == 1 and y in ((3, 1), (4, 1)):
        return 9
    if theta == 4 and y in ((4, 1), (4, 2)):
        return 9
    low = {1, 2}
    if (y1 in low) == (y2 in low):
        return y1 - y2 + 4
    return y2 - y1


def counterexample_game(protocol: str = "private-public") -> Game:
    return make_game(
        principals=[1, 2],
        types=[1, 4],
        prior=None,
        actions=[[1, 2, 3, 4], [1, 2, 3, 4]],
        agent_utility=lambda y, th: 1 if y == (1, 4) else 0,
        principal_utility=lambda j, y, th: _ce_v(y, th),
        protocol=protocol,
    )


def matching_pennies_game(protocol: str = "private-private") -> Game:
    sign = {("H", "H"): 1, ("T", "T"): 1, ("H", "T"): -1, ("T", "H"): -1}
    return make_game(
        principals=[1, 2],
        types=["t"],
        prior=None,
        actions=[["H", "T"], ["H", "T"]],
        agent_utility=lambda y, th: 0,
        principal_utility=lambda j, y, th: sign[y] if j == 0 else -sign[y],
        protocol=protocol,
    )


@dataclass
class Expectation:
    """One machine-checkable claim about a scenario."""

    name: str
    kind: str  # "verified" | "violation" | "found" | "notfound"
    protocol: str
    on: str
    dev: str
    target: dict | None = None
    k: int | None = None
    candidate: str | None = None
    detail: dict = field(default_factory=dict)
    r_cap: int | None = None
    via: str = "search"  # "search" | "canonicalize" for found/notfound claims
    extra: bool = False  # equilibrium kept for replication, outside the headline checks


@dataclass
class Scenario:
    id: str
    title: str
    make_game: Callable[[str], Game]
    protocols: tuple[str, ...]
    k: int
    names: tuple[str, ...] | None
    candidates: dict[str, Callable[[Game], Candidate]]
    targets: dict[str, dict]
    expectations: list[Expectation]

    def game(self, protocol: str | None = None) -> Game:
        return self.make_game(protocol or self.protocols[0])

    def space(self, game: Game, k: int | None = None) -> GeneralSpace:
        k = self.k if k is None else k
        return GeneralSpace([game.n_actions(j) for j in range(game.n_principals)], k, self.names)

    def candidate(self, name: str, game: Game, k: int | None = None) -> Candidate:
        return self.candidates[name](game, self.space(game, k))


def _ex1_candidate(game: Game, space: GeneralSpace) -> Candidate:
    if not game.protocol.public_announcement:
        return Example1PrivatePrivate(game, space)
    if game.protocol.public_communication:
        return Example1PublicPublic(game, space)
    return Example1PublicPrivate(game, space)


def _mp_candidate(game: Game, space: GeneralSpace) -> Candidate:
    return MatchingPenniesMenus(game, (menu(0, [0, 1]), menu(1, [0, 1])))


def registry() -> list[Scenario]:
    return [
        Scenario(
            id="example1",
            title="Non-delegated contracts beat menus with one type",
            make_game=example1_game,
            protocols=("public-private", "public-public", "private-private"),
            k=1,
            names=None,
            candidates={"construction": _ex1_candidate},
            targets={"z": {"t": [1, 1]}},
            expectations=[
                Expectation("menus cannot implement (1,1)", "notfound", "public-private", "P", "P", {"t": [1, 1]}),
                Expectation("construction, public-private", "verified", "public-private", "A", "A", {"t": [1, 1]}, k=3, candidate="construction"),
                Expectation("construction, public-public", "verified", "public-public", "A", "A", {"t": [1, 1]}, k=3, candidate="construction"),
                Expectation(
                    "(1,0) construction, private-private",
                    "verified",
                    "private-private",
                    "A",
                    "A",
                    {"t": [1, 0]},
                    k=3,
                    candidate="construction",
                    extra=True,
                ),
            ],
        ),
        Scenario(
            id="example2",
            title="Public communication needed to match the state",
            make_game=example2_game,
            protocols=("public-public", "public-private"),
            k=3,
            names=EX2_NAMES,
            candidates={"construction": lambda g, s: Example2(g, s)},
            targets={"z**": {"1": [1, 1], "4": [4, 4]}},
            expectations=[
                Expectation("menus cannot implement z**", "notfound", "public-public", "P", "P", {"1": [1, 1], "4": [4, 4]}),
                Expectation("c** verifies, public-public", "verified", "public-public", "A", "A", {"1": [1, 1], "4": [4, 4]}, candidate="construction"),
                Expectation(
                    "c** fails under private communication",
                    "violation",
                    "public-private",
                    "A",
                    "A",
                    {"1": [1, 1], "4": [4, 4]},
                    candidate="construction",
                    detail={"condition": "ii", "better": ["m1", "m4"], "gap": "1"},
                ),
            ],
        ),
        Scenario(
            id="counterexample61",
            title="Full-recommendation deviations are not enough under private announcement",
            make_game=counterexample_game,
            protocols=("private-public",),
            k=3,
            names=CE_NAMES,
            candidates={"construction": lambda g, s: Counterexample(g, s)},
            targets={"z*": {"1": [1, 1], "4": [4, 4]}},
            expectations=[
                Expectation("z* not implementable in [R, F]", "notfound", "private-public", "R", "F", {"1": [1, 1], "4": [4, 4]}, r_cap=2),
                Expectation(
                    "z* implementable in [R, F*]",
                    "found",
                    "private-public",
                    "R",
                    "F*",
                    {"1": [1, 1], "4": [4, 4]},
                    k=3,
                    candidate="construction",
                    via="canonicalize",
                ),
                Expectation("c* verifies in [A(3), A(3)]", "verified", "private-public", "A", "A", {"1": [1, 1], "4": [4, 4]}, k=3, candidate="construction"),
            ],
        ),
        Scenario(
            id="matching_pennies",
            title="Menus implement an outcome that non-delegated contracts rule out",
            make_game=matching_pennies_game,
            protocols=("private-private",),
            k=2,
            names=None,
            candidates={"menus": _mp_candidate},
            targets={"HH": {"t": ["H", "H"]}},
            expectations=[
                Expectation("(H,H) found with menus", "found", "private-private", "P", "P", {"t": ["H", "H"]}),
                Expectation("menu construction verifies", "verified", "private-private", "P", "P", {"t": ["H", "H"]}, candidate="menus"),
                Expectation("(H,H) refuted in [A(2), A(2)]", "notfound", "private-private", "A", "A", {"t": ["H", "H"]}, k=2, detail={"deviator": 2}),
            ],
        ),
    ]


def get_scenario(sid: str) -> Scenario:
    for s in registry():
        if s.id == sid:
            return s
    raise KeyError(f"unknown scenario {sid!r}; known: {', '.join(s.id for s in registry())}")


def menu_space(game: Game) -> MenuSpace:
    return MenuSpace([game.n_actions(j) for j in range(game.n_principals)])


__all__ = [
    "Expectation",
    "Scenario",
    "registry",
    "get_scenario",
    "example1_game",
    "example2_game",
    "counterexample_game",
    "matching_pennies_game",
    "Fraction",
    "Protocol",
]
