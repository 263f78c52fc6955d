"""Strategies, beliefs, allocations and Bayes posteriors.

A candidate equilibrium is an object with four parts:

* ``profile``: the on-path contract profile ``c``;
* ``message(profile, theta)``: the agent's message profile;
* ``action(j, alpha, beta)``: principal j's Stage-3 action at the
  observation ``(alpha, beta)``;
* ``belief(j, alpha, beta)``: an explicit belief at that observation, or
  ``None`` to let the verifier use the Bayes posterior (or to signal that the
  action set is a singleton and no belief is needed).

``alpha`` and ``beta`` are the observation keys of :mod:`game`: the full
profile or the own contract, the full message profile or the own message.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .contracts import Contract, Token, members
from .game import Game, GameError, observe_announcement, observe_communication

ContractProfile = tuple  # tuple[Contract, ...]
MessageProfile = tuple  # tuple[Token, ...]


class StrategyError(ValueError):
    """A strategy is undefined or infeasible where it is evaluated."""


@dataclass(frozen=True)
class BeliefPoint:
    """One support point: opponents' contracts and messages plus a type.

    ``profile`` and ``messages`` are full profiles. The viewer's own
    components must match what the viewer observed.
    """

    prob: Fraction
    profile: ContractProfile
    messages: MessageProfile
    theta: int


@dataclass(frozen=True)
class Belief:
    points: tuple[BeliefPoint, ...]

    @classmethod
    def point(cls, profile: ContractProfile, messages: MessageProfile, theta: int) -> Belief:
        return cls((BeliefPoint(Fraction(1), tuple(profile), tuple(messages), theta),))

    @classmethod
    def mixture(cls, entries: Iterable[tuple[Any, ContractProfile, MessageProfile, int]]) -> Belief:
        return cls(tuple(BeliefPoint(Fraction(p), tuple(c), tuple(m), t) for p, c, m, t in entries))

    def total(self) -> Fraction:
        return sum((p.prob for p in self.points), Fraction(0))


class Candidate:
    """Interface of a candidate ``(c, s, t, b)``; see the module docstring."""

    profile: ContractProfile

    def message(self, profile: ContractProfile, theta: int) -> MessageProfile:
        raise NotImplementedError

    def action(self, j: int, alpha: Any, beta: Any) -> int:
        raise NotImplementedError

    def belief(self, j: int, alpha: Any, beta: Any) -> Belief | None:
        return None

    def describe(self) -> dict:
        return {}


# -- observation helpers ------------------------------------------------------------


def keys_for(game: Game, profile: ContractProfile, messages: MessageProfile) -> list[tuple[Any, Any]]:
    """Every principal's ``(alpha, beta)`` at a contract and message profile."""
    return [
        (observe_announcement(game, k, profile), observe_communication(game, k, messages))
        for k in range(game.n_principals)
    ]


def own_contract(game: Game, j: int, alpha: Any) -> Contract:
    return alpha[j] if game.protocol.public_announcement else alpha


def own_message(game: Game, j: int, beta: Any) -> Token:
    return beta[j] if game.protocol.public_communication else beta


def feasible_mask(game: Game, j: int, alpha: Any, beta: Any) -> int:
    return own_contract(game, j, alpha)(own_message(game, j, beta))


def outcome(game: Game, cand: Candidate, profile: ContractProfile, messages: MessageProfile) -> tuple[int, ...]:
    """Stage-3 action profile at (profile, messages); checks feasibility."""
    y = []
    for k, (alpha, beta) in enumerate(keys_for(game, profile, messages)):
        a = cand.action(k, alpha, beta)
        if not (profile[k](messages[k]) >> a) & 1:
            raise StrategyError(
                f"principal {game.principals[k]} plays {game.actions[k][a]!r} outside the image of message {messages[k]!r}"
            )
        y.append(a)
    return tuple(y)


def check_messages(profile: ContractProfile, messages: MessageProfile) -> None:
    for c, m in zip(profile, messages):
        if not c.accepts(m):
            raise StrategyError(f"message {m!r} is not in the alphabet of principal {c.owner}'s contract")


def induced_allocation(game: Game, cand: Candidate) -> tuple[tuple[int, ...], ...]:
    """z(theta) = actions at the on-path observations, for each type."""
    c = cand.profile
    z = []
    for theta in range(game.n_types):
        m = cand.message(c, theta)
        check_messages(c, m)
        z.append(outcome(game, cand, c, m))
    return tuple(z)


def allocation_labels(game: Game, z: Sequence[tuple[int, ...]]) -> dict:
    return {str(game.types[t]): list(game.profile_labels(y)) for t, y in enumerate(z)}


def parse_allocation(game: Game, spec: Any) -> tuple[tuple[int, ...], ...]:
    """Allocation from ``{type: [actions]}`` or a list ordered by type."""
    if isinstance(spec, Mapping):
        rows = [None] * game.n_types
        for t, y in spec.items():
            rows[game.type_index(t)] = game.profile_index(y)
        if any(r is None for r in rows):
            raise GameError("allocation must cover every type")
        return tuple(rows)
    spec = list(spec)
    if len(spec) == game.n_principals and not isinstance(spec[0], (list, tuple)):
        spec = [spec] * game.n_types
    if len(spec) != game.n_types:
        raise GameError("allocation must cover every type")
    return tuple(game.profile_index(y) for y in spec)


# -- Bayes rule -----------------------------------------------------------------------

CONFIRMED_DEVIATION = "confirmed-deviation"


def bayes_posterior(
    game: Game,
    cand: Candidate,
    viewer: int,
    deviation: Contract | None,
    beta: Any,
) -> list[tuple[Fraction, MessageProfile, int]] | str:
    """Posterior after the viewer's own (possibly trivial) deviation.

    The anchor profile replaces the viewer's on-path contract by
    ``deviation``. If some type sends messages the viewer would observe as
    ``beta``, returns ``[(prob, messages, theta), ...]`` over those types;
    otherwise returns ``CONFIRMED_DEVIATION``.
    """
    anchor = list(cand.profile)
    if deviation is not None:
        anchor[viewer] = deviation
    anchor = tuple(anchor)
    hits = []
    for theta in range(game.n_types):
        m = cand.message(anchor, theta)
        if observe_communication(game, viewer, m) == beta:
            hits.append((game.prior[theta], m, theta))
    if not hits:
        return CONFIRMED_DEVIATION
    total = sum(p for p, _, _ in hits)
    return [(p / total, m, t) for p, m, t in hits]


def conditional_principal_payoff(
    game: Game,
    j: int,
    cand: Candidate,
    belief: Belief,
    own_action: int | None = None,
) -> Fraction:
    """Expected v_j under the belief, opponents acting through the candidate.

    ``own_action`` overrides j's action at every support point (to price
    alternatives); otherwise j's own rule is used at each point.
    """
    total = Fraction(0)
    for pt in belief.points:
        y = list(outcome(game, cand, pt.profile, pt.messages)) if own_action is None else [
            cand.action(k, *keys_for(game, pt.profile, pt.messages)[k]) if k != j else own_action
            for k in range(game.n_principals)
        ]
        total += pt.prob * game.payoff(j, tuple(y), pt.theta)
    return total


# -- table-backed candidates ----------------------------------------------------------


@dataclass
class TableCandidate(Candidate):
    """Candidate stored as explicit tables with optional defaults.

    ``agent`` maps ``(profile, theta)`` to message profiles; ``actions`` maps
    ``(j, alpha, beta)`` to actions; ``beliefs`` maps the same keys to
    beliefs. A missing action for a singleton feasible set is filled in.
    """

    profile: ContractProfile
    game: Game
    agent: dict = field(default_factory=dict)
    actions: dict = field(default_factory=dict)
    beliefs: dict = field(default_factory=dict)
    fallback: Candidate | None = None
    origins: dict = field(default_factory=dict)  # observation key -> a profile where it occurs

    def message(self, profile: ContractProfile, theta: int) -> MessageProfile:
        key = (tuple(profile), theta)
        if key in self.agent:
            return self.agent[key]
        if self.fallback is not None:
            return self.fallback.message(profile, theta)
        raise StrategyError(f"agent strategy undefined at profile {profile!r}, type {theta}")

    def action(self, j: int, alpha: Any, beta: Any) -> int:
        key = (j, alpha, beta)
        if key in self.actions:
            return self.actions[key]
        if self.fallback is not None:
            return self.fallback.action(j, alpha, beta)
        mask = feasible_mask(self.game, j, alpha, beta)
        ys = members(mask)
        if len(ys) == 1:
            return ys[0]
        raise StrategyError(f"Stage-3 action of principal {j} undefined at an observation")

    def belief(self, j: int, alpha: Any, beta: Any) -> Belief | None:
        key = (j, alpha, beta)
        if key in self.beliefs:
            return self.beliefs[key]
        if self.fallback is not None:
            return self.fallback.belief(j, alpha, beta)
        return None
