"""Candidate equilibria built by hand for the registry games.

Each class implements :class:`play.Candidate` with rules that work for any
contract of the general form, so the same object can be queried on
deviation contracts of any alphabet.
"""

from __future__ import annotations

import functools
import itertools
from fractions import Fraction
from typing import Any, Sequence

from .contracts import Contract, GeneralSpace, constant_contract, members, popcount
from .game import Game
from .play import Belief, Candidate, own_contract, own_message


def tok(name: str) -> tuple:
    return ("m", name)


def first_message(c: Contract, name: str) -> tuple:
    t = tok(name)
    return t if c.accepts(t) else c.alphabet[0]


@functools.lru_cache(maxsize=65536)
def _nash_cached(game: Game, masks: tuple, beliefs: tuple) -> tuple:
    return tuple(_nash(game, masks, beliefs))


def nash_profiles(game: Game, masks: Sequence[int], beliefs: Sequence[Sequence[Fraction]]) -> list[tuple]:
    """Pure Nash profiles in the product of masks; principal k weighs types by beliefs[k]."""
    return list(_nash_cached(game, tuple(masks), tuple(tuple(b) for b in beliefs)))


def _nash(game: Game, masks: Sequence[int], beliefs: Sequence[Sequence[Fraction]]) -> list[tuple]:
    J = game.n_principals
    sets = [members(m) for m in masks]
    out = []
    for y in itertools.product(*sets):
        ok = True
        for k in range(J):
            def val(a: int) -> Fraction:
                yy = y[:k] + (a,) + y[k + 1 :]
                return sum((beliefs[k][t] * game.v_int(k, yy, t) for t in range(game.n_types)), Fraction(0))

            mine = val(y[k])
            if any(val(a) > mine for a in sets[k]):
                ok = False
                break
        if ok:
            out.append(y)
    return out


def point_theta(game: Game, theta: int) -> list[Fraction]:
    return [Fraction(int(t == theta)) for t in range(game.n_types)]


# -- Example 1 ----------------------------------------------------------------------------

EXAMPLE1_RANKING = [
    # (subset of Y1, subset of Y2) -> continuation profile, best first
    ((0b01, 0b10), (0, 1)),
    ((0b11, 0b10), (0, 1)),
    ((0b10, 0b10), (1, 1)),
    ((0b10, 0b11), (1, 1)),
    ((0b11, 0b11), (0, 0)),
    ((0b01, 0b11), (0, 0)),
    ((0b01, 0b01), (0, 0)),
    ((0b10, 0b01), (1, 0)),
    ((0b11, 0b01), (1, 0)),
]
_RANK = {sub: (i, y) for i, (sub, y) in enumerate(EXAMPLE1_RANKING)}


class Example1PublicPublic(Candidate):
    """Degenerate on-path contracts; the agent reaches the best-ranked subset pair."""

    def __init__(self, game: Game, space: GeneralSpace) -> None:
        self.game = game
        self.space = space
        self.profile = (space.make(0, [0b10] * space.k), space.make(1, [0b11] * space.k))

    def message(self, profile: tuple, theta: int) -> tuple:
        best = None
        for m in itertools.product(profile[0].alphabet, profile[1].alphabet):
            rank = _RANK[(profile[0](m[0]), profile[1](m[1]))][0]
            if best is None or rank < best[0]:
                best = (rank, m)
        return best[1]

    def action(self, j: int, alpha: Any, beta: Any) -> int:
        sub = (alpha[0](beta[0]), alpha[1](beta[1]))
        return _RANK[sub][1][j]

    def belief(self, j: int, alpha: Any, beta: Any) -> Belief | None:
        return Belief.point(alpha, beta, 0)


class Example1PublicPrivate(Candidate):
    """Same on-path play; principal 2 punishes principal 1's deviations with 0."""

    def __init__(self, game: Game, space: GeneralSpace) -> None:
        self.game = game
        self.space = space
        self.profile = (space.make(0, [0b10] * space.k), space.make(1, [0b11] * space.k))

    def _zero_message(self, c1: Contract) -> tuple | None:
        for m, img in zip(c1.alphabet, c1.images):
            if img & 0b01:
                return m
        return None

    def message(self, profile: tuple, theta: int) -> tuple:
        c1, c2 = profile
        if c1 == self.profile[0]:
            # on path or principal 2 deviated: principal 1 plays 1; reach 1 at principal 2 if possible
            m2 = next((m for m, img in zip(c2.alphabet, c2.images) if img & 0b10), c2.alphabet[0])
            return (c1.alphabet[0], m2)
        m0 = self._zero_message(c1)
        if m0 is None:
            return (c1.alphabet[0], c2.alphabet[0])
        return (m0, c2.alphabet[0])

    def action(self, j: int, alpha: Any, beta: Any) -> int:
        c1, c2 = alpha
        mask = alpha[j](beta)
        if popcount(mask) == 1:
            return members(mask)[0]
        if j == 0:
            # principal 1 deviated (c1* is constant {1}); principal 2 plays 0 here
            return 0
        if c1 != self.profile[0] and self._zero_message(c1) is not None:
            return 0
        return 1

    def belief(self, j: int, alpha: Any, beta: Any) -> Belief | None:
        c1, c2 = alpha
        if j == 0:
            return Belief.point(alpha, (beta, c2.alphabet[0]), 0)
        m0 = self._zero_message(c1) if c1 != self.profile[0] else None
        m1 = m0 if m0 is not None else c1.alphabet[0]
        return Belief.point(alpha, (m1, beta), 0)


class Example1PrivatePrivate(Candidate):
    """Allocation (1,0) under private announcement and communication.

    Principal 1 offers {0,1} on every message and plays 1 only on the first;
    principal 2 offers the constant 0. After principal 2 deviates the agent
    sends principal 1 a later message, which principal 1 answers with 0.
    """

    def __init__(self, game: Game, space: GeneralSpace) -> None:
        self.game = game
        self.space = space
        self.profile = (space.make(0, [0b11] * space.k), space.constant(1, 0))

    def _act2(self, mask: int) -> int:
        # principal 2 expects principal 1 to play 0 off path
        return 0 if mask & 0b01 else 1

    def _act1(self, c1: Contract, m: Any) -> int:
        mask = c1(m)
        if c1 == self.profile[0]:
            return 1 if m == c1.alphabet[0] else 0
        return members(mask)[0]

    def message(self, profile: tuple, theta: int) -> tuple:
        c1, c2 = profile
        if c2 == self.profile[1]:
            return (c1.alphabet[0], c2.alphabet[0])
        rows = itertools.product(c1.alphabet, c2.alphabet)
        u = self.game.u_int
        return max(rows, key=lambda m: (u((self._act1(c1, m[0]), self._act2(c2(m[1]))), theta), m[0] != c1.alphabet[0]))

    def action(self, j: int, alpha: Any, beta: Any) -> int:
        if j == 0:
            return self._act1(alpha, beta)
        return self._act2(alpha(beta))

    def belief(self, j: int, alpha: Any, beta: Any) -> Belief | None:
        c1 = self.profile[0]
        if j == 0:
            if alpha == c1 and beta == c1.alphabet[0]:
                return None
            if alpha != c1:
                anchor = (alpha, self.profile[1])
                return Belief.point(anchor, (beta, self.profile[1].alphabet[0]), 0)
            other = self.space.constant(1, 1)
            return Belief.point((alpha, other), (beta, other.alphabet[0]), 0)
        # the agent's own message to principal 1 pins down the posterior
        sent = self.message((c1, alpha), 0)[0]
        return Belief.point((c1, alpha), (sent, beta), 0)


# -- Example 2 ----------------------------------------------------------------------------

EX2_NAMES = ("m1", "m4", "m2")


def example2_contract(space: GeneralSpace, j: int) -> Contract:
    images = {"m1": 0b0011, "m4": 0b1100}
    return space.make(j, [images.get(n, 0b1100) for n in space.names])


class Example2(Candidate):
    """Pooling-proof contracts c** with the agent's (1,4)-seeking strategy.

    Under public communication the principals coordinate on the observed
    message pair; under private communication the same contracts and agent
    strategy are kept and each principal reacts to its own message.
    """

    def __init__(self, game: Game, space: GeneralSpace) -> None:
        self.game = game
        self.space = space
        self.profile = (example2_contract(space, 0), example2_contract(space, 1))
        self.t1 = game.type_index(1)
        self.t4 = game.type_index(4)
        self.a = {v: game.action_index(0, v) for v in (1, 2, 3, 4)}
        self.target = (1 << self.a[1], 1 << self.a[4])
        self.pub_com = game.protocol.public_communication
        self._memo: dict = {}
        self._sent: dict = {}
        self._nash_memo: dict = {}

    def _pin_message(self, profile: tuple) -> tuple | None:
        for m in itertools.product(profile[0].alphabet, profile[1].alphabet):
            if (profile[0](m[0]), profile[1](m[1])) == self.target:
                return m
        return None

    def message(self, profile: tuple, theta: int) -> tuple:
        if tuple(profile) == self.profile:
            name = "m1" if theta == self.t1 else "m4"
            return (tok(name), tok(name))
        key = tuple(profile)
        hit = self._sent.get(key)
        if hit is None:
            if len(self._sent) > 4096:
                self._sent.clear()
            pin = self._pin_message(key)
            hit = pin if pin is not None else (first_message(key[0], "m1"), first_message(key[1], "m4"))
            self._sent[key] = hit
        return hit

    # Stage 3 under public communication
    def _public_choice(self, profile: tuple, m: tuple) -> tuple:
        key = (profile, m)
        hit = self._memo.get(key)
        if hit is None:
            if len(self._memo) > 4096:
                self._memo.clear()
            hit = self._memo[key] = self._public_choice_uncached(profile, m)
        return hit

    def _public_choice_uncached(self, profile: tuple, m: tuple) -> tuple:
        game = self.game
        if profile == self.profile:
            for theta, name in ((self.t1, "m1"), (self.t4, "m4")):
                if m == (tok(name), tok(name)):
                    a = self.a[game.types[theta]]
                    return (a, a)
        masks = (profile[0](m[0]), profile[1](m[1]))
        if masks == self.target:
            return (self.a[1], self.a[4])
        sent = tuple(tuple(self._bayes_types(profile, k, m)) for k in range(2))
        key = (masks, sent)
        hit = self._nash_memo.get(key)
        if hit is None:
            beliefs = self._beliefs_from(sent)
            nash = [y for y in nash_profiles(game, masks, beliefs) if y != (self.a[1], self.a[4])]
            if not nash:
                nash = nash_profiles(game, masks, beliefs)
            nash.sort(key=lambda y: (-game.v_int(0, y, self.t1), y))
            hit = self._nash_memo[key] = nash[0]
        return hit

    def _beliefs_from(self, sent: tuple) -> list[list[Fraction]]:
        game = self.game
        out = []
        for types in sent:
            if types:
                total = sum(game.prior[t] for t in types)
                out.append([game.prior[t] / total if t in types else Fraction(0) for t in range(game.n_types)])
            else:
                out.append(point_theta(game, self.t1))
        return out

    def _beliefs(self, profile: tuple, m: tuple) -> list[list[Fraction]]:
        return self._beliefs_from(tuple(tuple(self._bayes_types(profile, k, m)) for k in range(2)))

    def _bayes_types(self, profile: tuple, k: int, m: tuple) -> list[int]:
        """Types whose messages principal k would see as m when k's own deviation is the only one."""
        if any(profile[i] != self.profile[i] for i in range(len(profile)) if i != k):
            return []
        return [t for t in range(self.game.n_types) if self.message(profile, t) == m]

    def action(self, j: int, alpha: Any, beta: Any) -> int:
        if self.pub_com:
            return self._public_choice(tuple(alpha), tuple(beta))[j]
        return self._private_choice(j, alpha, beta)

    def belief(self, j: int, alpha: Any, beta: Any) -> Belief | None:
        if self.pub_com:
            profile, m = tuple(alpha), tuple(beta)
            if self._bayes_types(profile, j, m):
                return None
            return Belief.point(profile, m, self.t1)
        return self._private_belief(j, alpha, beta)

    # Stage 3 under private communication (public announcement)
    def _private_point(self, j: int, alpha: Any, beta: Any) -> tuple:
        profile = tuple(alpha)
        other = 1 - j
        m_other = self.message(profile, self.t1)[other]
        m = (beta, m_other) if j == 0 else (m_other, beta)
        return profile, m

    def _private_choice(self, j: int, alpha: Any, beta: Any, depth: int = 2) -> int:
        profile = tuple(alpha)
        if profile == self.profile:
            for theta, name in ((self.t1, "m1"), (self.t4, "m4")):
                if beta == tok(name):
                    return self.a[self.game.types[theta]]
        ys = members(profile[j](beta))
        if len(ys) == 1 or depth == 0:
            return ys[0]
        _, m = self._private_point(j, alpha, beta)
        other = 1 - j
        y_other = self._private_choice(other, alpha, m[other], depth - 1)
        return max(ys, key=lambda a: (self.game.v_int(j, (a, y_other) if j == 0 else (y_other, a), self.t1), -a))

    def _private_belief(self, j: int, alpha: Any, beta: Any) -> Belief | None:
        profile = tuple(alpha)
        anchor = list(self.profile)
        anchor[j] = profile[j]
        if tuple(anchor) == profile and any(self.message(profile, t)[j] == beta for t in range(self.game.n_types)):
            return None
        prof, m = self._private_point(j, alpha, beta)
        return Belief.point(prof, m, self.t1)


# -- Section 6.1 counterexample ---------------------------------------------------------------

CE_NAMES = ("m1", "m4", "m2")


def ce_contract(space: GeneralSpace, j: int) -> Contract:
    images = {"m1": 0b0011, "m4": 0b1100, "m2": 0b0010}
    return space.make(j, [images.get(n, 0b0010) for n in space.names])


class Counterexample(Candidate):
    """The c* construction under private announcement and public communication.

    A deviator always holds the pooled belief (uniform type, opponent on
    c*), so its Stage-3 play at every message pair is the one Bayes would
    force if the agent sent that pair. The agent sends the first pair whose
    resulting play is (1,4) and otherwise (m2, m2).
    """

    def __init__(self, game: Game, space: GeneralSpace, constants: Any = None) -> None:
        self.game = game
        self.space = space
        self.profile = (ce_contract(space, 0), ce_contract(space, 1))
        self.t1 = game.type_index(1)
        self.t4 = game.type_index(4)
        self.a = {v: game.action_index(0, v) for v in (1, 2, 3, 4)}
        self.goal = (self.a[1], self.a[4])
        # imagined opponent contract in off-path beliefs of a non-deviator
        self.constants = constants or self._constant
        self._acts: dict = {}
        self._devmsg: dict = {}

    def _constant(self, j: int, y: int, like: Any) -> Contract:
        if like in self.space.alphabet:
            return self.space.constant(j, y)
        return constant_contract(j, y, self.game.n_actions(j))

    def _deviator(self, profile: tuple) -> int | None:
        off = [k for k in range(2) if profile[k] != self.profile[k]]
        return off[0] if len(off) == 1 else None

    def message(self, profile: tuple, theta: int) -> tuple:
        profile = tuple(profile)
        if profile == self.profile:
            name = "m1" if theta == self.t1 else "m4"
            return (tok(name), tok(name))
        # off path the choice does not depend on the type
        out = self._devmsg.get(profile)
        if out is None:
            out = self._deviation_message(profile)
            if len(self._devmsg) > 100000:
                self._devmsg.clear()
            self._devmsg[profile] = out
        return out

    def _deviation_message(self, profile: tuple) -> tuple:
        if self._deviator(profile) is not None:
            for m in itertools.product(profile[0].alphabet, profile[1].alphabet):
                y = tuple(self.action(k, profile[k], m) for k in range(2))
                if y == self.goal:
                    return m
        return (first_message(profile[0], "m2"), first_message(profile[1], "m2"))

    def _onpath_key(self, j: int, cj: Contract, m: tuple) -> int | None:
        if cj == self.profile[j]:
            for name, theta in (("m1", 1), ("m4", 4)):
                if m == (tok(name), tok(name)):
                    return self.a[theta]
        return None

    def action(self, j: int, alpha: Any, beta: Any) -> int:
        key = (j, alpha, beta)
        a = self._acts.get(key)
        if a is None:
            a = self._action(j, alpha, tuple(beta))
            if len(self._acts) > 500000:
                self._acts.clear()
            self._acts[key] = a
        return a

    def _action(self, j: int, cj: Contract, m: tuple) -> int:
        fixed = self._onpath_key(j, cj, m)
        if fixed is not None:
            return fixed
        mask = cj(m[j])
        if popcount(mask) == 1:
            return members(mask)[0]
        if cj == self.profile[j]:
            return max(members(mask)) if j == 0 else min(members(mask))
        if not self.profile[1 - j].accepts(m[1 - j]):
            # both principals off c*: not reached by unilateral deviations
            return max(members(mask))
        game = self.game
        other = self.action(1 - j, self.profile[1 - j], m)

        def val(a: int) -> int:
            y = (a, other) if j == 0 else (other, a)
            return game.v_int(j, y, self.t1) + game.v_int(j, y, self.t4)

        return max(members(mask), key=lambda a: (val(a), -a))

    def belief(self, j: int, alpha: Any, beta: Any) -> Belief | None:
        cj, m = alpha, tuple(beta)
        if self._onpath_key(j, cj, m) is not None:
            return None
        if cj != self.profile[j]:
            anchor = list(self.profile)
            anchor[j] = cj
            half = Fraction(1, 2)
            return Belief.mixture([(half, anchor, m, self.t1), (half, anchor, m, self.t4)])
        mask = cj(m[j])
        if j == 0:
            y = max(members(mask))
            return Belief.point((cj, self.constants(1, y, m[1])), m, self.t1)
        y = min(members(mask))
        return Belief.point((self.constants(0, y, m[0]), cj), m, self.t4)


# -- Appendix B matching pennies ------------------------------------------------------------------


class MatchingPenniesMenus(Candidate):
    """Full menus; after a deviation the agent makes the deviator lose."""

    def __init__(self, game: Game, menus: tuple) -> None:
        self.game = game
        self.profile = menus
        self.H = game.action_index(0, "H")

    def message(self, profile: tuple, theta: int) -> tuple:
        c1, c2 = profile
        if c1 == self.profile[0] and c2 == self.profile[1]:
            return (("y", self.H), ("y", self.H))
        if c2 == self.profile[1]:
            m1 = c1.alphabet[0]
            y1 = members(c1(m1))[0]
            want = 1 - y1
            m2 = next((m for m in c2.alphabet if members(c2(m))[0] == want), c2.alphabet[0])
            return (m1, m2)
        m2 = c2.alphabet[0]
        y2 = members(c2(m2))[0]
        m1 = next((m for m in c1.alphabet if members(c1(m))[0] == y2), c1.alphabet[0])
        return (m1, m2)

    def action(self, j: int, alpha: Any, beta: Any) -> int:
        c = own_contract(self.game, j, alpha)
        return members(c(own_message(self.game, j, beta)))[0]
