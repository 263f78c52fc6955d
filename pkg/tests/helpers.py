"""Random tiny games, table candidates and brute-force oracles for the tests."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from common_agency.contracts import Contract, general_contract, members, popcount
from common_agency.game import Game, make_game, observe_announcement, observe_communication
from common_agency.play import TableCandidate

PROTOCOLS = ("public-public", "public-private", "private-public", "private-private")


def random_game(rng: random.Random, n_actions=(2, 2), n_types: int = 2, protocol: str = "public-public") -> Game:
    profiles = list(itertools.product(*(range(n) for n in n_actions)))
    J = len(n_actions)

    def r() -> Fraction:
        return Fraction(rng.randint(-4, 4), rng.choice([1, 2, 3]))

    U = {(y, t): r() for y in profiles for t in range(n_types)}
    V = {(j, y, t): r() for j in range(J) for y in profiles for t in range(n_types)}
    weights = [rng.randint(1, 4) for _ in range(n_types)]
    prior = [Fraction(w, sum(weights)) for w in weights]
    return make_game(
        principals=list(range(1, J + 1)),
        types=list(range(n_types)),
        prior=prior,
        actions=[list(range(n)) for n in n_actions],
        agent_utility=lambda y, th: U[(tuple(y), th)],
        principal_utility=lambda j, y, th: V[(j, tuple(y), th)],
        protocol=protocol,
    )


def random_contract(rng: random.Random, owner: int, n: int, size: int) -> Contract:
    masks = [rng.randint(1, 2**n - 1) for _ in range(size)]
    return general_contract(owner, [(f"x{i}", m) for i, m in enumerate(masks)])


def random_table_candidate(rng: random.Random, game: Game, profiles: list[tuple]) -> TableCandidate:
    """Arbitrary feasible strategies on the given profiles (no beliefs)."""
    J, T = game.n_principals, game.n_types
    agent, actions = {}, {}
    for profile in profiles:
        rows = list(itertools.product(*(c.alphabet for c in profile)))
        for t in range(T):
            agent[(profile, t)] = rng.choice(rows)
        for m in rows:
            for k in range(J):
                key = (k, observe_announcement(game, k, profile), observe_communication(game, k, m))
                if key not in actions:
                    actions[key] = rng.choice(members(profile[k](m[k])))
    return TableCandidate(profiles[0], game, agent, actions)


# -- oracles --------------------------------------------------------------------------


def oracle_posterior(game: Game, cand, viewer: int, anchor: tuple, beta) -> list | str:
    """Joint over (type, message profile) filtered by the viewer's observation."""
    joint = []
    for t in range(game.n_types):
        for m in itertools.product(*(c.alphabet for c in anchor)):
            weight = game.prior[t] if tuple(cand.message(anchor, t)) == m else Fraction(0)
            if weight and observe_communication(game, viewer, m) == beta:
                joint.append((weight, m, t))
    total = sum(w for w, _, _ in joint)
    if not total:
        return "confirmed-deviation"
    return sorted((w / total, m, t) for w, m, t in joint)


def oracle_nash(game: Game, c: tuple, m: tuple, beliefs: list[list[Fraction]]) -> list[tuple]:
    """Fixed points of the best-response correspondence, computed from payoff tables."""
    J = game.n_principals
    sets = [members(c[k](m[k])) for k in range(J)]
    grid = list(itertools.product(*sets))
    expected = {
        (k, y): sum(beliefs[k][t] * game.payoff(k, y, t) for t in range(game.n_types)) for k in range(J) for y in grid
    }
    out = []
    for y in grid:
        stable = True
        for k in range(J):
            replies = [y[:k] + (a,) + y[k + 1 :] for a in sets[k]]
            top = max(expected[(k, z)] for z in replies)
            if expected[(k, y)] != top:
                stable = False
        if stable:
            out.append(y)
    return out


def oracle_is_extension(c1: Contract, c2: Contract) -> bool:
    """Try every map from c1's alphabet to c2's."""
    n2 = len(c2.alphabet)
    for f in itertools.product(range(n2), repeat=len(c1.alphabet)):
        if len(set(f)) == n2 and all(c1.images[i] == c2.images[t] for i, t in enumerate(f)):
            return True
    return False


def oracle_agent_deviations(game: Game, cand, profiles: list[tuple]) -> set[tuple]:
    """(profile, type) pairs where some whole alternative agent strategy does better.

    Enumerates every agent strategy s' on ``profiles x types`` and compares
    the agent's payoff at each pair; no separability is assumed.
    """
    T = game.n_types
    slots = [(p, t) for p in profiles for t in range(T)]
    choices = [list(itertools.product(*(c.alphabet for c in p))) for p, _ in slots]

    def payoff(p: tuple, t: int, m: tuple) -> Fraction:
        y = tuple(
            cand.action(k, observe_announcement(game, k, p), observe_communication(game, k, m))
            for k in range(game.n_principals)
        )
        return game.payoff("agent", y, t)

    base = {(p, t): payoff(p, t, tuple(cand.message(p, t))) for p, t in slots}
    better = set()
    for s_alt in itertools.product(*choices):
        for (p, t), m in zip(slots, s_alt):
            if payoff(p, t, m) > base[(p, t)]:
                better.add((p, t))
    return better


def relevant(cand, devs) -> list[tuple]:
    """On-path profile first, then each unilateral deviation in ``devs[j]``."""
    c = tuple(cand.profile)
    out = [(c, None)]
    for j, cs in enumerate(devs):
        for cj in cs:
            if cj != c[j]:
                out.append((c[:j] + (cj,) + c[j + 1 :], j))
    return out


def _y(game: Game, cand, profile: tuple, m: tuple) -> tuple:
    return tuple(
        cand.action(k, observe_announcement(game, k, profile), observe_communication(game, k, m))
        for k in range(game.n_principals)
    )


def best_reply(game: Game, k: int, mask: int, chosen: int, dist: dict) -> bool:
    def val(a):
        return sum(p * game.payoff(k, y[:k] + (a,) + y[k + 1 :], t) for (y, t), p in dist.items())

    return all(val(chosen) >= val(a) for a in members(mask))


def oracle_verify(game: Game, cand, devs) -> tuple[dict, dict, dict]:
    """Brute-force (i) and (iii) with the observed row under the prior as free belief.

    Returns ``(violations, beliefs, rows)``: violations keyed by condition,
    the beliefs to install at observations Bayes leaves unconstrained, and
    for those observations the ``(mask, y)`` of the row where they occur.
    """
    from common_agency.play import Belief

    c = tuple(cand.profile)
    J, T = game.n_principals, game.n_types
    pub_ann = game.protocol.public_announcement

    def value(j, profile):
        return sum(game.prior[t] * game.payoff(j, _y(game, cand, profile, cand.message(profile, t)), t) for t in range(T))

    found = {"i": set(), "iii": set()}
    beliefs, rows = {}, {}
    seen = set()
    for profile, dev in relevant(cand, devs):
        if dev is not None and value(dev, profile) > value(dev, c):
            found["i"].add(profile)
        for m in itertools.product(*(x.alphabet for x in profile)):
            y = _y(game, cand, profile, m)
            for k in range(J):
                alpha, beta = observe_announcement(game, k, profile), observe_communication(game, k, m)
                key = (k, alpha, beta)
                if key in seen:
                    continue
                seen.add(key)
                mask = profile[k](m[k])
                if pub_ann and dev not in (None, k):
                    post = "confirmed-deviation"
                else:
                    anchor = profile if dev in (None, k) else c
                    post = oracle_posterior(game, cand, k, anchor, beta)
                if post == "confirmed-deviation":
                    beliefs[key] = Belief.mixture([(game.prior[t], profile, m, t) for t in range(T)])
                    dist = {(y, t): game.prior[t] for t in range(T)}
                    rows[key] = (mask, y)
                    bayes = False
                else:
                    anchor = profile if dev in (None, k) else c
                    dist = {}
                    for p, mm, t in post:
                        yy = _y(game, cand, anchor, mm)
                        dist[(yy, t)] = dist.get((yy, t), 0) + p
                    bayes = True
                if popcount(mask) > 1 and not best_reply(game, k, mask, y[k], dist):
                    found["iii"].add((key, bayes))
    return found, beliefs, rows


def oracle_menu_allocations(game: Game) -> set[tuple]:
    """Allocations of [P, P] equilibria by direct enumeration.

    With menus every message fixes the action, so only the agent's
    tie-breaking is free; a deviation is blocked iff its value under the
    deviator's worst agent tie-break per type is not above the on-path value.
    """
    J, T = game.n_principals, game.n_types
    menus = [[frozenset(s) for r in range(1, game.n_actions(j) + 1) for s in itertools.combinations(range(game.n_actions(j)), r)] for j in range(J)]

    def best_rows(c, t):
        rows = list(itertools.product(*c))
        top = max(game.payoff("agent", y, t) for y in rows)
        return [y for y in rows if game.payoff("agent", y, t) == top]

    out = set()
    for c in itertools.product(*menus):
        per_type = [best_rows(c, t) for t in range(T)]
        for z in itertools.product(*per_type):
            ok = True
            for j in range(J):
                value = sum(game.prior[t] * game.payoff(j, z[t], t) for t in range(T))
                for d in menus[j]:
                    if d == c[j]:
                        continue
                    dev = c[:j] + (d,) + c[j + 1 :]
                    worst = sum(game.prior[t] * min(game.payoff(j, y, t) for y in best_rows(dev, t)) for t in range(T))
                    if worst > value:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                out.add(tuple(z))
    return out
