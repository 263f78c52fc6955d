"""Exact verification of [C^I, C^II]-equilibria and Stage-3 continuation play.

The verifier walks the relevant profile set: the on-path profile plus every
unilateral deviation into the deviation space. At each profile it evaluates
every message profile the agent could send, so that

* (ii) the agent's Stage-2 choice is checked against every one-shot message
  substitution (t is fixed, and the agent's payoff at one (profile, type)
  does not depend on her messages elsewhere, so this is the whole of
  condition (ii));
* (iii) every reached observation of every principal is checked for a
  Stage-3 best response under the Bayes posterior when one is defined and
  under the candidate's explicit belief otherwise;
* (i) every deviation's ex-ante value is compared with the on-path value.

All arithmetic is exact. Payoffs are compared after scaling to integers.
"""

from __future__ import annotations

import contextlib
import gc
import itertools
import multiprocessing
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

from .contracts import Contract, ContractSpace, members, popcount
from .game import Game, observe_announcement, observe_communication
from .play import Belief, Candidate, StrategyError, induced_allocation

ALL_CONDITIONS = ("i", "ii", "iii", "belief", "feasibility", "missing")


@dataclass
class Violation:
    """One failed check. ``gap`` is the profitable margin, always positive."""

    condition: str
    who: str
    profile: tuple | None
    detail: dict
    gap: Fraction = Fraction(0)


@dataclass
class Certificate:
    """Verdict of one verification run."""

    game: Game
    candidate: Candidate
    on_space: str
    dev_space: str
    caps: dict
    verified: bool
    allocation: tuple | None
    violations: list[Violation]
    violation_count: int
    checks: dict
    elapsed: float = 0.0
    notes: list[str] = field(default_factory=list)
    spaces: tuple = (None, None)  # (on-path space, deviation space) objects

    def by_condition(self, condition: str) -> list[Violation]:
        return [v for v in self.violations if v.condition == condition]

    def summary(self) -> dict:
        return {
            "verified": self.verified,
            "on_space": self.on_space,
            "dev_space": self.dev_space,
            "caps": self.caps,
            "allocation": None
            if self.allocation is None
            else {str(self.game.types[t]): list(self.game.profile_labels(y)) for t, y in enumerate(self.allocation)},
            "violations": self.violation_count,
            "checks": self.checks,
        }


class _Verifier:
    def __init__(self, game: Game, cand: Candidate, dev_space: ContractSpace | None, max_violations: int) -> None:
        self.game = game
        self.cand = cand
        self.c = tuple(cand.profile)
        self.dev_space = dev_space
        self.max_violations = max_violations
        self.violations: list[Violation] = []
        self.count = 0
        self.checks = {"profiles": 0, "message_profiles": 0, "observations": 0}
        self.pub_ann = game.protocol.public_announcement
        self.pub_com = game.protocol.public_communication
        self.J = game.n_principals
        self.T = game.n_types
        self.w = game.prior_weight
        self.shared_checked: set = set()
        self.shared_actions: dict = {}
        self.ic_cache: dict = {}
        self.row_cache: dict = {}
        self.foreign_actions: dict = {}
        self.onpath_msgs: list | None = None
        self.onpath_value: list[int] = []

    # -- bookkeeping ------------------------------------------------------------------

    def record(self, v: Violation) -> None:
        self.count += 1
        if len(self.violations) < self.max_violations:
            self.violations.append(v)

    def describe_profile(self, profile: tuple) -> list:
        from .contracts import contract_str

        return [contract_str(c, self.game.actions[c.owner]) for c in profile]

    # -- keys --------------------------------------------------------------------------

    def alpha(self, k: int, profile: tuple) -> Any:
        return profile if self.pub_ann else profile[k]

    def beta(self, k: int, msgs: tuple) -> Any:
        return msgs if self.pub_com else msgs[k]

    def act(self, k: int, alpha: Any, beta: Any, local: dict) -> int:
        key = (k, alpha, beta)
        if not self.pub_ann and alpha == self.c[k]:
            cache = self.shared_actions
        else:
            cache = local
        a = cache.get(key)
        if a is None:
            a = self.cand.action(k, alpha, beta)
            cache[key] = a
        return a

    def act_anywhere(self, k: int, profile: tuple, msgs: tuple, local: dict, current: tuple) -> int:
        alpha = self.alpha(k, profile)
        beta = self.beta(k, msgs)
        if profile == current or (not self.pub_ann and alpha == self.c[k]):
            return self.act(k, alpha, beta, local)
        key = (k, alpha, beta)
        a = self.foreign_actions.get(key)
        if a is None:
            if len(self.foreign_actions) > 200000:
                self.foreign_actions.clear()
            a = self.cand.action(k, alpha, beta)
            self.foreign_actions[key] = a
        return a

    # -- on path -----------------------------------------------------------------------

    def prepare(self) -> None:
        c = self.c
        msgs = []
        for theta in range(self.T):
            m = tuple(self.cand.message(c, theta))
            msgs.append(m)
        self.onpath_msgs = msgs

    def messages_at(self, profile: tuple, theta: int, onpath: bool) -> tuple:
        if onpath:
            return self.onpath_msgs[theta]
        return tuple(self.cand.message(profile, theta))

    # -- one profile -------------------------------------------------------------------

    def check_profile(self, profile: tuple, deviator: int | None) -> None:
        game = self.game
        self.checks["profiles"] += 1
        local: dict = {}
        onpath = deviator is None
        try:
            agent_msgs = [self.messages_at(profile, theta, onpath) for theta in range(self.T)]
        except StrategyError as exc:
            self.record(Violation("missing", "agent", profile, {"error": str(exc)}))
            return
        for theta, m in enumerate(agent_msgs):
            bad = [k for k in range(self.J) if not profile[k].accepts(m[k])]
            if bad:
                self.record(
                    Violation("feasibility", "agent", profile, {"type": game.types[theta], "principals": bad})
                )
                return
        alphabets = [p.alphabet for p in profile]
        rows = list(itertools.product(*alphabets))
        self.checks["message_profiles"] += len(rows)
        outcome: dict = {}
        try:
            if self.pub_com:
                for m in rows:
                    y = []
                    for k in range(self.J):
                        a = self.act(k, self.alpha(k, profile), m, local)
                        if not (profile[k].images[profile[k].index(m[k])] >> a) & 1:
                            self.record(self.infeasible(k, profile, m, a))
                            return
                        y.append(a)
                    outcome[m] = tuple(y)
            else:
                per_token = []
                for k in range(self.J):
                    alpha = self.alpha(k, profile)
                    table = {}
                    for tok, img in zip(profile[k].alphabet, profile[k].images):
                        a = self.act(k, alpha, tok, local)
                        if not (img >> a) & 1:
                            self.record(self.infeasible(k, profile, None, a, tok))
                            return
                        table[tok] = a
                    per_token.append(table)
                for m in rows:
                    outcome[m] = tuple(per_token[k][m[k]] for k in range(self.J))
        except StrategyError as exc:
            self.record(Violation("missing", "principal", profile, {"error": str(exc)}))
            return

        # (ii) agent
        distinct = set(outcome.values())
        u = game._u_int
        realized = [outcome[m] for m in agent_msgs]
        for theta in range(self.T):
            got = u[theta][realized[theta]]
            best_y = max(distinct, key=lambda y: u[theta][y])
            best = u[theta][best_y]
            if best > got:
                m_best = next(m for m in rows if outcome[m] == best_y)
                self.record(
                    Violation(
                        "ii",
                        "agent",
                        profile,
                        {
                            "type": game.types[theta],
                            "sent": list(agent_msgs[theta]),
                            "better": list(m_best),
                            "outcome_sent": list(game.profile_labels(realized[theta])),
                            "outcome_better": list(game.profile_labels(best_y)),
                        },
                        Fraction(best - got, game.scale),
                    )
                )

        # (i) deviation value
        if onpath:
            self.onpath_value = [
                sum(self.w[t] * game._v_int[j][t][realized[t]] for t in range(self.T)) for j in range(self.J)
            ]
            self.onpath_outcome = realized
            self.onpath_local = local
        else:
            value = sum(self.w[t] * game._v_int[deviator][t][realized[t]] for t in range(self.T))
            if value > self.onpath_value[deviator]:
                self.record(
                    Violation(
                        "i",
                        f"principal {game.principals[deviator]}",
                        profile,
                        {"deviation": self.describe_profile(profile)[deviator]},
                        Fraction(value - self.onpath_value[deviator], game.scale * sum(self.w)),
                    )
                )

        # (iii) principals
        seen: set = set()
        for k in range(self.J):
            alpha = self.alpha(k, profile)
            shared = (not self.pub_ann) and k != deviator
            for m in rows:
                beta = self.beta(k, m)
                key = (k, alpha, beta)
                if key in seen:
                    continue
                seen.add(key)
                if shared:
                    if key in self.shared_checked:
                        continue
                    self.shared_checked.add(key)
                self.checks["observations"] += 1
                self.check_key(k, alpha, beta, profile, m, deviator, agent_msgs, local, outcome)

    def infeasible(self, k: int, profile: tuple, m: tuple | None, a: int, tok: Any = None) -> Violation:
        return Violation(
            "feasibility",
            f"principal {self.game.principals[k]}",
            profile,
            {"message": list(m) if m is not None else tok, "action": self.game.actions[k][a]},
        )

    # -- one observation ---------------------------------------------------------------

    def check_key(
        self,
        k: int,
        alpha: Any,
        beta: Any,
        profile: tuple,
        m: tuple,
        deviator: int | None,
        agent_msgs: list,
        local: dict,
        outcome: dict | None = None,
    ) -> None:
        game = self.game
        own = profile[k]
        mask = own.images[own.index(m[k])]
        chosen = self.act(k, alpha, beta, local)
        # Anchor profile for Bayes: own contract, opponents on path.
        own_deviates = deviator == k
        anchor_is_profile = own_deviates or deviator is None
        if self.pub_ann and not anchor_is_profile:
            gen: list[int] = []
        else:
            anchor_msgs = agent_msgs if anchor_is_profile else self.onpath_msgs
            gen = [t for t in range(self.T) if self.beta(k, anchor_msgs[t]) == beta]
        if not gen:
            if popcount(mask) == 1:
                return
            if outcome is not None and self.row_belief_supports(k, mask, chosen, outcome[m]):
                return
        try:
            supplied = self.cand.belief(k, alpha, beta)
        except StrategyError:
            supplied = None
        dist: dict = {}
        if gen:
            anchor = profile if anchor_is_profile else self.c
            anchor_msgs = agent_msgs if anchor_is_profile else self.onpath_msgs
            anchor_local = local if anchor_is_profile else getattr(self, "onpath_local", local)
            total = sum(self.w[t] for t in gen)
            for t in gen:
                msgs = anchor_msgs[t]
                y_opp = tuple(
                    self.act(i, self.alpha(i, anchor), self.beta(i, msgs), anchor_local) if i != k else -1
                    for i in range(self.J)
                )
                dist[(y_opp, t)] = dist.get((y_opp, t), 0) + Fraction(self.w[t], total)
            if supplied is not None and not self.same_as_bayes(supplied, anchor, anchor_msgs, gen, total):
                self.record(
                    Violation(
                        "belief",
                        f"principal {game.principals[k]}",
                        profile,
                        {"message": list(m), "reason": "belief at a Bayes-constrained observation differs from the posterior"},
                    )
                )
        else:
            if supplied is None:
                self.record(
                    Violation(
                        "missing",
                        f"principal {game.principals[k]}",
                        profile,
                        {"message": list(m), "reason": "no belief supplied at an unconstrained observation"},
                    )
                )
                return
            if not self.valid_belief(k, alpha, beta, supplied, profile, m):
                return
            for pt in supplied.points:
                if outcome is not None and pt.messages == m and pt.profile == profile:
                    # the observed row itself: play there is already known
                    y = outcome[m]
                    y_opp = y[:k] + (-1,) + y[k + 1 :]
                    dist[(y_opp, pt.theta)] = dist.get((y_opp, pt.theta), 0) + pt.prob
                    continue
                y_opp = tuple(
                    self.act_anywhere(i, pt.profile, pt.messages, local, profile) if i != k else -1
                    for i in range(self.J)
                )
                for i in range(self.J):
                    if i != k and not (pt.profile[i](pt.messages[i]) >> y_opp[i]) & 1:
                        self.record(self.infeasible(i, pt.profile, pt.messages, y_opp[i]))
                        return
                dist[(y_opp, pt.theta)] = dist.get((y_opp, pt.theta), 0) + pt.prob
            if popcount(mask) == 1:
                return
        cache_key = (k, mask, chosen, frozenset(dist.items()))
        res = self.ic_cache.get(cache_key)
        if res is None:
            vk = game._v_int[k]
            vals = {}
            for a in members(mask):
                total_v = Fraction(0)
                for (y_opp, t), p in dist.items():
                    y = y_opp[:k] + (a,) + y_opp[k + 1 :]
                    total_v += p * vk[t][y]
                vals[a] = total_v
            best_a = max(vals, key=vals.get)
            res = (vals[best_a] - vals[chosen], best_a)
            if len(self.ic_cache) > 500000:
                self.ic_cache.clear()
            self.ic_cache[cache_key] = res
        gap, best_a = res
        if gap > 0:
            self.record(
                Violation(
                    "iii",
                    f"principal {game.principals[k]}",
                    profile,
                    {
                        "message": list(m),
                        "played": game.actions[k][chosen],
                        "better": game.actions[k][best_a],
                        "bayes": bool(gen),
                    },
                    gap / game.scale,
                )
            )

    def row_belief_supports(self, k: int, mask: int, chosen: int, y: tuple) -> bool:
        """Whether the observed row itself, under the prior, makes ``chosen`` a best response.

        The row is always in the viewer's information set and uses only
        contracts of the profile being checked, so at an observation Bayes
        leaves free this belief is admissible whatever the candidate supplied.
        """
        cache_key = (k, mask, chosen, y)
        ok = self.row_cache.get(cache_key)
        if ok is None:
            vk = self.game._v_int[k]
            w = self.w
            best = None
            for a in members(mask):
                yy = y[:k] + (a,) + y[k + 1 :]
                val = sum(w[t] * vk[t][yy] for t in range(self.T))
                if a == chosen:
                    mine = val
                if best is None or val > best:
                    best = val
            ok = mine >= best
            self.row_cache[cache_key] = ok
        return ok

    def same_as_bayes(self, belief: Belief, anchor: tuple, anchor_msgs: list, gen: list[int], total: int) -> bool:
        want = {(anchor, anchor_msgs[t], t): Fraction(self.w[t], total) for t in gen}
        got: dict = {}
        for pt in belief.points:
            key = (tuple(pt.profile), tuple(pt.messages), pt.theta)
            got[key] = got.get(key, 0) + pt.prob
        return got == want

    def valid_belief(self, k: int, alpha: Any, beta: Any, belief: Belief, profile: tuple, m: tuple) -> bool:
        game = self.game
        reason = None
        if belief.total() != 1 or any(pt.prob <= 0 for pt in belief.points):
            reason = "belief probabilities must be positive and sum to 1"
        else:
            for pt in belief.points:
                if pt.messages == m and pt.profile == profile:
                    continue
                if len(pt.profile) != self.J or len(pt.messages) != self.J:
                    reason = "belief point must name a full profile"
                    break
                if observe_announcement(game, k, pt.profile) != alpha or observe_communication(game, k, pt.messages) != beta:
                    reason = "belief support leaves the observed information set"
                    break
                if any(not pt.profile[i].accepts(pt.messages[i]) for i in range(self.J)):
                    reason = "belief point sends a message outside a contract's alphabet"
                    break
                for i in range(self.J):
                    ci = pt.profile[i]
                    if ci != self.c[i] and (self.dev_space is None or not self.dev_space.contains(ci)):
                        reason = "belief point uses a contract outside the game's contract space"
                        break
                if reason:
                    break
        if reason:
            self.record(
                Violation("belief", f"principal {game.principals[k]}", profile, {"message": list(m), "reason": reason})
            )
            return False
        return True


def relevant_profiles(c: tuple, dev_space: ContractSpace | None, principals: Iterable[int] | None = None):
    """Yield ``(profile, deviator)``: the on-path profile, then unilateral deviations."""
    yield c, None
    if dev_space is None:
        return
    for j in principals if principals is not None else range(len(c)):
        for cj in dev_space.iter(j):
            if cj == c[j]:
                continue
            yield c[:j] + (cj,) + c[j + 1 :], j


_WORKER: dict = {}


@contextlib.contextmanager
def _gc_paused():
    # The per-profile loop builds large caches but no reference cycles, and
    # cyclic collection over those caches costs more than the checks.
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def _worker(args: tuple) -> tuple:
    index, jobs = args
    ver: _Verifier = _WORKER["verifier"]
    ver.violations = []
    ver.count = 0
    ver.checks = {"profiles": 0, "message_profiles": 0, "observations": 0}
    with _gc_paused():
        for n, (profile, dev) in enumerate(relevant_profiles(ver.c, ver.dev_space)):
            if dev is None or n % jobs != index:
                continue
            ver.check_profile(profile, dev)
    return ver.violations, ver.count, ver.checks


def verify(
    game: Game,
    cand: Candidate,
    dev_space: ContractSpace | None,
    on_space: ContractSpace | None = None,
    *,
    max_violations: int = 25,
    jobs: int = 1,
    stop_after: int | None = None,
) -> Certificate:
    """Check conditions (i)-(iii) and belief validity exactly.

    ``dev_space=None`` checks only the on-path profile (useful for
    inspecting a continuation); the resulting certificate is never marked
    verified. ``stop_after`` stops once that many violations were counted.
    """
    start = time.perf_counter()
    c = tuple(cand.profile)
    ver = _Verifier(game, cand, dev_space, max_violations)
    notes: list[str] = []
    if on_space is not None:
        for j, cj in enumerate(c):
            if not on_space.contains(cj):
                ver.record(
                    Violation(
                        "feasibility",
                        f"principal {game.principals[j]}",
                        c,
                        {"reason": f"on-path contract is outside {on_space.label()}"},
                    )
                )
    allocation = None
    try:
        ver.prepare()
        allocation = induced_allocation(game, cand)
    except StrategyError as exc:
        ver.record(Violation("missing", "agent", c, {"error": str(exc)}))
    if allocation is not None:
        ver.check_profile(c, None)
        if dev_space is not None and (stop_after is None or ver.count < stop_after):
            if jobs > 1 and hasattr(multiprocessing, "get_context"):
                _WORKER["verifier"] = ver
                ctx = multiprocessing.get_context("fork")
                with ctx.Pool(jobs) as pool:
                    results = pool.map(_worker, [(i, jobs) for i in range(jobs)])
                for viols, count, checks in results:
                    for v in viols:
                        if len(ver.violations) < max_violations:
                            ver.violations.append(v)
                    ver.count += count
                    for key, val in checks.items():
                        ver.checks[key] += val
                _WORKER.clear()
            else:
                with _gc_paused():
                    for profile, dev in relevant_profiles(c, dev_space):
                        if dev is None:
                            continue
                        ver.check_profile(profile, dev)
                        if stop_after is not None and ver.count >= stop_after:
                            notes.append(f"stopped after {ver.count} violations")
                            break
    if dev_space is None:
        notes.append("on-path profile only; deviations not checked")
    caps: dict = {}
    for space in (on_space, dev_space):
        if space is not None:
            caps.update(space.caps())
    stopped = any(n.startswith("stopped") for n in notes)
    verified = ver.count == 0 and allocation is not None and dev_space is not None and not stopped
    return Certificate(
        game=game,
        candidate=cand,
        on_space=on_space.label() if on_space is not None else "given",
        dev_space=dev_space.label() if dev_space is not None else "none",
        caps=caps,
        verified=verified,
        allocation=allocation,
        violations=ver.violations,
        violation_count=ver.count,
        checks=ver.checks,
        elapsed=time.perf_counter() - start,
        notes=notes,
        spaces=(on_space, dev_space),
    )


# -- Stage-3 continuation play ------------------------------------------------------------


def continuation_equilibria(
    game: Game,
    c: Sequence[Contract],
    m: Sequence,
    beliefs: Sequence[Sequence[Fraction]] | Sequence[Fraction] | None = None,
) -> list[tuple[int, ...]]:
    """Pure Nash profiles of the Stage-3 game fixed by ``(c, m)``.

    ``beliefs`` gives each principal's distribution over types (a single
    distribution is shared by all; ``None`` means the prior). Opponents'
    actions are the profile's own components. The list may be empty.
    """
    J = game.n_principals
    if beliefs is None:
        per = [list(game.prior)] * J
    elif beliefs and not isinstance(beliefs[0], (list, tuple)):
        per = [list(beliefs)] * J
    else:
        per = [list(b) for b in beliefs]
    sets = [members(c[k](m[k])) for k in range(J)]
    out = []
    for y in itertools.product(*sets):
        ok = True
        for k in range(J):
            def val(a: int) -> Fraction:
                yy = y[:k] + (a,) + y[k + 1 :]
                return sum((Fraction(per[k][t]) * game.payoff(k, yy, t) for t in range(game.n_types)), Fraction(0))

            mine = val(y[k])
            if any(val(a) > mine for a in sets[k]):
                ok = False
                break
        if ok:
            out.append(tuple(y))
    return out
