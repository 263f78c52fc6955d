"""Implementability search with exhaustive refutation records.

For a target allocation and a pair [C^I, C^II] the search walks every
on-path candidate: a contract profile from C^I together with the agent's
on-path messages. Each candidate is either refuted or handed to a
constructor that builds full strategies and beliefs and re-verifies them.

Refutation is sound because it only ever uses an over-approximation of the
continuation play. At an observation where beliefs are free, a principal
may play any action that is a best response to some admissible belief
about the type and the opponents' actions. Opponents' actions range over
the images of every contract that could have produced the observation,
taken principal by principal. At observations pinned down by Bayes' rule
the exact posterior is used. A deviation refutes a candidate only when
every continuation in this relaxed family gives the deviator strictly more
than the on-path value.

Candidates that survive are turned into explicit strategies. The
constructor uses self-referential point beliefs: a free observation is
justified by a point in its own information set at the profile being
built. The result is checked by :func:`equilibrium.verify`, so every Found
outcome carries a certificate.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator, Sequence

from .contracts import Contract, ContractSpace, GeneralSpace, MenuSpace, contract_str, members, popcount
from .equilibrium import Certificate, verify
from .game import Game, Protocol
from .lp import best_response_belief
from .play import Belief, TableCandidate, allocation_labels

FAMILIES = ("bayes-forced", "point", "all")
INF = float("inf")


@dataclass
class Budget:
    max_candidates: int | None = None
    max_seconds: float | None = None


@dataclass
class SearchProblem:
    game: Game
    target: tuple | None
    on_space: ContractSpace
    dev_space: ContractSpace
    belief_family: str = "point"
    budget: Budget = field(default_factory=Budget)
    construct: bool = True


@dataclass
class Refutation:
    """Why one on-path candidate fails.

    ``profile`` is the on-path contract profile; ``messages`` the agent's
    on-path message profile per type, or None when the record covers every
    message choice. ``principal`` set means the record covers every profile
    in which that principal offers ``profile[principal]``.
    """

    profile: tuple
    messages: tuple | None
    reason: str
    detail: dict
    principal: int | None = None


@dataclass
class SearchOutcome:
    status: str  # "Found" | "NotFound" | "Inconclusive"
    problem: SearchProblem
    certificate: Certificate | None
    refutations: list[Refutation]
    examined: int
    unresolved: list
    caps: dict
    elapsed: float
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        game = self.problem.game
        out = {
            "status": self.status,
            "target": None if self.problem.target is None else allocation_labels(game, self.problem.target),
            "protocol": str(game.protocol),
            "on_space": self.problem.on_space.label(),
            "dev_space": self.problem.dev_space.label(),
            "belief_family": self.problem.belief_family,
            "caps": self.caps,
            "examined": self.examined,
            "refuted": len(self.refutations),
            "unresolved": len(self.unresolved),
        }
        if self.certificate is not None:
            out["certificate"] = self.certificate.summary()
        return out


# -- the engine -----------------------------------------------------------------------------


class _Engine:
    def __init__(self, game: Game, dev_space: ContractSpace, family: str) -> None:
        if family not in FAMILIES:
            raise ValueError(f"unknown belief family {family!r}; use one of {', '.join(FAMILIES)}")
        self.game = game
        self.dev_space = dev_space
        self.family = family
        self.J = game.n_principals
        self.T = game.n_types
        self.w = game.prior_weight
        self.u = game._u_int
        self.v = game._v_int
        self.pub_ann = game.protocol.public_announcement
        self.pub_com = game.protocol.public_communication
        self._jcache: dict = {}
        self._union: dict[int, tuple[dict, int]] = {}
        self._dev_lists: dict[int, list[Contract]] = {}

    # keys
    def alpha(self, k: int, prof: tuple) -> Any:
        return prof if self.pub_ann else prof[k]

    def beta(self, k: int, row: tuple) -> Any:
        return row if self.pub_com else row[k]

    def dev_list(self, j: int) -> list[Contract]:
        lst = self._dev_lists.get(j)
        if lst is None:
            lst = list(self.dev_space.iter(j))
            # most flexible deviations first: they refute most often
            lst.sort(key=lambda c: -sum(popcount(m) for m in c.images) / len(c.images))
            self._dev_lists[j] = lst
        return lst

    def token_union(self, i: int) -> tuple[dict, int]:
        hit = self._union.get(i)
        if hit is None:
            by_tok: dict = {}
            anything = 0
            for c in self.dev_space.iter(i):
                for t, img in zip(c.alphabet, c.images):
                    by_tok[t] = by_tok.get(t, 0) | img
                    anything |= img
            hit = (by_tok, anything)
            self._union[i] = hit
        return hit

    def opp_masks(self, k: int, prof: tuple, row: tuple, onpath: tuple) -> tuple:
        """Per-opponent action sets a free belief of k may put weight on."""
        out = []
        for i in range(self.J):
            if i == k:
                continue
            if self.pub_ann:
                ci = prof[i]
                out.append(ci(row[i]) if self.pub_com else _or(ci.images))
            else:
                by_tok, anything = self.token_union(i)
                ci = onpath[i]
                if self.pub_com:
                    mask = by_tok.get(row[i], 0)
                    if ci.accepts(row[i]):
                        mask |= ci(row[i])
                    if prof[i] is not ci and prof[i].accepts(row[i]):
                        mask |= prof[i](row[i])
                else:
                    mask = anything | _or(ci.images) | _or(prof[i].images)
                out.append(mask)
        return tuple(out)

    def justified(self, k: int, mask: int, opp: tuple) -> tuple[int, ...]:
        """Actions in ``mask`` that are best responses to some admissible belief."""
        key = (k, mask, opp)
        hit = self._jcache.get(key)
        if hit is not None:
            return hit
        acts = members(mask)
        if len(acts) == 1:
            self._jcache[key] = acts
            return acts
        opp_profiles = list(itertools.product(*(members(m) for m in opp)))
        vk = self.v[k]

        def full(a: int, yo: tuple) -> tuple:
            return yo[:k] + (a,) + yo[k:]

        res: set[int] = set()
        if self.family == "point":
            for t in range(self.T):
                for yo in opp_profiles:
                    vals = {a: vk[t][full(a, yo)] for a in acts}
                    top = max(vals.values())
                    res.update(a for a in acts if vals[a] == top)
        elif self.family == "bayes-forced":
            for yo in opp_profiles:
                vals = {a: sum(self.w[t] * vk[t][full(a, yo)] for t in range(self.T)) for a in acts}
                top = max(vals.values())
                res.update(a for a in acts if vals[a] == top)
        else:
            states = [(t, yo) for t in range(self.T) for yo in opp_profiles]
            table = [[vk[t][full(a, yo)] for t, yo in states] for a in acts]
            for idx, a in enumerate(acts):
                if best_response_belief(table, idx) is not None:
                    res.add(a)
        out = tuple(sorted(res))
        self._jcache[key] = out
        return out

    def br_set(self, k: int, mask: int, dist: Sequence[tuple[int, int, tuple]]) -> tuple[int, ...]:
        """Best responses in ``mask`` to weighted points ``(weight, type, profile)``."""
        vk = self.v[k]
        vals = {}
        for a in members(mask):
            vals[a] = sum(wt * vk[t][y[:k] + (a,) + y[k + 1 :]] for wt, t, y in dist)
        top = max(vals.values())
        return tuple(a for a in vals if vals[a] == top)

    # -- on path ------------------------------------------------------------------------

    def onpath_keys(self, c: tuple, msgs: tuple, z: tuple) -> list[dict]:
        keys = [dict() for _ in range(self.J)]
        for t in range(self.T):
            for k in range(self.J):
                keys[k][self.beta(k, msgs[t])] = z[t][k]
        return keys

    def check_onpath(self, c: tuple, msgs: tuple, z: tuple) -> tuple[str, dict] | None:
        J, T = self.J, self.T
        groups: list[dict] = [dict() for _ in range(J)]
        for t in range(T):
            for k in range(J):
                groups[k].setdefault(self.beta(k, msgs[t]), []).append(t)
        for k in range(J):
            for key, ths in groups[k].items():
                if len({z[t][k] for t in ths}) > 1:
                    return "stage3", {"principal": k, "reason": "types sharing an observation need one action"}
                mask = c[k](msgs[ths[0]][k])
                dist = [(self.w[t], t, z[t]) for t in ths]
                if z[ths[0]][k] not in self.br_set(k, mask, dist):
                    return "stage3", {"principal": k, "types": ths, "reason": "on-path action is not a best response"}
        U = [self.u[t][z[t]] for t in range(T)]
        for t in range(T):
            for t2 in range(T):
                if self.u[t][z[t2]] > U[t]:
                    return "agent", {"type": t, "mimics": t2}
        onkeys = self.onpath_keys(c, msgs, z)
        sent = set(msgs)
        for row in itertools.product(*(ck.alphabet for ck in c)):
            if row in sent:
                continue
            sets = []
            for k in range(J):
                key = self.beta(k, row)
                if key in onkeys[k]:
                    sets.append((onkeys[k][key],))
                else:
                    sets.append(self.justified(k, c[k](row[k]), self.opp_masks(k, c, row, c)))
            if not any(all(self.u[t][y] <= U[t] for t in range(T)) for y in itertools.product(*sets)):
                return "agent", {"row": row, "reason": "every admissible play at this message profile tempts some type"}
        return None

    # -- deviations ----------------------------------------------------------------------

    def continuation(
        self,
        c: tuple,
        msgs: tuple,
        z: tuple,
        j: int,
        cj: Contract,
        threshold: int | None = None,
    ) -> tuple[float, float]:
        """(min, max) of the deviator's weighted value over relaxed continuations.

        Values are integers scaled by ``game.scale`` and unnormalized prior
        weights. ``(inf, -inf)`` means no continuation exists. With a
        threshold the scan stops at the first value at or below it.
        """
        J, T = self.J, self.T
        prof = c[:j] + (cj,) + c[j + 1 :]
        onkeys = self.onpath_keys(c, msgs, z)
        rows = list(itertools.product(*(p.alphabet for p in prof)))
        R = len(rows)
        u, v, w = self.u, self.v, self.w
        static: list[list[tuple]] = []
        for row in rows:
            entry = []
            for k in range(J):
                mask = prof[k](row[k])
                if k != j and not self.pub_ann and self.beta(k, row) in onkeys[k]:
                    entry.append((onkeys[k][self.beta(k, row)],))
                else:
                    entry.append(self.justified(k, mask, self.opp_masks(k, prof, row, c)))
            static.append(entry)
        if all(len(s) == 1 for entry in static for s in entry):
            return self._delegated_continuation(rows, static, j)
        dkey = [self.beta(j, r) for r in rows]
        ndkey = [[self.beta(k, r) for r in rows] for k in range(J)]
        lo, hi = INF, -INF
        for assign in itertools.product(range(R), repeat=T):
            groups: dict = {}
            for t, r in enumerate(assign):
                groups.setdefault(dkey[r], []).append(t)
            S = set(assign)
            nd_vars: dict = {}
            for r in S:
                for k in range(J):
                    if k == j:
                        continue
                    opts = static[r][k]
                    if len(opts) > 1:
                        nd_vars[(k, ndkey[k][r])] = opts
            nd_keys = list(nd_vars)
            for nd_choice in itertools.product(*(nd_vars[x] for x in nd_keys)):
                ndmap = dict(zip(nd_keys, nd_choice))

                def others(r: int) -> tuple:
                    return tuple(
                        -1 if k == j else (ndmap.get((k, ndkey[k][r])) if (k, ndkey[k][r]) in ndmap else static[r][k][0])
                        for k in range(J)
                    )

                gkeys = list(groups)
                br_opts = []
                for key in gkeys:
                    ths = groups[key]
                    mask = prof[j](rows[assign[ths[0]]][j])
                    dist = [(w[t], t, others(assign[t])) for t in ths]
                    br_opts.append(self.br_set(j, mask, dist))
                for dchoice in itertools.product(*br_opts):
                    dmap = dict(zip(gkeys, dchoice))
                    ys = []
                    for t in range(T):
                        o = others(assign[t])
                        ys.append(o[:j] + (dmap[dkey[assign[t]]],) + o[j + 1 :])
                    U = [u[t][ys[t]] for t in range(T)]
                    if any(u[t][ys[t2]] > U[t] for t in range(T) for t2 in range(T)):
                        continue
                    ok = True
                    for r in range(R):
                        if r in S:
                            continue
                        sets = []
                        for k in range(J):
                            if k == j:
                                sets.append((dmap[dkey[r]],) if dkey[r] in dmap else static[r][j])
                            else:
                                key = (k, ndkey[k][r])
                                sets.append((ndmap[key],) if key in ndmap else static[r][k])
                        if not any(all(u[t][y] <= U[t] for t in range(T)) for y in itertools.product(*sets)):
                            ok = False
                            break
                    if not ok:
                        continue
                    val = sum(w[t] * v[j][t][ys[t]] for t in range(T))
                    lo = min(lo, val)
                    hi = max(hi, val)
                    if threshold is not None and lo <= threshold:
                        return lo, hi
        return lo, hi

    def _delegated_continuation(self, rows: list, static: list, j: int) -> tuple[float, float]:
        u, v, w = self.u, self.v, self.w
        outs = [tuple(s[0] for s in entry) for entry in static]
        lo = hi = 0
        for t in range(self.T):
            top = max(u[t][y] for y in outs)
            vals = [v[j][t][y] for y in outs if u[t][y] == top]
            lo += w[t] * min(vals)
            hi += w[t] * max(vals)
        return lo, hi


def _or(masks: Iterable[int]) -> int:
    out = 0
    for m in masks:
        out |= m
    return out


# -- construction of explicit strategies ------------------------------------------------------


class _Builder:
    """Fills strategy and belief tables profile by profile."""

    def __init__(self, eng: _Engine, c: tuple, msgs: tuple, z: tuple, limit: int = 200000) -> None:
        self.eng = eng
        self.c = c
        self.msgs = msgs
        self.z = z
        self.limit = limit
        self.agent: dict = {}
        self.actions: dict = {}
        self.beliefs: dict = {}
        self.onkeys = eng.onpath_keys(c, msgs, z)
        self.values = [sum(eng.w[t] * eng.v[k][t][z[t]] for t in range(eng.T)) for k in range(eng.J)]

    def key(self, k: int, prof: tuple, row: tuple) -> tuple:
        return (k, self.eng.alpha(k, prof), self.eng.beta(k, row))

    def build(self) -> TableCandidate | None:
        eng = self.eng
        if not self.profile(self.c, None):
            return None
        for j in range(eng.J):
            for cj in eng.dev_space.iter(j):
                if cj == self.c[j]:
                    continue
                prof = self.c[:j] + (cj,) + self.c[j + 1 :]
                if not self.profile(prof, j):
                    return None
        return TableCandidate(self.c, eng.game, self.agent, self.actions, self.beliefs)

    def profile(self, prof: tuple, j: int | None) -> bool:
        eng = self.eng
        J, T = eng.J, eng.T
        rows = list(itertools.product(*(p.alphabet for p in prof)))
        R = len(rows)
        keys = [[self.key(k, prof, r) for k in range(J)] for r in rows]
        masks = [[prof[k](r[k]) for k in range(J)] for r in rows]
        fixed: dict = {}
        for r in range(R):
            for k in range(J):
                key = keys[r][k]
                if key in self.actions:
                    fixed[key] = self.actions[key]
                elif popcount(masks[r][k]) == 1:
                    fixed[key] = members(masks[r][k])[0]
                elif k != j and not eng.pub_ann and key[2] in self.onkeys[k]:
                    fixed[key] = self.onkeys[k][key[2]]
        row_of = {r: i for i, r in enumerate(rows)}
        if j is None:
            assigns: Iterable = [tuple(row_of[m] for m in self.msgs)]
            for t in range(T):
                for k in range(J):
                    fixed[keys[row_of[self.msgs[t]]][k]] = self.z[t][k]
        else:
            assigns = itertools.product(range(R), repeat=T)
        rows_with: dict = {}
        for r in range(R):
            for k in range(J):
                rows_with.setdefault(keys[r][k], []).append(r)
        for assign in assigns:
            sol = self._solve(prof, j, rows, keys, masks, fixed, rows_with, assign)
            if sol is not None:
                acts, beliefs = sol
                for t in range(T):
                    self.agent[(prof, t)] = rows[assign[t]]
                self.actions.update(acts)
                self.beliefs.update(beliefs)
                return True
        return False

    def _solve(self, prof, j, rows, keys, masks, fixed, rows_with, assign):
        eng = self.eng
        J, T = eng.J, eng.T
        u, v, w = eng.u, eng.v, eng.w
        S = sorted(set(assign))
        forced: dict = {}  # deviator keys pinned by Bayes: key -> types
        if j is not None:
            for t, r in enumerate(assign):
                forced.setdefault(keys[r][j], []).append(t)
        sent_vars = []
        for r in S:
            for k in range(J):
                key = keys[r][k]
                if key not in fixed and key not in forced and key not in sent_vars:
                    sent_vars.append(key)
        free_dom = {key: members(masks[rows_with[key][0]][key[0]]) for key in sent_vars}
        budget = self.limit
        for choice in itertools.product(*(free_dom[x] for x in sent_vars)):
            budget -= 1
            if budget < 0:
                return None
            act = dict(fixed)
            act.update(zip(sent_vars, choice))
            # deviator best responses at forced keys
            fkeys = list(forced)
            opts = []
            for key in fkeys:
                ths = forced[key]
                r0 = assign[ths[0]]
                dist = [(w[t], t, tuple(act.get(keys[assign[t]][k], -1) if k != j else -1 for k in range(J))) for t in ths]
                if any(-1 in d[2][:j] + d[2][j + 1 :] for d in dist):
                    opts.append(())
                    break
                opts.append(eng.br_set(j, masks[r0][j], dist))
            for dchoice in itertools.product(*opts):
                act2 = dict(act)
                act2.update(zip(fkeys, dchoice))
                ys = [tuple(act2[keys[assign[t]][k]] for k in range(J)) for t in range(T)]
                U = [u[t][ys[t]] for t in range(T)]
                if any(u[t][ys[t2]] > U[t] for t in range(T) for t2 in range(T)):
                    continue
                if j is not None:
                    val = sum(w[t] * v[j][t][ys[t]] for t in range(T))
                    if val > self.values[j]:
                        continue
                full = self._fill_rest(rows, keys, masks, act2, rows_with, S, U, j)
                if full is None:
                    continue
                beliefs = self._beliefs(prof, rows, keys, masks, full, rows_with, forced, fixed)
                if beliefs is None:
                    continue
                new = {key: a for key, a in full.items() if key not in self.actions}
                return new, beliefs
        return None

    def _fill_rest(self, rows, keys, masks, act, rows_with, S, U, j):
        eng = self.eng
        J, T = eng.J, eng.T
        u = eng.u
        act = dict(act)
        pending = [r for r in range(len(rows)) if r not in S]
        # connected components of pending rows through unassigned keys
        seen: set = set()
        for start in pending:
            if start in seen:
                continue
            comp_rows, comp_keys, stack = [], [], [start]
            seen.add(start)
            while stack:
                r = stack.pop()
                comp_rows.append(r)
                for k in range(J):
                    key = keys[r][k]
                    if key in act or key in comp_keys:
                        continue
                    comp_keys.append(key)
                    for r2 in rows_with[key]:
                        if r2 not in seen and r2 not in S:
                            seen.add(r2)
                            stack.append(r2)
            doms = [members(masks[rows_with[key][0]][key[0]]) for key in comp_keys]
            found = None
            tries = 0
            for choice in itertools.product(*doms):
                tries += 1
                if tries > self.limit:
                    return None
                trial = dict(zip(comp_keys, choice))
                good = True
                for r in comp_rows:
                    y = tuple(trial.get(keys[r][k], act.get(keys[r][k])) for k in range(J))
                    if any(u[t][y] > U[t] for t in range(T)):
                        good = False
                        break
                if not good:
                    continue
                if all(self._justify(key, a, rows, keys, masks, {**act, **trial}, rows_with) is not None for key, a in trial.items() if popcount(masks[rows_with[key][0]][key[0]]) > 1):
                    found = trial
                    break
            if found is None:
                return None
            act.update(found)
        return act

    def _justify(self, key, a, rows, keys, masks, act, rows_with):
        """Belief points (within this profile) that make ``a`` a best response at ``key``."""
        eng = self.eng
        k = key[0]
        mask = masks[rows_with[key][0]][k]
        vk = eng.v[k]
        cands = []
        for r in rows_with[key]:
            y = tuple(act.get(keys[r][i]) for i in range(eng.J))
            if any(y[i] is None for i in range(eng.J) if i != k):
                continue
            cands.append((r, y))
        if not cands:
            return None
        acts = members(mask)
        if eng.family == "point":
            for r, y in cands:
                for t in range(eng.T):
                    vals = {b: vk[t][y[:k] + (b,) + y[k + 1 :]] for b in acts}
                    if vals[a] == max(vals.values()):
                        return [(Fraction(1), r, t)]
            return None
        if eng.family == "bayes-forced":
            total = sum(eng.w)
            for r, y in cands:
                vals = {b: sum(eng.w[t] * vk[t][y[:k] + (b,) + y[k + 1 :]] for t in range(eng.T)) for b in acts}
                if vals[a] == max(vals.values()):
                    return [(Fraction(eng.w[t], total), r, t) for t in range(eng.T)]
            return None
        states = [(r, y, t) for r, y in cands for t in range(eng.T)]
        table = [[vk[t][y[:k] + (b,) + y[k + 1 :]] for r, y, t in states] for b in acts]
        q = best_response_belief(table, acts.index(a))
        if q is None:
            return None
        return [(p, r, t) for p, (r, y, t) in zip(q, states) if p > 0]

    def _beliefs(self, prof, rows, keys, masks, act, rows_with, forced, fixed):
        eng = self.eng
        out = {}
        for r in range(len(rows)):
            for k in range(eng.J):
                key = keys[r][k]
                if key in out or key in forced or key in self.beliefs:
                    continue
                if popcount(masks[r][k]) == 1:
                    continue
                if key in fixed and key not in self.actions:
                    continue  # pinned on path
                if key in self.actions:
                    continue
                pts = self._justify(key, act[key], rows, keys, masks, act, rows_with)
                if pts is None:
                    return None
                out[key] = Belief.mixture([(p, prof, rows[rr], t) for p, rr, t in pts])
        return out


# -- public operations ---------------------------------------------------------------------------


def _target_options(eng: _Engine, cj: Contract, j: int, z: tuple) -> list[tuple]:
    """Per-type token choices of principal j that can realize z_j."""
    per_type = []
    for t in range(eng.T):
        toks = [m for m, img in zip(cj.alphabet, cj.images) if (img >> z[t][j]) & 1]
        if not toks:
            return []
        per_type.append(toks)
    return list(itertools.product(*per_type))


def _pointwise_ok(eng: _Engine, cj: Contract, j: int, toks: tuple, z: tuple) -> bool:
    """Necessary on-path best-response checks that involve principal j alone."""
    T = eng.T
    injective = len(set(z)) == T
    for t in range(T):
        if eng.pub_com:
            alone = injective
        else:
            alone = all(z[t2][j] != z[t][j] for t2 in range(T) if t2 != t)
        if not alone:
            continue
        if not eng.pub_com and any(toks[t2] == toks[t] for t2 in range(T) if t2 != t):
            return False
        if z[t][j] not in eng.br_set(j, cj(toks[t]), [(1, t, z[t])]):
            return False
    return True


def implementable(problem: SearchProblem, progress: Callable[[dict], None] | None = None) -> SearchOutcome:
    """Search [C^I, C^II] for an equilibrium inducing ``problem.target``."""
    start = time.perf_counter()
    game = problem.game
    z = problem.target
    if z is None:
        raise ValueError("implementable needs a target allocation; use allocation_set to enumerate")
    eng = _Engine(game, problem.dev_space, problem.belief_family)
    J, T = eng.J, eng.T
    budget = problem.budget
    refutations: list[Refutation] = []
    unresolved: list = []
    caps = {**problem.on_space.caps(), **problem.dev_space.caps()}
    notes: list[str] = []
    examined = 0

    per_principal: list[list[tuple[Contract, list[tuple]]]] = []
    for j in range(J):
        keep = []
        for cj in problem.on_space.iter(j):
            opts = _target_options(eng, cj, j, z)
            good = [o for o in opts if _pointwise_ok(eng, cj, j, o, z)]
            if good:
                keep.append((cj, good))
            else:
                reason = "target-unreachable" if not opts else "stage3"
                refutations.append(Refutation((cj,), None, reason, {"principal": j}, principal=j))
        per_principal.append(keep)

    def candidates() -> Iterator[tuple[tuple, tuple]]:
        for combo in itertools.product(*per_principal):
            c = tuple(cj for cj, _ in combo)
            for toks in itertools.product(*(opts for _, opts in combo)):
                msgs = tuple(tuple(toks[k][t] for k in range(J)) for t in range(T))
                yield c, msgs

    found = None
    stopped = False
    for c, msgs in candidates():
        examined += 1
        if budget.max_candidates is not None and examined > budget.max_candidates:
            stopped = True
            break
        if budget.max_seconds is not None and time.perf_counter() - start > budget.max_seconds:
            stopped = True
            break
        bad = eng.check_onpath(c, msgs, z)
        if bad is not None:
            refutations.append(Refutation(c, msgs, bad[0], bad[1]))
            continue
        values = [sum(eng.w[t] * eng.v[k][t][z[t]] for t in range(T)) for k in range(J)]
        refuted = None
        for j in range(J):
            for cj in eng.dev_list(j):
                if cj == c[j]:
                    continue
                lo, _ = eng.continuation(c, msgs, z, j, cj, threshold=values[j])
                if lo > values[j]:
                    norm = Fraction(game.scale * sum(eng.w))
                    refuted = {
                        "deviator": game.principals[j],
                        "deviation": contract_str(cj, game.actions[j]),
                        "min_value": None if lo == INF else str(Fraction(lo) / norm),
                        "equilibrium_value": str(Fraction(values[j]) / norm),
                    }
                    break
            if refuted:
                break
        if refuted:
            refutations.append(Refutation(c, msgs, "deviation", refuted))
            if progress:
                progress({"event": "refuted", "examined": examined})
            continue
        if not problem.construct:
            unresolved.append((c, msgs))
            continue
        cand = _Builder(eng, c, msgs, z).build()
        if cand is not None:
            cert = verify(game, cand, problem.dev_space, problem.on_space)
            if cert.verified and cert.allocation == z:
                found = cert
                if progress:
                    progress({"event": "found", "examined": examined})
                break
            notes.append(f"constructed candidate failed verification with {cert.violation_count} violations")
        unresolved.append((c, msgs))
    if found is not None:
        status = "Found"
    elif stopped or unresolved:
        status = "Inconclusive"
        if stopped:
            notes.append("budget exhausted")
    else:
        status = "NotFound"
    return SearchOutcome(
        status=status,
        problem=problem,
        certificate=found,
        refutations=refutations,
        examined=examined,
        unresolved=unresolved,
        caps=caps,
        elapsed=time.perf_counter() - start,
        notes=notes,
    )


def all_allocations(game: Game) -> list[tuple]:
    profiles = list(game.profiles())
    return list(itertools.product(profiles, repeat=game.n_types))


def allocation_set(
    game: Game,
    on_space: ContractSpace,
    dev_space: ContractSpace,
    belief_family: str = "point",
    budget: Budget | None = None,
    construct: bool = True,
) -> dict[tuple, SearchOutcome]:
    """Run :func:`implementable` on every allocation in Y^Theta."""
    out = {}
    for z in all_allocations(game):
        out[z] = implementable(SearchProblem(game, z, on_space, dev_space, belief_family, budget or Budget(), construct))
    return out


def found_set(results: dict[tuple, SearchOutcome]) -> set[tuple]:
    return {z for z, r in results.items() if r.status == "Found"}


def deviation_value_bounds(
    game: Game,
    j: int,
    deviation: Contract,
    profile: tuple,
    messages: tuple,
    dev_space: ContractSpace,
    target: tuple | None = None,
    belief_family: str = "point",
) -> tuple[Fraction, Fraction] | None:
    """Exact (min, max) of j's payoff over relaxed continuations after a deviation.

    ``profile`` and ``messages`` describe the on-path candidate; ``target``
    defaults to the outcome those messages induce when every image is a
    singleton. Returns None when no continuation exists.
    """
    eng = _Engine(game, dev_space, belief_family)
    if target is None:
        target = tuple(tuple(members(profile[k](m[k]))[0] for k in range(game.n_principals)) for m in messages)
    lo, hi = eng.continuation(tuple(profile), tuple(messages), target, j, deviation)
    if lo == INF:
        return None
    norm = game.scale * sum(eng.w)
    return Fraction(lo) / norm, Fraction(hi) / norm


# -- theorem probes -------------------------------------------------------------------------------

THEOREMS = {
    "T1": "delegated contracts: general delegated contracts and menus implement the same allocations",
    "T2": "[A(k), A(k)] equals [R, F] outside private announcement with public communication",
    "T3": "private-private: [A(k), A(k)] equals [P, F]",
    "T4": "private-private: [A(k), A(k)] is contained in [P, P]",
    "T5": "private-public: [A(k), A(k)] equals [R, F*]",
}


@dataclass
class ProbeReport:
    theorem: str
    claim: str
    protocol: str
    left: str
    right: str
    relation: str  # "equal" | "subset"
    left_set: list
    right_set: list
    holds: bool | None
    strict: bool | None
    inconclusive: list
    caps: dict

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def theorem_probe(
    game: Game,
    theorem: str,
    k: int = 2,
    r_cap: int | None = None,
    belief_family: str = "point",
    budget: Budget | None = None,
) -> ProbeReport:
    """Compare the two allocation sets a theorem relates, at alphabet size k."""
    from .contracts import make_space

    theorem = theorem.upper()
    if theorem not in THEOREMS:
        raise ValueError(f"unknown theorem {theorem!r}; use one of {', '.join(THEOREMS)}")
    n = [game.n_actions(j) for j in range(game.n_principals)]
    A = GeneralSpace(n, k)
    proto = str(game.protocol)
    relation = "equal"
    if theorem == "T1":
        left = (GeneralSpace(n, k, delegated=True),) * 2
        right = (MenuSpace(n), MenuSpace(n))
    elif theorem == "T2":
        if proto == "private-public":
            raise ValueError("T2 does not cover private announcement with public communication")
        left = (A, A)
        right = (make_space("R", n, r_cap=r_cap), make_space("F", n))
    elif theorem == "T3":
        game = game.with_protocol("private-private")
        left = (A, A)
        right = (MenuSpace(n), make_space("F", n))
    elif theorem == "T4":
        game = game.with_protocol("private-private")
        left = (A, A)
        right = (MenuSpace(n), MenuSpace(n))
        relation = "subset"
    else:
        game = game.with_protocol("private-public")
        left = (A, A)
        right = (make_space("R", n, r_cap=r_cap), make_space("F*", n))
    lres = allocation_set(game, left[0], left[1], belief_family, budget)
    rres = allocation_set(game, right[0], right[1], belief_family, budget)
    lset, rset = found_set(lres), found_set(rres)
    inconclusive = [z for z, r in {**lres, **rres}.items() if r.status == "Inconclusive"]
    unsure_l = {z for z, r in lres.items() if r.status == "Inconclusive"}
    unsure_r = {z for z, r in rres.items() if r.status == "Inconclusive"}
    if relation == "equal":
        holds = lset == rset if not (unsure_l or unsure_r) else (None if not (lset ^ rset) - unsure_l - unsure_r else False)
        strict = None
    else:
        holds = lset <= rset if not (unsure_l or unsure_r) else (None if not (lset - rset - unsure_r) else False)
        strict = (lset < rset) if holds else None
    caps = {}
    for sp in (*left, *right):
        caps.update(sp.caps())
    return ProbeReport(
        theorem=theorem,
        claim=THEOREMS[theorem],
        protocol=str(game.protocol),
        left=f"[{left[0].label()}, {left[1].label()}]",
        right=f"[{right[0].label()}, {right[1].label()}]",
        relation=relation,
        left_set=sorted(lset),
        right_set=sorted(rset),
        holds=holds,
        strict=strict,
        inconclusive=sorted(set(inconclusive)),
        caps=caps,
    )
