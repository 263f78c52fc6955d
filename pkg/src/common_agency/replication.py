"""Equilibrium replication: move a verified equilibrium between contract spaces.

Every map here builds a new candidate that plays the source equilibrium
through translators:

* ``gamma`` reads a target contract as a source contract (the target
  on-path contract stands for the source on-path contract, every other
  contract for itself or for a contract it extends);
* ``down`` reads a target message as a source message;
* ``up`` writes the source agent's message as a target message.

The output is re-verified with :func:`equilibrium.verify`, so a map that
does not carry over is reported as such rather than trusted.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

from .contracts import (
    ConstantsSpace,
    Contract,
    ContractSpace,
    FullRecStarSpace,
    FullRecSpace,
    GeneralSpace,
    MenuSpace,
    RecSpace,
    UnionSpace,
    contract_str,
    extension_map,
    is_extension,
    members,
    menu,
    popcount,
    rec_contract,
    relation_check,
    section_map,
    token_order,
    token_str,
)
from .equilibrium import Certificate, verify
from .game import Game, observe_announcement, observe_communication
from .lp import best_response_belief
from .play import Belief, Candidate

MODELS_T2 = ("private-private", "public-private", "public-public")


class ReplicationError(ValueError):
    """A replication step refused its input; ``stage`` names the step."""

    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass
class ReplicationMap:
    """One replication step: translators, domain and both certificates."""

    kind: str
    source: Certificate
    target: Certificate | None
    gamma: dict  # principal -> (target on-path contract, source contract it stands for)
    translators: dict  # name -> principal -> {token: token}
    sanity: dict  # check name -> bool
    domain: str
    notes: list[str] = field(default_factory=list)
    stages: list[ReplicationMap] = field(default_factory=list)
    candidate: Candidate | None = None

    @property
    def ok(self) -> bool:
        return (
            self.target is not None
            and self.target.verified
            and self.target.allocation == self.source.allocation
            and all(self.sanity.values())
        )

    def to_dict(self) -> dict:
        game = self.source.game

        def tstr(j: int, tok: Any) -> str:
            return token_str(tok, game.actions[j])

        out = {
            "kind": self.kind,
            "domain": self.domain,
            "source": self.source.summary(),
            "target": None if self.target is None else self.target.summary(),
            "gamma": {
                str(game.principals[j]): {
                    "target": contract_str(t, game.actions[j]),
                    "source": contract_str(s, game.actions[j]),
                }
                for j, (t, s) in self.gamma.items()
            },
            "translators": {
                name: {
                    str(game.principals[j]): {tstr(j, a): tstr(j, b) for a, b in table.items()}
                    for j, table in per.items()
                }
                for name, per in self.translators.items()
            },
            "sanity": dict(self.sanity),
            "allocation_preserved": self.target is not None and self.target.allocation == self.source.allocation,
            "notes": list(self.notes),
        }
        if self.stages:
            out["stages"] = [s.to_dict() for s in self.stages]
        return out


# -- the translated candidate ---------------------------------------------------------------------


DevMap = Callable[[Contract], tuple[Contract, dict | None, dict | None]]


def _embed(c: Contract) -> tuple[Contract, None, None]:
    return c, None, None


_CACHE_LIMIT = 200000

class Translated(Candidate):
    """The source candidate played through contract and message translators.

    ``down[i]`` maps tokens of i's target on-path contract to source tokens
    (``None``: the contract is unchanged). ``up[i](s, y)`` writes the source
    message ``s`` that led to action ``y`` as a token of that contract.
    ``dev_map`` reads a target deviation as ``(source contract, iota,
    section)``; the default reads every deviation as itself.
    ``space`` is the target deviation space; off-path beliefs may place
    opponents on its degenerate constants. With ``reoptimize`` the
    agent keeps the translated message only when no target message profile
    does strictly better for him; translation can open such options when a
    principal reads opponents' tokens without seeing their contracts.
    """

    def __init__(
        self,
        game: Game,
        source: Candidate,
        profile: Sequence[Contract],
        down: Sequence[dict | None],
        up: Sequence[Callable[[Any, int], Any] | None],
        dev_map: DevMap = _embed,
        space: ContractSpace | None = None,
        reoptimize: bool = False,
    ) -> None:
        self.game = game
        self.source = source
        self.profile = tuple(profile)
        self.src_profile = tuple(source.profile)
        self.down = list(down)
        self.up = list(up)
        self.dev_map = dev_map
        self.space = space
        self.pool = belief_pool(space, len(self.profile))
        self.pub_ann = game.protocol.public_announcement
        self.pub_com = game.protocol.public_communication
        self.J = game.n_principals
        self._dev: dict = {}
        self._msg: dict = {}
        self._act: dict = {}
        self._bel: dict = {}
        self._rows: dict = {}
        self.reoptimize = reoptimize
        self.fallbacks = 0
        self.reoptimized = 0

    # -- translators ---------------------------------------------------------------------

    def _devinfo(self, c: Contract) -> tuple:
        info = self._dev.get(c)
        if info is None:
            info = self.dev_map(c)
            if len(self._dev) > _CACHE_LIMIT:
                self._dev.clear()
            self._dev[c] = info
        return info

    def gamma(self, i: int, c: Contract) -> Contract:
        if c == self.profile[i]:
            return self.src_profile[i]
        return self._devinfo(c)[0]

    def tau(self, i: int, c: Contract | None, tok: Any) -> Any:
        """Source reading of i's token; ``c`` is i's contract when known."""
        if c is None:
            table = self.down[i]
            return table.get(tok, tok) if table is not None else tok
        if c == self.profile[i]:
            table = self.down[i]
            return tok if table is None else table[tok]
        iota = self._devinfo(c)[1]
        return tok if iota is None else iota[tok]

    def lift(self, i: int, c: Contract, s: Any, y: int) -> Any:
        if c == self.profile[i]:
            return s if self.up[i] is None else self.up[i](s, y)
        section = self._devinfo(c)[2]
        return s if section is None else section[s]

    def src_obs(self, j: int, alpha: Any, beta: Any) -> tuple[Any, Any]:
        if self.pub_ann:
            sa = tuple(self.gamma(i, c) for i, c in enumerate(alpha))
            known = list(alpha)
        else:
            sa = self.gamma(j, alpha)
            known = [alpha if i == j else None for i in range(self.J)]
        if self.pub_com:
            sb = tuple(self.tau(i, known[i], tok) for i, tok in enumerate(beta))
        else:
            sb = self.tau(j, known[j], beta)
        return sa, sb

    # -- strategies ----------------------------------------------------------------------

    def message(self, profile: tuple, theta: int) -> tuple:
        key = (profile, theta)
        out = self._msg.get(key)
        if out is None:
            src = tuple(self.gamma(i, c) for i, c in enumerate(profile))
            sm = tuple(self.source.message(src, theta))
            y = [
                self.source.action(i, observe_announcement(self.game, i, src), observe_communication(self.game, i, sm))
                for i in range(self.J)
            ]
            out = tuple(self.lift(i, profile[i], sm[i], y[i]) for i in range(self.J))
            if self.reoptimize:
                out = self._best_reply(profile, theta, out)
            if len(self._msg) > _CACHE_LIMIT:
                self._msg.clear()
            self._msg[key] = out
        return out

    def _best_reply(self, profile: tuple, theta: int, sent: tuple) -> tuple:
        u = self.game._u_int[theta]
        rows = self._rows.get(profile)
        if rows is None:
            game = self.game
            alphas = [observe_announcement(game, i, profile) for i in range(self.J)]
            rows = [
                (m, tuple(self.action(i, alphas[i], observe_communication(game, i, m)) for i in range(self.J)))
                for m in itertools.product(*(c.alphabet for c in profile))
            ]
            self._rows = {profile: rows}
        best, best_val = sent, None
        for m, y in rows:
            if m == sent:
                best_val = u[y]
                break
        for m, y in rows:
            val = u[y]
            if val > best_val:
                best, best_val = m, val
        if best != sent:
            self.reoptimized += 1
        return best

    def action(self, j: int, alpha: Any, beta: Any) -> int:
        key = (j, alpha, beta)
        a = self._act.get(key)
        if a is None:
            a = self.source.action(j, *self.src_obs(j, alpha, beta))
            if len(self._act) > _CACHE_LIMIT:
                self._act.clear()
            self._act[key] = a
        return a

    def belief(self, j: int, alpha: Any, beta: Any) -> Belief | None:
        key = (j, alpha, beta)
        if key in self._bel:
            return self._bel[key]
        out = self._belief(j, alpha, beta)
        if len(self._bel) > _CACHE_LIMIT:
            self._bel.clear()
        self._bel[key] = out
        return out

    # -- beliefs -------------------------------------------------------------------------

    def _anchor(self, j: int, alpha: Any) -> tuple | None:
        own = alpha[j] if self.pub_ann else alpha
        anchor = self.profile[:j] + (own,) + self.profile[j + 1 :]
        if self.pub_ann and tuple(alpha) != anchor:
            return None
        return anchor

    def _forced(self, j: int, alpha: Any, beta: Any) -> bool:
        anchor = self._anchor(j, alpha)
        if anchor is None:
            return False
        return any(
            observe_communication(self.game, j, self.message(anchor, t)) == beta for t in range(self.game.n_types)
        )

    def _belief(self, j: int, alpha: Any, beta: Any) -> Belief | None:
        if self._forced(j, alpha, beta):
            return None
        own = alpha[j] if self.pub_ann else alpha
        own_tok = beta[j] if self.pub_com else beta
        if popcount(own(own_tok)) == 1:
            return None
        points = self._source_points(j, alpha, beta)
        if points is not None:
            direct = self._direct(j, alpha, beta, points)
            if direct is not None:
                return direct
            states = self._states(j, alpha, beta)
            entries = []
            for p, _, _, theta, y_opp in points:
                hit = states.get((y_opp, theta))
                if hit is None:
                    entries = None
                    break
                entries.append((p, hit[0], hit[1], theta))
            if entries:
                return Belief.mixture(entries)
        else:
            states = self._states(j, alpha, beta)
        # no faithful image of the source belief: any belief that supports the action
        self.fallbacks += 1
        keys = sorted(states)
        if not keys:
            return None
        chosen = self.action(j, alpha, beta)
        vj = self.game._v_int[j]
        acts = members(own(own_tok))
        pay = [[vj[t][y[:j] + (a,) + y[j + 1 :]] for y, t in keys] for a in acts]
        q = best_response_belief(pay, acts.index(chosen))
        if q is None:
            y, t = keys[0]
            return Belief.point(states[keys[0]][0], states[keys[0]][1], t)
        return Belief.mixture([(p, states[k][0], states[k][1], k[1]) for p, k in zip(q, keys) if p > 0])

    def _src_y(self, j: int, profile: tuple, msgs: tuple) -> tuple:
        game = self.game
        return tuple(
            self.source.action(i, observe_announcement(game, i, profile), observe_communication(game, i, msgs)) if i != j else -1
            for i in range(self.J)
        )

    def _source_points(self, j: int, alpha: Any, beta: Any) -> list | None:
        """The source belief at the translated observation: (prob, profile, msgs, theta, y_opp)."""
        game = self.game
        sa, sb = self.src_obs(j, alpha, beta)
        b = self.source.belief(j, sa, sb)
        if b is not None:
            return [(pt.prob, pt.profile, pt.messages, pt.theta, self._src_y(j, pt.profile, pt.messages)) for pt in b.points]
        # the source answered with Bayes: rebuild its posterior
        own = sa[j] if self.pub_ann else sa
        anchor = self.src_profile[:j] + (own,) + self.src_profile[j + 1 :]
        if self.pub_ann and tuple(sa) != anchor:
            return None
        hits = []
        for t in range(game.n_types):
            m = tuple(self.source.message(anchor, t))
            if observe_communication(game, j, m) == sb:
                hits.append((t, m))
        if not hits:
            return None
        total = sum(game.prior[t] for t, _ in hits)
        return [(game.prior[t] / total, anchor, m, t, self._src_y(j, anchor, m)) for t, m in hits]

    def _direct(self, j: int, alpha: Any, beta: Any, points: list) -> Belief | None:
        """Each source point read back as one target point, if play there agrees."""
        game = self.game
        own = alpha[j] if self.pub_ann else alpha
        own_tok = beta[j] if self.pub_com else beta
        entries = []
        for p, prof, msgs, theta, y_opp in points:
            tp, tm = [], []
            for i in range(self.J):
                if i == j:
                    c, m = own, own_tok
                else:
                    if self.pub_ann:
                        c = alpha[i]
                    elif prof[i] == self.src_profile[i]:
                        c = self.profile[i]
                    else:
                        c = prof[i]
                        if self.space is None or not self.space.contains(c):
                            return None
                    if self.pub_com:
                        m = beta[i]
                    elif c == self.profile[i] or self._devinfo(c)[2] is not None:
                        m = self.lift(i, c, msgs[i], y_opp[i])
                    else:
                        m = msgs[i]
                    if not c.accepts(m):
                        return None
                tp.append(c)
                tm.append(m)
            tp, tm = tuple(tp), tuple(tm)
            for i in range(self.J):
                if i != j and self.action(i, observe_announcement(game, i, tp), observe_communication(game, i, tm)) != y_opp[i]:
                    return None
            entries.append((p, tp, tm, theta))
        return Belief.mixture(entries)

    def _states(self, j: int, alpha: Any, beta: Any) -> dict:
        """(y_opp, theta) -> a target (profile, messages) in j's information set."""
        game = self.game
        own = alpha[j] if self.pub_ann else alpha
        own_tok = beta[j] if self.pub_com else beta
        options = []
        for i in range(self.J):
            if i == j:
                options.append([(own, own_tok)])
                continue
            contracts = [alpha[i]] if self.pub_ann else [self.profile[i]] + [c for c in self.pool[i] if c != self.profile[i]]
            opts = []
            for c in contracts:
                if self.pub_com:
                    if c.accepts(beta[i]):
                        opts.append((c, beta[i]))
                else:
                    opts.extend((c, tok) for tok in c.alphabet)
            options.append(opts)
        states: dict = {}
        for combo in itertools.islice(itertools.product(*options), 20000):
            prof = tuple(c for c, _ in combo)
            msgs = tuple(m for _, m in combo)
            y = tuple(
                self.action(i, observe_announcement(game, i, prof), observe_communication(game, i, msgs)) if i != j else -1
                for i in range(self.J)
            )
            for t in range(game.n_types):
                states.setdefault((y, t), (prof, msgs))
        return states


# -- helpers -------------------------------------------------------------------------------------


def _require_verified(cert: Certificate, stage: str) -> None:
    if not cert.verified:
        raise ReplicationError(stage, "the source certificate is not verified")


def _opponent_profiles(c: tuple, space: ContractSpace | None, j: int):
    """c itself, then every unilateral deviation by a principal other than j."""
    yield c
    if space is None:
        return
    for i in range(len(c)):
        if i == j:
            continue
        for ci in space.iter(i):
            if ci != c[i]:
                yield c[:i] + (ci,) + c[i + 1 :]


def _src_play(game: Game, cand: Candidate, profile: tuple, theta: int) -> tuple[tuple, tuple]:
    m = tuple(cand.message(profile, theta))
    y = tuple(
        cand.action(i, observe_announcement(game, i, profile), observe_communication(game, i, m))
        for i in range(game.n_principals)
    )
    return m, y


def belief_pool(space: ContractSpace | None, n_principals: int) -> list[list[Contract]]:
    """Degenerate constants of the space, used to realize off-path beliefs."""
    pools: list[list[Contract]] = [[] for _ in range(n_principals)]
    if space is None:
        return pools
    parts = space.parts if isinstance(space, UnionSpace) else [space]
    for part in parts:
        for j in range(n_principals):
            if isinstance(part, (ConstantsSpace, FullRecStarSpace)):
                pools[j].extend(ConstantsSpace(part.n_actions).iter(j))
            elif isinstance(part, GeneralSpace):
                pools[j].extend(part.constant(j, y) for y in range(part.n_actions[j]))
            elif isinstance(part, MenuSpace):
                pools[j].extend(menu(j, [y]) for y in range(part.n_actions[j]))
    return pools


def _finish(
    kind: str,
    source: Certificate,
    cand: Translated,
    on_space: ContractSpace | None,
    dev_space: ContractSpace | None,
    gamma: dict,
    translators: dict,
    sanity: dict,
    domain: str,
    notes: list[str],
    jobs: int = 1,
) -> ReplicationMap:
    target = verify(source.game, cand, dev_space, on_space, jobs=jobs)
    if cand.fallbacks:
        notes.append(f"{cand.fallbacks} off-path beliefs chosen by support search, not transported")
    if cand.reoptimized:
        notes.append(f"agent re-optimized at {cand.reoptimized} (profile, type) pairs")
    return ReplicationMap(kind, source, target, gamma, translators, sanity, domain, notes)


# -- on-path reductions --------------------------------------------------------------------------


def reduce_on_path_to_R(
    cert: Certificate,
    source_space: ContractSpace,
    dev_space: ContractSpace | None = None,
    *,
    jobs: int = 1,
) -> ReplicationMap:
    """Replace each on-path contract by the recommendation contract it induces.

    K_j collects ``[c_j(s_j), t_j]`` over on-path play and every deviation
    of the other principals in ``source_space``, for every type. ``zeta_inv``
    sends each token to its first generator, on-path play first.
    """
    stage = "on_path_to_R"
    _require_verified(cert, stage)
    game = cert.game
    src = cert.candidate
    c = tuple(src.profile)
    dev_space = source_space if dev_space is None else dev_space
    target_profile = []
    down, ups, zeta_inv = [], [], {}
    sanity: dict = {}
    for j in range(game.n_principals):
        first: dict = {}
        gens: dict = {}
        for prof in _opponent_profiles(c, source_space, j):
            for t in range(game.n_types):
                m, y = _src_play(game, src, prof, t)
                tok = ("R", c[j](m[j]), y[j])
                first.setdefault(tok, (prof, t, m[j]))
                gens.setdefault((m[j], y[j]), tok)
        K = sorted(first, key=token_order)
        cj_hat = rec_contract(j, K)
        target_profile.append(cj_hat)
        tau = {tok: first[tok][2] for tok in K}
        down.append(tau)
        zeta_inv[j] = {tok: first[tok][0] for tok in K}
        by_msg: dict = {}
        for tok in K:
            by_msg.setdefault(tau[tok], tok)

        def up(s: Any, y: int, cj=c[j], K=frozenset(K), tau=tau, by_msg=by_msg) -> Any:
            tok = ("R", cj(s), y)
            if tok in K and tau[tok] == s:
                return tok
            if s in by_msg:
                return by_msg[s]
            if tok in K:
                return tok
            return min((k for k in K if k[1] == cj(s)), key=token_order, default=min(K, key=token_order))

        ups.append(up)
        sanity[f"tau image-preserving ({game.principals[j]})"] = all(c[j](tau[tok]) == tok[1] for tok in K)
        sanity[f"zeta onto K ({game.principals[j]})"] = set(first) == set(K)
    lossy = str(game.protocol) == "private-public"
    cand = Translated(game, src, target_profile, down, ups, space=dev_space, reoptimize=lossy)
    gamma = {j: (target_profile[j], c[j]) for j in range(game.n_principals)}
    translators = {"tau": {j: down[j] for j in range(game.n_principals)}}
    domain = f"on-path play and unilateral deviations in {source_space.label()}, every type"
    notes = [
        "zeta^-1 picks the first generator of each token: on-path play, then deviations in enumeration order",
    ]
    rmap = _finish(stage, cert, cand, RecSpace(game_actions(game)), dev_space, gamma, translators, sanity, domain, notes, jobs)
    rmap.candidate = cand
    return rmap


def reduce_on_path_to_P(
    cert: Certificate,
    source_space: ContractSpace,
    dev_space: ContractSpace | None = None,
    *,
    jobs: int = 1,
) -> ReplicationMap:
    """Replace each on-path contract by the menu of actions it realizes.

    Only sound under private announcement and private communication, where a
    principal's Stage-3 action depends on nothing but his own message.
    """
    stage = "on_path_to_P"
    _require_verified(cert, stage)
    game = cert.game
    if game.protocol.public_announcement or game.protocol.public_communication:
        raise ReplicationError(stage, f"needs private announcement and communication, got {game.protocol}")
    src = cert.candidate
    c = tuple(src.profile)
    dev_space = source_space if dev_space is None else dev_space
    target_profile, down, ups = [], [], []
    sanity: dict = {}
    for j in range(game.n_principals):
        first: dict = {}
        for prof in _opponent_profiles(c, source_space, j):
            for t in range(game.n_types):
                m, y = _src_play(game, src, prof, t)
                first.setdefault(y[j], m[j])
        cj_hat = menu(j, first)
        target_profile.append(cj_hat)
        tau = {("y", a): first[a] for a in first}
        down.append(tau)
        ups.append(lambda s, y: ("y", y))
        sanity[f"tau realizes the menu ({game.principals[j]})"] = all(
            src.action(j, c[j], tau[("y", a)]) == a for a in first
        )
    cand = Translated(game, src, target_profile, down, ups, space=dev_space)
    gamma = {j: (target_profile[j], c[j]) for j in range(game.n_principals)}
    translators = {"tau": {j: down[j] for j in range(game.n_principals)}}
    domain = f"on-path play and unilateral deviations in {source_space.label()}, every type"
    rmap = _finish(stage, cert, cand, MenuSpace(game_actions(game)), dev_space, gamma, translators, sanity, domain, [], jobs)
    rmap.candidate = cand
    return rmap


def game_actions(game: Game) -> list[int]:
    return [game.n_actions(j) for j in range(game.n_principals)]


# -- extension of on-path contracts --------------------------------------------------------------


def _find_extension(space: ContractSpace, c: Contract) -> Contract | None:
    if space.contains(c):
        return c
    best = None
    for cand in space.iter(c.owner):
        if cand.image_set == c.image_set and is_extension(cand, c):
            if best is None or len(cand.alphabet) < len(best.alphabet):
                best = cand
                if len(best.alphabet) == len(c.alphabet):
                    break
    return best


def extend_equilibrium(
    cert: Certificate,
    target_space: ContractSpace,
    dev_space: ContractSpace | None = None,
    *,
    jobs: int = 1,
) -> ReplicationMap:
    """Swap each on-path contract for an extension of it in ``target_space``.

    Redundant messages are read through iota; the agent writes through the
    injective section iota^-1.
    """
    stage = "extend_*"
    _require_verified(cert, stage)
    game = cert.game
    src = cert.candidate
    c = tuple(src.profile)
    source_space = cert.spaces[0]
    if source_space is not None:
        rel = relation_check(target_space, source_space, "*")
        if not rel.holds:
            bad = rel.counterexample
            raise ReplicationError(
                stage,
                f"{target_space.label()} has no extension of {contract_str(bad, game.actions[bad.owner])} from {source_space.label()}",
            )
    target_profile, down, ups = [], [], []
    sanity: dict = {}
    iotas, sections = {}, {}
    for j in range(game.n_principals):
        ext = _find_extension(target_space, c[j])
        if ext is None:
            raise ReplicationError(stage, f"no extension of principal {game.principals[j]}'s contract in {target_space.label()}")
        iota = extension_map(ext, c[j])
        section = section_map(ext, c[j])
        target_profile.append(ext)
        down.append(iota)
        ups.append(lambda s, y, section=section: section[s])
        iotas[j], sections[j] = iota, section
        sanity[f"iota onto ({game.principals[j]})"] = set(iota.values()) == set(c[j].alphabet)
        sanity[f"iota o iota^-1 = id ({game.principals[j]})"] = all(iota[section[m]] == m for m in c[j].alphabet)
        sanity[f"iota image-preserving ({game.principals[j]})"] = all(ext(m) == c[j](iota[m]) for m in ext.alphabet)
    cand = Translated(game, src, target_profile, down, ups, space=dev_space)
    gamma = {j: (target_profile[j], c[j]) for j in range(game.n_principals)}
    rmap = _finish(
        stage,
        cert,
        cand,
        target_space,
        dev_space,
        gamma,
        {"iota": iotas, "iota_inv": sections},
        sanity,
        f"on-path contracts only; deviations unchanged",
        [],
        jobs,
    )
    rmap.candidate = cand
    return rmap


# -- deviation spaces ----------------------------------------------------------------------------


def extension_dev_map(source_dev: ContractSpace) -> DevMap:
    """psi: read a deviation as a source deviation it extends, with iota and section."""
    cache: dict = {}
    index: dict = {}
    for j in range(len(source_dev.n_actions)):
        for c in source_dev.iter(j):
            index.setdefault((j, c.image_set), []).append(c)

    def psi(c: Contract) -> tuple:
        for cand in index.get((c.owner, c.image_set), []):
            if is_extension(c, cand):
                return cand, extension_map(c, cand), section_map(c, cand)
        raise ReplicationError("extend_**", f"deviation {c!r} extends no contract of {source_dev.label()}")

    def cached(c: Contract) -> tuple:
        if c not in cache:
            cache[c] = psi(c)
        return cache[c]

    return cached


def replace_deviation_space(
    rmap_or_cert: ReplicationMap | Certificate,
    target_dev: ContractSpace,
    source_dev: ContractSpace | None = None,
    *,
    mode: str = "extension",
    on_space: ContractSpace | None = None,
    jobs: int = 1,
) -> ReplicationMap:
    """Answer every deviation in ``target_dev`` by continuation play of the source.

    ``mode="extension"``: each deviation c' is read as a source deviation
    psi(c') with c' >= psi(c'), which needs target_dev ]** source_dev.
    ``mode="embedding"``: each deviation is read as itself; the source
    strategies must be defined on arbitrary contracts.
    """
    stage = "extend_**"
    if isinstance(rmap_or_cert, ReplicationMap):
        base_cand = rmap_or_cert.candidate
        cert = rmap_or_cert.target
    else:
        cert = rmap_or_cert
        base_cand = None
    _require_verified(cert, stage)
    game = cert.game
    notes: list[str] = []
    if mode == "extension":
        if source_dev is None:
            raise ReplicationError(stage, "extension mode needs the source deviation space")
        if str(game.protocol) == "private-public":
            raise ReplicationError(stage, "deviation replacement by extension does not apply under private announcement with public communication")
        rel = relation_check(target_dev, source_dev, "**")
        if not rel.holds:
            bad = rel.counterexample
            raise ReplicationError(
                stage,
                f"deviation {contract_str(bad, game.actions[bad.owner])} in {target_dev.label()} extends no contract of {source_dev.label()}",
            )
        dev_map = extension_dev_map(source_dev)
        domain = f"every deviation in {target_dev.label()} read through psi into {source_dev.label()}"
    elif mode == "embedding":
        dev_map = _embed
        domain = f"every deviation in {target_dev.label()} read as itself"
    else:
        raise ReplicationError(stage, f"unknown mode {mode!r}")
    if isinstance(base_cand, Translated):
        cand = Translated(
            game, base_cand.source, base_cand.profile, base_cand.down, base_cand.up, dev_map, target_dev, base_cand.reoptimize
        )
    else:
        src = cert.candidate
        n = game.n_principals
        cand = Translated(game, src, src.profile, [None] * n, [None] * n, dev_map, target_dev)
    gamma = {j: (cand.profile[j], cand.src_profile[j]) for j in range(game.n_principals)}
    rmap = _finish(stage, cert, cand, on_space, target_dev, gamma, {}, {}, domain, notes, jobs)
    rmap.candidate = cand
    return rmap


# -- pipelines -----------------------------------------------------------------------------------

PIPELINES = {
    "T2": ("R", "F", MODELS_T2),
    "T3": ("P", "F", ("private-private",)),
    "T5": ("R", "F*", ("private-public",)),
}


def default_theorem(protocol: str) -> str:
    return {"private-private": "T3", "private-public": "T5"}.get(protocol, "T2")


def canonicalize(
    cert: Certificate,
    source_space: ContractSpace,
    theorem: str | None = None,
    *,
    jobs: int = 1,
) -> ReplicationMap:
    """Carry a verified [A(k), A(k)] equilibrium into the model's canonical pair.

    T2: on-path contracts to recommendation contracts, deviations over F.
    T3: on-path contracts to menus, deviations over F (private-private).
    T5: on-path contracts to recommendation contracts, deviations over F*
    (private-public).
    """
    start = time.perf_counter()
    game = cert.game
    protocol = str(game.protocol)
    theorem = theorem or default_theorem(protocol)
    if theorem not in PIPELINES:
        raise ReplicationError("canonicalize", f"unknown pipeline {theorem!r}")
    on, dev, models = PIPELINES[theorem]
    if protocol not in models:
        raise ReplicationError("canonicalize", f"{theorem} does not cover the {protocol} model")
    if not isinstance(source_space, GeneralSpace) or source_space.delegated:
        raise ReplicationError("canonicalize", "the source must be a general-contract equilibrium over A(k)")
    if any(not source_space.contains(c) for c in cert.candidate.profile):
        raise ReplicationError("canonicalize", f"on-path contracts are not in {source_space.label()}")
    _require_verified(cert, "canonicalize")
    n = game_actions(game)
    dev_space = FullRecSpace(n) if dev == "F" else FullRecStarSpace(n)
    if on == "R":
        stage_dev = source_space
        if protocol == "private-public":
            # opponents seen only through their messages: beliefs need contracts that accept any token
            stage_dev = UnionSpace([source_space, ConstantsSpace(n)], f"{source_space.label()}+const")
        first = reduce_on_path_to_R(cert, source_space, stage_dev)
    else:
        first = reduce_on_path_to_P(cert, source_space)
    if not first.ok:
        raise ReplicationError(first.kind, "the reduced candidate does not re-verify")
    on_space = RecSpace(n) if on == "R" else MenuSpace(n)
    second = replace_deviation_space(first, dev_space, mode="embedding", on_space=on_space, jobs=jobs)
    kind = "canonicalize_Fstar" if dev == "F*" else f"canonicalize_{on}{dev}"
    out = ReplicationMap(
        kind,
        cert,
        second.target,
        first.gamma,
        first.translators,
        {**first.sanity, **second.sanity},
        f"{theorem}: {first.domain}; {second.domain}",
        first.notes + second.notes,
        [first, second],
        second.candidate,
    )
    out.notes.append(f"pipeline time {time.perf_counter() - start:.1f}s")
    return out
