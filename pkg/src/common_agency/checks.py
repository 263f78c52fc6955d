"""Run a scenario's expectations and collect a deterministic report."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from .contracts import ContractSpace, make_space, token_str
from .equilibrium import Certificate, verify
from .play import allocation_labels, parse_allocation
from .replication import ReplicationMap, canonicalize
from .scenarios import Expectation, Scenario, get_scenario, registry
from .search import Budget, SearchOutcome, SearchProblem, implementable
from .serialize import stable_json, verdict_to_dict


@dataclass
class CheckResult:
    scenario: str
    name: str
    kind: str
    protocol: str
    spaces: str
    caps: dict
    passed: bool
    inconclusive: bool
    observed: dict
    digest: str
    elapsed: float

    def record(self) -> dict:
        return {
            "scenario": self.scenario,
            "check": self.name,
            "kind": self.kind,
            "protocol": self.protocol,
            "spaces": self.spaces,
            "caps": self.caps,
            "passed": self.passed,
            "inconclusive": self.inconclusive,
            "observed": self.observed,
            "digest": self.digest,
            "elapsed": round(self.elapsed, 3),
        }


@dataclass
class Report:
    scenario: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def inconclusive(self) -> bool:
        return any(c.inconclusive for c in self.checks)

    def records(self) -> list[dict]:
        return [c.record() for c in self.checks]


def digest(data: Any) -> str:
    """Short hash of a JSON-compatible value, ignoring timing fields."""
    text = stable_json([data])
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _n_actions(game) -> list[int]:
    return [game.n_actions(j) for j in range(game.n_principals)]


def expectation_spaces(sc: Scenario, exp: Expectation, game) -> tuple[ContractSpace, ContractSpace]:
    k = exp.k if exp.k is not None else sc.k
    names = sc.names if (exp.k is None or exp.k == sc.k) else None
    n = _n_actions(game)
    on = make_space(exp.on, n, k=k, r_cap=exp.r_cap, names=names)
    dev = make_space(exp.dev, n, k=k, r_cap=exp.r_cap, names=names)
    return on, dev


# Equilibria are expensive to canonicalize; acceptance reuses one result per key.
_CANONICAL: dict[tuple, ReplicationMap] = {}


def registry_certificate(sc: Scenario, exp: Expectation, jobs: int = 1) -> Certificate:
    game = sc.game(exp.protocol)
    k = exp.k if exp.k is not None else sc.k
    cand = sc.candidate(exp.candidate, game, k)
    on, dev = expectation_spaces(sc, exp, game)
    return verify(game, cand, dev, on, jobs=jobs)


def canonical_map(sc: Scenario, exp: Expectation, theorem: str | None = None, jobs: int = 1) -> ReplicationMap:
    key = (sc.id, exp.protocol, exp.k, exp.candidate, theorem)
    hit = _CANONICAL.get(key)
    if hit is None:
        game = sc.game(exp.protocol)
        k = exp.k if exp.k is not None else sc.k
        space = sc.space(game, k)
        cert = verify(game, sc.candidate(exp.candidate, game, k), space, space, jobs=jobs)
        hit = canonicalize(cert, space, theorem, jobs=jobs)
        _CANONICAL[key] = hit
    return hit


def _violation_matches(game, cert: Certificate, want: dict) -> tuple[bool, dict]:
    for v in cert.violations:
        if v.condition != want.get("condition", v.condition):
            continue
        better = v.detail.get("better")
        labels = None
        if better is not None:
            labels = [token_str(tok, game.actions[j]) for j, tok in enumerate(better)]
        if "better" in want and labels != want["better"]:
            continue
        if "gap" in want and str(v.gap) != want["gap"]:
            continue
        return True, {"condition": v.condition, "who": v.who, "better": labels, "gap": str(v.gap)}
    return False, {}


def run_expectation(sc: Scenario, exp: Expectation, jobs: int = 1, budget: Budget | None = None) -> CheckResult:
    start = time.perf_counter()
    game = sc.game(exp.protocol)
    z = parse_allocation(game, exp.target) if exp.target is not None else None
    on, dev = expectation_spaces(sc, exp, game)
    spaces = f"[{on.label()}, {dev.label()}]"
    caps = {**on.caps(), **dev.caps()}
    inconclusive = False
    observed: dict
    if exp.kind in ("verified", "violation"):
        cert = registry_certificate(sc, exp, jobs)
        caps = cert.caps
        spaces = f"[{cert.on_space}, {cert.dev_space}]"
        verdict = verdict_to_dict(cert)
        observed = {"verified": cert.verified, "allocation": verdict["allocation"], "violations": cert.violation_count}
        if exp.kind == "verified":
            passed = cert.verified and cert.allocation == z
        else:
            passed, hit = _violation_matches(game, cert, exp.detail)
            passed = passed and not cert.verified
            observed["matched"] = hit
        dig = digest(verdict)
    elif exp.via == "canonicalize":
        rmap = canonical_map(sc, exp, jobs=jobs)
        target = rmap.target
        caps = target.caps
        spaces = f"[{target.on_space}, {target.dev_space}]"
        status = "Found" if rmap.ok else "NotFound"
        observed = {
            "status": status,
            "via": rmap.kind,
            "allocation": None if target.allocation is None else allocation_labels(game, target.allocation),
            "profiles_checked": target.checks.get("profiles"),
            "sanity": rmap.sanity,
        }
        passed = (status == "Found") == (exp.kind == "found") and target.allocation == z
        dig = digest(verdict_to_dict(target))
    else:
        out = implementable(SearchProblem(game, z, on, dev, budget=budget or Budget()))
        caps = out.caps
        observed = {"status": out.status, "examined": out.examined, "refuted": len(out.refutations)}
        inconclusive = out.status == "Inconclusive"
        want = "Found" if exp.kind == "found" else "NotFound"
        passed = out.status == want
        if passed and "deviator" in exp.detail:
            devs = [r for r in out.refutations if r.reason == "deviation"]
            passed = bool(devs) and all(r.detail["deviator"] == exp.detail["deviator"] for r in devs)
            if devs:
                observed["deviation"] = devs[0].detail
        dig = digest(_search_digest(out))
    return CheckResult(
        scenario=sc.id,
        name=exp.name,
        kind=exp.kind,
        protocol=exp.protocol,
        spaces=spaces,
        caps=caps,
        passed=passed,
        inconclusive=inconclusive,
        observed=observed,
        digest=dig,
        elapsed=time.perf_counter() - start,
    )


def _search_digest(out: SearchOutcome) -> dict:
    summary = out.summary()
    summary["refutations"] = [[r.reason, json.dumps(r.detail, sort_keys=True, default=str)] for r in out.refutations]
    return summary


def reproduce(
    sid: str,
    jobs: int = 1,
    include_extra: bool = False,
    budget: Budget | None = None,
    on_result: Callable[[CheckResult], None] | None = None,
) -> Report:
    """Run every headline expectation of a scenario (``all`` runs the registry)."""
    scenarios = registry() if sid == "all" else [get_scenario(sid)]
    report = Report(sid)
    for sc in scenarios:
        for exp in sc.expectations:
            if exp.extra and not include_extra:
                continue
            result = run_expectation(sc, exp, jobs, budget)
            report.checks.append(result)
            if on_result is not None:
                on_result(result)
    return report
