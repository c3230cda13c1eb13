"""Corpus-wide runs of the discrete identities, shared by the CLI and tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import dmall as D


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    worst: float = 0.0
    worst_case: str = ""
    nonexact: int = 0
    extra: dict = field(default_factory=dict)

    def update(self, case: str, residual: float) -> None:
        self.cases += 1
        r = abs(residual)
        if r > self.worst or math.isnan(r):
            self.worst, self.worst_case = r, case

    def passed(self, tol: float = D.EXACT_TOL) -> bool:
        return self.nonexact == 0 and self.worst <= tol


def singles(corpus) -> list[D.CorpusEntry]:
    """Entries with G = 1: plain integrands."""
    return [e for e in corpus if e.G.expr is D.E.ONE]


def ibp_suite(corpus) -> SuiteResult:
    res = SuiteResult("integration by parts")
    for e in corpus:
        c = D.check_ibp(e.G, e.F)
        if c.route != "exact":
            res.nonexact += 1
        res.update(e.id, c.residual)
    return res


def isometry_suite(entries) -> SuiteResult:
    """``entries``: (tag, F) pairs."""
    res = SuiteResult("extended isometry")
    slack = math.inf
    for tag, F in entries:
        c = D.check_isometry(F)
        if c.route != "exact":
            res.nonexact += 1
        res.update(tag, c.residual)
        slack = min(slack, c.slack)
    res.extra["min_slack"] = slack
    return res


def dint_suite(entries, points: int = 100, seed: int = 0) -> SuiteResult:
    res = SuiteResult("derivative of the Skorokhod integral")
    for tag, F in entries:
        g = F[0].grid
        for k in range(1, g.N + 1):
            for c in range(1, g.m + 1):
                res.update(f"{tag}:d{k}_{c}", D.dint_identity_check(F, k, c, points, seed))
    return res


def refinement_suite(entries, points: int = 100, seed: int = 0) -> dict[str, SuiteResult]:
    out = {k: SuiteResult(f"refinement {k}") for k in ("derivative", "skorokhod", "expectation")}
    for tag, F in entries:
        g = F[0].grid
        for s in range(1, g.N + 1):
            r = D.refinement_check(F, s, points, seed)
            case = f"{tag}:split{s}"
            out["derivative"].update(case, r.derivative)
            out["skorokhod"].update(case, r.skorokhod)
            if math.isnan(r.expectation):
                out["expectation"].nonexact += 1
            else:
                out["expectation"].update(case, r.expectation)
    return out


def exact_corpus(grids=D.DEFAULT_GRIDS, max_degree: int = 4, points: int = 100, seed: int = 0,
                 refinement: bool = True) -> dict[str, SuiteResult]:
    corpus = D.polynomial_corpus(grids, max_degree)
    ones = [(e.id, e.F) for e in singles(corpus)]
    out = {
        "ibp": ibp_suite(corpus),
        "isometry": isometry_suite(ones + D.isometry_corpus(grids)),
        "dint": dint_suite(ones, points, seed),
    }
    if refinement:
        out.update({f"refine_{k}": v for k, v in refinement_suite(ones, points, seed).items()})
    return out


def file_corpus(entries, points: int = 100, seed: int = 0) -> dict[str, SuiteResult]:
    """Every identity on a parsed corpus file; MC routes are counted, not failed."""
    ibp = SuiteResult("integration by parts")
    for e in entries:
        c = D.check_ibp(e.G, e.F)
        if c.route == "exact":
            ibp.update(e.id, c.residual)
        else:
            ibp.nonexact += 1
            ibp.extra.setdefault("mc_max_abs_z", 0.0)
            ibp.extra["mc_max_abs_z"] = max(ibp.extra["mc_max_abs_z"], abs(c.z))
    ones = [(e.id, e.F) for e in entries]
    return {"ibp": ibp, "dint": dint_suite(ones, points, seed)}
