"""Knowledge-base validation against the reliability conditions C1-C4."""

from __future__ import annotations

from dataclasses import dataclass, field

from .domains import validate_axioms
from .knowledge import KnowledgeBase
from .meta import MONOTONE, NON_MONOTONE, TRANSITIVE
from .traversal import cycle_check

# A4 (the Heyting adjunction) fails on any non-distributive universe, which
# includes every tree with two incomparable branches; it is reported, not gated.
ADVISORY_AXIOMS = ("A4",)


@dataclass
class Check:
    name: str
    passed: bool
    gating: bool = True
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "gating": self.gating, **self.detail}


@dataclass
class ValidationReport:
    checks: list[Check]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.gating)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if c.gating and not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "failures": self.failures,
                "checks": {c.name: c.to_dict() for c in self.checks}}


def _s(x) -> object:
    if isinstance(x, (list, tuple)):
        return [_s(v) for v in x]
    return x if isinstance(x, (int, float, bool)) or x is None else str(x)


def validate_kb(kb: KnowledgeBase, *, samples: int = 5000, seed: int = 0) -> ValidationReport:
    u, store, typing = kb.universe, kb.store, kb.typing
    checks: list[Check] = []

    checks.append(Check("load", not kb.problems,
                        detail={"problems": [str(p) for p in kb.problems]}))

    axioms = validate_axioms(u, samples=samples, seed=seed)
    for name, res in sorted(axioms.results.items()):
        checks.append(Check(f"axiom_{name}", res.passed, name not in ADVISORY_AXIOMS,
                            {"checked": res.checked, "witnesses": _s(res.witnesses[:10])}))

    if u.cycle:
        height = None
        c1 = False
    else:
        height = u.height()
        c1 = height <= u.h_max
    checks.append(Check("C1_finite_depth", c1, detail={
        "height": height, "h_max": u.h_max,
        "witnesses": [] if c1 else [f"height {height} exceeds h_max {u.h_max}" if height
                                    else "cyclic domain order: " + " -> ".join(map(str, u.cycle))],
    }))

    # relations stored in a fiber that has subdomains could be inherited;
    # subject facts are observations and are skipped
    fact_keys = {(f.as_triple().key, f.domain) for f in store.facts}
    undeclared = set()
    for d in store.populated_domains():
        if len(u.lower_set(d) - {d}) <= 1:  # only ⊥ below
            continue
        for t in store.edges(d):
            if (t.key, d) in fact_keys:
                continue
            if not typing.declarations(t.relation, MONOTONE, d) and \
                    not typing.declarations(t.relation, NON_MONOTONE, d):
                undeclared.add((t.relation, str(d)))
    checks.append(Check("C2_declared_monotonicity", not undeclared, gating=False, detail={
        "undeclared": [f"{r}@{d}" for r, d in sorted(undeclared)],
        "default": NON_MONOTONE,
    }))

    meta = typing.validate()
    checks.append(Check("C3_meta_bounded", True, detail={
        "relations": meta["relations"], "entries": meta["entries"],
    }))
    checks.append(Check("tiers", meta["tiers_disjoint"] and meta["projection_order_preserving"],
                        detail={"overlap": meta["overlap"],
                                "order_violations": meta["order_violations"],
                                "homomorphism_gaps": meta["homomorphism_gaps"]}))

    cycles = []
    for rel in typing.relations():
        for d in sorted(u.paths):
            if typing.is_transitive(rel, d):
                cyc = cycle_check(store, rel, d)
                if cyc:
                    cycles.append({"relation": rel, "domain": str(d), "cycle": cyc})
    transitive = sorted({e.relation for e in typing.entries if e.prop == TRANSITIVE})
    checks.append(Check("C4_acyclic", not cycles,
                        detail={"transitive_relations": transitive, "cycles": cycles}))
    return ValidationReport(checks)
