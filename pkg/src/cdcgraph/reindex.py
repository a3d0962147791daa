"""Knowledge inheritance along the domain order.

``alpha`` looks a child-scoped triple up in a parent fiber; ``gamma_tau``
copies a parent triple into a child domain, but only for relations typed
monotone. Inherited triples are computed on demand and never written back.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .domains import DomainPath, as_domain
from .errors import IncomparableDomains
from .store import ASSERTED, INHERITED, FiberStore, Provenance, Triple


def alpha(store: FiberStore, t: Triple, d_parent: DomainPath) -> Triple | None:
    """The parent-fiber copy of ``t`` if asserted there, else None."""
    if not store.universe.leq(t.domain, d_parent):
        raise IncomparableDomains(f"{t.domain} is not below {d_parent}")
    if d_parent == t.domain:
        return t
    return store.get(t.key, d_parent)


def gamma_tau(store: FiberStore, t: Triple, d_child: DomainPath) -> Triple | None:
    """Child-scoped copy of ``t`` for monotone relations, None otherwise."""
    if not store.universe.leq(d_child, t.domain):
        raise IncomparableDomains(f"{d_child} is not below {t.domain}")
    if d_child == t.domain:
        return t
    if not store.typing.is_monotone(t.relation, d_child):
        return None
    return t.at(d_child, INHERITED)


@dataclass(frozen=True, order=True)
class Hit:
    target: str
    origin: DomainPath
    provenance: Provenance
    confidence: float = 1.0


@dataclass
class InheritanceAnswer:
    hits: list[Hit]
    steps: int = 0  # ancestor levels consulted
    blocked: list[Triple] = field(default_factory=list)

    @property
    def targets(self) -> list[str]:
        return sorted({h.target for h in self.hits})


def _ancestor_levels(store: FiberStore, d: DomainPath) -> list[list[DomainPath]]:
    ranks = store.universe.ranks()
    levels = []
    for _, group in itertools.groupby(store.universe.ancestors(d), key=lambda x: ranks[x]):
        levels.append(list(group))
    return levels


def inherited_query(store: FiberStore, concept: str, relation: str, d: DomainPath | str,
                    *, include_descendants: bool = False, typed: bool = True) -> InheritanceAnswer:
    """Native matches at ``d`` plus monotone matches inherited from ancestors.

    With ``typed=False`` every relation propagates; that is the untyped
    baseline used to show what typing prevents.
    """
    d = as_domain(d)
    with store.typing.sealed():
        if include_descendants:
            native = store.query(concept, relation, d).matches
        else:
            native = store.lookup(concept, relation, d)
        hits = {Hit(t.target, t.domain, ASSERTED, t.confidence) for t in native}
        answer = InheritanceAnswer([])
        if d.is_path:
            for level in _ancestor_levels(store, d):
                answer.steps += 1
                for parent in level:
                    for t in store.lookup(concept, relation, parent):
                        image = gamma_tau(store, t, d) if typed else t.at(d, INHERITED)
                        if image is None:
                            answer.blocked.append(t)
                        else:
                            hits.add(Hit(t.target, parent, INHERITED, t.confidence))
        answer.hits = sorted(hits)
        return answer


def inherited_fiber(store: FiberStore, d: DomainPath) -> frozenset[Triple]:
    """Triples inherited into ``d`` from every ancestor fiber (monotone only)."""
    out = set()
    with store.typing.sealed():
        for parent in store.universe.ancestors(d):
            for t in store.fiber(parent):
                image = gamma_tau(store, t, d)
                if image is not None and not store.contains(image.at(d, ASSERTED)):
                    out.add(image)
    return frozenset(out)


def entails(store: FiberStore, t1: Triple, t2: Triple) -> bool:
    """Entailment within the triple order: same fact, domain specialisation."""
    return t1.key == t2.key and store.universe.leq(t1.domain, t2.domain)


@dataclass
class GaloisReport:
    pairs_checked: int = 0
    adjunction_violations: list = field(default_factory=list)
    closure_violations: list = field(default_factory=list)
    excluded_non_monotone: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.adjunction_violations and not self.closure_violations

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "pairs_checked": self.pairs_checked,
            "adjunction_violations": [str(v) for v in self.adjunction_violations],
            "closure_violations": [str(v) for v in self.closure_violations],
            "excluded_non_monotone": sorted({str(t) for t in self.excluded_non_monotone}),
        }


def _child_triples(store: FiberStore, d: DomainPath) -> list[Triple]:
    return sorted(store.fiber(d) | inherited_fiber(store, d), key=lambda t: (t.key, t.provenance))


def galois_check(store: FiberStore, sample: int | None = None) -> GaloisReport:
    """Check the typed adjunction and the closure laws of ``gamma ∘ alpha``.

    Every comparable pair of registered domains is visited (``sample`` caps
    the number of pairs for large universes). Only monotone relations take
    part; non-monotone parent edges are listed as excluded.
    """
    report = GaloisReport()
    u = store.universe
    pairs = [(c, p) for c in sorted(u.paths) for p in sorted(u.upper_set(c))]
    if sample is not None:
        pairs = pairs[:sample]
    with store.typing.sealed():
        for d_c, d_p in pairs:
            parents = store.edges(d_p)
            children = _child_triples(store, d_c)
            for tp in parents:
                if not store.typing.is_monotone(tp.relation, d_c):
                    if d_c != d_p:
                        report.excluded_non_monotone.append(tp)
                    continue
                g = gamma_tau(store, tp, d_c)
                for tc in children:
                    if tc.relation != tp.relation:
                        continue
                    a = alpha(store, tc, d_p)
                    if a is None or g is None:
                        continue
                    report.pairs_checked += 1
                    lhs = entails(store, tc, g)
                    rhs = entails(store, a, tp)
                    if lhs != rhs:
                        report.adjunction_violations.append((tc, tp))
            for tc in children:
                if not store.typing.is_monotone(tc.relation, d_c):
                    continue
                first = _closure(store, tc, d_p)
                if first is None:
                    continue
                if not entails(store, tc, first):
                    report.closure_violations.append(("extensive", tc))
                second = _closure(store, first, d_p)
                if second != first:
                    report.closure_violations.append(("idempotent", tc))
                for other in children:
                    if other is tc or not entails(store, other, tc):
                        continue
                    img = _closure(store, other, d_p)
                    if img is not None and not entails(store, img, first):
                        report.closure_violations.append(("monotone", other, tc))
    return report


def _closure(store: FiberStore, t: Triple, d_parent: DomainPath) -> Triple | None:
    up = alpha(store, t, d_parent)
    if up is None:
        return None
    down = gamma_tau(store, up, t.domain)
    if down is None:
        return None
    # the closure lands back in the child fiber; keep the child's own record if asserted
    native = store.get(down.key, t.domain)
    return native if native is not None else down
