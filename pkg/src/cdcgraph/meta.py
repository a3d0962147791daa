"""Meta tier: relation properties declared per meta-domain, and the typing
function that decides whether a relation inherits into subdomains."""

from __future__ import annotations

import itertools
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator

from .domains import BOTTOM, TOP, DomainPath, DomainUniverse, as_domain
from .errors import NotMetaTier, SessionSealed, TierViolation

MONOTONE = "monotone"
NON_MONOTONE = "non-monotone"
TRANSITIVE = "transitive"


@dataclass(frozen=True)
class MetaEntry:
    relation: str
    prop: str
    domain: DomainPath


class TypingTable:
    """Registry of meta-tier domains, their projection, and relation properties.

    ``tau`` uses a closed default: a relation is non-monotone unless some
    governing meta-domain declares it monotone. A meta-domain governs an
    object domain ``d`` when ``d`` lies below its projection.
    """

    def __init__(self, universe: DomainUniverse):
        self.universe = universe
        self._projection: dict[DomainPath, DomainPath] = {}
        self._props: dict[str, dict[DomainPath, set[str]]] = {}
        self._entries: list[MetaEntry] = []
        self._sealed = 0
        self._cache: dict[tuple[str, str, DomainPath | None], bool] = {}

    # -- tiers ---------------------------------------------------------

    def declare_tier(self, d_meta: DomainPath | str, scope: DomainPath | str = TOP) -> None:
        d_meta, scope = as_domain(d_meta), as_domain(scope)
        self._require_unsealed()
        if not d_meta.is_path:
            raise TierViolation("⊤/⊥ cannot be declared meta-tier")
        if d_meta in self.universe.paths:
            raise TierViolation(f"{d_meta} is an object-tier domain")
        if scope.is_bottom:
            raise TierViolation("a meta domain cannot project to ⊥")
        self.universe._check(scope)
        self._projection[d_meta] = scope
        self._cache.clear()

    def is_meta(self, d: DomainPath) -> bool:
        return d in self._projection

    def tier_of(self, d: DomainPath) -> str:
        if d in self._projection:
            return "meta"
        self.universe._check(d)
        return "obj"

    @property
    def meta_domains(self) -> list[DomainPath]:
        return sorted(self._projection)

    def meta_universe(self) -> DomainUniverse:
        return DomainUniverse(self._projection)

    def project(self, d_meta: DomainPath | str) -> DomainPath:
        d_meta = as_domain(d_meta)
        try:
            return self._projection[d_meta]
        except KeyError:
            raise NotMetaTier(f"{d_meta} is not a meta-tier domain") from None

    # -- properties ----------------------------------------------------

    def declare_meta(self, relation: str, prop: str, d_meta: DomainPath | str) -> None:
        d_meta = as_domain(d_meta)
        self._require_unsealed()
        if d_meta not in self._projection:
            raise NotMetaTier(f"{d_meta} is not a meta-tier domain")
        self._props.setdefault(relation, {}).setdefault(d_meta, set()).add(prop)
        self._entries.append(MetaEntry(relation, prop, d_meta))
        self._cache.clear()

    @property
    def entries(self) -> list[MetaEntry]:
        return list(self._entries)

    def relations(self) -> list[str]:
        return sorted(self._props)

    def governs(self, d_meta: DomainPath, d: DomainPath) -> bool:
        return self.universe.leq(d, self._projection[d_meta])

    def declarations(self, relation: str, prop: str, at: DomainPath | None = None) -> list[MetaEntry]:
        """Meta entries declaring ``prop`` for ``relation`` that govern ``at``."""
        out = []
        for d_meta, props in sorted(self._props.get(relation, {}).items()):
            if prop in props and (at is None or self.governs(d_meta, at)):
                out.append(MetaEntry(relation, prop, d_meta))
        return out

    def has_property(self, relation: str, prop: str, at: DomainPath | None = None) -> bool:
        key = (relation, prop, at)
        hit = self._cache.get(key)
        if hit is None:
            hit = bool(self.declarations(relation, prop, at))
            self._cache[key] = hit
        return hit

    def properties(self, relation: str, at: DomainPath | None = None) -> frozenset[str]:
        out: set[str] = set()
        for d_meta, props in self._props.get(relation, {}).items():
            if at is None or self.governs(d_meta, at):
                out |= props
        return frozenset(out)

    def tau(self, relation: str, at: DomainPath | None = None) -> str:
        return MONOTONE if self.has_property(relation, MONOTONE, at) else NON_MONOTONE

    def is_monotone(self, relation: str, at: DomainPath | None = None) -> bool:
        return self.has_property(relation, MONOTONE, at)

    def is_transitive(self, relation: str, at: DomainPath | None = None) -> bool:
        return self.has_property(relation, TRANSITIVE, at)

    # -- session lifecycle ---------------------------------------------

    @property
    def is_sealed(self) -> bool:
        return self._sealed > 0

    def seal(self) -> None:
        self._sealed += 1

    def unseal(self) -> None:
        self._sealed = max(0, self._sealed - 1)

    @contextmanager
    def sealed(self) -> Iterator["TypingTable"]:
        """Freeze the table for the duration of a reasoning run."""
        self.seal()
        try:
            yield self
        finally:
            self.unseal()

    def _require_unsealed(self) -> None:
        if self._sealed:
            raise SessionSealed("typing table is sealed for a reasoning session")

    def rebase(self, universe: DomainUniverse) -> None:
        missing = self.universe.paths - universe.paths
        if missing:
            raise ValueError(f"new universe drops domains: {sorted(map(str, missing))}")
        self.universe = universe
        self._cache.clear()

    # -- diagnostics ---------------------------------------------------

    def validate(self) -> dict:
        """Tier disjointness, order preservation of the projection, homomorphism gaps."""
        overlap = sorted(str(d) for d in self._projection if d in self.universe.paths)
        order_bad = []
        hom_gaps = []
        mu = self.meta_universe()
        metas = self.meta_domains
        for a, b in itertools.product(metas, repeat=2):
            pa, pb = self._projection[a], self._projection[b]
            if mu.leq(a, b) and not self.universe.leq(pa, pb):
                order_bad.append(f"{a} <= {b} but π({a})={pa} ⋢ π({b})={pb}")
            m = mu.meet(a, b)
            pm = BOTTOM if m.is_bottom else self._projection.get(m, TOP)
            if pm != self.universe.meet(pa, pb):
                hom_gaps.append(f"π({a} ⊓ {b}) = {pm} ≠ {self.universe.meet(pa, pb)}")
        return {
            "tiers_disjoint": not overlap,
            "overlap": overlap,
            "projection_order_preserving": not order_bad,
            "order_violations": order_bad,
            "homomorphism_gaps": hom_gaps,
            "relations": len(self._props),
            "entries": len(self._entries),
        }
