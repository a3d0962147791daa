"""Cross-fiber bridges.

A bridge set between two fibers is a partial concept mapping. Composing two
of them shrinks the domain of definition; composed mappings are hypotheses
and never enter the registry as assertions. Fusion adds a new domain above
two existing ones, under an explicit authorization and a height bound.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .domains import DomainPath, DomainUniverse, as_domain
from .errors import (
    BridgeConflict,
    DomainGrowthExceeded,
    DomainMismatch,
    EmptyDomainOfDefinition,
    HeightBoundReached,
    InvalidFusion,
    SelfBridge,
    Unauthorized,
    UnknownConcept,
)
from .store import FiberStore

DEFAULT_GROWTH_MULTIPLIER = 4.0


@dataclass(frozen=True)
class PartialMorphism:
    source_domain: DomainPath
    target_domain: DomainPath
    mapping: Mapping[str, str]
    derivation_depth: int = 1
    spr_cache: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.derivation_depth < 1:
            raise ValueError("derivation depth starts at 1")
        object.__setattr__(self, "mapping", MappingProxyType(dict(self.mapping)))

    @property
    def is_hypothesis(self) -> bool:
        return self.derivation_depth > 1

    @property
    def domain_of_definition(self) -> frozenset[str]:
        return frozenset(self.mapping)

    def __call__(self, concept: str) -> str | None:
        return self.mapping.get(concept)

    def to_dict(self) -> dict:
        return {
            "source_domain": str(self.source_domain),
            "target_domain": str(self.target_domain),
            "mapping": dict(sorted(self.mapping.items())),
            "derivation_depth": self.derivation_depth,
            "hypothesis": self.is_hypothesis,
        }


class BridgeRegistry:
    """Asserted (depth-1) bridges, one partial morphism per ordered domain pair."""

    def __init__(self, store: FiberStore):
        self.store = store
        self._maps: dict[tuple[DomainPath, DomainPath], dict[str, str]] = {}

    def add_bridge(self, c1: str, c2: str, d1: DomainPath | str, d2: DomainPath | str,
                   *, check_structure: bool = False) -> PartialMorphism:
        d1, d2 = as_domain(d1), as_domain(d2)
        if d1 == d2:
            raise SelfBridge(f"bridge endpoints share domain {d1}")
        for c, d in ((c1, d1), (c2, d2)):
            self.store.universe._check(d)
            if c not in self.store.concepts(d):
                raise UnknownConcept(f"{c} does not occur in F({d})")
        mapping = self._maps.setdefault((d1, d2), {})
        if mapping.get(c1, c2) != c2:
            raise BridgeConflict(f"{c1} already maps to {mapping[c1]} in {d1} -> {d2}")
        mapping[c1] = c2
        phi = self.morphism(d1, d2)
        if check_structure:
            broken = structure_violations(phi, self.store)
            if broken:
                del mapping[c1]
                raise BridgeConflict("bridge breaks relational structure: " + "; ".join(broken))
        return phi

    def morphism(self, d1: DomainPath | str, d2: DomainPath | str) -> PartialMorphism:
        d1, d2 = as_domain(d1), as_domain(d2)
        return PartialMorphism(d1, d2, self._maps.get((d1, d2), {}), 1)

    def pairs(self) -> list[tuple[DomainPath, DomainPath]]:
        return sorted(k for k, v in self._maps.items() if v)

    def outgoing(self, concept: str, d: DomainPath) -> list[tuple[str, DomainPath, DomainPath]]:
        """Bridges leaving ``concept`` from fibers under ``d``: (target, src_dom, tgt_dom)."""
        out = []
        for (d1, d2), mapping in sorted(self._maps.items()):
            if concept not in mapping:
                continue
            if d.is_top or (d.is_path and d1.has_prefix(d)):
                out.append((mapping[concept], d1, d2))
        return out

    def accept(self, proposal: "BridgeProposal") -> PartialMorphism:
        """Explicit human-in-the-loop step turning a proposal into an assertion."""
        return self.add_bridge(proposal.source, proposal.target,
                               proposal.source_domain, proposal.target_domain)


# -- structural preservation ---------------------------------------------------


def _tau_class(store: FiberStore, relation: str, d: DomainPath) -> str:
    return store.typing.tau(relation, d)


def _preserved(phi: PartialMorphism, store: FiberStore, c: str) -> tuple[int, int]:
    src, tgt = phi.source_domain, phi.target_domain
    edges = store.out_edges(c, src)
    if not edges:
        return 0, 0
    image = phi(c)
    target_edges = store.out_edges(image, tgt)
    kept = 0
    for e in edges:
        mapped = phi(e.target)
        if mapped is None:
            continue
        cls = _tau_class(store, e.relation, src)
        if any(f.target == mapped and _tau_class(store, f.relation, tgt) == cls
               for f in target_edges):
            kept += 1
    return kept, len(edges)


def spr(phi: PartialMorphism, store: FiberStore) -> float:
    """Structural preservation rate: mean preserved fraction of out-neighbourhoods."""
    dom = sorted(phi.domain_of_definition)
    if not dom:
        raise EmptyDomainOfDefinition(
            f"morphism {phi.source_domain} -> {phi.target_domain} has an empty domain")
    total = 0.0
    for c in dom:
        kept, n = _preserved(phi, store, c)
        total += 1.0 if n == 0 else kept / n
    return total / len(dom)


def structure_violations(phi: PartialMorphism, store: FiberStore) -> list[str]:
    """Edges inside dom(phi) whose image has no edge of the same typing class."""
    out = []
    for c in sorted(phi.domain_of_definition):
        for e in store.out_edges(c, phi.source_domain):
            if e.target not in phi.mapping:
                continue
            cls = _tau_class(store, e.relation, phi.source_domain)
            img = [f for f in store.out_edges(phi(c), phi.target_domain)
                   if f.target == phi(e.target)
                   and _tau_class(store, f.relation, phi.target_domain) == cls]
            if not img:
                out.append(f"{e} has no {cls} image {phi(c)} -> {phi(e.target)}")
    return out


@dataclass
class CompositionReport:
    morphism: PartialMorphism
    source_size: int
    composed_size: int
    dropped: list[str]
    incomplete_neighbourhoods: list[str]

    @property
    def shrinkage(self) -> int:
        return self.source_size - self.composed_size

    def to_dict(self) -> dict:
        return {
            "morphism": self.morphism.to_dict(),
            "dom_phi12": self.source_size,
            "dom_composed": self.composed_size,
            "dropped": self.dropped,
            "incomplete_neighbourhoods": self.incomplete_neighbourhoods,
        }


def compose(phi12: PartialMorphism, phi23: PartialMorphism,
            store: FiberStore | None = None) -> CompositionReport:
    """Compose two bridges; the result is a hypothesis of depth max + 1."""
    if phi12.target_domain != phi23.source_domain:
        raise DomainMismatch(
            f"cannot compose {phi12.source_domain}->{phi12.target_domain} "
            f"with {phi23.source_domain}->{phi23.target_domain}")
    mapping = {c: phi23.mapping[m] for c, m in phi12.mapping.items() if m in phi23.mapping}
    dropped = sorted(set(phi12.mapping) - set(mapping))
    incomplete = []
    if store is not None:
        for c in sorted(phi12.mapping):
            nbrs = {e.target for e in store.out_edges(c, phi12.source_domain)}
            images = {phi12.mapping[n] for n in nbrs if n in phi12.mapping}
            if not images <= set(phi23.mapping):
                incomplete.append(c)
    composed = PartialMorphism(
        phi12.source_domain, phi23.target_domain, mapping,
        max(phi12.derivation_depth, phi23.derivation_depth) + 1,
    )
    return CompositionReport(composed, len(phi12.mapping), len(mapping), dropped, incomplete)


# -- fusion ----------------------------------------------------------------------


@dataclass
class FusionReport:
    universe: DomainUniverse
    domain: DomainPath
    height_before: int
    height_after: int
    size: int
    threshold: float

    def to_dict(self) -> dict:
        return {
            "domain": str(self.domain),
            "version": self.universe.version,
            "height_before": self.height_before,
            "height_after": self.height_after,
            "size": self.size,
            "growth_threshold": self.threshold,
        }


def _fused_name(d1: DomainPath, d2: DomainPath) -> str:
    return "_x_".join("_".join(d.segments) for d in (d1, d2))


def fuse(universe: DomainUniverse, d1: DomainPath | str, d2: DomainPath | str, *,
         authorized: bool = False, name: str | None = None,
         growth_multiplier: float = DEFAULT_GROWTH_MULTIPLIER) -> FusionReport:
    """Add a new domain above ``d1`` and ``d2``; returns the new universe version."""
    d1, d2 = as_domain(d1), as_domain(d2)
    if not authorized:
        raise Unauthorized("fusion requires explicit authorization")
    universe._check(d1)
    universe._check(d2)
    if not (d1.is_path and d2.is_path):
        raise InvalidFusion("only registered paths can be fused")
    if universe.leq(d1, d2) or universe.leq(d2, d1):
        raise InvalidFusion(f"{d1} and {d2} are comparable; the larger already bounds both")
    before = universe.height()
    if before >= universe.h_max:
        raise HeightBoundReached(f"height {before} has reached h_max {universe.h_max}")
    token = name or _fused_name(d1, d2)
    if not re.fullmatch(r"[A-Za-z0-9_]+", token):
        raise InvalidFusion(f"fused domain name {token!r} is not a valid token")
    new = DomainPath((token,))
    if new in universe.paths:
        raise InvalidFusion(f"{new} already exists")
    threshold = growth_multiplier * universe.baseline_size
    if len(universe) + 1 > threshold:
        raise DomainGrowthExceeded(
            f"|D| would reach {len(universe) + 1}, above the review threshold {threshold:g}")
    extended = universe.with_fusion(d1, d2, new)
    after = extended.height()
    if after > universe.h_max:
        raise HeightBoundReached(f"fusion would raise height to {after} > h_max {universe.h_max}")
    return FusionReport(extended, new, before, after, len(extended), threshold)


# -- discovery -------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class BridgeProposal:
    source: str
    target: str
    source_domain: DomainPath
    target_domain: DomainPath
    similarity: float

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "source_domain": str(self.source_domain),
            "target_domain": str(self.target_domain),
            "similarity": round(self.similarity, 12),
            "status": "proposal",
        }


def discover_bridges(store: FiberStore, embeddings, d1: DomainPath | str,
                     d2: DomainPath | str, theta: float) -> list[BridgeProposal]:
    """All concept pairs whose domain-conditioned embeddings have cosine > theta."""
    from .neural import embed_concept

    d1, d2 = as_domain(d1), as_domain(d2)
    left = sorted(store.concepts(d1))
    right = sorted(store.concepts(d2))
    if not left or not right:
        return []
    a = np.stack([embed_concept(embeddings, c, d1) for c in left])
    b = np.stack([embed_concept(embeddings, c, d2) for c in right])
    sims = a @ b.T
    out = []
    for i, j in zip(*np.nonzero(sims > theta)):
        out.append(BridgeProposal(left[i], right[j], d1, d2, float(sims[i, j])))
    return sorted(out, key=lambda p: (-p.similarity, p.source, p.target))
