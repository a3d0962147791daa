"""Fiber triple store: facts partitioned by domain, with chain-indexed lookup."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable

from .domains import DomainPath, DomainUniverse, as_domain
from .errors import CyclicRequires, TierViolation
from .meta import TypingTable


@dataclass(frozen=True, order=True)
class Provenance:
    kind: str = "asserted"  # asserted | inherited | hypothesis
    depth: int = 0

    def __post_init__(self):
        if self.kind not in ("asserted", "inherited", "hypothesis"):
            raise ValueError(f"unknown provenance {self.kind!r}")
        if self.kind == "hypothesis" and self.depth < 1:
            raise ValueError("bridged hypotheses have depth >= 1")

    @property
    def is_hypothesis(self) -> bool:
        return self.kind == "hypothesis"

    def __str__(self) -> str:
        return f"hypothesis(depth={self.depth})" if self.is_hypothesis else self.kind


ASSERTED = Provenance()
INHERITED = Provenance("inherited")


def hypothesis(depth: int = 1) -> Provenance:
    return Provenance("hypothesis", depth)


@dataclass(frozen=True)
class Triple:
    source: str
    relation: str
    target: str
    domain: DomainPath
    confidence: float = 1.0
    provenance: Provenance = ASSERTED

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if isinstance(self.domain, str):
            object.__setattr__(self, "domain", as_domain(self.domain))

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.source, self.relation, self.target)

    def at(self, domain: DomainPath, provenance: Provenance) -> "Triple":
        return replace(self, domain=domain, provenance=provenance)

    def __str__(self) -> str:
        return f"{self.relation}({self.source}, {self.target})@{self.domain}"


@dataclass(frozen=True)
class Fact:
    """A subject-level observation: ``subject`` said ``utterance``, read as ``concept``."""

    subject: str
    utterance: str
    domain: DomainPath
    concept: str
    confidence: float = 1.0
    frequency: int | None = None

    def as_triple(self) -> Triple:
        return Triple(self.subject, self.utterance, self.concept, self.domain, self.confidence)


@dataclass
class QueryStats:
    fibers_touched: int = 0
    candidates: int = 0  # triples surviving the domain constraint
    examined: int = 0  # index entries actually read

    def to_dict(self) -> dict:
        return {"fibers_touched": self.fibers_touched, "candidates": self.candidates,
                "examined": self.examined}


@dataclass
class QueryAnswer:
    matches: list[Triple]
    stats: QueryStats = field(default_factory=QueryStats)

    @property
    def targets(self) -> list[str]:
        return sorted({t.target for t in self.matches})

    def rows(self) -> list[tuple[str, DomainPath, float]]:
        return sorted((t.target, t.domain, t.confidence) for t in self.matches)


class FiberStore:
    """Triples partitioned into fibers ``F(d)``.

    Writes go through :meth:`extend`; every write bumps :attr:`version`.
    Queries never look outside the fibers selected by the domain prefix.
    """

    def __init__(self, universe: DomainUniverse, typing: TypingTable | None = None,
                 *, strict_cycles: bool = True):
        self.universe = universe
        self.typing = typing if typing is not None else TypingTable(universe)
        self.strict_cycles = strict_cycles
        self.version = 0
        self._fibers: dict[DomainPath, dict[tuple, Triple]] = defaultdict(dict)
        self._by_src_rel: dict[tuple[str, str, DomainPath], dict[str, Triple]] = defaultdict(dict)
        self._prefix_index: dict[tuple[str, ...], set[DomainPath]] = defaultdict(set)
        self.facts: list[Fact] = []
        self._index_domains(universe.paths)

    def _index_domains(self, paths: Iterable[DomainPath]) -> None:
        for d in paths:
            for i in range(1, len(d.segments) + 1):
                self._prefix_index[d.segments[:i]].add(d)

    def rebase(self, universe: DomainUniverse) -> None:
        """Adopt an extended universe version (e.g. after fusion)."""
        if not self.universe.paths <= universe.paths:
            raise ValueError("rebase target must contain every existing domain")
        self._index_domains(universe.paths - self.universe.paths)
        self.universe = universe
        if self.typing.universe is not universe:
            self.typing.rebase(universe)

    def __len__(self) -> int:
        return sum(len(f) for f in self._fibers.values())

    def __iter__(self):
        for d in sorted(self._fibers):
            yield from self._fibers[d].values()

    # -- writes --------------------------------------------------------

    def extend(self, t: Triple) -> bool:
        """Assert ``t`` into its fiber. Returns False when nothing changed."""
        if self.typing.is_meta(t.domain):
            raise TierViolation(f"{t.domain} is meta-tier; object triples need an object domain")
        self.universe._check(t.domain)
        if not t.domain.is_path:
            raise TierViolation("triples must be scoped to a registered path")
        fiber = self._fibers[t.domain]
        existing = fiber.get(t.key)
        if existing == t:
            return False
        if (existing is None and self.strict_cycles
                and self.typing.is_transitive(t.relation, t.domain)):
            cycle = self._closing_cycle(t)
            if cycle:
                raise CyclicRequires(t.relation, t.domain, cycle)
        fiber[t.key] = t
        self._by_src_rel[(t.source, t.relation, t.domain)][t.target] = t
        self.version += 1
        return True

    def add_fact(self, fact: Fact) -> bool:
        changed = self.extend(fact.as_triple())
        if fact not in self.facts:
            self.facts.append(fact)
            changed = True
        return changed

    def _closing_cycle(self, t: Triple) -> list[str]:
        if t.source == t.target:
            return [t.source, t.source]
        # a path target -> ... -> source closes the cycle source -> target -> ... -> source
        prev = {t.target: None}
        stack = [t.target]
        while stack:
            node = stack.pop()
            for nxt in self._by_src_rel.get((node, t.relation, t.domain), {}):
                if nxt in prev:
                    continue
                prev[nxt] = node
                if nxt == t.source:
                    path = [nxt]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return [t.source] + path[::-1]
                stack.append(nxt)
        return []

    # -- reads ---------------------------------------------------------

    def domains_under(self, prefix: DomainPath) -> list[DomainPath]:
        """Registered domains having ``prefix`` as a prefix (itself included)."""
        self.universe._check(prefix)
        if prefix.is_top:
            return sorted(self.universe.paths)
        if prefix.is_bottom:
            return []
        return sorted(self._prefix_index.get(prefix.segments, ()))

    def query(self, concept: str, relation: str, d_prefix: DomainPath | str) -> QueryAnswer:
        """Targets of ``relation`` from ``concept`` in every fiber under ``d_prefix``."""
        d_prefix = as_domain(d_prefix)
        stats = QueryStats()
        matches: list[Triple] = []
        for d in self.domains_under(d_prefix):
            fiber = self._fibers.get(d)
            if not fiber:
                continue
            stats.fibers_touched += 1
            stats.candidates += len(fiber)
            hits = self._by_src_rel.get((concept, relation, d))
            if hits:
                stats.examined += len(hits)
                matches.extend(hits.values())
        matches.sort(key=lambda t: (t.target, t.domain))
        return QueryAnswer(matches, stats)

    def lookup(self, concept: str, relation: str, d: DomainPath) -> list[Triple]:
        """Exact-fiber lookup (no descendants)."""
        self.universe._check(d)
        hits = self._by_src_rel.get((concept, relation, d), {})
        return sorted(hits.values(), key=lambda t: t.target)

    def scan_query(self, concept: str, relation: str, d_prefix: DomainPath | str) -> QueryAnswer:
        """Full-scan oracle: examines every stored triple."""
        d_prefix = as_domain(d_prefix)
        stats = QueryStats()
        out = []
        for t in self:
            stats.candidates += 1
            stats.examined += 1
            if (t.source == concept and t.relation == relation
                    and (d_prefix.is_top or t.domain.has_prefix(d_prefix))):
                out.append(t)
        stats.fibers_touched = len(self._fibers)
        out.sort(key=lambda t: (t.target, t.domain))
        return QueryAnswer(out, stats)

    def fiber(self, d: DomainPath | str, *, inherited: bool = False) -> frozenset[Triple]:
        d = as_domain(d)
        self.universe._check(d)
        native = frozenset(self._fibers.get(d, {}).values())
        if not inherited:
            return native
        from .reindex import inherited_fiber

        return native | inherited_fiber(self, d)

    def has_fiber(self, d: DomainPath) -> bool:
        return bool(self._fibers.get(d))

    def contains(self, t: Triple) -> bool:
        return self._fibers.get(t.domain, {}).get(t.key) is not None

    def get(self, key: tuple[str, str, str], d: DomainPath) -> Triple | None:
        return self._fibers.get(d, {}).get(key)

    def concepts(self, d: DomainPath) -> frozenset[str]:
        out: set[str] = set()
        for t in self._fibers.get(d, {}).values():
            out.add(t.source)
            out.add(t.target)
        return frozenset(out)

    def scope_concepts(self, d_prefix: DomainPath) -> frozenset[str]:
        out: set[str] = set()
        for d in self.domains_under(d_prefix):
            out |= self.concepts(d)
        return frozenset(out)

    def edges(self, d: DomainPath, relation: str | None = None) -> list[Triple]:
        fiber = self._fibers.get(d, {})
        return sorted(
            (t for t in fiber.values() if relation is None or t.relation == relation),
            key=lambda t: t.key,
        )

    def out_edges(self, concept: str, d: DomainPath) -> list[Triple]:
        return [t for t in self.edges(d) if t.source == concept]

    def relations(self, d: DomainPath | None = None) -> list[str]:
        fibers = [self._fibers.get(d, {})] if d is not None else self._fibers.values()
        return sorted({t.relation for f in fibers for t in f.values()})

    def populated_domains(self) -> list[DomainPath]:
        return sorted(d for d, f in self._fibers.items() if f)
