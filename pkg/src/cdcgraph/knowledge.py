"""Assemble a knowledge base (universe, typing, store, bridges) from a parsed document."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .bridges import BridgeRegistry, FusionReport, fuse
from .domains import DEFAULT_H_MAX, TOP, DomainPath, DomainUniverse
from .errors import CDCError
from .kbformat import (
    AliasStmt, BridgeStmt, DeltaStmt, Diagnostic, Document, DomainStmt, FactStmt, MetaStmt,
    TierStmt, TripleStmt, parse_file, parse_kb,
)
from .meta import NON_MONOTONE, TypingTable
from .store import Fact, FiberStore, Triple


# KB tokens cannot carry '-'
PROPERTY_TOKENS = {"non_monotone": NON_MONOTONE}


class KBParseError(CDCError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(map(str, diagnostics)))


@dataclass
class KnowledgeBase:
    universe: DomainUniverse
    typing: TypingTable
    store: FiberStore
    bridges: BridgeRegistry
    aliases: dict[str, DomainPath] = field(default_factory=dict)
    problems: list[Diagnostic] = field(default_factory=list)  # semantic load problems
    document: Document | None = None

    def resolve(self, path: str | DomainPath) -> DomainPath:
        if isinstance(path, DomainPath):
            return path
        return _resolve(path, self.aliases)

    def apply_fusion(self, d1, d2, *, authorized: bool = False, name: str | None = None,
                     growth_multiplier: float | None = None) -> FusionReport:
        kw = {} if growth_multiplier is None else {"growth_multiplier": growth_multiplier}
        report = fuse(self.universe, self.resolve(d1), self.resolve(d2),
                      authorized=authorized, name=name, **kw)
        self.store.rebase(report.universe)
        self.universe = report.universe
        return report


def _resolve(text: str, aliases: dict[str, DomainPath]) -> DomainPath:
    if text in ("*", "⊤", "TOP"):
        return TOP
    d = DomainPath.parse(text)
    seen = set()
    while d.is_path and d.segments[0] in aliases:
        head = d.segments[0]
        if head in seen:
            raise ValueError(f"alias cycle through {head!r}")
        seen.add(head)
        d = DomainPath(aliases[head].segments + d.segments[1:])
    return d


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture such as ``experiment1.kb``."""
    return Path(str(resources.files("cdcgraph") / "data" / name))


def load_kb(source: Document | str | Path, *, h_max: int = DEFAULT_H_MAX,
            strict_cycles: bool = True) -> KnowledgeBase:
    """Build a knowledge base.

    ``source`` is a parsed document, KB text, or a file path. Syntax errors
    raise :class:`KBParseError`; semantic problems (undeclared meta tiers,
    unknown bridge concepts, ...) are collected on ``problems``. With
    ``strict_cycles`` a cycle in a transitive relation raises
    :class:`~cdcgraph.errors.CyclicRequires`.
    """
    if isinstance(source, Document):
        doc = source
    elif isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                      and Path(source).suffix == ".kb"):
        doc = parse_file(source)
    else:
        doc = parse_kb(source)
    if not doc.ok:
        raise KBParseError([d for d in doc.diagnostics if d.severity == "error"])

    problems: list[Diagnostic] = []
    aliases: dict[str, DomainPath] = {}
    for st in doc.of(AliasStmt):
        aliases[st.name] = DomainPath.parse(st.path)

    def res(text: str, line: int) -> DomainPath | None:
        try:
            return _resolve(text, aliases)
        except ValueError as exc:
            problems.append(Diagnostic(line, "error", str(exc)))
            return None

    obj_paths: set[DomainPath] = set()
    for st in doc.statements:
        for attr in ("path", "source_path", "target_path"):
            if isinstance(st, (TierStmt, MetaStmt, AliasStmt)):
                break
            raw = getattr(st, attr, None)
            if raw is not None:
                d = res(raw, st.line)
                if d is not None and d.is_path:
                    obj_paths.add(d)
    delta = []
    for st in doc.of(DeltaStmt):
        entry = [res(x, st.line) for x in (st.left, st.right, st.upper)]
        if None not in entry:
            delta.append(tuple(entry))
    for st in doc.of(TierStmt):
        scope = res(st.scope, st.line)
        if scope is not None and scope.is_path:
            obj_paths.add(scope)

    universe = DomainUniverse.build(obj_paths, delta, h_max)
    typing = TypingTable(universe)
    for st in doc.of(TierStmt):
        try:
            typing.declare_tier(DomainPath.parse(st.path), res(st.scope, st.line) or TOP)
        except CDCError as exc:
            problems.append(Diagnostic(st.line, "error", str(exc)))
    for st in doc.of(MetaStmt):
        try:
            prop = PROPERTY_TOKENS.get(st.prop, st.prop)
            typing.declare_meta(st.relation, prop, DomainPath.parse(st.path))
        except CDCError as exc:
            problems.append(Diagnostic(st.line, "error", str(exc)))

    store = FiberStore(universe, typing, strict_cycles=strict_cycles)
    for st in doc.of(TripleStmt):
        d = res(st.path, st.line)
        if d is not None:
            store.extend(Triple(st.source, st.relation, st.target, d, st.conf))
    for st in doc.of(FactStmt):
        d = res(st.path, st.line)
        if d is not None:
            store.add_fact(Fact(st.subject, st.utterance, d, st.concept, st.conf, st.freq))

    bridges = BridgeRegistry(store)
    for st in doc.of(BridgeStmt):
        d1, d2 = res(st.source_path, st.line), res(st.target_path, st.line)
        if d1 is None or d2 is None:
            continue
        try:
            bridges.add_bridge(st.source, st.target, d1, d2)
        except CDCError as exc:
            problems.append(Diagnostic(st.line, "error", str(exc)))

    return KnowledgeBase(universe, typing, store, bridges, aliases, problems, doc)


def load_fixture(name: str, **kw) -> KnowledgeBase:
    return load_kb(fixture_path(name), **kw)
