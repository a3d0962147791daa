"""Multi-hop reasoning over fibers.

Two entry points:

* :func:`transitive_closure` -- breadth-first closure of one relation inside a
  domain scope, consulting ancestor fibers for monotone relations and
  following asserted bridges (results reached through a bridge are
  hypotheses).
* Kleisli arrows over context sets (sets of ``(concept, domain)`` pairs):
  :func:`kleisli_step`, :func:`kleisli_compose`, :func:`unit` and
  :func:`traverse_path`.

Every run records a trace of :class:`TraceStep` records.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .bridges import BridgeRegistry
from .domains import DomainPath, as_domain
from .errors import CyclicRequires
from .reindex import inherited_query
from .store import ASSERTED, INHERITED, FiberStore, Provenance, hypothesis

Pair = tuple[str, DomainPath]
ContextSet = frozenset  # frozenset[Pair]

_RANK = {"asserted": 0, "inherited": 1, "hypothesis": 2}


def _stronger(a: Provenance, b: Provenance) -> Provenance:
    return min(a, b, key=lambda p: (_RANK[p.kind], p.depth))


def canonical(ctx: Iterable[Pair]) -> list[Pair]:
    return sorted(ctx, key=lambda p: (p[0], str(p[1])))


@dataclass(frozen=True)
class TraceStep:
    layer: str
    operation: str
    input: Pair
    outputs: ContextSet
    provenance: Provenance = ASSERTED

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "operation": self.operation,
            "input": [self.input[0], str(self.input[1])],
            "outputs": [[c, str(d)] for c, d in canonical(self.outputs)],
            "provenance": str(self.provenance),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def cycle_check(store: FiberStore, relation: str, d: DomainPath | str) -> list[str] | None:
    """Return a cycle ``[a, ..., a]`` among ``relation`` edges of F(d), or None."""
    d = as_domain(d)
    succ: dict[str, list[str]] = {}
    for t in store.edges(d, relation):
        succ.setdefault(t.source, []).append(t.target)
    color: dict[str, int] = {}
    for root in sorted(succ):
        if root in color:
            continue
        color[root] = 1
        path = [root]
        stack = [iter(sorted(succ.get(root, ())))]
        while stack:
            nxt = next(stack[-1], None)
            if nxt is None:
                color[path.pop()] = 2
                stack.pop()
                continue
            state = color.get(nxt, 0)
            if state == 1:
                return path[path.index(nxt):] + [nxt]
            if state == 0:
                color[nxt] = 1
                path.append(nxt)
                stack.append(iter(sorted(succ.get(nxt, ()))))
    return None


@dataclass
class ClosureResult:
    start: Pair
    items: dict[Pair, Provenance]
    trace: list[TraceStep]
    stats: dict = field(default_factory=dict)

    @property
    def context(self) -> ContextSet:
        return frozenset(self.items)

    @property
    def concepts(self) -> list[str]:
        return sorted({c for c, _ in self.items})

    def hypotheses(self) -> list[Pair]:
        return canonical(p for p, prov in self.items.items() if prov.is_hypothesis)

    def replay(self) -> ContextSet:
        """Rebuild the result purely from the trace."""
        out = set()
        for step in self.trace:
            out |= {p for p in step.outputs if p[0] != self.start[0]}
        return frozenset(out)

    def to_dict(self) -> dict:
        return {
            "start": [self.start[0], str(self.start[1])],
            "results": [
                {"concept": c, "domain": str(d), "provenance": str(self.items[(c, d)])}
                for c, d in canonical(self.items)
            ],
            "stats": self.stats,
        }


def transitive_closure(store: FiberStore, concept: str, relation: str, d: DomainPath | str,
                       bridges: BridgeRegistry | None = None) -> ClosureResult:
    """Everything reachable from ``concept`` along ``relation`` in scope ``d``."""
    d = as_domain(d)
    store.universe._check(d)
    if store.typing.is_transitive(relation, d):
        for sub in store.domains_under(d):
            cycle = cycle_check(store, relation, sub)
            if cycle:
                raise CyclicRequires(relation, sub, cycle)

    start: Pair = (concept, d)
    items: dict[Pair, Provenance] = {}
    trace: list[TraceStep] = []
    visited: set[str] = set()
    queue: deque[tuple[str, Provenance]] = deque([(concept, ASSERTED)])
    levels = store.universe.ancestors(d) if d.is_path else []
    scope = store.scope_concepts(d)
    bridges_used: set[tuple] = set()

    def record(pairs: set[Pair], prov: Provenance) -> None:
        for p in pairs:
            if p[0] == concept:
                continue
            items[p] = _stronger(items[p], prov) if p in items else prov

    with store.typing.sealed():
        monotone = store.typing.is_monotone(relation, d)
        while queue:
            current, carried = queue.popleft()
            if current in visited:
                continue
            visited.add(current)
            here = (current, d)
            found: dict[str, Provenance] = {}

            direct = {(t.target, t.domain) for t in store.query(current, relation, d).matches}
            prov = _stronger(carried, ASSERTED) if not carried.is_hypothesis else carried
            trace.append(TraceStep("L2", f"query:{relation}", here, frozenset(direct), prov))
            record(direct, prov)
            for c, _ in direct:
                found[c] = prov

            trace.append(TraceStep("L5", "tau:" + ("monotone" if monotone else "non-monotone"),
                                   here, frozenset(), carried))
            if monotone:
                inh_prov = carried if carried.is_hypothesis else INHERITED
                for parent in levels:
                    hits = {(t.target, parent) for t in store.lookup(current, relation, parent)
                            if t.target in scope}
                    if hits:
                        trace.append(TraceStep("L3", f"reindex:{parent}", here,
                                               frozenset(hits), inh_prov))
                        record(hits, inh_prov)
                        for c, _ in hits:
                            found.setdefault(c, inh_prov)

            if bridges is not None:
                for c_bridge, src_dom, tgt_dom in bridges.outgoing(current, d):
                    depth = max(1, carried.depth)
                    b_prov = hypothesis(depth)
                    bridges_used.add((current, c_bridge, src_dom, tgt_dom))
                    hits = {(t.target, t.domain)
                            for t in store.query(c_bridge, relation, tgt_dom).matches}
                    trace.append(TraceStep("L4", f"bridge:{src_dom}->{tgt_dom}:{c_bridge}",
                                           here, frozenset(hits), b_prov))
                    record(hits, b_prov)
                    for c, _ in hits:
                        found.setdefault(c, b_prov)

            for c, p in sorted(found.items()):
                if c not in visited:
                    queue.append((c, p))

    vertices = len(scope)
    edges = sum(len(store.edges(sub, relation)) for sub in store.domains_under(d))
    stats = {
        "expanded": len(visited),
        "levels": len(levels),
        "bridges": len(bridges_used),
        "vertices": vertices,
        "edges": edges,
        "bound": (len(levels) + len(bridges_used) + 1) * (vertices + edges),
    }
    return ClosureResult(start, items, trace, stats)


# -- Kleisli arrows ------------------------------------------------------------


@dataclass(frozen=True)
class Arrow:
    """A reasoning step ``(concept, domain) -> ContextSet``."""

    fn: Callable[[Pair], Iterable[Pair]]
    label: str = "f"

    def __call__(self, x: Pair) -> ContextSet:
        return frozenset(self.fn(x))

    def over(self, ctx: Iterable[Pair]) -> ContextSet:
        out: set[Pair] = set()
        for x in ctx:
            out |= self(x)
        return frozenset(out)

    def __rshift__(self, other: "Arrow") -> "Arrow":
        return kleisli_compose(self, other)


def unit(concept: str, d: DomainPath | str) -> ContextSet:
    return frozenset({(concept, as_domain(d))})


UNIT = Arrow(lambda x: (x,), "unit")


def kleisli_compose(f: Arrow, g: Arrow) -> Arrow:
    return Arrow(lambda x: g.over(f(x)), f"{f.label} ▷ {g.label}")


def kleisli_step(store: FiberStore, relation: str, d: DomainPath | str | None = None) -> Arrow:
    """Arrow for one ``relation`` hop evaluated at ``d``.

    With ``d=None`` the hop is evaluated at the domain carried by its input,
    so the domain found by one step feeds the next.
    """
    fixed = as_domain(d) if d is not None else None

    def step(x: Pair) -> Iterable[Pair]:
        c, d_in = x
        at = fixed if fixed is not None else d_in
        if not at.is_path:
            return ()
        return {(h.target, h.origin) for h in inherited_query(store, c, relation, at).hits}

    return Arrow(step, f"{relation}@{fixed if fixed is not None else '*'}")


@dataclass
class PathResult:
    context: ContextSet
    trace: list[TraceStep]
    stages: list[ContextSet]

    def to_dict(self) -> dict:
        return {
            "results": [[c, str(d)] for c, d in canonical(self.context)],
            "stages": [[[c, str(d)] for c, d in canonical(s)] for s in self.stages],
        }


def compose_path(store: FiberStore, steps: Sequence[tuple[str, DomainPath | str | None]]) -> Arrow:
    arrow = UNIT
    for relation, d in steps:
        arrow = arrow >> kleisli_step(store, relation, d)
    return arrow


def traverse_path(store: FiberStore, c0: str,
                  steps: Sequence[tuple[str, DomainPath | str | None]],
                  start_domain: DomainPath | str | None = None) -> PathResult:
    """Apply the composite of ``steps`` to ``unit(c0, start)`` and trace each stage."""
    if start_domain is None:
        if not steps or steps[0][1] is None:
            raise ValueError("a start domain is needed when the first step has none")
        start_domain = steps[0][1]
    ctx = unit(c0, start_domain)
    stages = [ctx]
    trace: list[TraceStep] = []
    for relation, d in steps:
        arrow = kleisli_step(store, relation, d)
        nxt: set[Pair] = set()
        for x in canonical(ctx):
            out = arrow(x)
            trace.append(TraceStep("L2", f"step:{arrow.label}", x, out))
            nxt |= out
        ctx = frozenset(nxt)
        stages.append(ctx)
    return PathResult(ctx, trace, stages)
