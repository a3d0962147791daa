"""Domain lattice over '@'-separated dimension paths.

A path ``Science@Physics@Quantum`` is *more specific* (lower) than each of its
prefixes. The order can be enriched by declared generalizations (the delta
set): a declaration ``(d1, d2, d3)`` places ``d1`` and ``d2`` under ``d3`` and
makes ``d3`` their join.

Example:
    >>> u = DomainUniverse.build(["Science@Physics@Quantum", "Science@Biology"])
    >>> u.leq(DomainPath.parse("Science@Physics@Quantum"), DomainPath.parse("Science"))
    True
    >>> str(u.meet(DomainPath.parse("Science@Physics"), DomainPath.parse("Science@Biology")))
    '⊥'
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import CyclicOrder, DeltaInconsistent, UnregisteredDomain

TOKEN_RE = re.compile(r"[A-Za-z0-9_]+\Z")
DEFAULT_H_MAX = 16
EXHAUSTIVE_LIMIT = 12


@dataclass(frozen=True, order=True)
class DomainPath:
    segments: tuple[str, ...] = ()
    kind: str = "path"

    def __post_init__(self):
        if self.kind not in ("path", "top", "bottom"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "path":
            if not self.segments:
                raise ValueError("a domain path needs at least one segment")
            for seg in self.segments:
                if not TOKEN_RE.match(seg):
                    raise ValueError(f"invalid dimension token {seg!r}")
        elif self.segments:
            raise ValueError("top and bottom carry no segments")

    @classmethod
    def parse(cls, text: str) -> "DomainPath":
        text = text.strip()
        if text in ("⊤", "TOP", "*"):
            return TOP
        if text in ("⊥", "BOTTOM"):
            return BOTTOM
        # '@Psychology@PHQ9' is accepted as written in clinical listings
        if text.startswith("@"):
            text = text[1:]
        return cls(tuple(text.split("@")))

    @property
    def is_top(self) -> bool:
        return self.kind == "top"

    @property
    def is_bottom(self) -> bool:
        return self.kind == "bottom"

    @property
    def is_path(self) -> bool:
        return self.kind == "path"

    @property
    def depth(self) -> int:
        return len(self.segments)

    def proper_prefixes(self) -> list["DomainPath"]:
        """Prefixes from the root down, excluding the path itself."""
        return [DomainPath(self.segments[:i]) for i in range(1, len(self.segments))]

    def has_prefix(self, other: "DomainPath") -> bool:
        return (
            other.is_path
            and self.is_path
            and self.segments[: len(other.segments)] == other.segments
        )

    def child(self, segment: str) -> "DomainPath":
        return DomainPath(self.segments + (segment,))

    def __str__(self) -> str:
        if self.is_top:
            return "⊤"
        if self.is_bottom:
            return "⊥"
        return "@".join(self.segments)

    def __repr__(self) -> str:
        return f"DomainPath({str(self)!r})"


TOP = DomainPath((), "top")
BOTTOM = DomainPath((), "bottom")


def as_domain(value: "DomainPath | str") -> DomainPath:
    return value if isinstance(value, DomainPath) else DomainPath.parse(value)


def common_prefix(a: Sequence[str], b: Sequence[str]) -> tuple[str, ...]:
    out = []
    for x, y in zip(a, b):
        if x != y:
            break
        out.append(x)
    return tuple(out)


@dataclass(frozen=True)
class DeltaProblem:
    kind: str  # unregistered | ambiguous | not-upper-bound | not-minimal
    witness: tuple

    def __str__(self) -> str:
        return f"{self.kind}: " + ", ".join(_fmt(w) for w in self.witness)


def _fmt(w) -> str:
    if isinstance(w, tuple):
        return "(" + ", ".join(_fmt(x) for x in w) + ")"
    return str(w)


class DomainUniverse:
    """Finite registered set of domain paths plus the delta declarations.

    Instances are immutable; fusion produces a new version through
    :meth:`with_fusion`.
    """

    def __init__(
        self,
        paths: Iterable[DomainPath | str] = (),
        delta: Iterable[tuple] = (),
        h_max: int = DEFAULT_H_MAX,
        *,
        version: int = 0,
        fusions: dict | None = None,
        levels: dict | None = None,
        baseline_size: int | None = None,
    ):
        if h_max < 1:
            raise ValueError("h_max must be positive")
        self.paths: frozenset[DomainPath] = frozenset(as_domain(p) for p in paths)
        for p in self.paths:
            if not p.is_path:
                raise ValueError("top/bottom are implicit and cannot be registered")
        self.delta: tuple[tuple[DomainPath, DomainPath, DomainPath], ...] = tuple(
            tuple(as_domain(x) for x in entry) for entry in delta
        )
        self.h_max = h_max
        self.version = version
        self.fusions: dict[DomainPath, tuple[DomainPath, DomainPath]] = dict(fusions or {})
        # a fused domain opens a new level: one above the height it was created at
        self.levels: dict[DomainPath, int] = dict(levels or {})
        self.baseline_size = len(self.paths) if baseline_size is None else baseline_size
        self._up, self.cycle = self._order_closure()
        self._down: dict[DomainPath, set[DomainPath]] = {p: set() for p in self.paths}
        for p, ups in self._up.items():
            for q in ups:
                self._down[q].add(p)
        self._delta_index: dict[frozenset, list] = {}
        for entry in self.delta:
            self._delta_index.setdefault(frozenset(entry[:2]), []).append(entry)
        self._delta_problems: list[DeltaProblem] | None = None
        self._impl_cache: dict[tuple[DomainPath, DomainPath], DomainPath] = {}
        self._rank: dict[DomainPath, int] | None = None

    @classmethod
    def build(
        cls,
        paths: Iterable[DomainPath | str],
        delta: Iterable[tuple] = (),
        h_max: int = DEFAULT_H_MAX,
    ) -> "DomainUniverse":
        """Register ``paths`` together with all their prefixes."""
        closed: set[DomainPath] = set()
        for p in map(as_domain, paths):
            closed.add(p)
            closed.update(p.proper_prefixes())
        for entry in delta:
            for d in map(as_domain, entry):
                if d.is_path:
                    closed.add(d)
                    closed.update(d.proper_prefixes())
        return cls(closed, delta, h_max)

    # -- order ---------------------------------------------------------

    def _order_closure(self):
        succ: dict[DomainPath, set[DomainPath]] = {p: set() for p in self.paths}
        for p in self.paths:
            for q in p.proper_prefixes():
                if q in self.paths:
                    succ[p].add(q)
        for d1, d2, d3 in self.delta:
            if not d3.is_path or d3 not in self.paths:
                continue
            for d in (d1, d2):
                if d in self.paths and d != d3:
                    succ[d].add(d3)
        up: dict[DomainPath, set[DomainPath]] = {}
        for p in self.paths:
            seen = {p}
            stack = [p]
            while stack:
                for q in succ[stack.pop()]:
                    if q not in seen:
                        seen.add(q)
                        stack.append(q)
            up[p] = seen
        cycle = _find_cycle(succ)
        return up, cycle

    def _check(self, d: DomainPath) -> DomainPath:
        if d.is_path and d not in self.paths:
            raise UnregisteredDomain(d)
        return d

    def __contains__(self, d: object) -> bool:
        return isinstance(d, DomainPath) and (not d.is_path or d in self.paths)

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self) -> Iterator[DomainPath]:
        return iter(sorted(self.paths))

    def elements(self) -> list[DomainPath]:
        """Registered paths plus the two bounds, in canonical order."""
        return [BOTTOM, *sorted(self.paths), TOP]

    def leq(self, d1: DomainPath, d2: DomainPath) -> bool:
        self._check(d1)
        self._check(d2)
        if d1.is_bottom or d2.is_top:
            return True
        if d1.is_top or d2.is_bottom:
            return False
        return d2 in self._up[d1]

    def lt(self, d1: DomainPath, d2: DomainPath) -> bool:
        return d1 != d2 and self.leq(d1, d2)

    def upper_set(self, d: DomainPath) -> frozenset[DomainPath]:
        """Registered paths at or above ``d`` (bounds excluded)."""
        self._check(d)
        if d.is_bottom:
            return frozenset(self.paths)
        if d.is_top:
            return frozenset()
        return frozenset(self._up[d])

    def lower_set(self, d: DomainPath) -> frozenset[DomainPath]:
        self._check(d)
        if d.is_top:
            return frozenset(self.paths)
        if d.is_bottom:
            return frozenset()
        return frozenset(self._down[d])

    def ancestors(self, d: DomainPath) -> list[DomainPath]:
        """Strict registered upper bounds of ``d``, nearest first."""
        ups = self.upper_set(d) - {d}
        rank = self.ranks()
        return sorted(ups, key=lambda x: (rank.get(x, 0), x))

    def parents(self, d: DomainPath) -> list[DomainPath]:
        """Immediate covers of ``d`` among registered paths."""
        ups = self.upper_set(d) - {d}
        return sorted(u for u in ups if not any(self.lt(v, u) for v in ups if v != u))

    # -- lattice operations ---------------------------------------------

    def meet(self, d1: DomainPath, d2: DomainPath) -> DomainPath:
        """Greatest lower bound in the delta-extended order."""
        if self.leq(d1, d2):
            return d1
        if self.leq(d2, d1):
            return d2
        common = self.lower_set(d1) & self.lower_set(d2)
        if not common:
            return BOTTOM
        tops = [c for c in common if all(self.leq(x, c) for x in common)]
        return tops[0] if len(tops) == 1 else BOTTOM

    def base_join(self, d1: DomainPath, d2: DomainPath) -> DomainPath:
        self._check(d1)
        self._check(d2)
        if d1.is_top or d2.is_top:
            return TOP
        if d1.is_bottom:
            return d2
        if d2.is_bottom:
            return d1
        prefix = common_prefix(d1.segments, d2.segments)
        return DomainPath(prefix) if prefix else TOP

    def join(self, d1: DomainPath, d2: DomainPath) -> DomainPath:
        """Enriched join: a declared generalization if one exists, else base join."""
        self._check(d1)
        self._check(d2)
        if d1.is_top or d2.is_top:
            return TOP
        if d1.is_bottom:
            return d2
        if d2.is_bottom:
            return d1
        entries = self._delta_index.get(frozenset((d1, d2)))
        if entries:
            if self.delta_problems():
                raise DeltaInconsistent(self.delta_problems())
            return entries[0][2]
        if self.leq(d1, d2):
            return d2
        if self.leq(d2, d1):
            return d1
        # Δ and fusion can put a registered bound below the common prefix
        common = self.upper_set(d1) & self.upper_set(d2)
        least = [c for c in common if c.is_path and all(self.leq(c, x) for x in common)]
        if len(least) == 1:
            return least[0]
        return self.base_join(d1, d2)

    def join_all(self, ds: Iterable[DomainPath]) -> DomainPath:
        acc = BOTTOM
        for d in ds:
            acc = self.join(acc, d)
        return acc

    def implication(self, d1: DomainPath, d2: DomainPath) -> DomainPath:
        """Join of every element whose meet with ``d1`` lies below ``d2``.

        Results are memoized per argument pair; the universe is immutable.
        """
        self._check(d1)
        self._check(d2)
        key = (d1, d2)
        if key in self._impl_cache:
            return self._impl_cache[key]
        if d2 in self.fusions:
            a, b = self.fusions[d2]
            result = self.join(self.implication(d1, a), self.implication(d1, b))
        else:
            allowed = [x for x in self.elements() if self.leq(self.meet(x, d1), d2)]
            result = self.join_all(allowed)
        self._impl_cache[key] = result
        return result

    def negation(self, d: DomainPath) -> DomainPath:
        return self.implication(d, BOTTOM)

    def excluded_middle_witness(self) -> DomainPath | None:
        """First registered ``d`` with ``d ⊔ ¬d ≠ ⊤``, if any."""
        for d in sorted(self.paths):
            if self.join(d, self.negation(d)) != TOP:
                return d
        return None

    # -- structure -----------------------------------------------------

    def ranks(self) -> dict[DomainPath, int]:
        """Length of the longest chain ending at each registered path.

        Fused domains never rank below the level recorded at fusion time.
        """
        if self.cycle:
            raise CyclicOrder(self.cycle)
        if self._rank is None:
            rank: dict[DomainPath, int] = {}
            for p in sorted(self.paths, key=lambda x: len(self._down[x])):
                below = self._down[p] - {p}
                rank[p] = max(1 + max((rank[q] for q in below), default=0),
                              self.levels.get(p, 0))
            self._rank = rank
        return self._rank

    def height(self) -> int:
        return max(self.ranks().values(), default=0)

    def delta_problems(self) -> list[DeltaProblem]:
        if self._delta_problems is None:
            self._delta_problems = self._compute_delta_problems()
        return self._delta_problems

    def _compute_delta_problems(self) -> list[DeltaProblem]:
        problems: list[DeltaProblem] = []
        for entry in self.delta:
            missing = [d for d in entry if d.is_path and d not in self.paths]
            if missing:
                problems.append(DeltaProblem("unregistered", (entry, *missing)))
        if problems:
            return problems
        for pair, entries in self._delta_index.items():
            targets = {e[2] for e in entries}
            if len(targets) > 1:
                problems.append(DeltaProblem("ambiguous", tuple(entries)))
        for d1, d2, d3 in self.delta:
            if not (self.leq(d1, d3) and self.leq(d2, d3)):
                problems.append(DeltaProblem("not-upper-bound", ((d1, d2, d3),)))
                continue
            if d3.is_top:
                continue
            for u in sorted(self.paths):
                if u != d3 and self.leq(d1, u) and self.leq(d2, u) and self.leq(u, d3):
                    problems.append(DeltaProblem("not-minimal", ((d1, d2, d3), u)))
                    break
        return problems

    def with_fusion(self, d1: DomainPath, d2: DomainPath, new: DomainPath) -> "DomainUniverse":
        return DomainUniverse(
            self.paths | {new},
            self.delta + ((d1, d2, new),),
            self.h_max,
            version=self.version + 1,
            fusions={**self.fusions, new: (d1, d2)},
            levels={**self.levels, new: self.height() + 1},
            baseline_size=self.baseline_size,
        )

    def __repr__(self) -> str:
        return f"DomainUniverse({len(self.paths)} paths, {len(self.delta)} delta, v{self.version})"


def _find_cycle(succ: dict[DomainPath, set[DomainPath]]) -> list[DomainPath]:
    color: dict[DomainPath, int] = {}
    for root in sorted(succ):
        if root in color:
            continue
        stack = [(root, iter(sorted(succ[root])))]
        path = [root]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
                path.pop()
                continue
            state = color.get(nxt, 0)
            if state == 1:
                return path[path.index(nxt):] + [nxt]
            if state == 0:
                color[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(sorted(succ[nxt]))))
    return []


# -- axiom validation ----------------------------------------------------------


@dataclass
class AxiomResult:
    name: str
    passed: bool
    checked: int = 0
    witnesses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "axiom": self.name,
            "passed": self.passed,
            "checked": self.checked,
            "witnesses": [_fmt(w) if isinstance(w, tuple) else str(w) for w in self.witnesses],
        }


@dataclass
class AxiomReport:
    results: dict[str, AxiomResult]

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results.values())

    def __getitem__(self, name: str) -> AxiomResult:
        return self.results[name]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "axioms": [r.to_dict() for r in self.results.values()]}


def _glb_oracle(u: DomainUniverse, a, b):
    lows = [x for x in u.elements() if u.leq(x, a) and u.leq(x, b)]
    best = [x for x in lows if all(u.leq(y, x) for y in lows)]
    return best[0] if len(best) == 1 else None


def _lub_oracle(u: DomainUniverse, a, b):
    ups = [x for x in u.elements() if u.leq(a, x) and u.leq(b, x)]
    best = [x for x in ups if all(u.leq(x, y) for y in ups)]
    return best[0] if len(best) == 1 else None


def adjunction_counterexamples(
    u: DomainUniverse, triples: Iterable[tuple] | None = None, limit: int = 10
) -> tuple[int, list[tuple]]:
    """Check ``a ⊓ b ⊑ c  ⇔  a ⊑ (b → c)``; returns (checked, counterexamples)."""
    if triples is None:
        els = u.elements()
        triples = itertools.product(els, repeat=3)
    checked = 0
    bad: list[tuple] = []
    for a, b, c in triples:
        checked += 1
        impl = u.implication(b, c)
        if u.leq(u.meet(a, b), c) != u.leq(a, impl):
            if len(bad) < limit:
                bad.append((a, b, c, impl))
    return checked, bad


def validate_axioms(
    u: DomainUniverse, *, samples: int = 5000, seed: int = 0
) -> AxiomReport:
    """Diagnose the axioms of the domain algebra, with witnesses for failures."""
    res: dict[str, AxiomResult] = {}
    els = u.elements()

    a1 = AxiomResult("A1", True)
    if u.cycle:
        a1.passed = False
        a1.witnesses.append(tuple(u.cycle))
    else:
        for a, b in itertools.product(sorted(u.paths), repeat=2):
            a1.checked += 1
            if a != b and u.leq(a, b) and u.leq(b, a):
                a1.passed = False
                a1.witnesses.append((a, b))
        for a in sorted(u.paths):
            for b in u.upper_set(a):
                for c in u.upper_set(b):
                    if not u.leq(a, c):
                        a1.passed = False
                        a1.witnesses.append((a, b, c))
    res["A1"] = a1

    a2 = AxiomResult("A2", True)
    for d in els:
        a2.checked += 1
        if not (u.leq(BOTTOM, d) and u.leq(d, TOP)):
            a2.passed = False
            a2.witnesses.append(d)
    res["A2"] = a2

    a3 = AxiomResult("A3", True)
    for a, b in itertools.combinations_with_replacement(els, 2):
        a3.checked += 1
        try:
            m, j = u.meet(a, b), u.join(a, b)
        except DeltaInconsistent as exc:
            a3.passed = False
            a3.witnesses.append((a, b, "delta inconsistent: " + str(exc)))
            continue
        if m != _glb_oracle(u, a, b):
            a3.passed = False
            a3.witnesses.append((a, b, "meet", m))
        if j != _lub_oracle(u, a, b):
            a3.passed = False
            a3.witnesses.append((a, b, "join", j))
    res["A3"] = a3

    a4 = AxiomResult("A4", True)
    try:
        if len(u.paths) <= EXHAUSTIVE_LIMIT:
            checked, bad = adjunction_counterexamples(u)
        else:
            rng = random.Random(seed)
            trip = [tuple(rng.choice(els) for _ in range(3)) for _ in range(samples)]
            checked, bad = adjunction_counterexamples(u, trip)
        a4.checked = checked
        if bad:
            a4.passed = False
            a4.witnesses.extend(bad)
    except DeltaInconsistent as exc:
        a4.passed = False
        a4.witnesses.append(("delta inconsistent", str(exc)))
    res["A4"] = a4

    res["A5"] = AxiomResult("A5", not u.cycle, len(u.paths), [tuple(u.cycle)] if u.cycle else [])

    a6 = AxiomResult("A6", True)
    for p in sorted(u.paths):
        for q in p.proper_prefixes():
            a6.checked += 1
            if q not in u.paths:
                a6.passed = False
                a6.witnesses.append((p, q))
    res["A6"] = a6

    problems = u.delta_problems()
    res["A7"] = AxiomResult("A7", not problems, len(u.delta), [str(p) for p in problems])

    a8 = AxiomResult("A8", True, 1)
    if u.cycle:
        a8.passed = False
        a8.witnesses.append("height undefined on a cyclic order")
    elif u.height() > u.h_max:
        a8.passed = False
        a8.witnesses.append(f"height {u.height()} > h_max {u.h_max}")
    res["A8"] = a8
    return AxiomReport(res)


def random_prefix_universe(rng: random.Random, max_paths: int = 12, max_depth: int = 4,
                           alphabet: Sequence[str] = ("a", "b", "c", "d")) -> DomainUniverse:
    """A prefix-closed universe with at most ``max_paths`` registered paths."""
    target = rng.randint(1, max_paths)
    paths: set[DomainPath] = set()
    attempts = 0
    while len(paths) < target and attempts < 200:
        attempts += 1
        depth = rng.randint(1, max_depth)
        p = DomainPath(tuple(rng.choice(alphabet) for _ in range(depth)))
        closure = {p, *p.proper_prefixes()}
        if len(paths | closure) <= target:
            paths |= closure
    return DomainUniverse(paths)
