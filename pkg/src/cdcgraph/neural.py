"""Neural substrate: embeddings, rank-1 relation operators and the fixed-point loop.

``W_{r,d} = h_r ⊗ h_d`` is never materialized: ``W x = h_r · <h_d, x>``, and
its spectral radius is ``‖h_r‖·‖h_d‖``, which is what the contraction test
checks.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .domains import DomainPath, as_domain
from .errors import DimensionMismatch, MissingEmbeddings, NonFiniteValue
from .store import FiberStore, Triple

DEFAULT_DIM = 16
DOMAIN_NORM = 0.9
DEFAULT_MARGIN = 0.05
DEFAULT_TARGET = 1.0 - DEFAULT_MARGIN
DEFAULT_EPSILON = 1e-6
DEFAULT_MAX_ITER = 1000
BLOWUP = 1e150  # magnitudes beyond this count as having left the finite range

Node = tuple[str, DomainPath]
Pair = tuple[str, DomainPath]


def identity(x: np.ndarray) -> np.ndarray:
    return x


# tanh is 1-Lipschitz with tanh(0) = 0, so it keeps the contraction bound
ACTIVATIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {"identity": identity, "tanh": np.tanh}


@dataclass
class EmbeddingStore:
    dim: int
    seed: int
    h_c: dict[Node, np.ndarray] = field(default_factory=dict)
    h_r: dict[str, np.ndarray] = field(default_factory=dict)
    h_d: dict[DomainPath, np.ndarray] = field(default_factory=dict)
    margin: float = DEFAULT_MARGIN
    flags: set = field(default_factory=set)  # concepts whose conditioned embedding was zero

    def copy(self) -> "EmbeddingStore":
        return EmbeddingStore(
            self.dim, self.seed,
            {k: v.copy() for k, v in self.h_c.items()},
            {k: v.copy() for k, v in self.h_r.items()},
            {k: v.copy() for k, v in self.h_d.items()},
            self.margin, set(self.flags),
        )

    def pairs(self) -> list[Pair]:
        return [(r, d) for r in sorted(self.h_r) for d in sorted(self.h_d)]

    def identical(self, other: "EmbeddingStore") -> bool:
        def same(a: dict, b: dict) -> bool:
            return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)

        return (self.dim == other.dim and same(self.h_c, other.h_c)
                and same(self.h_r, other.h_r) and same(self.h_d, other.h_d))


def domain_vector(d: DomainPath, dim: int, norm: float = DOMAIN_NORM) -> np.ndarray:
    """Fixed, seed-independent domain vector derived from the path's hash."""
    digest = hashlib.sha256("@".join(d.segments).encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
    v = rng.uniform(-1.0, 1.0, dim)
    return v * (norm / np.linalg.norm(v))


def _graph_triples(graph: FiberStore | Iterable[Triple]) -> list[Triple]:
    return sorted(graph, key=lambda t: (str(t.domain), t.key))


def init_embeddings(graph: FiberStore | Iterable[Triple], dim: int = DEFAULT_DIM, seed: int = 0,
                    *, domains: Iterable[DomainPath] | None = None,
                    domain_norm: float = DOMAIN_NORM) -> EmbeddingStore:
    """Seeded uniform ``h_c``, ``h_r`` in [-0.5, 0.5]; hashed ``h_d`` of fixed norm.

    Every concept gets one vector per domain.
    """
    if dim < 2:
        raise ValueError("embedding dimension must be at least 2")
    triples = _graph_triples(graph)
    if domains is None:
        if isinstance(graph, FiberStore):
            domains = graph.universe.paths
        else:
            domains = {t.domain for t in triples}
    doms = sorted(set(domains))
    concepts = sorted({c for t in triples for c in (t.source, t.target)})
    relations = sorted({t.relation for t in triples})
    rng = np.random.default_rng(seed)
    store = EmbeddingStore(dim, seed)
    hc = rng.uniform(-0.5, 0.5, (len(concepts) * len(doms), dim))
    for i, (c, d) in enumerate((c, d) for c in concepts for d in doms):
        store.h_c[(c, d)] = hc[i]
    hr = rng.uniform(-0.5, 0.5, (len(relations), dim))
    for i, r in enumerate(relations):
        store.h_r[r] = hr[i]
    for d in doms:
        store.h_d[d] = domain_vector(d, dim, domain_norm)
    return store


def _vec(store: EmbeddingStore, table: dict, key, what: str) -> np.ndarray:
    try:
        return table[key]
    except KeyError:
        raise MissingEmbeddings(f"no {what} embedding for {key!r}") from None


def apply_w(store: EmbeddingStore, r: str, d: DomainPath | str, x: np.ndarray) -> np.ndarray:
    d = as_domain(d)
    x = np.asarray(x, dtype=float)
    if x.shape != (store.dim,):
        raise DimensionMismatch(f"expected a vector of length {store.dim}, got shape {x.shape}")
    h_r = _vec(store, store.h_r, r, "relation")
    h_d = _vec(store, store.h_d, d, "domain")
    return h_r * float(h_d @ x)


def materialize(store: EmbeddingStore, r: str, d: DomainPath) -> np.ndarray:
    """The dense dim×dim operator; only for oracles and tests."""
    return np.outer(store.h_r[r], store.h_d[as_domain(d)])


@dataclass
class ContractionReport:
    products: dict[Pair, float]
    overall: bool

    @property
    def max_product(self) -> float:
        return max(self.products.values(), default=0.0)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "max_product": self.max_product,
            "products": {f"{r}@{d}": p for (r, d), p in sorted(self.products.items())},
        }


def contraction_check(store: EmbeddingStore, pairs: Iterable[Pair] | None = None) -> ContractionReport:
    pairs = store.pairs() if pairs is None else sorted(set(pairs))
    products = {
        (r, d): float(np.linalg.norm(store.h_r[r]) * np.linalg.norm(store.h_d[d]))
        for r, d in pairs
    }
    return ContractionReport(products, all(p < 1.0 for p in products.values()))


def spectral_normalize(store: EmbeddingStore, target: float = DEFAULT_TARGET,
                       pairs: Iterable[Pair] | None = None) -> EmbeddingStore:
    """Rescale each ``h_r`` so that no product with a domain norm exceeds ``target``."""
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie in (0, 1)")
    out = store.copy()
    _cap_relations(out.h_r, out.h_d, target, pairs if pairs is not None else store.pairs())
    return out


def _cap_relations(h_r: dict, h_d: dict, target: float, pairs: Iterable[Pair]) -> None:
    dnorm: dict[str, float] = {}
    for r, d in pairs:
        dnorm[r] = max(dnorm.get(r, 0.0), float(np.linalg.norm(h_d[d])))
    for r, dn in dnorm.items():
        prod = float(np.linalg.norm(h_r[r])) * dn
        if prod >= target and prod > 0.0:
            scale = target / prod
            v = h_r[r] * scale
            while float(np.linalg.norm(v)) * dn > target:  # rounding can overshoot by an ulp
                scale = np.nextafter(scale, 0.0)
                v = h_r[r] * scale
            h_r[r] = v


@dataclass
class ConvergenceReport:
    converged: bool
    iterations: int
    final_delta: float
    contraction_products: dict[Pair, float]
    estimated_lambda: float
    deltas: list[float] = field(default_factory=list)
    diverged: bool = False

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "diverged": self.diverged,
            "iterations": self.iterations,
            "final_delta": self.final_delta,
            "estimated_lambda": self.estimated_lambda,
            "contraction_products": {f"{r}@{d}": p
                                     for (r, d), p in sorted(self.contraction_products.items())},
        }


def _estimate_lambda(deltas: list[float]) -> float:
    tail = [x for x in deltas if x > 0.0]
    if len(tail) < 2:
        return 0.0
    return float((tail[-1] / tail[0]) ** (1.0 / (len(tail) - 1)))


def fixed_point_iterate(graph: FiberStore | Iterable[Triple], store: EmbeddingStore,
                        epsilon: float = DEFAULT_EPSILON, max_iter: int = DEFAULT_MAX_ITER, *,
                        normalize: bool = True, target: float | None = None,
                        activation: str | Callable = "identity",
                        dense_operators: Mapping[Pair, np.ndarray] | None = None,
                        ) -> tuple[EmbeddingStore, ConvergenceReport]:
    """Alternate the concept and relation updates until the sup-norm change is below ``epsilon``.

    Concept node ``(c, d)`` averages ``W_{r,d'} h_c(s, d')`` over incoming edges
    ``r(s, c)@d'`` with ``d' ⊑ d``; nodes without incoming edges go to zero.
    Relations take the mean of ``h_source + h_target`` over their edges and,
    with ``normalize``, are capped back under ``target``.

    ``dense_operators`` replaces the rank-1 operators by fixed dense matrices
    (the unconstrained comparison condition); relation vectors then have no
    effect on the concept update.
    """
    sigma = ACTIVATIONS[activation] if isinstance(activation, str) else activation
    target = 1.0 - store.margin if target is None else target
    triples = _graph_triples(graph)
    out = store.copy()
    nodes = sorted(out.h_c)
    rels = sorted(out.h_r)
    doms = sorted(out.h_d)
    node_ix = {n: i for i, n in enumerate(nodes)}
    rel_ix = {r: i for i, r in enumerate(rels)}
    dom_ix = {d: i for i, d in enumerate(doms)}
    pairs = sorted({(t.relation, t.domain) for t in triples})

    universe = getattr(graph, "universe", None)

    def below(a: DomainPath, b: DomainPath) -> bool:
        return universe.leq(a, b) if universe is not None else a == b

    # message list: (edge index, receiving node); edge carries (source node, relation, domain)
    src, rel, dom, recv_edge, recv_node = [], [], [], [], []
    for e, t in enumerate(triples):
        for key in ((t.source, t.domain), (t.target, t.domain)):
            if key not in node_ix:
                raise MissingEmbeddings(f"no concept embedding for {key!r}")
        if t.relation not in rel_ix or t.domain not in dom_ix:
            raise MissingEmbeddings(f"no embedding for {t.relation}@{t.domain}")
        src.append(node_ix[(t.source, t.domain)])
        rel.append(rel_ix[t.relation])
        dom.append(dom_ix[t.domain])
        for d in doms:
            if (t.target, d) in node_ix and below(t.domain, d):
                recv_edge.append(e)
                recv_node.append(node_ix[(t.target, d)])
    src_a, rel_a, dom_a = np.array(src, int), np.array(rel, int), np.array(dom, int)
    recv_edge_a, recv_node_a = np.array(recv_edge, int), np.array(recv_node, int)
    tgt_a = np.array([node_ix[(t.target, t.domain)] for t in triples], int)

    n, dim = len(nodes), out.dim
    C = np.array([out.h_c[k] for k in nodes]).reshape(n, dim)
    R = np.array([out.h_r[k] for k in rels]).reshape(len(rels), dim)
    D = np.array([out.h_d[k] for k in doms]).reshape(len(doms), dim)
    indeg = np.bincount(recv_node_a, minlength=n).astype(float)
    rel_count = np.bincount(rel_a, minlength=len(rels)).astype(float)
    dense = None
    if dense_operators is not None:
        dense = np.stack([np.asarray(dense_operators[(rels[r], doms[d])], float)
                          for r, d in zip(rel_a, dom_a)]) if len(triples) else np.zeros((0, dim, dim))

    def cap(Rm: np.ndarray) -> np.ndarray:
        if not normalize:
            return Rm
        h_r = {rels[i]: Rm[i] for i in range(len(rels))}
        _cap_relations(h_r, out.h_d, target, pairs)
        return np.array([h_r[r] for r in rels]).reshape(Rm.shape)

    dnorm = {d: float(np.linalg.norm(v)) for d, v in out.h_d.items()}

    def products_of(Rm: np.ndarray) -> dict[Pair, float]:
        norms = np.linalg.norm(Rm, axis=1) if Rm.size else np.zeros(len(rels))
        return {(r, d): float(norms[rel_ix[r]]) * dnorm[d] for r, d in pairs}

    # the budget actually in force: largest product seen for each pair during the run
    seen = products_of(R)
    deltas: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if len(triples):
            if dense is None:
                messages = R[rel_a] * np.einsum("ij,ij->i", D[dom_a], C[src_a])[:, None]
            else:
                messages = np.einsum("eij,ej->ei", dense, C[src_a])
            agg = np.zeros_like(C)
            np.add.at(agg, recv_node_a, messages[recv_edge_a])
            with np.errstate(invalid="ignore", divide="ignore"):
                C_new = np.where(indeg[:, None] > 0, agg / np.maximum(indeg, 1.0)[:, None], 0.0)
            C_new = sigma(C_new)
            sums = np.zeros_like(R)
            np.add.at(sums, rel_a, C[src_a] + C[tgt_a])
            R_new = np.where(rel_count[:, None] > 0, sums / np.maximum(rel_count, 1.0)[:, None], R)
            R_new = cap(R_new)
        else:
            C_new, R_new = np.zeros_like(C), R.copy()
        if not (np.all(np.isfinite(C_new)) and np.all(np.isfinite(R_new))) or (
                C_new.size and np.max(np.abs(C_new)) > BLOWUP) or (
                R_new.size and np.max(np.abs(R_new)) > BLOWUP):
            raise NonFiniteValue(f"iteration left the finite range at step {iterations}")
        delta = max(
            float(np.max(np.abs(C_new - C))) if C.size else 0.0,
            float(np.max(np.abs(R_new - R))) if R.size else 0.0,
        )
        deltas.append(delta)
        C, R = C_new, R_new
        for p, v in products_of(R).items():
            seen[p] = max(seen[p], v)
        if delta < epsilon:
            converged = True
            break

    for i, k in enumerate(nodes):
        out.h_c[k] = C[i]
    for i, k in enumerate(rels):
        out.h_r[k] = R[i]
    if dense_operators is not None:
        products = {p: float(np.max(np.abs(np.linalg.eigvals(dense_operators[p])))) for p in pairs}
    else:
        products = seen
    report = ConvergenceReport(converged, iterations, deltas[-1] if deltas else 0.0, products,
                               _estimate_lambda(deltas), deltas)
    return out, report


def run_guarded(graph, store, epsilon=DEFAULT_EPSILON, max_iter=DEFAULT_MAX_ITER, **kw
                ) -> tuple[EmbeddingStore | None, ConvergenceReport]:
    """Like :func:`fixed_point_iterate` but turns a blow-up into a report."""
    try:
        return fixed_point_iterate(graph, store, epsilon, max_iter, **kw)
    except NonFiniteValue:
        return None, ConvergenceReport(False, max_iter, math.inf, {}, math.inf, [], True)


def random_dense_operators(pairs: Iterable[Pair], dim: int, seed: int,
                           radius: float = 1.5) -> dict[Pair, np.ndarray]:
    """Random dense operators rescaled to spectral radius ``radius`` (test hook)."""
    rng = np.random.default_rng(seed)
    out = {}
    for p in sorted(set(pairs)):
        w = rng.standard_normal((dim, dim))
        rho = float(np.max(np.abs(np.linalg.eigvals(w))))
        out[p] = w * (radius / rho)
    return out


def embed_concept(store: EmbeddingStore, c: str, d: DomainPath | str) -> np.ndarray:
    """Domain-conditioned unit vector ``h_c(c, d) ⊙ h_d(d)``; zero (and flagged) if degenerate."""
    d = as_domain(d)
    v = _vec(store, store.h_c, (c, d), "concept") * _vec(store, store.h_d, d, "domain")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        store.flags.add((c, d))
        return np.zeros(store.dim)
    return v / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b) / (na * nb)
