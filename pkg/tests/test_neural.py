import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdcgraph.domains import DomainPath
from cdcgraph.errors import DimensionMismatch, MissingEmbeddings, NonFiniteValue
from cdcgraph.experiments import experiment3_graph, rank_one_identity
from cdcgraph.neural import (
    DOMAIN_NORM, EmbeddingStore, apply_w, contraction_check, cosine, domain_vector, embed_concept,
    fixed_point_iterate, init_embeddings, materialize, random_dense_operators, run_guarded,
    spectral_normalize,
)
from cdcgraph.store import FiberStore

P = DomainPath.parse


@pytest.fixture
def graph():
    return experiment3_graph(0)


def pairs_of(g):
    return sorted({(t.relation, t.domain) for t in g})


def test_apply_w_matches_outer_product(graph):
    emb = init_embeddings(graph, 16, 3)
    rng = np.random.default_rng(1)
    for r, d in pairs_of(graph):
        x = rng.uniform(-1, 1, 16)
        dense = np.outer(emb.h_r[r], emb.h_d[d]) @ x
        assert np.max(np.abs(apply_w(emb, r, d, x) - dense)) <= 1e-12
        assert np.array_equal(materialize(emb, r, d), np.outer(emb.h_r[r], emb.h_d[d]))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_rank_one_spectral_norm_equals_svd(dim, seed):
    rng = np.random.default_rng(seed)
    h_r, h_d = rng.uniform(-1, 1, dim), rng.uniform(-1, 1, dim)
    top = np.linalg.svd(np.outer(h_r, h_d), compute_uv=False)[0]
    assert abs(np.linalg.norm(h_r) * np.linalg.norm(h_d) - top) <= 1e-9


def test_rank_one_identity_on_200_pairs():
    assert rank_one_identity(200) <= 1e-9


def test_contraction_threshold():
    d = P("X")
    emb = EmbeddingStore(2, 0, h_r={"r": np.array([0.5, 0.0])}, h_d={d: np.array([0.0, 1.2])})
    rep = contraction_check(emb)
    assert rep.products[("r", d)] == pytest.approx(0.6)
    assert rep.overall
    emb.h_r["r"] = np.array([1.0, 0.0])
    emb.h_d[d] = np.array([1.0, 0.0])
    assert not contraction_check(emb).overall  # 1.0 is not a contraction


def test_spectral_normalize_caps_every_pair(graph):
    emb = init_embeddings(graph, 16, 0)
    emb.h_r = {r: v * 10 for r, v in emb.h_r.items()}
    assert not contraction_check(emb, pairs_of(graph)).overall
    capped = spectral_normalize(emb, pairs=pairs_of(graph))
    rep = contraction_check(capped, pairs_of(graph))
    assert rep.overall and rep.max_product <= 0.95
    assert rep.max_product == pytest.approx(0.95)
    with pytest.raises(ValueError):
        spectral_normalize(emb, target=1.0)


def test_init_validation_and_determinism(graph):
    with pytest.raises(ValueError):
        init_embeddings(graph, 1, 0)
    a, b = init_embeddings(graph, 8, 5), init_embeddings(graph, 8, 5)
    assert a.identical(b)
    assert not a.identical(init_embeddings(graph, 8, 6))
    assert all(np.all(np.abs(v) <= 0.5) for v in a.h_c.values())
    for v in a.h_d.values():
        assert np.linalg.norm(v) == pytest.approx(DOMAIN_NORM)
    assert np.array_equal(domain_vector(P("GraphA"), 8), a.h_d[P("GraphA")])


def test_apply_w_errors(graph):
    emb = init_embeddings(graph, 4, 0)
    with pytest.raises(DimensionMismatch):
        apply_w(emb, "r0", "GraphA", np.zeros(5))
    with pytest.raises(MissingEmbeddings):
        apply_w(emb, "nope", "GraphA", np.zeros(4))


def test_condition_c_converges_and_is_reproducible(graph):
    emb = spectral_normalize(init_embeddings(graph, 16, 7), pairs=pairs_of(graph))
    out1, rep1 = fixed_point_iterate(graph, emb, 1e-6, 1000)
    out2, rep2 = fixed_point_iterate(graph, emb, 1e-6, 1000)
    assert rep1.converged and rep1.final_delta < 1e-6
    assert out1.identical(out2) and rep1.deltas == rep2.deltas
    assert all(p < 1.0 for p in rep1.contraction_products.values())
    assert 0.0 <= rep1.estimated_lambda < 1.0


def test_fixed_point_is_unique(graph):
    pairs = pairs_of(graph)
    base = spectral_normalize(init_embeddings(graph, 16, 1), pairs=pairs)
    other = spectral_normalize(init_embeddings(graph, 16, 2), pairs=pairs)
    a, _ = fixed_point_iterate(graph, base, 1e-10, 5000)
    b, _ = fixed_point_iterate(graph, other, 1e-10, 5000)
    for k in a.h_c:
        assert np.max(np.abs(a.h_c[k] - b.h_c[k])) < 1e-6


def test_dense_condition_blows_up(graph):
    emb = init_embeddings(graph, 16, 0)
    ops = random_dense_operators(pairs_of(graph), 16, 0, radius=3.0)
    with pytest.raises(NonFiniteValue):
        fixed_point_iterate(graph, emb, 1e-6, 2000, dense_operators=ops)
    _, rep = run_guarded(graph, emb, 1e-6, 2000, dense_operators=ops)
    assert rep.diverged and not rep.converged


def test_random_dense_operators_have_requested_radius():
    ops = random_dense_operators([("r", P("X"))], 6, 0, radius=1.5)
    rho = max(abs(np.linalg.eigvals(ops[("r", P("X"))])))
    assert rho == pytest.approx(1.5)


def test_empty_graph_converges_in_one_step(graph):
    empty = FiberStore(graph.universe)
    emb = init_embeddings(empty, 4, 0)
    _, rep = fixed_point_iterate(empty, emb)
    assert rep.converged and rep.iterations == 1 and rep.final_delta == 0.0


def test_tanh_activation_converges(graph):
    emb = spectral_normalize(init_embeddings(graph, 8, 0), pairs=pairs_of(graph))
    _, rep = fixed_point_iterate(graph, emb, activation="tanh")
    assert rep.converged


def test_embed_concept_flags_zero_vectors(graph):
    emb = init_embeddings(graph, 4, 0)
    key = next(iter(emb.h_c))
    emb.h_c[key] = np.zeros(4)
    assert not embed_concept(emb, *key).any()
    assert key in emb.flags
    assert cosine(np.zeros(3), np.ones(3)) == 0.0
    assert cosine(np.ones(3), np.ones(3)) == pytest.approx(1.0)
