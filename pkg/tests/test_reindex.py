import pytest

from cdcgraph.domains import DomainPath
from cdcgraph.errors import IncomparableDomains
from cdcgraph.reindex import alpha, entails, galois_check, gamma_tau, inherited_fiber, inherited_query
from cdcgraph.store import INHERITED, Triple

P = DomainPath.parse
PHYS, QUANT, SCI, BIO = (P(x) for x in ("Science@Physics", "Science@Physics@Quantum",
                                        "Science", "Science@Biology"))


def test_gamma_blocks_non_monotone(exp1):
    store = exp1.store
    isa = store.get(("Atom", "is_a", "Particle"), PHYS)
    contrast = store.get(("Wave", "contrasts_with", "Particle"), PHYS)
    assert gamma_tau(store, isa, QUANT) == isa.at(QUANT, INHERITED)
    assert gamma_tau(store, contrast, QUANT) is None
    assert gamma_tau(store, contrast, PHYS) == contrast


def test_alpha_finds_parent_copy(exp1):
    store = exp1.store
    t = Triple("Atom", "is_a", "Particle", QUANT)
    assert alpha(store, t, PHYS) == store.get(t.key, PHYS)
    assert alpha(store, t, SCI) is None
    with pytest.raises(IncomparableDomains):
        alpha(store, t, BIO)
    with pytest.raises(IncomparableDomains):
        gamma_tau(store, t, BIO)


def test_typed_versus_untyped_inheritance(exp1):
    typed = inherited_query(exp1.store, "Wave", "contrasts_with", QUANT)
    assert typed.hits == []
    assert [t.relation for t in typed.blocked] == ["contrasts_with"]
    untyped = inherited_query(exp1.store, "Wave", "contrasts_with", QUANT, typed=False)
    assert untyped.targets == ["Particle"]


def test_inheritance_walks_every_ancestor(exp1):
    ans = inherited_query(exp1.store, "Particle", "is_a", QUANT)
    assert ans.targets == ["PhysicalEntity"]
    assert ans.hits[0].origin == SCI
    assert ans.steps == 2


def test_inherited_fiber_excludes_blocked(exp1):
    fiber = inherited_fiber(exp1.store, QUANT)
    assert {t.relation for t in fiber} == {"is_a"}
    assert all(t.provenance == INHERITED for t in fiber)


def test_entails_is_specialisation(exp1):
    t = Triple("Atom", "is_a", "Particle", PHYS)
    assert entails(exp1.store, t.at(QUANT, INHERITED), t)
    assert not entails(exp1.store, t, t.at(QUANT, INHERITED))


def test_galois_check_exhaustive(exp1):
    rep = galois_check(exp1.store)
    assert rep.ok, rep.to_dict()
    assert rep.pairs_checked >= 3
    assert rep.to_dict()["excluded_non_monotone"] == ["contrasts_with(Wave, Particle)@Science@Physics"]
