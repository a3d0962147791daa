"""Acceptance criteria, each run at its stated tolerance and time limit."""

import itertools
import random

import pytest

from cdcgraph.bridges import compose, fuse
from cdcgraph.domains import BOTTOM, TOP, DomainPath, DomainUniverse, random_prefix_universe
from cdcgraph.errors import CyclicRequires, HeightBoundReached
from cdcgraph.experiments import experiment1, experiment2, experiment3, pruning_experiment
from cdcgraph.knowledge import load_kb
from cdcgraph.phq9 import PHQ9, PSYCHOLOGY, alert_propagation_check, record_actions, score_assessment
from cdcgraph.reindex import galois_check, inherited_query
from cdcgraph.store import FiberStore, Triple
from cdcgraph.traversal import UNIT, kleisli_step, transitive_closure

from helpers import RELATIONS, chain_universe, random_store, start_pairs

P = DomainPath.parse


def test_criterion_01_heyting_adjunction(criterion):
    with criterion(1, "Heyting adjunction on generated prefix universes (<= 12 domains)", 10):
        rng = random.Random(0)
        checked = failed = 0
        first = None
        for _ in range(200):
            u = random_prefix_universe(rng, max_paths=12)
            els = u.elements()
            for a, b, c in itertools.product(els, repeat=3):
                checked += 1
                if u.leq(u.meet(a, b), c) != u.leq(a, u.implication(b, c)):
                    failed += 1
                    first = first or (sorted(u.paths), a, b, c)
        assert failed == 0, (
            f"{failed}/{checked} triples violate the adjunction; first: {first}")


def test_criterion_02_non_distributivity_witness(criterion):
    with criterion(2, "non-distributivity witness gives Physics vs bottom", 1):
        u = DomainUniverse.build(
            ["Physics", "Math", "Chemistry", "Science"],
            [("Math", "Chemistry", "Science"), ("Physics", "Math", "Science"),
             ("Physics", "Chemistry", "Science")])
        phys, math, chem = P("Physics"), P("Math"), P("Chemistry")
        lhs = u.meet(phys, u.join(math, chem))
        rhs = u.join(u.meet(phys, math), u.meet(phys, chem))
        assert lhs == phys
        assert rhs == BOTTOM


def test_criterion_03_implication_examples(criterion):
    with criterion(3, "implication examples", 1):
        u = DomainUniverse.build(["Physics", "Physics@Quantum"])
        assert u.implication(P("Physics@Quantum"), P("Physics")) == TOP
        assert u.implication(P("Physics"), P("Physics@Quantum")) == P("Physics@Quantum")


def test_criterion_04_experiment1_table(criterion):
    with criterion(4, "experiment 1 table (standard Yes/Yes, typed Yes/No)", 1):
        rep = experiment1()
        assert rep.passed, rep.failures
        std, typed = rep.result["table"]
        assert std["is_a(Atom, Particle)"] and std["contrasts_with(Wave, Particle)"]
        assert typed["is_a(Atom, Particle)"] and not typed["contrasts_with(Wave, Particle)"]


def test_criterion_05_galois_closure(criterion, exp1):
    with criterion(5, "Galois adjunction and closure laws on the experiment 1 fixture", 1):
        rep = galois_check(exp1.store)
        assert rep.pairs_checked > 0
        assert not rep.adjunction_violations, rep.adjunction_violations
        assert not rep.closure_violations, rep.closure_violations
        excluded = {t.relation for t in rep.excluded_non_monotone}
        assert excluded == {"contrasts_with"}


def test_criterion_06_experiment2_spr(criterion):
    with criterion(6, "experiment 2 SPR ranges and strict degradation", 5):
        rep = experiment2()
        s = rep.result["spr"]
        assert 0.75 <= s["phi12"] <= 0.85
        assert 0.55 <= s["phi23"] <= 0.70
        assert 0.30 <= s["composed"] <= 0.50
        assert s["composed"] < min(s["phi12"], s["phi23"])
        assert rep.result["dom_composed"] < rep.result["dom_phi12"]
        assert rep.passed, rep.failures


def test_criterion_07_experiment3_convergence(criterion):
    with criterion(7, "experiment 3: C converges 100/100, A fails on >= 1 seed, rank-1 identity", 60):
        rep = experiment3(seeds=100, epsilon=1e-6)
        cond = rep.result["conditions"]
        assert cond["C"]["converged"] == 100
        assert cond["A"]["converged"] < 100
        assert rep.result["rank1_max_deviation"] <= 1e-9
        assert rep.passed, rep.failures


def test_criterion_08_pruning_ratio(criterion):
    with criterion(8, "pruning ratio on N=100000, K=50", 60):
        rep = pruning_experiment(100_000, 50)
        r = rep.result
        assert r["indexed"]["candidates"] <= 100_000 / 50
        assert r["scan"]["candidates"] == 100_000
        assert r["ratio"] >= 50
        assert rep.passed, rep.failures


def test_criterion_09_monad_laws(criterion):
    with criterion(9, "Kleisli monad laws on 50 random graphs", 10):
        rng = random.Random(9)
        checked = 0
        for _ in range(50):
            store = random_store(rng)
            f, g, h = (kleisli_step(store, r) for r in RELATIONS)
            fixed = kleisli_step(store, "r0", sorted(store.universe.paths)[0])
            for x in start_pairs(store):
                checked += 1
                for k in (f, fixed):
                    assert (UNIT >> k)(x) == k(x)
                    assert (k >> UNIT)(x) == k(x)
                assert ((f >> g) >> h)(x) == (f >> (g >> h))(x)
                assert ((fixed >> g) >> f)(x) == (fixed >> (g >> f))(x)
        assert checked > 0


CYCLIC_KB = """\
domain Eng
tier meta Logic scope *
meta requires monotone @ Logic
meta requires transitive @ Logic
triple requires(Build, Test) @ Eng
triple requires(Test, Deploy) @ Eng
triple requires(Deploy, Build) @ Eng
"""


def test_criterion_10_termination_and_guards(criterion, exp1, exp2):
    with criterion(10, "termination bounds, cycle rejection, fusion bound, hypothesis bridges", 5):
        # reindexing never takes more than height(universe) steps
        for depth in range(1, 8):
            u = chain_universe(depth)
            store = FiberStore(u)
            for d in u.paths:
                store.extend(Triple("x", "r", f"y{d.depth}", d))
            for d in u.paths:
                assert inherited_query(store, "x", "r", d).steps <= u.height()
        for d in exp1.universe.paths:
            assert inherited_query(exp1.store, "Atom", "is_a", d).steps <= exp1.universe.height()

        with pytest.raises(CyclicRequires) as info:
            load_kb(CYCLIC_KB, strict_cycles=True)
        assert info.value.cycle[0] == info.value.cycle[-1]
        assert set(info.value.cycle) == {"Build", "Test", "Deploy"}

        u = DomainUniverse.build(["A", "A@B", "A@B@C", "X", "Y", "Z"], h_max=5)
        allowed = u.h_max - u.height() + 1
        fused, history = u, []
        with pytest.raises(HeightBoundReached):
            for i, other in enumerate(["X", "Y", "Z"], 1):
                left = history[-1] if history else P("A")
                rep = fuse(fused, left, other, authorized=True, name=f"F{i}")
                fused = rep.universe
                history.append(rep.domain)
        assert len(history) == allowed - 1

        d1, d2, d3 = (exp2.resolve(x) for x in ("CS@ML", "Biology@Neuro", "Sociology@Networks"))
        before = set(exp2.store)
        comp = compose(exp2.bridges.morphism(d1, d2), exp2.bridges.morphism(d2, d3), exp2.store)
        assert comp.morphism.is_hypothesis
        assert comp.morphism.derivation_depth >= 2
        assert (d1, d3) not in exp2.bridges.pairs()
        assert set(exp2.store) == before
        bridged = 0
        for src in sorted(exp2.bridges.morphism(d1, d2).mapping):
            for rel in exp2.store.relations(d1):
                res = transitive_closure(exp2.store, src, rel, d1, bridges=exp2.bridges)
                for step in res.trace:
                    if step.layer == "L4":
                        bridged += 1
                        assert step.provenance.is_hypothesis
                for pair in res.hypotheses():
                    assert res.items[pair].is_hypothesis
        assert bridged > 0
        assert set(exp2.store) == before


def test_criterion_11_phq9(criterion, phq):
    with criterion(11, "PHQ-9 P001: total 14, moderate, alert at PHQ9 only", 1):
        a = score_assessment("P001", phq.store)
        assert a.total == 14
        assert a.severity == "moderate"
        assert a.alert is not None and a.alert.concept == "SuicidalIdeation"
        record_actions(phq.store, a)
        assert [t.target for t in phq.store.lookup("P001", "r_alert", PHQ9)] == ["high"]
        check = alert_propagation_check(phq.store, "P001")
        assert check.alert_raised and check.passed, check.to_dict()
        assert inherited_query(phq.store, "P001", "r_alert", PSYCHOLOGY).hits == []
