import pytest

from cdcgraph.domains import DomainPath
from cdcgraph.errors import CyclicRequires, Unauthorized
from cdcgraph.experiments import experiment1, experiment2, pruning_experiment, synthetic_store
from cdcgraph.knowledge import KBParseError, load_fixture, load_kb
from cdcgraph.validation import validate_kb

P = DomainPath.parse

CYCLE = """\
domain Eng
tier meta Logic scope *
meta requires transitive @ Logic
triple requires(A, B) @ Eng
triple requires(B, C) @ Eng
triple requires(C, A) @ Eng
"""


def test_aliases_resolve(exp1):
    assert exp1.resolve("Quantum") == P("Science@Physics@Quantum")
    assert exp1.resolve("Physics@Extra") == P("Science@Physics@Extra")
    assert str(exp1.resolve("*")) == "⊤"


def test_parse_errors_raise():
    with pytest.raises(KBParseError) as info:
        load_kb("domain A\ntriple r(a b) @ A\n")
    assert info.value.diagnostics[0].line == 2


def test_semantic_problems_are_collected():
    kb = load_kb("domain A\nmeta is_a monotone @ Nowhere\nbridge x @ A ~ y @ A\n")
    assert len(kb.problems) == 2
    assert not validate_kb(kb).ok
    assert validate_kb(kb).failures == ["load"]


def test_cycle_strict_and_lax():
    with pytest.raises(CyclicRequires):
        load_kb(CYCLE)
    kb = load_kb(CYCLE, strict_cycles=False)
    report = validate_kb(kb)
    assert not report.ok
    assert report["C4_acyclic"].detail["cycles"][0]["cycle"] == ["A", "B", "C", "A"]


def test_height_bound_validation():
    kb = load_kb("domain a@b@c@d\n", h_max=3)
    report = validate_kb(kb)
    assert set(report.failures) == {"C1_finite_depth", "axiom_A8"}


@pytest.mark.parametrize("name", ["experiment1.kb", "experiment2.kb", "phq9.kb"])
def test_fixtures_validate(name):
    report = validate_kb(load_fixture(name))
    assert report.ok, report.to_dict()
    assert not report["axiom_A4"].gating


def test_fusion_through_knowledge_base(exp1):
    with pytest.raises(Unauthorized):
        exp1.apply_fusion("Science@Biology", "Science@Physics@Quantum")
    rep = exp1.apply_fusion("Science@Biology", "Science@Physics@Quantum", authorized=True,
                            name="Biophysics")
    assert exp1.universe is rep.universe
    assert exp1.store.universe is rep.universe
    assert P("Biophysics") in exp1.universe


def test_experiments_report_deterministically():
    assert experiment1().to_dict() == experiment1().to_dict()
    assert experiment2().to_dict() == experiment2().to_dict()


def test_small_pruning_run():
    store = synthetic_store(1000, 10)
    assert len(store) == 1000 and len(store.populated_domains()) == 10
    rep = pruning_experiment(1000, 10)
    assert rep.passed and rep.result["ratio"] >= 10
