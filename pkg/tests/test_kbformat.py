from hypothesis import given, settings, strategies as st

from cdcgraph.kbformat import (
    AliasStmt, BridgeStmt, DeltaStmt, Document, DomainStmt, FactStmt, MetaStmt, TierStmt,
    TripleStmt, iter_kinds, parse_file, parse_kb, quote, serialize_kb,
)
from cdcgraph.knowledge import fixture_path

SAMPLE = """\
# header comment
domain Science@Physics
alias Physics = Science@Physics
delta Science@Physics , Science@Biology -> Science
tier meta Logic scope *
meta is_a monotone @ Logic
triple is_a(Atom, Particle) @ Physics conf=0.9   # trailing comment
bridge Neuron @ Science@Biology ~ Node @ Physics
fact P001 "lost interest # not a comment" @ Psychology@PHQ9 -> Anhedonia conf=0.5 freq=2
"""


def test_parses_every_statement_kind():
    doc = parse_kb(SAMPLE)
    assert doc.ok, doc.diagnostics
    kinds = [type(s) for s in doc.statements]
    assert kinds == [DomainStmt, AliasStmt, DeltaStmt, TierStmt, MetaStmt, TripleStmt,
                     BridgeStmt, FactStmt]
    triple = doc.of(TripleStmt)[0]
    assert (triple.relation, triple.source, triple.target, triple.path, triple.conf) == \
        ("is_a", "Atom", "Particle", "Physics", 0.9)
    assert triple.line == 7
    fact = doc.of(FactStmt)[0]
    assert fact.utterance == "lost interest # not a comment"
    assert (fact.conf, fact.freq) == (0.5, 2)
    assert doc.of(TierStmt)[0].scope == "*"


def test_missing_comma_reports_line():
    doc = parse_kb("domain A\n\ntriple is_a(Atom Particle) @ A\n")
    assert not doc.ok
    [diag] = doc.diagnostics
    assert diag.line == 3 and diag.severity == "error"
    assert "','" in diag.message
    assert str(diag).startswith("line 3: error:")
    assert len(doc.statements) == 1


def test_each_bad_line_gets_one_diagnostic():
    text = "domain A\nfrobnicate x\ntriple r(a, b) @ A conf=2\nfact S u @ A -> C freq=7\n" \
           'triple r("open, b) @ A\ntier object T\ndomain A extra\n'
    doc = parse_kb(text)
    assert [d.line for d in doc.diagnostics] == [2, 3, 4, 5, 6, 7]
    assert len(doc.statements) == 1


def test_round_trip_is_canonical():
    doc = parse_kb(SAMPLE)
    text = serialize_kb(doc)
    again = parse_kb(text)
    assert again.ok and again.equivalent(doc)
    assert serialize_kb(again) == text


def test_quote_escapes():
    assert quote("plain_token") == "plain_token"
    for name in ['has "quotes"', "back\\slash", "tab\there", "new\nline", "cr\rhere", "\x1e", "x # y", ""]:
        doc = parse_kb(f"fact S {quote(name)} @ A -> C\n")
        assert doc.ok, (name, doc.diagnostics)
        assert doc.of(FactStmt)[0].utterance == name


def test_fixtures_parse_cleanly():
    for name in ("experiment1.kb", "experiment2.kb", "phq9.kb"):
        doc = parse_file(fixture_path(name))
        assert doc.ok, (name, doc.diagnostics)
        assert dict(iter_kinds(doc))["triple"] > 0
        assert parse_kb(serialize_kb(doc)).equivalent(doc)


def test_non_utf8_file(tmp_path):
    p = tmp_path / "bad.kb"
    p.write_bytes(b"domain \xff\n")
    doc = parse_file(p)
    assert not doc.ok and doc.diagnostics[0].line == 1


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=200))
def test_parser_is_total(text):
    doc = parse_kb(text)
    assert isinstance(doc, Document)
    lines = text.split("\n")
    for d in doc.diagnostics:
        assert 1 <= d.line <= len(lines)
    assert len(doc.statements) + len(doc.diagnostics) <= len(lines)


tokens = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,6}", fullmatch=True)
names = tokens | st.text(min_size=0, max_size=12)
paths = st.lists(tokens, min_size=1, max_size=3).map("@".join)
confs = st.floats(0, 1, allow_nan=False)


@st.composite
def statements(draw):
    kind = draw(st.sampled_from(["domain", "triple", "fact", "bridge", "meta"]))
    if kind == "domain":
        return DomainStmt(draw(paths))
    if kind == "triple":
        return TripleStmt(draw(tokens), draw(names), draw(names), draw(paths), draw(confs))
    if kind == "fact":
        return FactStmt(draw(names), draw(names), draw(paths), draw(names), draw(confs),
                        draw(st.none() | st.integers(0, 3)))
    if kind == "bridge":
        return BridgeStmt(draw(names), draw(paths), draw(names), draw(paths))
    return MetaStmt(draw(tokens), draw(st.sampled_from(["monotone", "transitive"])), draw(paths))


@settings(max_examples=150, deadline=None)
@given(st.lists(statements(), max_size=12))
def test_render_parse_round_trip(stmts):
    doc = Document(stmts)
    parsed = parse_kb(serialize_kb(doc))
    assert parsed.ok, parsed.diagnostics
    assert parsed.equivalent(doc)
