"""Line-oriented knowledge-base format.

One statement per line, ``#`` starts a comment::

    domain Science@Physics
    alias Physics = Science@Physics
    delta Science@Physics , Science@Biology -> Science
    tier meta Logic scope *
    triple is_a(Atom, Particle) @ Physics conf=0.9
    meta requires monotone @ Logic
    bridge Neuron @ Biology ~ Node @ CS
    fact P001 "lost interest" @ Psychology@PHQ9 -> Anhedonia conf=0.9 freq=2

Concept, subject and utterance names are bare tokens or double-quoted
strings with backslash escapes. Malformed lines become diagnostics; the
parser never raises on bad input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import ClassVar, Iterator

TOKEN = re.compile(r"[A-Za-z0-9_]+\Z")
_LEX = re.compile(
    r"""(?P<str>"(?:[^"\\\n]|\\.)*")
      |(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+)
      |(?P<word>[A-Za-z0-9_]+)
      |(?P<arrow>->)
      |(?P<punct>[()@,~=*])
      |(?P<ws>[ \t\r\f\v]+)
      |(?P<bad>.)""",
    re.VERBOSE,
)
_ESCAPES = {"n": "\n", "t": "\t", "r": "\r"}
_QUOTE = str.maketrans({"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"})


def quote(name: str) -> str:
    if TOKEN.match(name):
        return name
    return '"' + name.translate(_QUOTE) + '"'


def _unquote(raw: str) -> str:
    out, i, body = [], 0, raw[1:-1]
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _fmt_num(x: float) -> str:
    return repr(float(x))


# -- statements ----------------------------------------------------------------


@dataclass(frozen=True)
class Statement:
    kind: ClassVar[str] = ""
    line: int = field(default=0, compare=False, kw_only=True)

    def render(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class DomainStmt(Statement):
    kind: ClassVar[str] = "domain"
    path: str

    def render(self) -> str:
        return f"domain {self.path}"


@dataclass(frozen=True)
class AliasStmt(Statement):
    kind: ClassVar[str] = "alias"
    name: str
    path: str

    def render(self) -> str:
        return f"alias {self.name} = {self.path}"


@dataclass(frozen=True)
class DeltaStmt(Statement):
    kind: ClassVar[str] = "delta"
    left: str
    right: str
    upper: str

    def render(self) -> str:
        return f"delta {self.left} , {self.right} -> {self.upper}"


@dataclass(frozen=True)
class TierStmt(Statement):
    kind: ClassVar[str] = "tier"
    path: str
    scope: str = "*"

    def render(self) -> str:
        return f"tier meta {self.path} scope {self.scope}"


@dataclass(frozen=True)
class MetaStmt(Statement):
    kind: ClassVar[str] = "meta"
    relation: str
    prop: str
    path: str

    def render(self) -> str:
        return f"meta {self.relation} {self.prop} @ {self.path}"


@dataclass(frozen=True)
class TripleStmt(Statement):
    kind: ClassVar[str] = "triple"
    relation: str
    source: str
    target: str
    path: str
    conf: float = 1.0

    def render(self) -> str:
        s = f"triple {self.relation}({quote(self.source)}, {quote(self.target)}) @ {self.path}"
        return s if self.conf == 1.0 else f"{s} conf={_fmt_num(self.conf)}"


@dataclass(frozen=True)
class BridgeStmt(Statement):
    kind: ClassVar[str] = "bridge"
    source: str
    source_path: str
    target: str
    target_path: str

    def render(self) -> str:
        return (f"bridge {quote(self.source)} @ {self.source_path} ~ "
                f"{quote(self.target)} @ {self.target_path}")


@dataclass(frozen=True)
class FactStmt(Statement):
    kind: ClassVar[str] = "fact"
    subject: str
    utterance: str
    path: str
    concept: str
    conf: float = 1.0
    freq: int | None = None

    def render(self) -> str:
        s = (f"fact {quote(self.subject)} {quote(self.utterance)} @ {self.path} -> "
             f"{quote(self.concept)}")
        if self.conf != 1.0:
            s += f" conf={_fmt_num(self.conf)}"
        if self.freq is not None:
            s += f" freq={self.freq}"
        return s


KIND_ORDER = ["domain", "alias", "delta", "tier", "meta", "triple", "bridge", "fact"]


@dataclass(frozen=True)
class Diagnostic:
    line: int
    severity: str  # error | warning
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.severity}: {self.message}"


@dataclass
class Document:
    statements: list[Statement] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    source: str | None = None

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)

    def of(self, kind: type[Statement]) -> list:
        return [s for s in self.statements if isinstance(s, kind)]

    def canonical(self) -> list[Statement]:
        return sorted(self.statements, key=lambda s: (KIND_ORDER.index(s.kind), s.render()))

    def equivalent(self, other: "Document") -> bool:
        return self.canonical() == other.canonical()


# -- parsing ---------------------------------------------------------------------


class _Malformed(Exception):
    pass


class _Cursor:
    def __init__(self, toks: list[tuple[str, str]]):
        self.toks = toks
        self.i = 0

    def peek(self) -> tuple[str, str] | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def at(self, value: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[1] == value

    def take(self, what: str) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise _Malformed(f"expected {what}, found end of line")
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        kind, text = self.take(repr(value))
        if text != value:
            raise _Malformed(f"expected {value!r}, found {text!r}")

    def word(self, what: str = "identifier") -> str:
        kind, text = self.take(what)
        if kind == "word" or (kind == "num" and TOKEN.match(text)):
            return text
        raise _Malformed(f"expected {what}, found {text!r}")

    def name(self, what: str = "name") -> str:
        kind, text = self.take(what)
        if kind == "str":
            return _unquote(text)
        if kind == "word" or (kind == "num" and TOKEN.match(text)):
            return text
        raise _Malformed(f"expected {what}, found {text!r}")

    def path(self, allow_star: bool = False) -> str:
        if self.at("@"):
            self.i += 1
        if allow_star and self.at("*"):
            self.i += 1
            return "*"
        parts = [self.word("domain segment")]
        while self.at("@"):
            self.i += 1
            parts.append(self.word("domain segment"))
        return "@".join(parts)

    def options(self, allowed: dict[str, type]) -> dict:
        out = {}
        while self.peek() is not None:
            key = self.word("option")
            if key not in allowed:
                raise _Malformed(f"unknown option {key!r}")
            if key in out:
                raise _Malformed(f"option {key!r} given twice")
            self.expect("=")
            _, raw = self.take(f"value for {key}")
            try:
                out[key] = allowed[key](raw)
            except ValueError:
                raise _Malformed(f"bad value {raw!r} for {key}") from None
        return out

    def done(self) -> None:
        tok = self.peek()
        if tok is not None:
            raise _Malformed(f"unexpected {tok[1]!r}")


def _conf(raw: str) -> float:
    x = float(raw)
    if not 0.0 <= x <= 1.0:
        raise ValueError(raw)
    return x


def _freq(raw: str) -> int:
    x = int(raw)
    if not 0 <= x <= 3:
        raise ValueError(raw)
    return x


def _lex(text: str) -> list[tuple[str, str]]:
    toks = []
    for m in _LEX.finditer(text):
        kind = m.lastgroup
        if kind == "ws":
            continue
        if kind == "bad":
            if m.group() == '"':
                raise _Malformed("unterminated string")
            raise _Malformed(f"unexpected character {m.group()!r}")
        toks.append((kind, m.group()))
    return toks


def _strip_comment(line: str) -> str:
    in_str = esc = False
    for i, ch in enumerate(line):
        if esc:
            esc = False
        elif ch == "\\" and in_str:
            esc = True
        elif ch == '"':
            in_str = not in_str
        elif ch == "#" and not in_str:
            return line[:i]
    return line


def _parse_line(cur: _Cursor, lineno: int) -> Statement:
    head = cur.word("statement keyword")
    if head == "domain":
        st = DomainStmt(cur.path(), line=lineno)
    elif head == "alias":
        name = cur.word("alias name")
        cur.expect("=")
        st = AliasStmt(name, cur.path(), line=lineno)
    elif head == "delta":
        a = cur.path()
        cur.expect(",")
        b = cur.path()
        cur.expect("->")
        st = DeltaStmt(a, b, cur.path(allow_star=True), line=lineno)
    elif head == "tier":
        level = cur.word("tier level")
        if level != "meta":
            raise _Malformed(f"only 'tier meta' is supported, found {level!r}")
        path = cur.path()
        scope = "*"
        if cur.at("scope"):
            cur.i += 1
            scope = cur.path(allow_star=True)
        st = TierStmt(path, scope, line=lineno)
    elif head == "meta":
        rel = cur.word("relation")
        prop = cur.word("property")
        cur.expect("@")
        st = MetaStmt(rel, prop, cur.path(), line=lineno)
    elif head == "triple":
        rel = cur.word("relation")
        cur.expect("(")
        src = cur.name("source concept")
        cur.expect(",")
        tgt = cur.name("target concept")
        cur.expect(")")
        cur.expect("@")
        path = cur.path()
        opts = cur.options({"conf": _conf})
        st = TripleStmt(rel, src, tgt, path, opts.get("conf", 1.0), line=lineno)
    elif head == "bridge":
        c1 = cur.name("concept")
        cur.expect("@")
        d1 = cur.path()
        cur.expect("~")
        c2 = cur.name("concept")
        cur.expect("@")
        st = BridgeStmt(c1, d1, c2, cur.path(), line=lineno)
    elif head == "fact":
        subj = cur.name("subject")
        utt = cur.name("utterance")
        cur.expect("@")
        path = cur.path()
        cur.expect("->")
        concept = cur.name("concept")
        opts = cur.options({"conf": _conf, "freq": _freq})
        st = FactStmt(subj, utt, path, concept, opts.get("conf", 1.0), opts.get("freq"),
                      line=lineno)
    else:
        raise _Malformed(f"unknown statement {head!r}")
    cur.done()
    return st


def parse_kb(text: str, source: str | None = None) -> Document:
    """Parse ``text``; every malformed line yields one error diagnostic."""
    doc = Document(source=source)
    # only \n ends a statement; splitlines() would also break on \x1c, \u2028, ...
    for lineno, raw in enumerate(text.split("\n"), start=1):
        raw = raw.removesuffix("\r")
        try:
            body = _strip_comment(raw).strip()
            if not body:
                continue
            cur = _Cursor(_lex(body))
            doc.statements.append(_parse_line(cur, lineno))
        except _Malformed as exc:
            doc.diagnostics.append(Diagnostic(lineno, "error", str(exc)))
    return doc


def parse_file(path: str | Path) -> Document:
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")  # keep raw line endings
    except UnicodeDecodeError as exc:
        return Document([], [Diagnostic(1, "error", f"not UTF-8: {exc}")], str(path))
    return parse_kb(text, str(path))


def serialize_kb(doc: Document) -> str:
    lines = [s.render() for s in doc.canonical()]
    return "".join(line + "\n" for line in lines)


def iter_kinds(doc: Document) -> Iterator[tuple[str, int]]:
    for kind in KIND_ORDER:
        n = sum(1 for s in doc.statements if s.kind == kind)
        if n:
            yield kind, n
