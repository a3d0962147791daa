"""PHQ-9 scoring on top of the fiber store.

Utterance facts are mapped to item concepts through ``maps_to`` edges in the
PHQ-9 fiber. An item scores ``Σ frequency × confidence`` over its facts,
capped at 3. Item 9 evidence raises an alert on its own pathway, whatever
the total is.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .domains import DomainPath, as_domain
from .errors import MissingFiber
from .reindex import inherited_query
from .store import FiberStore, Triple

PHQ9 = DomainPath(("Psychology", "PHQ9"))
PSYCHOLOGY = DomainPath(("Psychology",))
ITEM_CAP = 3.0
MAP_RELATION = "maps_to"
ALERT_PATHWAY = "conflict_with"
ALERT_RELATION = "r_alert"
SCORE_RELATION = "r_score"
SEVERITY_RELATION = "r_severity"
ALERT_ITEM = 9
ALERT_CONCEPT = "SuicidalIdeation"

BANDS = [(0, "minimal"), (5, "mild"), (10, "moderate"), (15, "moderately-severe"), (20, "severe")]
_ITEM_RE = re.compile(r"Item([1-9])\Z")


def severity(total: float) -> str:
    """Band lookup; every band is closed on the left."""
    label = BANDS[0][1]
    for lower, name in BANDS:
        if total >= lower:
            label = name
    return label


@dataclass
class Alert:
    concept: str
    level: str
    evidence: list[str]
    pathway: list[str]

    def to_dict(self) -> dict:
        return {"concept": self.concept, "level": self.level, "evidence": self.evidence,
                "pathway": self.pathway}


@dataclass
class Phq9Assessment:
    subject: str
    item_scores: dict[int, float]
    total: float
    severity: str
    alert: Alert | None = None
    unmapped: list[str] = field(default_factory=list)
    domain: DomainPath = PHQ9

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "domain": str(self.domain),
            "item_scores": {str(k): v for k, v in sorted(self.item_scores.items())},
            "total": self.total,
            "severity": self.severity,
            "alert": self.alert.to_dict() if self.alert else None,
            "unmapped": self.unmapped,
        }


def item_of(store: FiberStore, concept: str, d: DomainPath = PHQ9) -> int | None:
    for t in store.query(concept, MAP_RELATION, d).matches:
        m = _ITEM_RE.match(t.target)
        if m:
            return int(m.group(1))
    return None


def score_assessment(subject: str, store: FiberStore, d: DomainPath | str = PHQ9) -> Phq9Assessment:
    d = as_domain(d)
    if d not in store.universe or not store.has_fiber(d):
        raise MissingFiber(f"no populated fiber at {d}")
    raw = {i: 0.0 for i in range(1, 10)}
    unmapped: list[str] = []
    item9_evidence: list[str] = []
    for fact in store.facts:
        if fact.subject != subject or not fact.domain.has_prefix(d):
            continue
        item = item_of(store, fact.concept, d)
        if item is None:
            unmapped.append(fact.utterance)
            continue
        freq = 1 if fact.frequency is None else fact.frequency
        raw[item] += freq * fact.confidence
        if item == ALERT_ITEM:
            item9_evidence.append(fact.utterance)
    items = {i: min(ITEM_CAP, v) for i, v in raw.items()}
    total = sum(items.values())
    alert = None
    if item9_evidence:
        concepts = sorted({f.concept for f in store.facts
                           if f.subject == subject and f.utterance in item9_evidence})
        pathway = [str(t) for c in concepts for t in store.query(c, ALERT_PATHWAY, d).matches]
        alert = Alert(concepts[0] if concepts else ALERT_CONCEPT,
                      "high" if items[ALERT_ITEM] >= 1.0 else "low",
                      sorted(item9_evidence), pathway)
    return Phq9Assessment(subject, items, total, severity(total), alert, sorted(unmapped), d)


def _number_token(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else str(x).replace(".", "_")


def record_actions(store: FiberStore, a: Phq9Assessment) -> list[Triple]:
    """Write the assessment into the PHQ-9 fiber as action triples.

    Besides score/severity/alert this adds the chain used for path
    traversal: ``reports`` (subject to symptom), ``scored_in`` (item to the
    subject's total node) and ``r_severity`` from that node.
    """
    d = a.domain
    total_node = f"{a.subject}_total"
    out = [
        Triple(a.subject, SCORE_RELATION, _number_token(a.total), d),
        Triple(a.subject, SEVERITY_RELATION, a.severity, d),
        Triple(total_node, SEVERITY_RELATION, a.severity, d),
    ]
    for fact in store.facts:
        if fact.subject != a.subject or not fact.domain.has_prefix(d):
            continue
        item = item_of(store, fact.concept, d)
        if item is None:
            continue
        out.append(Triple(a.subject, "reports", fact.concept, d))
        out.append(Triple(f"Item{item}", "scored_in", total_node, d))
    if a.alert is not None:
        out.append(Triple(a.subject, ALERT_RELATION, a.alert.level, d))
    for t in out:
        store.extend(t)
    return out


@dataclass
class AlertCheck:
    passed: bool
    alert_raised: bool
    leaked: list[str] = field(default_factory=list)
    witnesses: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "alert_raised": self.alert_raised,
                "leaked": self.leaked, "witnesses": self.witnesses}


def alert_propagation_check(store: FiberStore, subject: str | None = None,
                            d: DomainPath = PHQ9, general: DomainPath = PSYCHOLOGY) -> AlertCheck:
    """An alert raised in the PHQ-9 fiber must not show up at the general level.

    Two things are checked: inherited results at ``general`` carry no alert
    triple, and the alert relations are typed non-monotone where the alert
    lives (a monotone declaration would let the alert flow into every item
    subdomain). A failing check lists the offending meta declarations.
    """
    alerts = [t for t in store.edges(d, ALERT_RELATION) if subject is None or t.source == subject]
    if not alerts:
        return AlertCheck(True, False)
    leaked, witnesses = [], []
    with store.typing.sealed():
        for t in alerts:
            ans = inherited_query(store, t.source, ALERT_RELATION, general)
            leaked += [f"{ALERT_RELATION}({t.source}, {h.target})@{h.origin}" for h in ans.hits]
        for rel in (ALERT_RELATION, ALERT_PATHWAY):
            if store.typing.is_monotone(rel, d):
                witnesses += [f"meta {e.relation} {e.prop} @ {e.domain}"
                              for e in store.typing.declarations(rel, "monotone", d)]
    return AlertCheck(not leaked and not witnesses, True, leaked, witnesses)
