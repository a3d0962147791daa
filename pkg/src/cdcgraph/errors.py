"""Exception hierarchy shared by every layer of the engine."""

from __future__ import annotations


class CDCError(Exception):
    """Base class for all engine errors."""


class UnregisteredDomain(CDCError, KeyError):
    def __init__(self, domain):
        super().__init__(f"domain {domain} is not registered in the universe")
        self.domain = domain

    def __str__(self) -> str:
        return self.args[0]


class DeltaInconsistent(CDCError):
    """The declared generalization set fails its consistency conditions."""

    def __init__(self, problems):
        super().__init__("; ".join(str(p) for p in problems))
        self.problems = list(problems)


class CyclicOrder(CDCError):
    def __init__(self, cycle):
        super().__init__("domain order has a cycle: " + " <= ".join(map(str, cycle)))
        self.cycle = list(cycle)


class NotMetaTier(CDCError):
    pass


class TierViolation(CDCError):
    pass


class SessionSealed(CDCError):
    pass


class CyclicRequires(CDCError):
    def __init__(self, relation, domain, cycle):
        super().__init__(
            f"{relation} edges in {domain} form a cycle: " + " -> ".join(cycle)
        )
        self.relation = relation
        self.domain = domain
        self.cycle = list(cycle)


class IncomparableDomains(CDCError):
    pass


class UnknownConcept(CDCError):
    pass


class SelfBridge(CDCError):
    pass


class BridgeConflict(CDCError):
    """A bridge would map one concept to two different targets."""


class EmptyDomainOfDefinition(CDCError):
    pass


class DomainMismatch(CDCError):
    pass


class HeightBoundReached(CDCError):
    pass


class Unauthorized(CDCError):
    pass


class InvalidFusion(CDCError):
    pass


class DomainGrowthExceeded(CDCError):
    """|D| grew past the review threshold; fusion halts for human review."""


class MissingEmbeddings(CDCError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "missing embeddings"


class DimensionMismatch(CDCError, ValueError):
    pass


class NonFiniteValue(CDCError, ArithmeticError):
    pass


class MissingFiber(CDCError):
    pass
