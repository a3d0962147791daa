"""Domain-scoped concept graphs: a domain lattice, typed inheritance between
fibers, partial bridges, traced multi-hop reasoning and a rank-1 neural
substrate."""

__version__ = "0.1.0"

from .domains import BOTTOM, TOP, DomainPath, DomainUniverse, validate_axioms  # noqa: E402
from .knowledge import KnowledgeBase, load_fixture, load_kb  # noqa: E402
from .meta import TypingTable  # noqa: E402
from .store import Fact, FiberStore, Triple  # noqa: E402

__all__ = [
    "BOTTOM", "TOP", "DomainPath", "DomainUniverse", "validate_axioms",
    "KnowledgeBase", "load_fixture", "load_kb", "TypingTable",
    "Fact", "FiberStore", "Triple",
]
