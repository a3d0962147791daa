"""Random graph builders shared by the property tests."""

import random

from cdcgraph.domains import DomainPath, DomainUniverse, random_prefix_universe
from cdcgraph.meta import MONOTONE, NON_MONOTONE, TypingTable
from cdcgraph.store import FiberStore, Triple

RELATIONS = ("r0", "r1", "r2")


def random_store(rng: random.Random, max_nodes: int = 20, max_edges: int = 40) -> FiberStore:
    """A small typed store over a random prefix universe."""
    u = random_prefix_universe(rng, max_paths=6, max_depth=3)
    meta = DomainPath(("Meta",))
    typing = TypingTable(u)
    typing.declare_tier(meta)
    for r in RELATIONS:
        typing.declare_meta(r, rng.choice((MONOTONE, NON_MONOTONE)), meta)
    store = FiberStore(u, typing, strict_cycles=False)
    n = rng.randint(2, max_nodes)
    paths = sorted(u.paths)
    for _ in range(rng.randint(0, max_edges)):
        store.extend(Triple(f"n{rng.randrange(n)}", rng.choice(RELATIONS),
                            f"n{rng.randrange(n)}", rng.choice(paths)))
    return store


def start_pairs(store: FiberStore) -> list[tuple[str, DomainPath]]:
    """Every concept of the store paired with every registered domain."""
    concepts = sorted({c for t in store for c in (t.source, t.target)})
    return [(c, d) for c in concepts for d in sorted(store.universe.paths)]


def chain_universe(depth: int) -> DomainUniverse:
    return DomainUniverse.build([DomainPath(tuple(f"L{i}" for i in range(k + 1)))
                                 for k in range(depth)])
