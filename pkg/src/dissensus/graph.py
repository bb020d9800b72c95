"""Dynamic undirected simple graph over stable integer agent ids.

Agent ids are opaque integers minted by a monotone allocator and never
reused within a run: a dead agent's id stays dead, and a duplicating
agent retires its own id in favour of two fresh child ids.
"""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from collections import deque
from collections.abc import Iterable

from .errors import DegenerateTopologyError, InvalidPatchError

Edge = tuple[int, int]


def norm_edge(u: int, v: int) -> Edge:
    """Canonical (min, max) form of an undirected edge; rejects self-loops."""
    if u == v:
        raise ValueError(f"self-loop on agent {u}")
    return (u, v) if u < v else (v, u)


class IdAllocator:
    """Monotone source of fresh agent ids."""

    def __init__(self, start: int = 0):
        self._next = start

    def reserve_above(self, ids: Iterable[int]) -> None:
        for i in ids:
            if i >= self._next:
                self._next = i + 1

    def fresh(self) -> int:
        i = self._next
        self._next += 1
        return i


class Topology:
    """Undirected simple graph with set-based adjacency.

    Mutations keep adjacency symmetric. Removing a node drops its incident
    edges. Instances have value semantics: `copy()` is independent, equality
    is structural.
    """

    __slots__ = ("_adj",)

    def __init__(self, nodes: Iterable[int] = (), edges: Iterable[Edge] = ()):
        self._adj: dict[int, set[int]] = {}
        for u in nodes:
            self.add_node(u)
        for u, v in edges:
            self.add_edge(u, v)

    # -- mutation ---------------------------------------------------------

    def add_node(self, u: int) -> None:
        self._adj.setdefault(u, set())

    def add_edge(self, u: int, v: int) -> None:
        """Insert edge {u, v}; idempotent, creates missing endpoints."""
        u, v = norm_edge(u, v)
        self._adj.setdefault(u, set()).add(v)
        self._adj.setdefault(v, set()).add(u)

    def remove_node(self, u: int) -> None:
        for w in self._adj.pop(u):
            self._adj[w].discard(u)

    # -- queries ----------------------------------------------------------

    def __contains__(self, u: int) -> bool:
        return u in self._adj

    def __eq__(self, other) -> bool:
        return isinstance(other, Topology) and self._adj == other._adj

    def __len__(self) -> int:
        return len(self._adj)

    @property
    def n(self) -> int:
        return len(self._adj)

    def nodes(self) -> list[int]:
        return sorted(self._adj)

    def node_set(self) -> frozenset[int]:
        return frozenset(self._adj)

    def neighbors(self, u: int) -> set[int]:
        return set(self._adj[u])

    def degree(self, u: int) -> int:
        return len(self._adj[u])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj.get(u, ())

    def edge_count(self) -> int:
        return sum(len(nb) for nb in self._adj.values()) // 2

    def edges(self) -> list[Edge]:
        return sorted((u, v) for u, nb in self._adj.items() for v in nb if u < v)

    def copy(self) -> "Topology":
        t = Topology()
        t._adj = {u: set(nb) for u, nb in self._adj.items()}
        return t

    def check_symmetry(self) -> None:
        """Internal consistency assert; cheap enough to run after patches."""
        for u, nb in self._adj.items():
            for v in nb:
                if u not in self._adj.get(v, ()):
                    raise AssertionError(f"adjacency asymmetry on edge ({u},{v})")

    # -- serialization ----------------------------------------------------

    def to_lines(self) -> list[str]:
        """Node-list header plus one "u v" line per edge with u < v."""
        lines = ["nodes " + " ".join(str(u) for u in self.nodes())]
        lines += [f"{u} {v}" for u, v in self.edges()]
        return lines

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Topology":
        g = cls()
        for k, raw in enumerate(lines):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if k == 0 and parts[0] == "nodes":
                for tok in parts[1:]:
                    g.add_node(int(tok))
                continue
            if len(parts) != 2:
                raise ValueError(f"malformed edge line: {line!r}")
            g.add_edge(int(parts[0]), int(parts[1]))
        return g


def is_connected(g: Topology) -> bool:
    """True iff every pair of nodes is joined by a path.

    Empty and single-node graphs count as connected.
    """
    if g.n <= 1:
        return True
    start = next(iter(g._adj))
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in g._adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == g.n


def is_locally_connected(lam: Iterable[int], eps: Iterable[Edge]) -> bool:
    """Connectivity of a patch subgraph (lam, eps).

    Raises InvalidPatchError if an edge endpoint lies outside lam.
    """
    nodes = set(lam)
    g = Topology(nodes)
    for u, v in eps:
        if u not in nodes or v not in nodes:
            raise InvalidPatchError(f"patch edge ({u},{v}) has endpoint outside its node set")
        g.add_edge(u, v)
    return is_connected(g)


@dataclass(frozen=True)
class TopologyShape:
    """Shape flags; not mutually exclusive (the triangle is complete and a hole)."""

    complete: bool
    hole: bool
    chain: bool


def classify(g: Topology) -> TopologyShape:
    """Complete / hole / chain flags for a nonempty graph.

    A hole is a connected graph on >= 3 nodes with every degree 2 (a single
    cycle); the 2-node case is rejected since it would need a parallel edge.
    A chain is a connected path: exactly two degree-1 extremes, all interior
    degrees 2 (a single edge counts as the 2-node chain).
    """
    if g.n == 0:
        raise DegenerateTopologyError("cannot classify the empty graph")
    n = g.n
    degs = sorted(g.degree(u) for u in g.nodes())
    complete = all(d == n - 1 for d in degs)
    connected = is_connected(g)
    hole = connected and n >= 3 and all(d == 2 for d in degs)
    chain = connected and n >= 2 and degs[:2] == [1, 1] and all(d == 2 for d in degs[2:])
    return TopologyShape(complete=complete, hole=hole, chain=chain)


def cycle_count(g: Topology) -> int:
    """Independent cycles of a connected graph: |E| - |V| + 1."""
    return g.edge_count() - g.n + 1


def canonical_form(g: Topology, x: dict[int, int]) -> tuple:
    """Exact labeled configuration: (nodes, edges, states) in canonical order."""
    if g.node_set() != frozenset(x):
        raise ValueError("state vector domain differs from graph node set")
    nodes = tuple(g.nodes())
    return nodes, tuple(g.edges()), tuple(x[u] for u in nodes)


def relabeled_form(g: Topology, x: dict[int, int], max_n: int = 8) -> tuple:
    """Canonical configuration up to renaming of the agent ids.

    Returns the lexicographically smallest (states, edges) over all
    relabelings, so two configurations compare equal iff one is the other
    with agents renamed. Brute force over permutations; beyond `max_n`
    agents it falls back to the exact labeled form (no relabeling), which
    is still sound for equality-of-identical-labelings, just stricter.
    """
    nodes = sorted(x)
    n = len(nodes)
    if n > max_n:
        _, edges, states = canonical_form(g, x)
        return states, edges
    best = None
    for perm in itertools.permutations(range(n)):
        relabel = {nodes[k]: perm[k] for k in range(n)}
        states = tuple(x[nodes[k]] for k in sorted(range(n), key=lambda k: perm[k]))
        edges = tuple(sorted(
            tuple(sorted((relabel[u], relabel[v]))) for u, v in g.edges()
        ))
        cand = (states, edges)
        if best is None or cand < best:
            best = cand
    return best


def canonical_key(g: Topology, x: dict[int, int]) -> str:
    """Stable hash key of the labeled configuration.

    Equal configurations (same ids, edges, states) give equal keys across
    runs and processes. Collision-sensitive callers should confirm with
    `canonical_form` equality.
    """
    nodes, edges, states = canonical_form(g, x)
    blob = ";".join(
        (
            ",".join(map(str, nodes)),
            ",".join(f"{u}-{v}" for u, v in edges),
            ",".join(map(str, states)),
        )
    )
    return hashlib.sha256(blob.encode()).hexdigest()
