"""Finite graphs with oriented edge paths.

Vertices and edges carry stable integer ids (edge ids >= 1).  An oriented
edge is a signed id: +e runs from endpoints(e)[0] to endpoints(e)[1], -e the
other way, so reversal is negation and is fixed-point free.  A direction is
an oriented edge regarded as a germ at its initial vertex; a turn is an
unordered pair of distinct directions at one vertex.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Optional, Tuple


class GraphError(ValueError):
    pass


class PathError(ValueError):
    pass


class Graph:
    """Undirected multigraph (loops allowed) with a chosen edge orientation.

    Connectivity is not an invariant of the class: cores of subgraphs may be
    disconnected or empty.  Marked points enforce connectivity themselves.
    """

    __slots__ = ("_vertices", "_endpoints", "_dirs", "_hash")

    def __init__(self, vertices: Iterable[int], endpoints: Dict[int, Tuple[int, int]]):
        self._vertices = tuple(sorted(set(vertices)))
        vs = set(self._vertices)
        eps = {}
        for e in sorted(endpoints):
            u, v = endpoints[e]
            if e < 1:
                raise GraphError(f"edge id {e} must be >= 1")
            if u not in vs or v not in vs:
                raise GraphError(f"edge {e} endpoints {(u, v)} not among vertices")
            eps[e] = (u, v)
        self._endpoints = eps
        dirs: Dict[int, list] = {v: [] for v in self._vertices}
        for e, (u, v) in eps.items():
            dirs[u].append(e)
            dirs[v].append(-e)
        self._dirs = {v: tuple(sorted(ds, key=direction_key)) for v, ds in dirs.items()}
        self._hash = hash((self._vertices, tuple(sorted(eps.items()))))

    @property
    def vertices(self) -> Tuple[int, ...]:
        return self._vertices

    @property
    def edge_ids(self) -> Tuple[int, ...]:
        return tuple(sorted(self._endpoints))

    @property
    def num_edges(self) -> int:
        return len(self._endpoints)

    def endpoints(self, e: int) -> Tuple[int, int]:
        return self._endpoints[e]

    def init(self, d: int) -> int:
        """Initial vertex of an oriented edge."""
        u, v = self._endpoints[abs(d)]
        return u if d > 0 else v

    def term(self, d: int) -> int:
        u, v = self._endpoints[abs(d)]
        return v if d > 0 else u

    def directions_at(self, v: int) -> Tuple[int, ...]:
        """Directions based at v; a loop edge contributes both +e and -e."""
        return self._dirs[v]

    def directions(self) -> Tuple[int, ...]:
        out = []
        for e in self.edge_ids:
            out.extend((e, -e))
        return tuple(out)

    def valence(self, v: int) -> int:
        return len(self._dirs[v])

    def is_core(self) -> bool:
        return all(len(ds) >= 2 for ds in self._dirs.values())

    def is_connected(self) -> bool:
        if not self._vertices:
            return True
        seen = {self._vertices[0]}
        stack = [self._vertices[0]]
        while stack:
            v = stack.pop()
            for d in self._dirs[v]:
                w = self.term(d)
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self._vertices)

    def first_betti(self) -> int:
        comps = _component_count(self._vertices, self._endpoints.values())
        return len(self._endpoints) - len(self._vertices) + comps

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Graph)
            and self._vertices == other._vertices
            and self._endpoints == other._endpoints
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Graph(V={len(self._vertices)}, E={sorted(self._endpoints.items())})"


def direction_key(d: int) -> Tuple[int, int]:
    """Total order on oriented edges: by edge id, forward before backward."""
    return (abs(d), 0 if d > 0 else 1)


def turn(d1: int, d2: int) -> Tuple[int, int]:
    """Unordered pair of directions, canonically sorted."""
    return tuple(sorted((d1, d2), key=direction_key))  # type: ignore[return-value]


def is_degenerate_turn(t: Tuple[int, int]) -> bool:
    return t[0] == t[1]


@dataclass(frozen=True)
class EdgePath:
    """Sequence of oriented edges; closed=True marks a free loop."""

    edges: Tuple[int, ...]
    closed: bool = False

    def reverse(self) -> "EdgePath":
        return EdgePath(tuple(-d for d in reversed(self.edges)), self.closed)

    def __len__(self) -> int:
        return len(self.edges)

    def __bool__(self) -> bool:
        return bool(self.edges)


def validate_path(g: Graph, p: EdgePath) -> None:
    prev = None
    for d in p.edges:
        if abs(d) not in g._endpoints:
            raise PathError(f"unknown edge {d}")
        if prev is not None and g.term(prev) != g.init(d):
            raise PathError(f"edges {prev}, {d} are not incident")
        prev = d
    if p.closed and p.edges and g.term(p.edges[-1]) != g.init(p.edges[0]):
        raise PathError("closed path does not return to its start")


def path_init(g: Graph, p: EdgePath) -> Optional[int]:
    return g.init(p.edges[0]) if p.edges else None


def path_term(g: Graph, p: EdgePath) -> Optional[int]:
    return g.term(p.edges[-1]) if p.edges else None


def _stack_reduce(edges: Iterable[int]) -> Tuple[int, ...]:
    out: list = []
    for d in edges:
        if out and out[-1] == -d:
            out.pop()
        else:
            out.append(d)
    return tuple(out)


def tighten(g: Graph, p: EdgePath) -> EdgePath:
    """Reduce rel endpoints (no cyclic cancellation, no rotation)."""
    validate_path(g, p)
    return EdgePath(_stack_reduce(p.edges), p.closed)


def canonical_loop(edges: Tuple[int, ...]) -> Tuple[int, ...]:
    """Least rotation of a cyclic word or its inverse, under direction_key."""
    if not edges:
        return edges
    best = None
    n = len(edges)
    for w in (edges, tuple(-d for d in reversed(edges))):
        doubled = [direction_key(d) for d in w] * 2
        i = min(range(n), key=lambda k: doubled[k : k + n])
        key = tuple(doubled[i : i + n])
        if best is None or key < best[0]:
            best = (key, w[i:] + w[:i])
    return best[1]


def cyclic_reduce(edges: Tuple[int, ...]) -> Tuple[int, ...]:
    """A cyclically reduced word in the rotation class (not canonicalized)."""
    edges = _stack_reduce(edges)
    i, j = 0, len(edges)
    while j - i >= 2 and edges[i] == -edges[j - 1]:
        i += 1
        j -= 1
    return edges[i:j]


def reduce_path(g: Graph, p: EdgePath) -> EdgePath:
    """Reduced representative: rel endpoints for open paths; for closed paths
    the cyclically reduced canonical form (least rotation of word/inverse)."""
    validate_path(g, p)
    if not p.closed:
        return EdgePath(_stack_reduce(p.edges), False)
    return EdgePath(canonical_loop(cyclic_reduce(p.edges)), True)


def _component_count(vertices, edge_endpoints) -> int:
    parent = {v: v for v in vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edge_endpoints:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    return len({find(v) for v in vertices})


def _resolve_subset(g: Graph, edge_subset) -> FrozenSet[int]:
    if edge_subset is None:
        return frozenset(g.edge_ids)
    subset = frozenset(edge_subset)
    missing = subset - set(g.edge_ids)
    if missing:
        raise GraphError(f"edges {sorted(missing)} not in graph")
    return subset


def subgraph(g: Graph, edge_subset) -> Graph:
    """Subgraph induced by an edge set: its edges plus their endpoints."""
    subset = _resolve_subset(g, edge_subset)
    eps = {e: g.endpoints(e) for e in subset}
    verts = {u for uv in eps.values() for u in uv}
    return Graph(verts, eps)


def core(g: Graph, edge_subset=None) -> Graph:
    """Maximal subgraph of the given edge set with all valences >= 2.

    Deletes valence <= 1 vertices (with their edges) until stable; the result
    can be empty or disconnected.
    """
    subset = set(_resolve_subset(g, edge_subset))
    eps = {e: g.endpoints(e) for e in subset}
    while True:
        val: Dict[int, int] = {}
        for u, v in eps.values():
            val[u] = val.get(u, 0) + 1
            val[v] = val.get(v, 0) + 1
        bad = {v for v, k in val.items() if k <= 1}
        if not bad:
            break
        eps = {e: (u, v) for e, (u, v) in eps.items() if u not in bad and v not in bad}
    verts = {u for uv in eps.values() for u in uv}
    return Graph(verts, eps)


def is_forest(g: Graph, edge_subset=None) -> bool:
    """True when the induced subgraph has no cycle (per component E = V - 1)."""
    subset = _resolve_subset(g, edge_subset)
    eps = [g.endpoints(e) for e in subset]
    verts = {u for uv in eps for u in uv}
    if not subset:
        return True
    comps = _component_count(verts, eps)
    return len(subset) == len(verts) - comps


def complexity(g: Graph, edge_subset) -> Tuple[int, int]:
    """(first betti number, -component count) of the induced subgraph.

    Lexicographic order on these pairs strictly drops on proper core
    subgraphs, which bounds chains of invariant subgraphs.
    """
    subset = _resolve_subset(g, edge_subset)
    if not subset:
        raise GraphError("complexity of the empty subgraph is undefined")
    eps = [g.endpoints(e) for e in subset]
    verts = {u for uv in eps for u in uv}
    comps = _component_count(verts, eps)
    return (len(subset) - len(verts) + comps, -comps)
