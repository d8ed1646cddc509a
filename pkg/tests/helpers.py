"""Shared test utilities: small-graph enumeration and loop-ratio oracles.

These are deliberately independent of the library's candidate machinery so
they can serve as oracles for it: the loop enumeration below is a plain
breadth-first walk over crossing-count vectors, not a candidate search.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import lcm
from typing import Dict, List, Sequence, Set, Tuple

import numpy as np

from outerspace.graph_core import EdgePath, Graph, direction_key
from outerspace.graph_map import GraphMap
from outerspace.marked_metric import Metric, OuterSpacePoint


def connected_core_graphs(max_edges: int) -> List[Graph]:
    """Every connected graph with all valences >= 2 and at most `max_edges`
    edges, one representative per isomorphism class (loops and parallel
    edges allowed).  Vertices are 1..V and edge ids 1..E."""
    out: List[Graph] = []
    for n_edges in range(1, max_edges + 1):
        for n_vertices in range(1, n_edges + 1):
            pairs = [
                (u, v) for u in range(n_vertices) for v in range(u, n_vertices)
            ]
            seen: Set[Tuple[Tuple[int, int], ...]] = set()
            for combo in itertools.combinations_with_replacement(pairs, n_edges):
                if not (_is_connected(n_vertices, combo) and _is_core(n_vertices, combo)):
                    continue
                canon = _canonical_edges(n_vertices, combo)
                if canon in seen:
                    continue
                seen.add(canon)
                out.append(
                    Graph(
                        range(1, n_vertices + 1),
                        {i + 1: (u + 1, v + 1) for i, (u, v) in enumerate(combo)},
                    )
                )
    return out


def _is_connected(n: int, edges: Sequence[Tuple[int, int]]) -> bool:
    adj: Dict[int, Set[int]] = {i: set() for i in range(n)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def _is_core(n: int, edges: Sequence[Tuple[int, int]]) -> bool:
    valence = [0] * n
    for u, v in edges:
        valence[u] += 1
        valence[v] += 1
    return all(x >= 2 for x in valence)


def _canonical_edges(n: int, edges: Sequence[Tuple[int, int]]):
    return min(
        tuple(sorted(tuple(sorted((p[u], p[v]))) for u, v in edges))
        for p in itertools.permutations(range(n))
    )


def spanning_tree_point(graph: Graph, metric: Metric, basepoint: int = 1) -> OuterSpacePoint:
    """Marked point whose marking loops are cotree edges closed up through a
    breadth-first spanning tree at `basepoint`."""
    into: Dict[int, int] = {}  # vertex -> tree direction entering it
    order = [basepoint]
    reached = {basepoint}
    tree_edges: Set[int] = set()
    i = 0
    while i < len(order):
        v = order[i]
        i += 1
        for d in sorted(graph.directions_at(v), key=direction_key):
            w = graph.term(d)
            if w not in reached:
                reached.add(w)
                into[w] = d
                tree_edges.add(abs(d))
                order.append(w)

    def from_base(v: int) -> List[int]:
        back: List[int] = []
        while v != basepoint:
            d = into[v]
            back.append(d)
            v = graph.init(d)
        return back[::-1]

    marking = []
    for e in graph.edge_ids:
        if e in tree_edges:
            continue
        u, v = graph.endpoints(e)
        loop = from_base(u) + [e] + [-d for d in reversed(from_base(v))]
        marking.append(EdgePath(tuple(loop)))
    return OuterSpacePoint(graph, metric, marking, basepoint, allow_valence_two=True)


def identity_map_between(x: OuterSpacePoint, y: OuterSpacePoint) -> GraphMap:
    """Simplicial identity between two metrics on the same marked graph."""
    return GraphMap(
        x,
        y,
        {v: v for v in x.graph.vertices},
        {e: (e,) for e in x.graph.edge_ids},
    )


def immersed_loop_vectors(graph: Graph, max_length: int) -> Tuple[Tuple[int, ...], ...]:
    """Edge-crossing count vectors of all immersed closed loops crossing at
    most `max_length` edges, indexed by `graph.edge_ids` order.

    Every loop is rotated to start at its smallest crossed direction, so each
    class is explored once; counts are rotation-invariant anyway."""
    ids = graph.edge_ids
    pos = {e: i for i, e in enumerate(ids)}
    all_dirs = sorted(
        {d for v in graph.vertices for d in graph.directions_at(v)}, key=direction_key
    )
    found: Set[Tuple[int, ...]] = set()
    for d0 in all_dirs:
        min_key = direction_key(d0)
        base = graph.init(d0)
        first = [0] * len(ids)
        first[pos[abs(d0)]] = 1
        layer = {(d0, tuple(first))}
        seen = set(layer)
        while layer:
            grown: Set[Tuple[int, Tuple[int, ...]]] = set()
            for cur, vec in layer:
                if graph.term(cur) == base and cur != -d0:
                    found.add(vec)
                if sum(vec) == max_length:
                    continue
                for d in graph.directions_at(graph.term(cur)):
                    if d == -cur or direction_key(d) < min_key:
                        continue
                    nxt = list(vec)
                    nxt[pos[abs(d)]] += 1
                    state = (d, tuple(nxt))
                    if state not in seen:
                        seen.add(state)
                        grown.add(state)
            layer = grown
    return tuple(sorted(found))


def exact_max_ratio(
    vectors: Sequence[Tuple[int, ...]],
    x_metric: Metric,
    y_metric: Metric,
    ids: Sequence[int],
) -> Fraction:
    """Exact max over count vectors c of (c . y-lengths) / (c . x-lengths).

    Lengths are scaled to integers so the search runs in int64, then the
    winner is re-checked by cross-multiplication and returned as a Fraction.
    """
    num, s_num = _scaled_integer_lengths(y_metric, ids)
    den, s_den = _scaled_integer_lengths(x_metric, ids)
    mat = np.asarray(vectors, dtype=np.int64)
    top = mat @ np.asarray(num, dtype=np.int64)
    bot = mat @ np.asarray(den, dtype=np.int64)
    best = int(np.argmax(top / bot.astype(float)))
    for i in range(len(vectors)):
        if int(top[i]) * int(bot[best]) > int(top[best]) * int(bot[i]):
            best = i
    return Fraction(int(top[best]) * s_den, int(bot[best]) * s_num)


def _scaled_integer_lengths(metric: Metric, ids: Sequence[int]) -> Tuple[List[int], int]:
    fracs = [Fraction(metric.length(e)) for e in ids]
    scale = lcm(*(f.denominator for f in fracs))
    return [int(f * scale) for f in fracs], scale
