"""Maps between marked metric graphs: slopes, tension subgraph, gates, legality.

A GraphMap sends vertices to vertices and edges to reduced edge paths and is
required to commute with the markings up to free homotopy.  Stretch-factor
and train-track computations only ever interrogate these combinatorial data
together with the two metrics.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Mapping, Optional, Sequence, Tuple

from . import words
from .graph_core import (
    EdgePath,
    Graph,
    PathError,
    direction_key,
    tighten,
    turn,
)
from .marked_metric import (
    Automorphism,
    MarkingError,
    OuterSpacePoint,
    act,
    path_length,
)

REL_TOL = 1e-9


class DegenerateImageError(ValueError):
    """An operation needed the first edge of an image that is a point."""


class GateDeficitError(ValueError):
    """A vertex has fewer than two gates, so no legal loop can cross it."""


class GraphMap:
    """Vertex-to-vertex map with reduced edge-path images, marking-compatible."""

    __slots__ = ("domain", "codomain", "vertex_image", "edge_image", "is_self_map")

    def __init__(
        self,
        domain: OuterSpacePoint,
        codomain: OuterSpacePoint,
        vertex_image: Mapping[int, int],
        edge_image: Mapping[int, EdgePath],
        check: bool = True,
    ):
        self.domain = domain
        self.codomain = codomain
        self.vertex_image = dict(vertex_image)
        self.edge_image = {
            e: tighten(codomain.graph, p if isinstance(p, EdgePath) else EdgePath(tuple(p)))
            for e, p in edge_image.items()
        }
        self.is_self_map = domain.graph == codomain.graph
        if check:
            self._validate()

    def _validate(self) -> None:
        g, h = self.domain.graph, self.codomain.graph
        if set(self.vertex_image) != set(g.vertices):
            raise ValueError("vertex_image must cover exactly the domain vertices")
        for v, w in self.vertex_image.items():
            if w not in h.vertices:
                raise ValueError(f"vertex {v} maps to unknown vertex {w}")
        if set(self.edge_image) != set(g.edge_ids):
            raise ValueError("edge_image must cover exactly the domain edges (by positive id)")
        for e, p in self.edge_image.items():
            u, v = g.endpoints(e)
            iu, iv = self.vertex_image[u], self.vertex_image[v]
            if p.edges:
                if h.init(p.edges[0]) != iu or h.term(p.edges[-1]) != iv:
                    raise ValueError(f"image of edge {e} does not join the vertex images")
            elif iu != iv:
                raise ValueError(f"edge {e} has a point image but its endpoints map apart")
        self.check_marking_compatibility()

    def validate(self) -> "GraphMap":
        """Run the full construction checks (for maps built with check=False)."""
        self._validate()
        return self

    def check_marking_compatibility(self) -> tuple:
        """Conjugating word certifying map . domain marking ~ codomain marking."""
        vs = []
        for p in self.domain.marking:
            image = self.map_path(p)
            vs.append(self.codomain.inverse_marking_word(image.edges))
        g = words.common_conjugator(vs)
        if g is None:
            raise MarkingError("map does not commute with the markings up to homotopy")
        return g

    # -- path images -------------------------------------------------------

    def image_of_direction(self, d: int) -> EdgePath:
        p = self.edge_image[abs(d)]
        return p if d > 0 else p.reverse()

    def map_path(self, p: EdgePath) -> EdgePath:
        out = []
        for d in p.edges:
            out.extend(self.image_of_direction(d).edges)
        return tighten(self.codomain.graph, EdgePath(tuple(out), p.closed))

    def derivative(self, d: int) -> int:
        image = self.image_of_direction(d)
        if not image.edges:
            raise DegenerateImageError(f"direction {d} has a point image")
        return image.edges[0]

    def derivative_map(self) -> Dict[int, int]:
        return {d: self.derivative(d) for d in self.domain.graph.directions()}

    def with_metrics(self, metric) -> "GraphMap":
        """Same combinatorial map with both sides re-metrized."""
        return GraphMap(
            self.domain.with_metric(metric, require_unit_volume=False),
            self.codomain.with_metric(metric, require_unit_volume=False),
            self.vertex_image,
            self.edge_image,
            check=False,
        )

    def __repr__(self) -> str:
        ims = {e: p.edges for e, p in sorted(self.edge_image.items())}
        return f"GraphMap(self_map={self.is_self_map}, images={ims})"


# -- slopes and tension ------------------------------------------------------


@dataclass(frozen=True)
class SlopeReport:
    per_edge: Mapping[int, object]
    sigma_max: object
    degenerate_edges: FrozenSet[int]


def slopes(m: GraphMap) -> SlopeReport:
    """Per-edge metric stretch and its maximum."""
    per = {}
    degenerate = set()
    for e in m.domain.graph.edge_ids:
        image_len = path_length(m.codomain, m.edge_image[e])
        if not m.edge_image[e].edges:
            degenerate.add(e)
            per[e] = Fraction(0)
        else:
            per[e] = image_len / m.domain.metric.length(e)
    sigma_max = max(per.values())
    return SlopeReport(per, sigma_max, frozenset(degenerate))


def tension_subgraph(m: GraphMap, rel_tol: float = REL_TOL) -> FrozenSet[int]:
    """Edges whose slope attains the maximum (within rel_tol for floats)."""
    report = slopes(m)
    per, sigma = report.per_edge, report.sigma_max
    exact = isinstance(sigma, (Fraction, int)) and all(
        isinstance(v, (Fraction, int)) for v in per.values()
    )
    if exact:
        return frozenset(e for e, v in per.items() if v == sigma)
    sigma = float(sigma)
    return frozenset(e for e, v in per.items() if float(v) >= sigma * (1 - rel_tol))


# -- gates -------------------------------------------------------------------


class TrainTrackStructure:
    """Partition of the directions of a designated edge subset into gates."""

    __slots__ = ("graph", "edge_subset", "vertex_gates", "_gate_of")

    def __init__(self, graph: Graph, edge_subset, vertex_gates: Mapping[int, Sequence[FrozenSet[int]]]):
        self.graph = graph
        self.edge_subset = frozenset(edge_subset)
        norm: Dict[int, Tuple[FrozenSet[int], ...]] = {}
        self._gate_of: Dict[int, Tuple[int, int]] = {}
        for v in sorted(vertex_gates):
            gates = sorted(
                (frozenset(block) for block in vertex_gates[v] if block),
                key=lambda b: min(direction_key(d) for d in b),
            )
            norm[v] = tuple(gates)
            for i, block in enumerate(gates):
                for d in block:
                    if d in self._gate_of:
                        raise ValueError(f"direction {d} appears in two gates")
                    self._gate_of[d] = (v, i)
        self.vertex_gates = norm

    @property
    def vertices(self) -> Tuple[int, ...]:
        return tuple(sorted(self.vertex_gates))

    def gates_at(self, v: int) -> Tuple[FrozenSet[int], ...]:
        return self.vertex_gates.get(v, ())

    def num_gates(self, v: int) -> int:
        return len(self.vertex_gates.get(v, ()))

    def gate_of(self, d: int) -> Tuple[int, int]:
        if d not in self._gate_of:
            raise ValueError(f"direction {d} is outside the structure")
        return self._gate_of[d]

    def is_legal_turn(self, t: Tuple[int, int]) -> bool:
        a, b = t
        if a == b:
            return False
        return self.gate_of(a) != self.gate_of(b)

    def min_gate_count(self) -> int:
        return min((len(gs) for gs in self.vertex_gates.values()), default=0)

    def one_gate_vertices(self) -> Tuple[int, ...]:
        return tuple(v for v in sorted(self.vertex_gates) if len(self.vertex_gates[v]) < 2)

    def as_sets(self) -> Dict[int, Tuple[FrozenSet[int], ...]]:
        return dict(self.vertex_gates)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TrainTrackStructure)
            and self.edge_subset == other.edge_subset
            and self.vertex_gates == other.vertex_gates
        )

    def __repr__(self) -> str:
        return f"TrainTrackStructure({ {v: [sorted(b, key=direction_key) for b in gs] for v, gs in self.vertex_gates.items()} })"


def _structure_from_key(graph: Graph, subset, key: Mapping[int, object]) -> TrainTrackStructure:
    subset = frozenset(subset)
    per_vertex: Dict[int, Dict[object, set]] = {}
    for e in subset:
        for d in (e, -e):
            v = graph.init(d)
            per_vertex.setdefault(v, {}).setdefault(key[d], set()).add(d)
    return TrainTrackStructure(
        graph, subset, {v: tuple(groups.values()) for v, groups in per_vertex.items()}
    )


def gates_one_step(m: GraphMap, subset=None) -> TrainTrackStructure:
    """Gates by equality of the (one-step) derivative on subset directions."""
    g = m.domain.graph
    subset = frozenset(g.edge_ids) if subset is None else frozenset(subset)
    key = {}
    for e in subset:
        for d in (e, -e):
            key[d] = m.derivative(d)
    return _structure_from_key(g, subset, key)


def gates_iterated(m: GraphMap) -> TrainTrackStructure:
    """Gates by eventual coincidence of derivative iterates (self-maps).

    Two directions at a vertex lie in one gate iff some iterate of the
    derivative map identifies them; since merged trajectories never split,
    checking the |directions|-th iterate decides all pairs at once.
    """
    if not m.is_self_map:
        raise ValueError("iterated gates need a self-map")
    deriv = m.derivative_map()
    directions = m.domain.graph.directions()
    state = {d: deriv[d] for d in directions}
    for _ in range(len(directions) - 1):
        state = {d: deriv[state[d]] for d in directions}
    return _structure_from_key(m.domain.graph, m.domain.graph.edge_ids, state)


def is_legal(p: EdgePath, s: TrainTrackStructure) -> bool:
    """Whether the path crosses only legal turns (wrap-around included for loops)."""
    edges = p.edges
    for d in edges:
        if abs(d) not in s.edge_subset:
            raise ValueError(f"path leaves the designated subgraph at edge {d}")
    pairs = list(zip(edges, edges[1:]))
    if p.closed and edges:
        pairs.append((edges[-1], edges[0]))
    return all(s.is_legal_turn(turn(-a, b)) for a, b in pairs)


def find_legal_loop(graph: Graph, subset, s: TrainTrackStructure) -> EdgePath:
    """A legal loop in the subset crossing each edge at most twice.

    Extends legally with lexicographic tie-breaking until a direction repeats;
    the stretch between the repeats is the loop.
    """
    subset = frozenset(subset)
    sub_dirs = sorted((d for e in subset for d in (e, -e)), key=direction_key)
    if not sub_dirs:
        raise ValueError("empty subset has no loops")
    for v in {graph.init(d) for d in sub_dirs}:
        if s.num_gates(v) < 2:
            raise GateDeficitError(f"vertex {v} has fewer than two gates")
    walk = [sub_dirs[0]]
    seen = {sub_dirs[0]: 0}
    while True:
        v = graph.term(walk[-1])
        incoming_gate = s.gate_of(-walk[-1])
        nxt = None
        for d in sorted(graph.directions_at(v), key=direction_key):
            if abs(d) in subset and s.gate_of(d) != incoming_gate:
                nxt = d
                break
        if nxt is None:  # cannot happen with >= 2 gates, defensive
            raise GateDeficitError(f"no legal continuation at vertex {v}")
        if nxt in seen:
            loop = EdgePath(tuple(walk[seen[nxt]:]), closed=True)
            return loop
        seen[nxt] = len(walk)
        walk.append(nxt)


# -- canonical constructions --------------------------------------------------


def difference_of_markings(x: OuterSpacePoint, y: OuterSpacePoint) -> GraphMap:
    """The standard difference of markings x -> y through the basepoints.

    Every vertex is sent to y's basepoint; an edge goes to the y-realization
    of the generator word its based extension carries.  Optimality is never
    assumed: stretch maxima over candidate loops do not depend on the
    representative within its homotopy class.
    """
    if x.rank != y.rank:
        raise ValueError("points have different ranks")
    tree_paths = x._spanning_tree()
    g = x.graph
    vertex_image = {v: y.basepoint for v in g.vertices}
    edge_image = {}
    for e in g.edge_ids:
        u, v = g.endpoints(e)
        based = tree_paths[u] + (e,) + tuple(-d for d in reversed(tree_paths[v]))
        w = x.inverse_marking_word(based)
        edge_image[e] = y.marking_image(w)
    return GraphMap(x, y, vertex_image, edge_image)


def self_map_from_automorphism(x: OuterSpacePoint, phi: Automorphism) -> GraphMap:
    """A map x -> x.phi on the same graph realizing the marking twist."""
    return difference_of_markings(x, act(x, phi))
