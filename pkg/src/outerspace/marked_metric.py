"""Marked metric graphs: points of Outer space and the group action on them.

A point is a connected core graph with positive edge lengths summing to 1 and
a marking: a homotopy equivalence from the standard rose, stored as one based
loop per generator.  The inverse marking (edge -> word in the generators) is
computed lazily by collapsing a spanning tree and inverting the induced basis
map with Stallings folds, so the round trip marking -> inverse marking is the
identity on the nose, not just up to conjugacy.
"""

from __future__ import annotations

import random
import re
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from . import words
from .graph_core import (
    EdgePath,
    Graph,
    GraphError,
    PathError,
    canonical_loop,
    core,
    cyclic_reduce,
    direction_key,
    reduce_path,
    tighten,
    validate_path,
)
from .words import NotBasisError, Word

VOLUME_TOL = 1e-12


class MarkingError(ValueError):
    """A marking fails to be a homotopy equivalence with the stored inverse."""


class UnsupportedOperationError(RuntimeError):
    """The requested computation was disabled and no stored data covers it."""


class AutomorphismParseError(ValueError):
    pass


def _is_rational(x) -> bool:
    return isinstance(x, (Fraction, int))


class Metric:
    """Positive edge lengths; exact fractions are kept exact."""

    __slots__ = ("_lengths",)

    def __init__(self, lengths: Mapping[int, object]):
        vals = {}
        for e in sorted(lengths):
            v = lengths[e]
            if isinstance(v, int):
                v = Fraction(v)
            if not (_is_rational(v) or isinstance(v, float)):
                raise ValueError(f"length of edge {e} has unsupported type {type(v)}")
            if v <= 0:
                raise ValueError(f"length of edge {e} must be positive, got {v}")
            vals[e] = v
        self._lengths = vals

    def length(self, e: int):
        return self._lengths[abs(e)]

    @property
    def edge_ids(self) -> Tuple[int, ...]:
        return tuple(sorted(self._lengths))

    @property
    def volume(self):
        total = Fraction(0)
        for v in self._lengths.values():
            total = total + v
        return total

    @property
    def is_rational(self) -> bool:
        return all(_is_rational(v) for v in self._lengths.values())

    def is_unit(self, tol: float = VOLUME_TOL) -> bool:
        if self.is_rational:
            return self.volume == 1
        return abs(float(self.volume) - 1.0) <= tol

    def scaled(self, c) -> "Metric":
        return Metric({e: v * c for e, v in self._lengths.items()})

    def normalized(self) -> "Metric":
        vol = self.volume
        return Metric({e: v / vol for e, v in self._lengths.items()})

    def items(self):
        return tuple((e, self._lengths[e]) for e in sorted(self._lengths))

    def __eq__(self, other) -> bool:
        return isinstance(other, Metric) and self.items() == other.items()

    def __hash__(self) -> int:
        return hash(self.items())

    def __repr__(self) -> str:
        return f"Metric({dict(self.items())})"


class Automorphism:
    """Free-group endomorphism by generator images; invertible on demand.

    When an inverse is supplied its composite with the images must reduce to
    a conjugation by one common word, which pins down a genuine automorphism.
    """

    __slots__ = ("rank", "images", "_inverse_images")

    def __init__(
        self,
        images: Sequence[Sequence[int]],
        inverse: Optional[Sequence[Sequence[int]]] = None,
    ):
        imgs = tuple(words.reduce_word(w) for w in images)
        self.rank = len(imgs)
        if self.rank < 1:
            raise ValueError("need at least one generator image")
        for i, w in enumerate(imgs):
            if not w:
                raise NotBasisError(f"image of generator {i + 1} is the empty word")
            if any(abs(x) > self.rank for x in w):
                raise ValueError(f"image of generator {i + 1} uses letters beyond rank {self.rank}")
        self.images = imgs
        if inverse is not None:
            inv = tuple(words.reduce_word(w) for w in inverse)
            if len(inv) != self.rank:
                raise ValueError("inverse has wrong rank")
            composite = tuple(words.substitute(inv, w) for w in imgs)
            if words.common_conjugator(composite) is None:
                raise NotBasisError("supplied inverse does not invert the images up to one conjugation")
            self._inverse_images = inv
        else:
            self._inverse_images = None

    @classmethod
    def identity(cls, rank: int) -> "Automorphism":
        ims = words.identity_images(rank)
        return cls(ims, inverse=ims)

    @classmethod
    def from_text(cls, text: str, inverse_text: Optional[str] = None) -> "Automorphism":
        images, gens = _parse_map_text(text)
        inverse = None
        if inverse_text is not None:
            inverse, igens = _parse_map_text(inverse_text)
            if igens != gens:
                raise AutomorphismParseError("inverse text uses a different generator set")
        return cls(images, inverse=inverse)

    @property
    def has_inverse(self) -> bool:
        return self._inverse_images is not None

    @property
    def inverse_images(self) -> Optional[tuple]:
        return self._inverse_images

    def __call__(self, w: Sequence[int]) -> Word:
        return words.substitute(self.images, w)

    def inverse(self) -> "Automorphism":
        inv = self._inverse_images
        if inv is None:
            inv = words.invert_images(self.images, self.rank)
        return Automorphism(inv, inverse=self.images)

    def compose(self, inner: "Automorphism") -> "Automorphism":
        """Composite sending w to self(inner(w))."""
        if inner.rank != self.rank:
            raise ValueError("rank mismatch")
        imgs = words.compose(self.images, inner.images)
        inv = None
        if self._inverse_images is not None and inner._inverse_images is not None:
            inv = words.compose(inner._inverse_images, self._inverse_images)
        return Automorphism(imgs, inverse=inv)

    def __eq__(self, other) -> bool:
        return isinstance(other, Automorphism) and self.images == other.images

    def __hash__(self) -> int:
        return hash(self.images)

    def __repr__(self) -> str:
        return f"Automorphism({format_map_text(self.images)!r})"


_CLAUSE_RE = re.compile(r"^\s*([a-z])\s*->\s*([A-Za-z. ]+?)\s*$")


def _parse_map_text(text: str) -> Tuple[tuple, tuple]:
    clauses = [c for c in re.split(r"[;\n]", text) if c.strip()]
    if not clauses:
        raise AutomorphismParseError("empty map text")
    seen: Dict[int, Word] = {}
    for pos, clause in enumerate(clauses, start=1):
        m = _CLAUSE_RE.match(clause)
        if not m:
            raise AutomorphismParseError(
                f"clause {pos} ({clause.strip()!r}): expected `gen -> word` with lowercase "
                "generators and uppercase inverses"
            )
        gen = ord(m.group(1)) - ord("a") + 1
        if gen in seen:
            raise AutomorphismParseError(f"clause {pos}: generator {m.group(1)!r} assigned twice")
        try:
            seen[gen] = words.parse_word(m.group(2))
        except ValueError as exc:
            raise AutomorphismParseError(f"clause {pos}: {exc}") from exc
    rank = len(seen)
    expected = set(range(1, rank + 1))
    if set(seen) != expected:
        names = ", ".join(chr(ord("a") + i - 1) for i in sorted(expected - set(seen)))
        raise AutomorphismParseError(f"generators must be consecutive from 'a'; missing: {names}")
    for gen, w in seen.items():
        for x in w:
            if abs(x) > rank:
                raise AutomorphismParseError(
                    f"image of {chr(ord('a') + gen - 1)!r} uses letter {words.format_word((x,))!r} "
                    f"outside rank {rank}"
                )
    return tuple(seen[i] for i in range(1, rank + 1)), tuple(sorted(seen))


def format_map_text(images: Sequence[Word]) -> str:
    return "; ".join(
        f"{chr(ord('a') + i)}->{words.format_word(w)}" for i, w in enumerate(images)
    )


class OuterSpacePoint:
    """A marked metric core graph.

    marking[i] is the based loop (reduced rel endpoints, based at `basepoint`)
    carrying generator i+1.  inverse_marking maps each edge id to a word in
    the generators; it may be omitted and is then computed on first use.
    """

    __slots__ = ("graph", "metric", "marking", "basepoint", "_inverse_marking", "_flags")

    def __init__(
        self,
        graph: Graph,
        metric: Metric,
        marking: Sequence[EdgePath],
        basepoint: int,
        inverse_marking: Optional[Mapping[int, Sequence[int]]] = None,
        require_unit_volume: bool = True,
        allow_valence_two: bool = False,
        check: bool = True,
    ):
        self.graph = graph
        self.metric = metric
        self.marking = tuple(tighten(graph, p if isinstance(p, EdgePath) else EdgePath(tuple(p))) for p in marking)
        self.basepoint = basepoint
        if inverse_marking is not None:
            inverse_marking = {e: words.reduce_word(w) for e, w in inverse_marking.items()}
        self._inverse_marking = inverse_marking
        self._flags = {"allow_valence_two": allow_valence_two}
        if check:
            self._validate(require_unit_volume, allow_valence_two)

    def _validate(self, require_unit_volume: bool, allow_valence_two: bool) -> None:
        g = self.graph
        if self.basepoint not in g.vertices:
            raise GraphError(f"basepoint {self.basepoint} is not a vertex")
        if not g.is_connected() or g.num_edges == 0:
            raise GraphError("point graphs must be connected and nonempty")
        if not g.is_core():
            raise GraphError("point graphs must be core (all valences >= 2)")
        if not allow_valence_two and any(g.valence(v) == 2 for v in g.vertices):
            raise GraphError("valence-2 vertices must be unsubdivided (or explicitly allowed)")
        if self.metric.edge_ids != g.edge_ids:
            raise ValueError("metric edges do not match graph edges")
        if require_unit_volume and not self.metric.is_unit():
            raise ValueError(f"metric volume {self.metric.volume} is not 1")
        if len(self.marking) != g.first_betti():
            raise MarkingError(
                f"marking has {len(self.marking)} generators but the graph has rank {g.first_betti()}"
            )
        for p in self.marking:
            if p.edges and (g.init(p.edges[0]) != self.basepoint or g.term(p.edges[-1]) != self.basepoint):
                raise MarkingError("marking loops must be based at the basepoint")
        if self._inverse_marking is not None:
            if set(self._inverse_marking) != set(g.edge_ids):
                raise ValueError("inverse marking must cover exactly the graph edges")
            self.check_marking()

    @property
    def rank(self) -> int:
        return len(self.marking)

    # -- marking machinery ------------------------------------------------

    def marking_image(self, w: Sequence[int]) -> EdgePath:
        """Based path carrying the word w through the marking."""
        parts = []
        for x in w:
            p = self.marking[abs(x) - 1]
            parts.extend(p.edges if x > 0 else p.reverse().edges)
        return tighten(self.graph, EdgePath(tuple(parts)))

    def inverse_marking(self) -> Dict[int, Word]:
        if self._inverse_marking is None:
            self._inverse_marking = self._compute_inverse_marking()
        return dict(self._inverse_marking)

    def inverse_marking_word(self, edges: Iterable[int]) -> Word:
        """Word in the generators carried by an edge sequence."""
        inv = self.inverse_marking()
        parts = []
        for d in edges:
            w = inv[abs(d)]
            parts.append(w if d > 0 else words.invert_word(w))
        return words.concat(*parts)

    def _spanning_tree(self) -> Dict[int, Tuple[int, ...]]:
        """BFS tree: vertex -> directions of the path basepoint -> vertex."""
        g = self.graph
        paths = {self.basepoint: ()}
        frontier = [self.basepoint]
        while frontier:
            nxt = []
            for v in frontier:
                for d in g.directions_at(v):
                    w = g.term(d)
                    if w not in paths:
                        paths[w] = paths[v] + (d,)
                        nxt.append(w)
            frontier = nxt
        return paths

    def _compute_inverse_marking(self) -> Dict[int, Word]:
        g = self.graph
        tree_paths = self._spanning_tree()
        tree_edges = {abs(p[-1]) for p in tree_paths.values() if p}
        cotree = [e for e in g.edge_ids if e not in tree_edges]
        index = {e: j + 1 for j, e in enumerate(cotree)}

        def collapse(path: EdgePath) -> Word:
            return words.reduce_word(
                (index[abs(d)] if d > 0 else -index[abs(d)]) for d in path.edges if abs(d) in index
            )

        basis = [collapse(p) for p in self.marking]
        try:
            psi = words.invert_images(basis, len(cotree))
        except NotBasisError as exc:
            raise MarkingError(f"marking is not a homotopy equivalence: {exc}") from exc
        out: Dict[int, Word] = {e: () for e in tree_edges}
        for e, j in index.items():
            out[e] = psi[j - 1]
        return out

    def check_marking(self) -> Word:
        """Conjugator g with inverse_marking(marking(x_i)) = g x_i g^-1; raises if none."""
        composite = [self.inverse_marking_word(p.edges) for p in self.marking]
        g = words.common_conjugator(composite)
        if g is None:
            raise MarkingError("inverse marking does not invert the marking up to one conjugation")
        return g

    # -- basic geometry ----------------------------------------------------

    def with_metric(self, metric: Metric, require_unit_volume: bool = True) -> "OuterSpacePoint":
        return OuterSpacePoint(
            self.graph,
            metric,
            self.marking,
            self.basepoint,
            inverse_marking=self._inverse_marking,
            require_unit_volume=require_unit_volume,
            allow_valence_two=self._flags["allow_valence_two"],
            check=False,
        )

    def __repr__(self) -> str:
        return (
            f"OuterSpacePoint(rank={self.rank}, edges={self.graph.num_edges}, "
            f"metric={dict(self.metric.items())})"
        )


def loop_length(x: OuterSpacePoint, p: EdgePath):
    """Length of the immersed representative of a free loop; 0 iff nullhomotopic."""
    if not p.closed:
        raise PathError("loop_length needs a closed path")
    validate_path(x.graph, p)
    # Length only needs the cyclic reduction; the canonical rotation of
    # reduce_path would cost quadratic time for nothing here.
    length = x.metric.length
    return sum((length(d) for d in cyclic_reduce(p.edges)), Fraction(0))


def path_length(x: OuterSpacePoint, p: EdgePath):
    """Length of a path as given (no reduction)."""
    total = Fraction(0)
    for d in p.edges:
        total = total + x.metric.length(d)
    return total


# -- candidate loops -------------------------------------------------------


class CandidateLoop:
    """Cyclically reduced loop crossing each unoriented edge at most twice."""

    __slots__ = ("loop", "counts")

    def __init__(self, loop: EdgePath, edge_ids: Tuple[int, ...]):
        self.loop = loop
        tally = {e: 0 for e in edge_ids}
        for d in loop.edges:
            tally[abs(d)] += 1
        self.counts = tuple(tally[e] for e in edge_ids)

    def __eq__(self, other) -> bool:
        return isinstance(other, CandidateLoop) and self.loop == other.loop

    def __hash__(self) -> int:
        return hash(self.loop)

    def __repr__(self) -> str:
        return f"CandidateLoop({self.loop.edges})"


@lru_cache(maxsize=None)
def _candidate_words(g: Graph) -> Tuple[Tuple[int, ...], ...]:
    """All cyclically reduced closed walks with per-edge budget 2, canonical,
    deduplicated up to rotation and inversion, in deterministic order."""
    found = set()
    ids = g.edge_ids
    for start in ids:
        allowed = {e for e in ids if e >= start}
        counts = {e: 0 for e in ids}
        base = g.init(start)
        path: list = []

        def step(d: int) -> None:
            counts[abs(d)] += 1
            path.append(d)
            v = g.term(d)
            if v == base and d != -path[0]:
                found.add(canonical_loop(tuple(path)))
            for nd in g.directions_at(v):
                if abs(nd) in allowed and nd != -d and counts[abs(nd)] < 2:
                    step(nd)
            counts[abs(d)] -= 1
            path.pop()

        step(start)
    return tuple(
        sorted(found, key=lambda w: (len(w), tuple(direction_key(d) for d in w)))
    )


def candidates(x: OuterSpacePoint) -> Tuple[CandidateLoop, ...]:
    ids = x.graph.edge_ids
    return tuple(
        CandidateLoop(EdgePath(w, closed=True), ids) for w in _candidate_words(x.graph)
    )


def systole(x: OuterSpacePoint) -> Tuple[EdgePath, object]:
    """A shortest immersed essential loop and its length."""
    best = None
    for c in candidates(x):
        length = path_length(x, c.loop)
        if best is None or length < best[1]:
            best = (c.loop, length)
    return best


def epsilon_core(x: OuterSpacePoint, eps) -> frozenset:
    """Edges of the core of the union of immersed essential loops of length <= eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    support = set()
    for c in candidates(x):
        if path_length(x, c.loop) <= eps:
            support.update(abs(d) for d in c.loop.edges)
    return frozenset(core(x.graph, support).edge_ids)


def epsilon_thin_scale(rank: int) -> Fraction:
    """Scale below which the thin part is always a proper subgraph."""
    return Fraction(1, 6 * rank - 6)


def chain_bound(rank: int) -> int:
    """Bound on the length of a strictly nested chain of proper core subgraphs."""
    return 3 * rank - 3


# -- the right action -------------------------------------------------------


def act(x: OuterSpacePoint, phi: Automorphism, recompute: bool = True) -> OuterSpacePoint:
    """The point x . phi: same metric graph, marking precomposed with phi."""
    if phi.rank != x.rank:
        raise ValueError(f"rank mismatch: point has rank {x.rank}, map has rank {phi.rank}")
    new_marking = tuple(x.marking_image(w) for w in phi.images)
    new_inverse: Optional[Dict[int, Word]] = None
    if phi.has_inverse and x._inverse_marking is not None:
        inv = phi.inverse_images
        new_inverse = {
            e: words.substitute(inv, w) for e, w in x._inverse_marking.items()
        }
    elif not recompute:
        raise UnsupportedOperationError(
            "acting without a supplied inverse requires recompute=True"
        )
    return OuterSpacePoint(
        x.graph,
        x.metric,
        new_marking,
        x.basepoint,
        inverse_marking=new_inverse,
        require_unit_volume=False,
        allow_valence_two=x._flags["allow_valence_two"],
    )


# -- constructors ------------------------------------------------------------


def rose_graph(rank: int) -> Graph:
    return Graph([0], {i: (0, 0) for i in range(1, rank + 1)})


def rose_point(rank: int, lengths: Optional[Sequence] = None) -> OuterSpacePoint:
    """The rose with the identity marking; uniform metric by default."""
    if rank < 1:
        raise ValueError("rank must be at least 1")
    if lengths is None:
        metric = Metric({i: Fraction(1, rank) for i in range(1, rank + 1)})
    else:
        metric = Metric({i: v for i, v in enumerate(lengths, start=1)})
    return OuterSpacePoint(
        rose_graph(rank),
        metric,
        [EdgePath((i,)) for i in range(1, rank + 1)],
        basepoint=0,
        inverse_marking={i: (i,) for i in range(1, rank + 1)},
        allow_valence_two=(rank == 1),
    )


def graph_point(
    graph: Graph,
    metric: Metric,
    basepoint: Optional[int] = None,
    require_unit_volume: bool = True,
) -> OuterSpacePoint:
    """A point on the given core graph with a spanning-tree marking.

    Generator j is carried to (tree path) . e_j . (tree path back) over the
    j-th non-tree edge, so the induced identification of fundamental groups
    is the standard one for that tree; the inverse marking kills tree edges.
    """
    if basepoint is None:
        basepoint = min(graph.vertices)
    probe = OuterSpacePoint.__new__(OuterSpacePoint)
    probe.graph = graph
    probe.basepoint = basepoint
    tree_paths = probe._spanning_tree()
    if len(tree_paths) != len(graph.vertices):
        raise GraphError("graph must be connected")
    tree_edges = {abs(p[-1]) for p in tree_paths.values() if p}
    cotree = [e for e in graph.edge_ids if e not in tree_edges]
    marking = []
    for e in cotree:
        u, v = graph.endpoints(e)
        back = tuple(-d for d in reversed(tree_paths[v]))
        marking.append(EdgePath(tree_paths[u] + (e,) + back))
    inverse = {e: () for e in tree_edges}
    inverse.update({e: (j,) for j, e in enumerate(cotree, start=1)})
    has_val2 = any(graph.valence(v) == 2 for v in graph.vertices)
    return OuterSpacePoint(
        graph,
        metric,
        marking,
        basepoint,
        inverse_marking=inverse,
        require_unit_volume=require_unit_volume,
        allow_valence_two=has_val2,
    )


def unsubdivide(x: OuterSpacePoint) -> OuterSpacePoint:
    """Remove valence-2 vertices, concatenating edge chains and summing lengths."""
    g = x.graph
    keep = {v for v in g.vertices if g.valence(v) != 2}
    circle = not keep
    if circle:
        keep = {x.basepoint}

    basepoint = x.basepoint
    marking = x.marking
    if basepoint not in keep:
        # rebase at the nearest kept vertex
        tree_paths = x._spanning_tree()
        new_base = min(keep, key=lambda v: (len(tree_paths[v]), v))
        connector = tuple(-d for d in reversed(tree_paths[new_base]))  # new_base -> basepoint
        marking = tuple(
            tighten(g, EdgePath(connector + p.edges + tuple(-d for d in reversed(connector))))
            for p in marking
        )
        basepoint = new_base

    # chains: walk from each kept vertex through valence-2 vertices
    chain_of: Dict[int, Tuple[Tuple[int, ...], int]] = {}  # first direction -> (chain, new id)
    new_endpoints: Dict[int, Tuple[int, int]] = {}
    new_id = 0
    consumed = set()
    starts = []
    for v in sorted(keep):
        for d in g.directions_at(v):
            starts.append(d)
    for d0 in starts:
        if d0 in consumed:
            continue
        chain = [d0]
        cur = g.term(d0)
        while cur not in keep:
            (nxt,) = [d for d in g.directions_at(cur) if d != -chain[-1]]
            chain.append(nxt)
            cur = g.term(nxt)
        new_id += 1
        chain_t = tuple(chain)
        chain_of[chain_t[0]] = (chain_t, new_id)
        rev = tuple(-d for d in reversed(chain_t))
        consumed.add(chain_t[0])
        consumed.add(rev[0])
        if rev != chain_t:
            chain_of[rev[0]] = (rev, -new_id)
        new_endpoints[new_id] = (g.init(chain_t[0]), g.term(chain_t[-1]))

    new_graph = Graph(keep, new_endpoints)

    def rewrite(p: EdgePath) -> EdgePath:
        out = []
        i = 0
        edges = p.edges
        while i < len(edges):
            chain, nid = chain_of[edges[i]]
            assert edges[i : i + len(chain)] == chain, "path does not follow chains"
            out.append(nid)
            i += len(chain)
        return EdgePath(tuple(out), p.closed)

    new_lengths = {}
    new_inverse: Optional[Dict[int, Word]] = None
    if x._inverse_marking is not None:
        new_inverse = {}
    for d0, (chain, nid) in chain_of.items():
        if nid < 0:
            continue
        total = Fraction(0)
        for d in chain:
            total = total + x.metric.length(d)
        new_lengths[nid] = total
        if new_inverse is not None:
            new_inverse[nid] = x.inverse_marking_word(chain)

    return OuterSpacePoint(
        new_graph,
        Metric(new_lengths),
        tuple(rewrite(p) for p in marking),
        basepoint,
        inverse_marking=new_inverse,
        require_unit_volume=False,
        allow_valence_two=circle,
    )


# -- randomized constructions (used by property suites and scripts) ----------

_ELEMENTARY_KINDS = ("swap", "invert", "left_mul", "right_mul")


def _elementary(rank: int, kind: str, i: int, j: int):
    """A Nielsen move and its inverse, as image tuples."""
    fwd = list(words.identity_images(rank))
    bwd = list(words.identity_images(rank))
    if kind == "swap":
        fwd[i - 1], fwd[j - 1] = (j,), (i,)
        bwd[i - 1], bwd[j - 1] = (j,), (i,)
    elif kind == "invert":
        fwd[i - 1] = (-i,)
        bwd[i - 1] = (-i,)
    elif kind == "left_mul":  # x_i -> x_j x_i
        fwd[i - 1] = (j, i)
        bwd[i - 1] = (-j, i)
    elif kind == "right_mul":  # x_i -> x_i x_j
        fwd[i - 1] = (i, j)
        bwd[i - 1] = (i, -j)
    else:
        raise ValueError(kind)
    return tuple(fwd), tuple(bwd)


def random_automorphism(rank: int, steps: int, rng: random.Random) -> Automorphism:
    """Random composite of Nielsen moves, with its inverse tracked exactly."""
    images = words.identity_images(rank)
    inverse = words.identity_images(rank)
    for _ in range(steps):
        kind = rng.choice(_ELEMENTARY_KINDS)
        i = rng.randrange(1, rank + 1)
        j = rng.randrange(1, rank + 1)
        if kind != "invert" and i == j:
            continue
        fwd, bwd = _elementary(rank, kind, i, j)
        images = words.compose(fwd, images)
        inverse = words.compose(inverse, bwd)
    return Automorphism(images, inverse=inverse)


def random_unit_metric(edge_ids: Sequence[int], rng: random.Random, denominator: int = 60):
    """Random positive rational lengths with exact sum 1."""
    n = len(edge_ids)
    while True:
        cuts = sorted(rng.sample(range(1, denominator), n - 1)) if n > 1 else []
        parts = []
        prev = 0
        for c in cuts + [denominator]:
            parts.append(c - prev)
            prev = c
        if all(p > 0 for p in parts):
            return Metric({e: Fraction(p, denominator) for e, p in zip(edge_ids, parts)})
