"""Fold-driven search for train track representatives of outer automorphisms.

Starting from the rose realization of an automorphism, the search loop
normalizes the current self-map, inspects its transition matrix, and either
certifies the outcome (train track structure, invariant subgraph, finite
order) or folds an illegal turn and repeats.  All graph surgery goes through
a single mutable state object so that edge images, both markings, and the
metric stay synchronized; every constructed GraphMap re-checks marking
compatibility, which makes each round self-verifying.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import ClassVar, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import words
from .graph_core import (
    EdgePath,
    Graph,
    direction_key,
    is_forest,
    turn,
)
from .marked_metric import (
    Automorphism,
    Metric,
    OuterSpacePoint,
    chain_bound,
    epsilon_core,
    epsilon_thin_scale,
    rose_point,
)
from .graph_map import (
    GraphMap,
    TrainTrackStructure,
    gates_iterated,
    self_map_from_automorphism,
)

REL_TOL = 1e-9
_STALL_CAP = 25
_ORDER_LENGTH_CAP = 20_000


class RankCollapseError(RuntimeError):
    """A fold would identify parallel edges and lower the first Betti number."""


class InvalidMapError(RuntimeError):
    """Graph surgery reached a state that cannot represent an automorphism."""


# -- transition matrices -------------------------------------------------------


@dataclass(frozen=True)
class TransitionMatrix:
    """rows[i][j] counts crossings of edge edge_ids[i] by the image of edge_ids[j]."""

    edge_ids: Tuple[int, ...]
    rows: Tuple[Tuple[int, ...], ...]
    graph: Optional[Graph] = None

    def index(self, e: int) -> int:
        return self.edge_ids.index(e)

    def entry(self, ei: int, ej: int) -> int:
        return self.rows[self.index(ei)][self.index(ej)]

    def column_sum(self, ej: int) -> int:
        j = self.index(ej)
        return sum(row[j] for row in self.rows)

    def submatrix(self, subset) -> "TransitionMatrix":
        ids = tuple(sorted(subset))
        pos = [self.index(e) for e in ids]
        rows = tuple(tuple(self.rows[i][j] for j in pos) for i in pos)
        return TransitionMatrix(ids, rows, self.graph)

    def __str__(self) -> str:
        return "\n".join(" ".join(str(x) for x in row) for row in self.rows)


def transition_matrix(m: GraphMap) -> TransitionMatrix:
    """Unoriented crossing counts of each edge by each edge image."""
    g = m.domain.graph
    ids = g.edge_ids
    rows = tuple(
        tuple(sum(1 for d in m.edge_image[ej].edges if abs(d) == ei) for ej in ids)
        for ei in ids
    )
    return TransitionMatrix(ids, rows, g)


def _scc_labels(M: TransitionMatrix) -> Tuple[int, np.ndarray]:
    """Strong components of the digraph with an arc j -> i when rows[i][j] > 0."""
    n = len(M.edge_ids)
    adj = np.zeros((n, n), dtype=np.int8)
    for i, row in enumerate(M.rows):
        for j, x in enumerate(row):
            if x > 0:
                adj[j][i] = 1
    return connected_components(csr_matrix(adj), directed=True, connection="strong")


def matrix_irreducible(M: TransitionMatrix) -> bool:
    """Whether the crossing digraph is strongly connected."""
    n_comp, _ = _scc_labels(M)
    return n_comp == 1


def closed_class(M: TransitionMatrix) -> Optional[FrozenSet[int]]:
    """A proper invariant edge class (images of class edges stay in the class).

    Preference order: lexicographically least proper class that is not a
    forest, else the least proper class; absent iff the matrix is irreducible.
    """
    n = len(M.edge_ids)
    n_comp, labels = _scc_labels(M)
    if n_comp <= 1:
        return None
    # arcs j -> i; an invariant class is closed under reachability.
    succ: List[set] = [set() for _ in range(n)]
    for i, row in enumerate(M.rows):
        for j, x in enumerate(row):
            if x > 0:
                succ[j].add(i)
    closures = set()
    for comp in range(n_comp):
        seed = [i for i in range(n) if labels[i] == comp]
        seen = set(seed)
        stack = list(seed)
        while stack:
            for k in succ[stack.pop()]:
                if k not in seen:
                    seen.add(k)
                    stack.append(k)
        if len(seen) < n:
            closures.add(frozenset(M.edge_ids[i] for i in seen))
    if not closures:
        return None
    ordered = sorted(closures, key=lambda s: tuple(sorted(s)))
    if M.graph is not None:
        non_forest = [s for s in ordered if not is_forest(M.graph, s)]
        if non_forest:
            return non_forest[0]
    return ordered[0]


def pf_eigen(
    M: TransitionMatrix, rel_tol: float = 1e-12, max_iters: int = 10**5
) -> Tuple[float, Tuple[float, ...]]:
    """Dominant eigenvalue and left eigenvector (edge lengths), sum-normalized.

    Power iteration on the transpose action; if it stalls (periodic matrix),
    the averaged iterate v + M^T v is used instead, which shifts the spectrum
    by one and breaks the periodicity.
    """
    A = np.array(M.rows, dtype=float)
    n = A.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    for shift in (0.0, 1.0):
        v = np.full(n, 1.0 / n)
        lam_prev = None
        for _ in range(max_iters):
            w = A.T @ v + shift * v
            s = float(w.sum())
            if s <= 0:
                raise ArithmeticError("transition matrix has a zero column")
            w = w / s
            if (
                lam_prev is not None
                and abs(s - lam_prev) <= rel_tol * max(1.0, s)
                and float(np.max(np.abs(w - v))) <= rel_tol
            ):
                return s - shift, tuple(float(t) for t in w)
            v, lam_prev = w, s
    raise ArithmeticError("power iteration did not converge")


def _spectral_radius(M: TransitionMatrix) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.array(M.rows, dtype=float)))))


# -- train track test ----------------------------------------------------------


def _first_illegal_image_turn(m: GraphMap, s: TrainTrackStructure) -> Optional[Tuple[int, int]]:
    for e in m.domain.graph.edge_ids:
        path = m.edge_image[e].edges
        for a, b in zip(path, path[1:]):
            t = turn(-a, b)
            if not s.is_legal_turn(t):
                return t
    return None


def is_train_track(m: GraphMap) -> Optional[TrainTrackStructure]:
    """Gate structure if every turn crossed by an edge image is legal, else None.

    Legality is taken for the iterated gates, so success means every iterated
    edge image is immersed.  Vertices with a single gate do not fail here;
    the search loop deals with them separately.
    """
    s = gates_iterated(m)
    return s if _first_illegal_image_turn(m, s) is None else None


def finite_order_check(m: GraphMap, cap: int = 1000) -> Optional[int]:
    """Smallest k <= cap with the k-th power the identity permutation of directions."""
    g = m.domain.graph
    pi = {}
    for e in g.edge_ids:
        p = m.edge_image[e].edges
        if len(p) != 1:
            raise ValueError("finite-order check needs single-edge images")
        pi[e], pi[-e] = p[0], -p[0]
    if sorted(pi.values(), key=direction_key) != sorted(pi, key=direction_key):
        return None  # not a permutation, so no power is the identity
    order = 1
    seen = set()
    for d in pi:
        if d in seen:
            continue
        length = 0
        cur = d
        while True:
            cur = pi[cur]
            length += 1
            seen.add(cur)
            if cur == d:
                break
        order = order * length // math.gcd(order, length)
        if order > cap:
            return None
    return order


# -- mutable surgery state -----------------------------------------------------


class _MapState:
    """Graph, edge images, both markings, and metric under joint rewriting."""

    def __init__(self, m: GraphMap):
        g = m.domain.graph
        self.endpoints: Dict[int, Tuple[int, int]] = {e: g.endpoints(e) for e in g.edge_ids}
        self.vertices = set(g.vertices)
        self.images: Dict[int, List[int]] = {e: list(m.edge_image[e].edges) for e in g.edge_ids}
        self.vertex_image: Dict[int, int] = dict(m.vertex_image)
        self.dom_marking = [list(p.edges) for p in m.domain.marking]
        self.cod_marking = [list(p.edges) for p in m.codomain.marking]
        self.lengths = {e: m.domain.metric.length(e) for e in g.edge_ids}
        self.basepoint = m.domain.basepoint
        self.next_vertex = max(self.vertices) + 1
        self.next_edge = max(self.endpoints) + 1

    # -- bookkeeping -------------------------------------------------------

    def init(self, d: int) -> int:
        u, v = self.endpoints[abs(d)]
        return u if d > 0 else v

    def term(self, d: int) -> int:
        u, v = self.endpoints[abs(d)]
        return v if d > 0 else u

    def image_of(self, d: int) -> List[int]:
        img = self.images[abs(d)]
        return list(img) if d > 0 else [-x for x in reversed(img)]

    @staticmethod
    def _reduce(path: Sequence[int]) -> List[int]:
        out: List[int] = []
        for d in path:
            if out and out[-1] == -d:
                out.pop()
            else:
                out.append(d)
        return out

    def _rewrite(self, path: Sequence[int], sub: Dict[int, List[int]]) -> List[int]:
        out: List[int] = []
        for d in path:
            rep = sub.get(abs(d))
            if rep is None:
                out.append(d)
            elif d > 0:
                out.extend(rep)
            else:
                out.extend(-x for x in reversed(rep))
        return out

    def rewrite_all(self, sub: Dict[int, List[int]]) -> None:
        for e in self.images:
            self.images[e] = self._rewrite(self.images[e], sub)
        self.dom_marking = [self._rewrite(p, sub) for p in self.dom_marking]
        self.cod_marking = [self._rewrite(p, sub) for p in self.cod_marking]

    def tighten_all(self) -> None:
        for e in self.images:
            self.images[e] = self._reduce(self.images[e])
        self.dom_marking = [self._reduce(p) for p in self.dom_marking]
        self.cod_marking = [self._reduce(p) for p in self.cod_marking]

    def _merge_vertex(self, drop: int, keep: int) -> None:
        if drop == keep:
            return
        self.endpoints = {
            e: (keep if u == drop else u, keep if v == drop else v)
            for e, (u, v) in self.endpoints.items()
        }
        self.vertex_image = {
            v: (keep if w == drop else w) for v, w in self.vertex_image.items() if v != drop
        }
        self.vertices.discard(drop)
        if self.basepoint == drop:  # callers keep the basepoint; defensive
            self.basepoint = keep

    # -- surgery moves -----------------------------------------------------

    def subdivide(self, e: int, cuts: Sequence[int]) -> List[int]:
        """Split edge e at the given positions of its image path; new edge ids."""
        image = self.images.pop(e)
        u, v = self.endpoints.pop(e)
        length = self.lengths.pop(e)
        k = len(cuts) + 1
        parts = list(range(self.next_edge, self.next_edge + k))
        self.next_edge += k
        mids = list(range(self.next_vertex, self.next_vertex + len(cuts)))
        self.next_vertex += len(cuts)
        self.vertices.update(mids)
        chain = [u] + mids + [v]
        for i, p in enumerate(parts):
            self.endpoints[p] = (chain[i], chain[i + 1])
            self.lengths[p] = length / k
        sub = {e: parts}
        self.rewrite_all(sub)
        new_image = self._rewrite(image, sub)
        offsets = [len(self._rewrite(image[:c], sub)) for c in cuts]
        bounds = [0] + offsets + [len(new_image)]
        for i, p in enumerate(parts):
            self.images[p] = new_image[bounds[i] : bounds[i + 1]]
        for off, mid in zip(offsets, mids):
            self.vertex_image[mid] = self.term(new_image[off - 1])
        return parts

    def identify(self, keep_d: int, drop_d: int) -> None:
        """Identify two directions at one vertex whose whole images agree."""
        if self.image_of(keep_d) != self.image_of(drop_d):
            raise InvalidMapError("cannot identify directions with different images")
        w_keep, w_drop = self.term(keep_d), self.term(drop_d)
        if w_keep == w_drop:
            raise RankCollapseError(
                "identifying parallel edges would lower the rank; "
                "the map is not a homotopy equivalence candidate here"
            )
        if w_drop == self.basepoint:
            keep_d, drop_d = drop_d, keep_d
            w_keep, w_drop = w_drop, w_keep
        e_drop = abs(drop_d)
        rep = [keep_d] if drop_d > 0 else [-keep_d]
        del self.images[e_drop]
        del self.endpoints[e_drop]
        del self.lengths[e_drop]
        self.rewrite_all({e_drop: rep})
        self._merge_vertex(w_drop, w_keep)
        self.tighten_all()

    def collapse_edges(self, edge_set: Sequence[int]) -> None:
        """Contract a forest of edges (images of survivors lose those letters)."""
        for e in sorted(edge_set):
            u, v = self.endpoints[e]
            if u == v:
                raise InvalidMapError("cannot collapse a loop edge")
            keep, drop = (u, v)
            if v == self.basepoint or (u != self.basepoint and v < u):
                keep, drop = v, u
            del self.endpoints[e]
            del self.images[e]
            del self.lengths[e]
            self.rewrite_all({e: []})
            self._merge_vertex(drop, keep)
        self.tighten_all()

    def trim_hairs(self) -> bool:
        """Retract valence<=1 vertices other than the basepoint; True if any."""
        trimmed = False
        while True:
            valence = {v: 0 for v in self.vertices}
            for u, v in self.endpoints.values():
                valence[u] += 1
                valence[v] += 1
            leaves = [
                v for v in sorted(self.vertices) if v != self.basepoint and valence[v] <= 1
            ]
            if not leaves:
                if valence.get(self.basepoint, 0) == 1 and len(self.vertices) > 1:
                    self._rebase_off_hair()
                    trimmed = True
                    continue
                return trimmed
            v = leaves[0]
            trimmed = True
            if valence[v] == 0:
                if v in self.vertex_image.values():
                    raise InvalidMapError("isolated vertex is an image target")
                self.vertices.discard(v)
                self.vertex_image.pop(v, None)
                continue
            e = next(e for e, (a, b) in self.endpoints.items() if v in (a, b))
            a, b = self.endpoints[e]
            other = b if a == v else a
            del self.endpoints[e]
            del self.images[e]
            del self.lengths[e]
            self.rewrite_all({e: []})
            self.vertex_image = {
                u: (other if w == v else w) for u, w in self.vertex_image.items() if u != v
            }
            self.vertices.discard(v)
            self.tighten_all()

    def _rebase_off_hair(self) -> None:
        """Move a valence-1 basepoint to its attachment, conjugating markings.

        Every reduced loop based at a leaf starts along the hair and returns
        along it, so stripping the first and last letters rebases the loop.
        """
        v = self.basepoint
        self.tighten_all()
        e = next(e for e, (a, b) in self.endpoints.items() if v in (a, b))
        a, b = self.endpoints[e]
        h = e if a == v else -e
        for marking in (self.dom_marking, self.cod_marking):
            for i, loop in enumerate(marking):
                if not (loop and loop[0] == h and loop[-1] == -h):
                    raise InvalidMapError("marking loop is not based at the leaf")
                marking[i] = loop[1:-1]
        self.basepoint = b if a == v else a

    def _slide_images_off(self, v: int, along: int) -> None:
        """Homotope the map so no vertex image lands on v, sliding along the
        direction `along` (which starts at v); image paths of edges incident
        to the affected domain vertices are extended accordingly."""
        target = self.term(along)
        for u in sorted(u for u, w in self.vertex_image.items() if w == v):
            self.vertex_image[u] = target
            for e, (a, b) in sorted(self.endpoints.items()):
                if a == u:
                    self.images[e] = [-along] + list(self.images[e])
                if b == u:
                    self.images[e] = list(self.images[e]) + [along]
        self.tighten_all()

    def _count_spectral_radius(self) -> float:
        ids = sorted(self.images)
        pos = {e: i for i, e in enumerate(ids)}
        mat = np.zeros((len(ids), len(ids)))
        for e, path in self.images.items():
            for d in path:
                mat[pos[abs(d)], pos[e]] += 1
        return float(np.max(np.abs(np.linalg.eigvals(mat)))) if ids else 0.0

    def unsubdivide_pass(self) -> bool:
        """Merge the chain at one valence-2 vertex other than the basepoint;
        True if merged.  Vertex images blocking the merge are slid off first,
        along whichever of the two directions gives the smaller stretch."""
        for v in sorted(self.vertices):
            if v == self.basepoint:
                continue
            dirs = []
            for e, (a, b) in self.endpoints.items():
                if a == v:
                    dirs.append(e)
                if b == v:
                    dirs.append(-e)
            if len(dirs) != 2:
                continue
            c1, c2 = sorted(dirs, key=direction_key)
            if abs(c1) == abs(c2):
                continue  # isolated circle, nothing to merge into
            if v in self.vertex_image.values():
                trials = []
                for idx, along in enumerate((c1, c2)):
                    trial = copy.deepcopy(self)
                    trial._slide_images_off(v, along)
                    try:
                        trial._merge_valence_two(v, c1, c2)
                    except InvalidMapError:
                        continue
                    trials.append((trial._count_spectral_radius(), idx, trial))
                if not trials:
                    raise InvalidMapError(
                        "valence-two vertex cannot be merged in either direction"
                    )
                self.__dict__.update(min(trials)[2].__dict__)
            else:
                self._merge_valence_two(v, c1, c2)
            return True
        return False

    def _merge_valence_two(self, v: int, c1: int, c2: int) -> None:
        """Replace the two-edge chain through v by a single edge."""
        new_image = self.image_of(-c1) + self.image_of(c2)
        E = self.next_edge
        self.next_edge += 1
        u, w = self.term(c1), self.term(c2)
        length = self.lengths[abs(c1)] + self.lengths[abs(c2)]
        for e in (abs(c1), abs(c2)):
            del self.endpoints[e]
            del self.images[e]
            del self.lengths[e]
        self.endpoints[E] = (u, w)
        self.lengths[E] = length

        def chain_rewrite(path: Sequence[int]) -> List[int]:
            out: List[int] = []
            i = 0
            while i < len(path):
                d = path[i]
                if d == -c1 and i + 1 < len(path) and path[i + 1] == c2:
                    out.append(E)
                    i += 2
                elif d == -c2 and i + 1 < len(path) and path[i + 1] == c1:
                    out.append(-E)
                    i += 2
                elif abs(d) in (abs(c1), abs(c2)):
                    raise InvalidMapError("path ends inside an unsubdivided chain")
                else:
                    out.append(d)
                    i += 1
            return out

        for e in self.images:
            self.images[e] = chain_rewrite(self.images[e])
        self.dom_marking = [chain_rewrite(p) for p in self.dom_marking]
        self.cod_marking = [chain_rewrite(p) for p in self.cod_marking]
        self.images[E] = chain_rewrite(new_image)
        self.vertices.discard(v)
        self.vertex_image.pop(v, None)
        self.tighten_all()

    def to_graph_map(self, check: bool = True) -> GraphMap:
        if not self.endpoints:
            raise InvalidMapError("graph has no edges left")
        graph = Graph(sorted(self.vertices), dict(self.endpoints))
        vol = sum(self.lengths.values())
        metric = Metric({e: length / vol for e, length in self.lengths.items()})

        def point(marking: List[List[int]]) -> OuterSpacePoint:
            return OuterSpacePoint(
                graph,
                metric,
                [EdgePath(tuple(p)) for p in marking],
                self.basepoint,
                require_unit_volume=False,
                allow_valence_two=True,
            )

        return GraphMap(
            point(self.dom_marking),
            point(self.cod_marking),
            dict(self.vertex_image),
            {e: EdgePath(tuple(p)) for e, p in self.images.items()},
            check=check,
        )


# -- fold and normalize ---------------------------------------------------------


def _common_prefix_len(a: Sequence[int], b: Sequence[int]) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def fold(m: GraphMap, t: Tuple[int, int]) -> GraphMap:
    """Fold a one-step illegal turn: subdivide so the shared image prefix is an
    initial edge on both sides, then identify the two initial edges."""
    if not m.is_self_map:
        raise ValueError("fold needs a self-map")
    d1, d2 = t
    g = m.domain.graph
    for d in (d1, d2):
        if abs(d) not in set(g.edge_ids):
            raise ValueError(f"direction {d} is not in the graph")
    if d1 == d2:
        raise ValueError("cannot fold a degenerate turn")
    if g.init(d1) != g.init(d2):
        raise ValueError("turn directions start at different vertices")
    if m.derivative(d1) != m.derivative(d2):
        raise ValueError("turn is legal at one step; nothing to fold")
    st = _MapState(m)
    A, B = st.image_of(d1), st.image_of(d2)
    if abs(d1) == abs(d2):
        # Loop edge folded onto itself: reducedness forces the shared prefix
        # and the mirrored suffix to be disjoint thirds, so cut twice.
        k = len(A)
        L = min(_common_prefix_len(A, B), (k - 1) // 2)
        if L < 1:
            raise InvalidMapError("self-fold with no usable shared prefix")
        parts = st.subdivide(abs(d1), [L, k - L])
        f1, f2 = parts[0], -parts[2]
    else:
        L = _common_prefix_len(A, B)
        if L < len(A):
            cut = L if d1 > 0 else len(A) - L
            parts = st.subdivide(abs(d1), [cut])
            f1 = parts[0] if d1 > 0 else -parts[1]
        else:
            f1 = d1
        L2 = len(st.image_of(f1))
        lenB = len(st.image_of(d2))
        if L2 < lenB:
            cut = L2 if d2 > 0 else lenB - L2
            parts = st.subdivide(abs(d2), [cut])
            f2 = parts[0] if d2 > 0 else -parts[1]
        else:
            f2 = d2
    if st.term(f1) == st.term(f2):
        raise RankCollapseError(
            "folding these directions would identify parallel edges and drop the rank"
        )
    if st.term(f2) == st.basepoint:
        f1, f2 = f2, f1
    st.identify(f1, f2)
    st.trim_hairs()
    return st.to_graph_map(check=False)


def normalize(m: GraphMap) -> GraphMap:
    """Tighten, collapse point-image forests, trim hairs, unsubdivide chains."""
    st = _MapState(m)
    st.tighten_all()
    while True:
        degenerate = sorted(e for e, p in st.images.items() if not p)
        if degenerate:
            g = Graph(sorted(st.vertices), dict(st.endpoints))
            if not is_forest(g, degenerate):
                raise InvalidMapError(
                    "point-image edges contain a cycle; collapsing would drop the rank"
                )
            st.collapse_edges(degenerate)
            continue
        if st.trim_hairs():
            continue
        if st.unsubdivide_pass():
            continue
        break
    return st.to_graph_map(check=False)


def _collapse_class(m: GraphMap, cls) -> GraphMap:
    """Collapse an invariant forest class and re-express the map on the quotient."""
    st = _MapState(m)
    st.collapse_edges(sorted(cls))
    return st.to_graph_map(check=False)


# -- certificates ----------------------------------------------------------------


@dataclass(frozen=True)
class TrainTrackCertificate:
    graph_map: GraphMap
    structure: TrainTrackStructure
    lam: float
    metric: Metric
    trace: Tuple[str, ...]
    status: ClassVar[str] = "train_track"


@dataclass(frozen=True)
class ReductionCertificate:
    subset: FrozenSet[int]
    graph_map: GraphMap
    matrix: TransitionMatrix
    trace: Tuple[str, ...]
    status: ClassVar[str] = "reducible"


@dataclass(frozen=True)
class FiniteOrderCertificate:
    order: int
    graph_map: GraphMap
    trace: Tuple[str, ...]
    status: ClassVar[str] = "finite_order"


@dataclass(frozen=True)
class NonTerminationCertificate:
    reason: str
    trace: Tuple[str, ...]
    status: ClassVar[str] = "max_iters"


Certificate = Union[
    TrainTrackCertificate,
    ReductionCertificate,
    FiniteOrderCertificate,
    NonTerminationCertificate,
]


# -- the search loop --------------------------------------------------------------


def _word_level_order(phi: Automorphism, cap: int, length_cap: int) -> Optional[int]:
    """Smallest k <= cap with the k-th power inner, watching total word length."""
    acc = phi.images
    for k in range(1, cap + 1):
        if words.is_conjugate_identity(acc):
            return k
        if sum(len(w) for w in acc) > length_cap:
            return None
        acc = words.compose(phi.images, acc)
    return None


def _descend_to_one_step(m: GraphMap, d1: int, d2: int) -> Tuple[int, int]:
    """From a pair in one iterated gate down to a pair with equal derivatives."""
    deriv = m.derivative_map()
    a, b = d1, d2
    for _ in range(len(deriv)):
        if deriv[a] == deriv[b]:
            return turn(a, b)
        a, b = deriv[a], deriv[b]
    raise InvalidMapError(f"directions {d1},{d2} never merge under the derivative")


def _gate_potential(s: TrainTrackStructure, g: Graph) -> int:
    return sum(max(0, s.num_gates(v) - 2) for v in g.vertices)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def find_train_track(
    phi: Automorphism,
    max_iters: int = 10**4,
    order_cap: int = 60,
    eigen_rel_tol: float = 1e-12,
) -> Certificate:
    """Run the fold loop from the rose until a certificate appears.

    Outcomes: a train track certificate (metric realizing the stretch factor
    and a gate structure making every crossed turn legal), a reduction
    certificate (proper invariant non-forest edge class), a finite-order
    certificate, or a non-termination report carrying the round trace.
    """
    if phi.rank < 2:
        raise ValueError("rank must be at least 2")
    trace: List[str] = []
    x0 = rose_point(phi.rank)
    k = _word_level_order(phi, order_cap, _ORDER_LENGTH_CAP)
    if k is not None:
        m = self_map_from_automorphism(x0, phi)
        trace.append(
            f"round=0 edges={m.domain.graph.num_edges} lambda=1 potential=0 "
            f"move=finite_order({k})"
        )
        return FiniteOrderCertificate(order=k, graph_map=m, trace=tuple(trace))
    m = self_map_from_automorphism(x0, phi)
    best_lam: Optional[float] = None
    stalled = 0
    for rnd in range(max_iters):
        try:
            m = normalize(m)
        except (InvalidMapError, RankCollapseError) as exc:
            trace.append(f"round={rnd} error={exc}")
            return NonTerminationCertificate(reason=str(exc), trace=tuple(trace))
        g = m.domain.graph
        M = transition_matrix(m)
        cls = closed_class(M)
        if cls is not None:
            gates = gates_iterated(m)
            rho = _spectral_radius(M)
            pot = _gate_potential(gates, g)
            if is_forest(g, cls):
                trace.append(
                    f"round={rnd} edges={g.num_edges} lambda={_fmt(rho)} "
                    f"potential={pot} move=collapse_forest({sorted(cls)})"
                )
                m = _collapse_class(m, cls)
                continue
            for e in sorted(cls):  # integrity of the certificate
                if any(abs(d) not in cls for d in m.edge_image[e].edges):
                    raise InvalidMapError("invariant class is not actually invariant")
            trace.append(
                f"round={rnd} edges={g.num_edges} lambda={_fmt(rho)} "
                f"potential={pot} move=reduction({sorted(cls)})"
            )
            return ReductionCertificate(
                subset=cls, graph_map=m.validate(), matrix=M, trace=tuple(trace)
            )
        lam, ell = pf_eigen(M, rel_tol=eigen_rel_tol)
        # Folds never raise the stretch factor, but the valence-two slide of a
        # blocked vertex image is a homotopy onto a smaller graph and may; a
        # long run without any strict improvement means the moves are cycling.
        if best_lam is None or lam < best_lam * (1 - REL_TOL):
            best_lam, stalled = lam, 0
        else:
            stalled += 1
            if stalled > _STALL_CAP:
                trace.append(
                    f"round={rnd} edges={g.num_edges} lambda={_fmt(lam)} "
                    f"potential=- move=stalled"
                )
                return NonTerminationCertificate(
                    reason=f"stretch factor stalled near {_fmt(best_lam)}",
                    trace=tuple(trace),
                )
        simplicial = all(len(p.edges) == 1 for p in m.edge_image.values())
        if abs(lam - 1.0) <= 1e-9:
            gates = gates_iterated(m)
            pot = _gate_potential(gates, g)
            if simplicial:
                k = finite_order_check(m)
                trace.append(
                    f"round={rnd} edges={g.num_edges} lambda={_fmt(lam)} "
                    f"potential={pot} move=finite_order({k})"
                )
                if k is None:
                    return NonTerminationCertificate(
                        reason="permutation order exceeds the cap", trace=tuple(trace)
                    )
                return FiniteOrderCertificate(
                    order=k, graph_map=m.validate(), trace=tuple(trace)
                )
            return NonTerminationCertificate(
                reason="unit stretch without single-edge images", trace=tuple(trace)
            )
        metric = Metric({e: ell[i] for i, e in enumerate(M.edge_ids)})
        m = m.with_metrics(metric)
        s = gates_iterated(m)
        pot = _gate_potential(s, g)
        bad = _first_illegal_image_turn(m, s)
        if bad is None:
            if s.min_gate_count() >= 2:
                trace.append(
                    f"round={rnd} edges={g.num_edges} lambda={_fmt(lam)} "
                    f"potential={pot} move=train_track"
                )
                return TrainTrackCertificate(
                    graph_map=m.validate(),
                    structure=s,
                    lam=lam,
                    metric=metric,
                    trace=tuple(trace),
                )
            v = s.one_gate_vertices()[0]
            gate = sorted(s.gates_at(v)[0], key=direction_key)
            t = _descend_to_one_step(m, gate[0], gate[1])
            trace.append(
                f"round={rnd} edges={g.num_edges} lambda={_fmt(lam)} "
                f"potential={pot} move=gate_fold({t[0]},{t[1]})"
            )
        else:
            t = _descend_to_one_step(m, *bad)
            trace.append(
                f"round={rnd} edges={g.num_edges} lambda={_fmt(lam)} "
                f"potential={pot} move=fold({t[0]},{t[1]})"
            )
        try:
            m = fold(m, t)
        except (InvalidMapError, RankCollapseError) as exc:
            trace.append(f"round={rnd} error={exc}")
            return NonTerminationCertificate(reason=str(exc), trace=tuple(trace))
    return NonTerminationCertificate(reason="iteration cap reached", trace=tuple(trace))


# -- thin-core chains --------------------------------------------------------------


def thin_chain_reduction(
    x: OuterSpacePoint, phi: Automorphism, d_bound: float
) -> Optional[FrozenSet[int]]:
    """Invariant thin core found by comparing nested epsilon-cores.

    Scales decay geometrically from the thinness threshold; with displacement
    below d_bound, two consecutive equal nonempty cores whose edges map into
    the larger-scale core certify an invariant proper subgraph.
    """
    n = x.rank
    if n < 2:
        raise ValueError("rank must be at least 2")
    eps = float(epsilon_thin_scale(n))
    bound = chain_bound(n)
    deltas = [eps * math.exp(-(d_bound + 1.0) * i) for i in range(bound + 1)]
    cores = [epsilon_core(x, d) for d in deltas]
    m = self_map_from_automorphism(x, phi)
    for i in range(bound):
        small, big = cores[i + 1], cores[i]
        if small and small == big:
            if all(abs(d) in big for e in sorted(small) for d in m.edge_image[e].edges):
                return frozenset(small)
    return None
