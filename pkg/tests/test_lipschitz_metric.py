"""Tests for the stretch-factor metric and displacement minimization."""

from __future__ import annotations

import math
import random
import time
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outerspace.graph_core import EdgePath, Graph
from outerspace.graph_map import GraphMap, self_map_from_automorphism
from outerspace.lipschitz_metric import (
    Elliptic,
    Hyperbolic,
    ParabolicSuspect,
    StretchIntegrityError,
    _constraint_rows,
    _splits_into_reduced_loops,
    classify,
    displacement,
    distance,
    min_displacement_on_simplex,
    sigma,
)
from outerspace.marked_metric import (
    Automorphism,
    Metric,
    act,
    candidates,
    loop_length,
    random_automorphism,
    random_unit_metric,
    rose_point,
)

GOLDEN_SQ = (3 + math.sqrt(5)) / 2

EXPANDING = Automorphism.from_text("a -> ab; b -> bab")
PERMUTED = Automorphism.from_text("a -> B; b -> C; c -> A")
REDUCIBLE = Automorphism.from_text("a -> a; b -> ab")
RANK4_REDUCIBLE = Automorphism.from_text("a -> ab; b -> bab; c -> cad; d -> dcad")


def rose_self_map(phi: Automorphism) -> GraphMap:
    return self_map_from_automorphism(rose_point(phi.rank), phi)


def identity_map_between(x, y) -> GraphMap:
    """Simplicial identity between two metrics on the same marked rose."""
    return GraphMap(
        x,
        y,
        {v: v for v in x.graph.vertices},
        {e: (e,) for e in x.graph.edge_ids},
    )


class TestSigma:
    def test_exact_rational_pair(self):
        x = rose_point(2, lengths=(Fraction(1, 4), Fraction(3, 4)))
        y = rose_point(2, lengths=(Fraction(1, 2), Fraction(1, 2)))
        fwd = sigma(x, y, identity_map_between(x, y))
        assert fwd.sigma == Fraction(2)
        assert fwd.witness.loop.edges == (1,)
        assert fwd.log_sigma == pytest.approx(math.log(2), abs=1e-15)
        back = sigma(y, x, identity_map_between(y, x))
        assert back.sigma == Fraction(3, 2)
        assert back.witness.loop.edges == (2,)
        assert back.log_sigma == pytest.approx(math.log(1.5), abs=1e-15)

    def test_identity_is_one(self):
        x = rose_point(2, lengths=(Fraction(1, 3), Fraction(2, 3)))
        rep = sigma(x, x, identity_map_between(x, x))
        assert rep.sigma == Fraction(1)
        assert rep.log_sigma == 0.0

    def test_table_covers_every_candidate(self):
        x = rose_point(2, lengths=(Fraction(1, 4), Fraction(3, 4)))
        y = rose_point(2, lengths=(Fraction(1, 2), Fraction(1, 2)))
        rep = sigma(x, y, identity_map_between(x, y))
        assert len(rep.table) == len(candidates(x))
        assert all(ratio <= rep.sigma for _, ratio in rep.table)
        assert any(ratio == rep.sigma for _, ratio in rep.table)

    def test_half_half_shift_map(self):
        x = rose_point(2, lengths=(Fraction(1, 2), Fraction(1, 2)))
        m = rose_self_map(REDUCIBLE)
        rep = sigma(x, x.with_metric(x.metric), m)
        assert rep.sigma == Fraction(2)
        assert rep.witness.loop.edges == (2,)

    def test_degenerate_map_is_rejected(self):
        x = rose_point(2)
        crushing = GraphMap(
            x,
            x,
            {1: 1},
            {1: (1,), 2: (1,)},
            check=False,
        )
        with pytest.raises(StretchIntegrityError):
            sigma(x, x, crushing)


class TestDistance:
    def test_reference_pair(self):
        x = rose_point(2, lengths=(Fraction(1, 4), Fraction(3, 4)))
        y = rose_point(2, lengths=(Fraction(1, 2), Fraction(1, 2)))
        assert distance(x, y) == pytest.approx(math.log(2), abs=1e-12)
        assert distance(y, x) == pytest.approx(math.log(1.5), abs=1e-12)

    def test_self_distance_vanishes(self):
        x = rose_point(3, lengths=(Fraction(1, 6), Fraction(1, 3), Fraction(1, 2)))
        assert distance(x, x) == 0.0

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_nonnegative_and_triangle(self, seed):
        rng = random.Random(seed)
        rank = rng.choice((2, 3))
        base = rose_point(rank)
        pts = [
            base.with_metric(random_unit_metric(base.graph.edge_ids, rng))
            for _ in range(3)
        ]
        x, y, z = pts
        dxy, dyz, dxz = distance(x, y), distance(y, z), distance(x, z)
        assert dxy >= 0.0 and dyz >= 0.0 and dxz >= 0.0
        assert dxz <= dxy + dyz + 1e-9

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_action_is_isometric(self, seed):
        rng = random.Random(seed)
        rank = rng.choice((2, 3))
        base = rose_point(rank)
        x = base.with_metric(random_unit_metric(base.graph.edge_ids, rng))
        y = base.with_metric(random_unit_metric(base.graph.edge_ids, rng))
        phi = random_automorphism(rank, steps=rng.randrange(1, 6), rng=rng)
        assert distance(act(x, phi), act(y, phi)) == pytest.approx(
            distance(x, y), abs=1e-9
        )


class TestDisplacement:
    def test_expanding_map_at_its_eigenmetric(self):
        a = 1.0 / GOLDEN_SQ  # normalized left eigenvector of [[1,1],[1,2]]
        x = rose_point(2, lengths=(a, 1.0 - a))
        rep = displacement(x, EXPANDING)
        assert rep.log_sigma == pytest.approx(math.log(GOLDEN_SQ), abs=1e-12)

    def test_expanding_map_at_barycenter(self):
        x = rose_point(2)
        rep = displacement(x, EXPANDING)
        assert rep.sigma == Fraction(3)
        assert rep.witness.loop.edges == (2,)

    def test_finite_order_map_is_not_displacing(self):
        x = rose_point(3)
        rep = displacement(x, PERMUTED)
        assert rep.sigma == Fraction(1)
        assert rep.log_sigma == 0.0


class TestConstraintRows:
    def test_rose_rows_are_petals(self):
        m2 = rose_self_map(EXPANDING)
        assert len(_constraint_rows(m2.domain.graph, m2.edge_image)) == 2
        m4 = rose_self_map(RANK4_REDUCIBLE)
        assert len(_constraint_rows(m4.domain.graph, m4.edge_image)) == 4

    def test_split_detection_on_rose(self):
        g = rose_point(2).graph
        assert _splits_into_reduced_loops(g, (1, 2))
        assert _splits_into_reduced_loops(g, (1, -2))
        assert not _splits_into_reduced_loops(g, (1,))
        assert not _splits_into_reduced_loops(g, (2,))

    def test_barbell_loop_is_kept(self):
        g = Graph(vertices=(1, 2), endpoints={1: (1, 1), 2: (2, 2), 3: (1, 2)})
        assert not _splits_into_reduced_loops(g, (1, 3, 2, -3))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_petal_maximum_matches_full_table(self, seed):
        rng = random.Random(seed)
        base = rose_point(2)
        x = base.with_metric(random_unit_metric(base.graph.edge_ids, rng))
        m = rose_self_map(EXPANDING)
        full = max(
            Fraction(loop_length(x, m.map_path(c.loop))) / loop_length(x, c.loop)
            for c in candidates(x)
        )
        petals = max(
            Fraction(loop_length(x, m.map_path(EdgePath((e,), closed=True))))
            / x.metric.length(e)
            for e in base.graph.edge_ids
        )
        assert full == petals


class TestMinDisplacement:
    def test_interior_optimum(self):
        m = rose_self_map(EXPANDING)
        rep = min_displacement_on_simplex(m.domain.graph, m.edge_image, 1e-6)
        assert abs(rep.lam - GOLDEN_SQ) <= 1e-6
        assert rep.boundary_flag is False
        assert rep.floor == 1e-6
        expected = {1: 1.0 / GOLDEN_SQ, 2: (GOLDEN_SQ - 1.0) / GOLDEN_SQ}
        for e, val in expected.items():
            assert rep.metric.length(e) == pytest.approx(val, abs=1e-4)

    def test_floored_family_tracks_closed_form(self):
        m = rose_self_map(REDUCIBLE)
        for floor in (1e-2, 1e-3, 1e-4):
            rep = min_displacement_on_simplex(m.domain.graph, m.edge_image, floor)
            assert abs(rep.lam - 1.0 / (1.0 - floor)) <= 1e-6
            assert rep.boundary_flag is True
            assert len(rep.trace) == 60
            los = [lo for lo, _ in rep.trace]
            his = [hi for _, hi in rep.trace]
            assert los == sorted(los)
            assert his == sorted(his, reverse=True)
            assert all(lo <= hi for lo, hi in rep.trace)

    def test_floored_family_is_monotone(self):
        m = rose_self_map(REDUCIBLE)
        lams = [
            min_displacement_on_simplex(m.domain.graph, m.edge_image, f).lam
            for f in (1e-2, 1e-3, 1e-4)
        ]
        assert lams[0] > lams[1] > lams[2] >= 1.0

    def test_reducible_rank_four_sweep(self):
        m = rose_self_map(RANK4_REDUCIBLE)
        start = time.monotonic()
        reports = [
            min_displacement_on_simplex(m.domain.graph, m.edge_image, f)
            for f in (1e-2, 1e-3, 1e-4)
        ]
        elapsed = time.monotonic() - start
        lams = [rep.lam for rep in reports]
        assert lams[0] > lams[1] > lams[2]
        assert all(lam >= GOLDEN_SQ - 1e-9 for lam in lams)
        assert lams[2] - GOLDEN_SQ <= 0.05
        assert all(rep.boundary_flag for rep in reports)
        assert elapsed < 10.0

    def test_floor_domain_is_checked(self):
        m = rose_self_map(EXPANDING)
        for bad in (0.0, -0.1, 0.5, 0.7):
            with pytest.raises(ValueError):
                min_displacement_on_simplex(m.domain.graph, m.edge_image, bad)

    def test_repeat_runs_agree(self):
        m = rose_self_map(RANK4_REDUCIBLE)
        first = min_displacement_on_simplex(m.domain.graph, m.edge_image, 1e-4)
        second = min_displacement_on_simplex(m.domain.graph, m.edge_image, 1e-4)
        assert first == second


class TestClassify:
    def test_finite_order_input(self):
        result = classify(PERMUTED)
        assert isinstance(result, Elliptic)
        assert result.kind == "elliptic"
        assert result.order == 6

    def test_expanding_input(self):
        result = classify(EXPANDING)
        assert isinstance(result, Hyperbolic)
        assert result.kind == "hyperbolic"
        assert abs(result.lam - GOLDEN_SQ) <= 1e-6
        assert result.simplex.boundary_flag is False
        assert abs(result.certificate.lam - GOLDEN_SQ) <= 1e-9

    def test_polynomially_growing_input(self):
        result = classify(REDUCIBLE)
        assert isinstance(result, ParabolicSuspect)
        assert result.kind == "parabolic_suspect"
        assert result.invariant_chain == (frozenset({1}),)
        assert all(boundary for _, _, boundary in result.sweep)
        lams = [lam for _, lam, _ in result.sweep]
        assert lams == sorted(lams, reverse=True)
        assert lams[-1] < 1.02

    def test_reducible_exponential_input(self):
        result = classify(RANK4_REDUCIBLE)
        assert isinstance(result, ParabolicSuspect)
        assert result.invariant_chain == (frozenset({1, 2}),)
        assert all(boundary for _, _, boundary in result.sweep)
        lams = [lam for _, lam, _ in result.sweep]
        assert lams == sorted(lams, reverse=True)
        assert lams[-1] >= GOLDEN_SQ - 1e-9
