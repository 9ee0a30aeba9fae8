import itertools
import math

import pytest

from coarsekit import (
    MetricError,
    PreconditionError,
    Subset,
    build_space,
    diameter,
    hausdorff_distance,
    inner_neighborhood,
    neighborhood,
    r_components,
)
from coarsekit.generators import cycle_space, path_space


def integers(lo, hi):
    return build_space({"kind": "cloud", "coords": [[i] for i in range(lo, hi + 1)]})


class TestBuildSpace:
    def test_two_point_matrix(self):
        sp = build_space({"kind": "matrix", "labels": ["a", "b"], "matrix": [[0, 1], [1, 0]]})
        assert sp.n == 2
        assert sp.diam() == 1.0

    def test_path_graph_is_integer_interval(self):
        sp = build_space(
            {
                "kind": "graph",
                "labels": list(range(10)),
                "edges": [[i, i + 1, 1] for i in range(9)],
            }
        )
        for i in range(10):
            for j in range(10):
                assert sp.d(i, j) == abs(i - j)

    def test_triangle_violation_reported(self):
        with pytest.raises(MetricError):
            build_space(
                {
                    "kind": "matrix",
                    "labels": [0, 1, 2],
                    "matrix": [[0, 1, 5], [1, 0, 1], [5, 1, 0]],
                }
            )

    def test_zero_distance_between_distinct_points_rejected(self):
        with pytest.raises(MetricError):
            build_space(
                {"kind": "matrix", "labels": [0, 1], "matrix": [[0, 0], [0, 0]]}
            )

    def test_asymmetric_matrix_rejected(self):
        with pytest.raises(MetricError):
            build_space(
                {"kind": "matrix", "labels": [0, 1], "matrix": [[0, 1], [2, 0]]}
            )


class TestNeighborhood:
    def test_strict_ball_around_singleton(self):
        sp = integers(0, 10)
        out = neighborhood(Subset(sp, {5}), 2.0)
        assert out.members == frozenset({4, 5, 6})

    def test_empty_set(self):
        sp = integers(0, 10)
        assert neighborhood(Subset(sp, frozenset()), 3.0).members == frozenset()

    def test_strictness_keeps_boundary_out(self):
        sp = integers(0, 10)
        out = neighborhood(Subset(sp, {0, 1, 2, 3}), 1.0)
        assert out.members == frozenset({0, 1, 2, 3})

    def test_monotone_in_radius(self):
        sp = integers(0, 10)
        A = Subset(sp, {2, 7})
        prev = frozenset()
        for R in [0.0, 0.5, 1.0, 2.0, 3.5, 20.0]:
            cur = neighborhood(A, R).members
            assert prev <= cur
            prev = cur


class TestInnerNeighborhood:
    def test_example(self):
        sp = integers(0, 10)
        out = inner_neighborhood(Subset(sp, set(range(6))), 1.5)
        assert out.members == frozenset({0, 1, 2, 3, 4})

    def test_radius_zero_is_identity(self):
        sp = integers(0, 10)
        A = Subset(sp, {1, 4, 9})
        assert inner_neighborhood(A, 0.0).members == A.members

    def test_whole_space_fixed(self):
        sp = integers(0, 10)
        A = sp.full()
        assert inner_neighborhood(A, 100.0).members == A.members

    def test_outer_then_inner_contains_original(self):
        sp = integers(0, 10)
        for members in [{3}, {0, 1, 2}, {5, 9}]:
            for R in [1.0, 1.5, 3.0]:
                A = Subset(sp, members)
                grown = neighborhood(A, R)
                assert A.members <= inner_neighborhood(grown, R).members


class TestHausdorff:
    def test_singletons(self):
        sp = integers(0, 10)
        assert hausdorff_distance(Subset(sp, {0}), Subset(sp, {3})) == 3.0

    def test_nested_sets(self):
        sp = integers(0, 10)
        assert hausdorff_distance(Subset(sp, {0, 1, 2, 3}), Subset(sp, {1, 2})) == 1.0

    def test_equal_sets(self):
        sp = integers(0, 10)
        A = Subset(sp, {2, 5, 7})
        assert hausdorff_distance(A, A) == 0.0

    def test_empty_rejected(self):
        sp = integers(0, 10)
        with pytest.raises(PreconditionError):
            hausdorff_distance(Subset(sp, frozenset()), Subset(sp, {1}))

    def test_triangle_inequality_exhaustive_small_space(self):
        sp = integers(0, 4)
        subsets = [
            Subset(sp, frozenset(c))
            for k in range(1, 6)
            for c in itertools.combinations(range(5), k)
        ]
        for A, B, C in itertools.product(subsets, repeat=3):
            assert hausdorff_distance(A, C) <= hausdorff_distance(A, B) + hausdorff_distance(
                B, C
            ) + 1e-12


class TestRComponents:
    def test_two_clusters(self):
        sp = build_space(
            {"kind": "cloud", "coords": [[v] for v in [0, 1, 2, 10, 11, 12]]}
        )
        comps = r_components(sp.full(), 1.0)
        assert [sorted(c.members) for c in comps] == [[0, 1, 2], [3, 4, 5]]

    def test_large_radius_single_class(self):
        sp = integers(0, 9)
        comps = r_components(sp.full(), 9.0)
        assert len(comps) == 1

    def test_small_radius_singletons(self):
        sp = integers(0, 9)
        comps = r_components(sp.full(), 0.5)
        assert len(comps) == 10

    def test_classes_separated_and_connected(self):
        sp = build_space(
            {"kind": "cloud", "coords": [[v] for v in [0, 2, 3, 9, 10, 14]]}
        )
        for R in [1.0, 2.0, 3.0, 4.0]:
            comps = r_components(sp.full(), R)
            for a, b in itertools.combinations(comps, 2):
                cross = min(
                    sp.d(x, y) for x in a.members for y in b.members
                )
                assert cross > R
            for c in comps:
                # BFS within the class using steps of length <= R
                pts = sorted(c.members)
                seen = {pts[0]}
                frontier = [pts[0]]
                while frontier:
                    x = frontier.pop()
                    for y in pts:
                        if y not in seen and sp.d(x, y) <= R:
                            seen.add(y)
                            frontier.append(y)
                assert seen == set(pts)


class TestDiameter:
    def test_singleton(self):
        sp = integers(0, 10)
        assert diameter(Subset(sp, {5})) == 0.0

    def test_three_points(self):
        sp = integers(0, 10)
        assert diameter(Subset(sp, {0, 3, 7})) == 7.0

    def test_cycle_diameter(self):
        sp = cycle_space(6)
        assert diameter(sp.full()) == 3.0

    def test_empty_rejected(self):
        sp = integers(0, 10)
        with pytest.raises(PreconditionError):
            diameter(Subset(sp, frozenset()))


def test_path_space_matches_integer_metric():
    sp = path_space(7)
    for i in range(7):
        for j in range(7):
            assert sp.d(i, j) == abs(i - j)
