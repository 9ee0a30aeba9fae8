import math
import random

import pytest

from coarsekit import (
    FamilyOfSets,
    PreconditionError,
    Subset,
    build_space,
    dim_at_scale,
    is_r_disjoint,
    lebesgue_number,
    make_disjoint,
    mesh,
    neighborhood,
)
from coarsekit.generators import cycle_space, path_space, random_cover, random_space


def integers(lo, hi):
    return build_space({"kind": "cloud", "coords": [[i] for i in range(lo, hi + 1)]})


def fam(sp, *sets):
    return FamilyOfSets(sp, tuple(frozenset(s) for s in sets))


def three_interval_cover():
    sp = integers(0, 20)
    return sp, fam(sp, range(0, 11), range(5, 16), range(10, 21))


class TestDimAtScale:
    def test_three_intervals_at_scale_two(self):
        sp, F = three_interval_cover()
        assert dim_at_scale(F, 2.0) == 2

    def test_disjoint_family_scale_zero(self):
        sp = integers(0, 9)
        assert dim_at_scale(fam(sp, {0, 1}, {5, 6}), 0.0) == 0

    def test_two_sets_sharing_a_point(self):
        sp = integers(0, 9)
        assert dim_at_scale(fam(sp, {0, 1, 2}, {2, 3, 4}), 0.0) == 1


class TestIsRDisjoint:
    def test_gap_two_at_scale_two(self):
        sp = integers(0, 9)
        ok, _ = is_r_disjoint(fam(sp, range(0, 4), range(5, 9)), 2.0)
        assert ok

    def test_gap_two_at_scale_three_with_witness(self):
        sp = integers(0, 9)
        ok, wit = is_r_disjoint(fam(sp, range(0, 4), range(5, 9)), 3.0)
        assert not ok
        (a, pa), (b, pb), d = wit
        assert {pa, pb} == {3, 5} and d == 2.0

    def test_single_set_vacuous(self):
        sp = integers(0, 9)
        ok, _ = is_r_disjoint(fam(sp, range(10)), 100.0)
        assert ok


class TestMesh:
    def test_singletons(self):
        sp = integers(0, 9)
        assert mesh(fam(sp, {0}, {4}, {9})) == 0.0

    def test_full_interval(self):
        sp = integers(0, 10)
        assert mesh(fam(sp, range(11))) == 10.0

    def test_antipodal_pairs_on_cycle(self):
        sp = cycle_space(6)
        assert mesh(fam(sp, {0, 3}, {1, 4}, {2, 5})) == 3.0


class TestLebesgue:
    def test_whole_space_sentinel(self):
        sp = integers(0, 9)
        assert lebesgue_number(fam(sp, range(10))) == math.inf

    def test_two_halves(self):
        sp = integers(0, 9)
        assert lebesgue_number(fam(sp, range(0, 5), range(5, 10))) == 1.0

    def test_uncovered_point_rejected(self):
        sp = integers(0, 9)
        with pytest.raises(PreconditionError):
            lebesgue_number(fam(sp, range(0, 5)))


class TestMakeDisjoint:
    def test_three_interval_example(self):
        sp, F = three_interval_cover()
        colored, trace = make_disjoint(F, 2.0, 2)
        assert colored.n_colors == 3
        assert colored.union() == frozenset(range(21))
        for c in range(colored.n_colors):
            ok, wit = is_r_disjoint(colored.color_class(c), 2.0 / 3)
            assert ok, wit
        assert mesh(colored) <= mesh(F) + 2 * 2.0

    def test_whole_space_cover(self):
        sp = integers(0, 9)
        colored, _ = make_disjoint(fam(sp, range(10)), 3.0, 0)
        nonempty = [s for s in colored.sets if s]
        assert nonempty == [frozenset(range(10))]

    def test_already_disjoint_cover(self):
        sp = build_space(
            {"kind": "cloud", "coords": [[v] for v in [0, 1, 2, 3, 6, 7, 8, 9]]}
        )
        F = fam(sp, range(0, 4), range(4, 8))
        assert dim_at_scale(F, 2.0) == 0
        colored, trace = make_disjoint(F, 2.0, 0)
        assert colored.n_colors == 1
        # every output set sits inside the 2-expansion of a single input set
        for T, members in trace.margin_sets.items():
            assert len(T) == 1
            hull = neighborhood(Subset(sp, F.sets[T[0]]), 2.0).members
            assert members <= hull

    def test_containment_in_intersection_of_expansions(self):
        sp, F = three_interval_cover()
        colored, trace = make_disjoint(F, 2.0, 2)
        for T, members in trace.margin_sets.items():
            for t in T:
                hull = neighborhood(Subset(sp, F.sets[t]), 2.0).members
                assert members <= hull

    def test_w_sets_of_equal_cardinality_are_disjoint(self):
        sp, F = three_interval_cover()
        _, trace = make_disjoint(F, 2.0, 2)
        keys = list(trace.w_sets)
        for a in range(len(keys)):
            for b in range(a + 1, len(keys)):
                T, S = keys[a], keys[b]
                if len(T) == len(S) and T != S:
                    assert not (trace.w_sets[T] & trace.w_sets[S])

    def test_dimension_too_high_rejected(self):
        sp, F = three_interval_cover()
        with pytest.raises(PreconditionError):
            make_disjoint(F, 2.0, 1)

    def test_union_of_disjoint_color_classes_has_low_dimension(self):
        rng = random.Random(5)
        for _ in range(20):
            sp = random_space(rng, 48)
            R = float(rng.randint(1, 3))
            F = random_cover(rng, sp, R, max_dim=3)
            if F is None:
                continue
            n = dim_at_scale(F, R)
            colored, _ = make_disjoint(F, R, n)
            shrunk = R / (n + 1)
            # a union of n+1 families, each (R/(n+1))-disjoint, has dim < n+1
            assert dim_at_scale(colored, shrunk) <= n

    def test_idempotent_in_dimension_at_shrunk_scale(self):
        # output classes are only R/(n+1)-disjoint, so the fixed point of
        # repeated disjointification lives at the shrunk scale
        sp, F = three_interval_cover()
        colored, _ = make_disjoint(F, 2.0, 2)
        shrunk = 2.0 / 3
        d = dim_at_scale(colored, shrunk)
        assert d <= 2
        again, _ = make_disjoint(colored, shrunk, d)
        assert dim_at_scale(again, shrunk / (d + 1)) <= d
