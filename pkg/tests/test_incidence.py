"""Rich points and the partitioned incidence counter.

Configuration oracles are closed-form combinatorics, derived independently:
  planar generic: every pair of distinct non-parallel coplanar lines meets
    once and no three share a point, so C(L, 2) 2-rich points;
  regulus z=xy: the ruling x=a meets the ruling y=b exactly at (a, b, ab) and
    same-family rulings are disjoint, so (L/2)^2 points;
  k-lattice grid: each of the k^3 lattice points lies on exactly 3 axis lines;
  pencil: one point of multiplicity L;
  random lines in space: skew with probability 1, so zero rich points.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partwave.errors import UsageError
from partwave.incidence import (
    CertNode,
    Line,
    count_rich_points_partitioned,
    dedupe_lines,
    generate_configuration,
    line_in_surface,
    pair_intersection,
    rich_points,
)
from partwave.polynomials import Polynomial


class TestLine:
    def test_canonical_form_identifies_equal_lines(self):
        a = Line.through([0, 0, 0], [1, 1, 1])
        b = Line.through([2, 2, 2], [5, 5, 5])
        c = Line.from_point_direction([1, 1, 1], [-1, -1, -1])
        assert a == b == c

    def test_base_perpendicular_to_direction(self):
        ln = Line.through([3.0, 1.0, -2.0], [0.0, 4.0, 5.0])
        assert abs(np.dot(ln.base_arr, ln.dir_arr)) <= 1e-9
        assert np.linalg.norm(ln.dir_arr) == pytest.approx(1.0, abs=1e-9)

    def test_distance(self):
        ln = Line.from_point_direction([0, 0, 0], [1, 0, 0])
        assert ln.distance_to([5.0, 3.0, 4.0]) == pytest.approx(5.0)

    def test_degenerate_raises(self):
        with pytest.raises(UsageError):
            Line.through([1, 2, 3], [1, 2, 3])

    def test_dedupe(self):
        a = Line.through([0, 0, 0], [1, 0, 0])
        b = Line.through([7, 0, 0], [9, 0, 0])
        assert len(dedupe_lines([a, b, a])) == 1


class TestPairIntersection:
    def test_crossing(self):
        a = Line.from_point_direction([0, 0, 0], [1, 0, 0])
        b = Line.from_point_direction([2, -1, 0], [0, 1, 0])
        x = pair_intersection(a, b)
        assert np.allclose(x, [2, 0, 0], atol=1e-12)

    def test_skew_returns_none(self):
        a = Line.from_point_direction([0, 0, 0], [1, 0, 0])
        b = Line.from_point_direction([0, 1, 1], [0, 1, 0])
        assert pair_intersection(a, b) is None

    def test_parallel_returns_none(self):
        a = Line.from_point_direction([0, 0, 0], [1, 0, 0])
        b = Line.from_point_direction([0, 1, 0], [1, 0, 0])
        assert pair_intersection(a, b) is None


class TestRichPoints:
    def test_planar_count(self):
        lines, info = generate_configuration("planar", 20, seed=1)
        rp = rich_points(lines, 2)
        assert len(rp) == info["expected_rich"] == 190

    def test_regulus_count_and_surface(self):
        lines, info = generate_configuration("regulus", 20, seed=2)
        rp = rich_points(lines, 2)
        assert len(rp) == info["expected_rich"] == 100
        # all rich points and all lines live on z = xy
        s = Polynomial(3, {(0, 0, 1): 1.0, (1, 1, 0): -1.0})
        x, y, z = rp.points[:, 0], rp.points[:, 1], rp.points[:, 2]
        assert np.max(np.abs(z - x * y)) <= 1e-9
        assert all(line_in_surface(ln, s) for ln in lines)

    def test_pencil_single_point(self):
        lines, info = generate_configuration("pencil", 30, seed=3)
        rp = rich_points(lines, 2)
        assert len(rp) == 1
        assert rp.multiplicities[0] == len(lines)
        assert np.allclose(rp.points[0], info["apex"], atol=1e-8)

    def test_grid_counts(self):
        lines, info = generate_configuration("grid", 4, seed=4)
        assert len(lines) == info["num_lines"] == 48
        rp3 = rich_points(lines, 3)
        assert len(rp3) == info["expected_rich"] == 64
        assert np.all(rp3.multiplicities == 3)
        # 2-rich includes the same points only: axis lines meet nowhere else
        rp2 = rich_points(lines, 2)
        assert len(rp2) == 64

    def test_random_lines_have_no_rich_points(self):
        lines, info = generate_configuration("random", 40, seed=5)
        rp = rich_points(lines, 2)
        assert len(rp) == 0

    def test_multiplicity_threshold(self):
        lines, _ = generate_configuration("grid", 3, seed=6)
        assert len(rich_points(lines, 4)) == 0

    def test_richness_below_two_rejected(self):
        lines, _ = generate_configuration("planar", 4, seed=0)
        with pytest.raises(UsageError):
            rich_points(lines, 1)

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=10, deadline=None)
    def test_planar_formula_property(self, seed):
        lines, info = generate_configuration("planar", 9, seed=seed)
        assert len(rich_points(lines, 2)) == 36


class TestGridScaling:
    def test_rich_count_slope_is_three_halves(self):
        # rich = k^3, L = 3k^2: between sizes the log-log slope is exactly 3/2
        sizes = [3, 4, 5, 6]
        ls, rs = [], []
        for k in sizes:
            lines, info = generate_configuration("grid", k)
            ls.append(3 * k**2)
            rs.append(len(rich_points(lines, 3)))
        slope = np.polyfit(np.log(ls), np.log(rs), 1)[0]
        assert slope == pytest.approx(1.5, abs=1e-9)


class TestPartitionedCount:
    @pytest.mark.parametrize(
        "kind,size,r",
        [("planar", 16, 2), ("regulus", 16, 2), ("pencil", 24, 2), ("grid", 4, 3)],
    )
    def test_matches_bruteforce(self, kind, size, r):
        lines, info = generate_configuration(kind, size, seed=7)
        direct = len(rich_points(lines, r))
        count, cert = count_rich_points_partitioned(lines, r, seed=7)
        assert count == direct
        cert.validate()

    def test_planar_family_routes_to_variety_branch(self):
        # A coplanar family is the wall case par excellence: the degree-1
        # factor finds the plane itself, every line is contained in Z(P),
        # and every rich point is a wall point.
        lines, _ = generate_configuration("planar", 30, seed=8)
        count, cert = count_rich_points_partitioned(lines, 2, seed=8)
        assert count == 435
        assert cert.kind == "split"
        assert cert.variety_line_count == 30
        assert cert.wall_count == 435

    def test_pencils_family_routes_through_cells(self):
        lines, info = generate_configuration("pencils", 48, seed=12)
        direct = len(rich_points(lines, 2))
        assert direct == info["expected_rich"]
        count, cert = count_rich_points_partitioned(lines, 2, seed=12)
        assert count == direct
        cert.validate()
        assert cert.kind == "split"
        assert len(cert.children) > 1
        assert sum(c.count for _, c in cert.children) > 0
        # budget recorded per cell and within (D+1) * L
        assert sum(cert.cell_line_counts.values()) <= (cert.partition_degree + 1) * 48
        d = cert.to_json_dict()
        assert d["count"] == direct and d["kind"] == "split"

    def test_random_config_zero(self):
        lines, _ = generate_configuration("random", 30, seed=9)
        count, cert = count_rich_points_partitioned(lines, 2, seed=9)
        assert count == 0
        cert.validate()

    def test_deterministic(self):
        lines, _ = generate_configuration("regulus", 20, seed=10)
        c1, t1 = count_rich_points_partitioned(lines, 2, seed=11)
        c2, t2 = count_rich_points_partitioned(lines, 2, seed=11)
        assert c1 == c2
        assert t1.to_json_dict() == t2.to_json_dict()
