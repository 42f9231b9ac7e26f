"""Tube geometry against zero sets: classification, segments, cube counts.

Sphere classification oracles come from the closed form: at a sphere point z
the angle between a direction v and the tangent plane is arcsin(|z . v| / |z|)
(gradient parallel to z), so witness angles are computable by hand.
"""

import math

import numpy as np
import pytest

from partwave.errors import UsageError
from partwave.polynomials import Polynomial, random_polynomial, sample_zero_set
from partwave.tubes import (
    DISJOINT,
    TANGENT,
    TRANSVERSE,
    CensusReport,
    Tube,
    TubeSegmentation,
    classify_tube,
    count_cubes_meeting_zero_set,
    cubes_meeting_zero_set,
    direction_angle,
    tangent_direction_census,
    transverse_segment_count,
)


def plane(axis: int, offset: float = 0.0) -> Polynomial:
    e = [0, 0, 0]
    e[axis] = 1
    return Polynomial(3, {tuple(e): 1.0, (0, 0, 0): -offset})


def sphere3(radius: float, center=(0.0, 0.0, 0.0)) -> Polynomial:
    cx, cy, cz = center
    return Polynomial(
        3,
        {
            (2, 0, 0): 1.0,
            (0, 2, 0): 1.0,
            (0, 0, 2): 1.0,
            (1, 0, 0): -2 * cx,
            (0, 1, 0): -2 * cy,
            (0, 0, 1): -2 * cz,
            (0, 0, 0): cx**2 + cy**2 + cz**2 - radius**2,
        },
    )


class TestTube:
    def test_membership_and_dilation(self):
        t = Tube.around([0, 0, 0], [1, 0, 0], radius=0.5, length=4.0)
        pts = np.array(
            [
                [0.0, 0.4, 0.0],   # inside
                [0.0, 0.6, 0.0],   # outside T, inside 2T
                [3.2, 0.0, 0.0],   # beyond the segment end, outside 2T
            ]
        )
        assert list(t.contains(pts)) == [True, False, False]
        assert list(t.contains(pts, dilation=2.0)) == [True, True, False]
        t2 = t.dilate(2.0)
        assert np.allclose(t2.distance(pts), t.distance(pts))
        assert t2.radius == 1.0 and t2.length == t.length

    def test_distance_to_segment_uses_endpoints(self):
        t = Tube.around([0, 0, 0], [1, 0, 0], radius=0.1, length=2.0)
        # beyond the +x end by 1: distance is to the endpoint (1,0,0)
        assert t.distance([[2.0, 0.0, 0.0]])[0] == pytest.approx(1.0)

    def test_invalid(self):
        with pytest.raises(UsageError):
            Tube.around([0, 0, 0], [1, 0, 0], radius=-1.0, length=1.0)


class TestSegmentation:
    def test_tiling_and_lengths(self):
        t = Tube.around([0, 0, 0], [1, 0, 0], radius=0.05, length=4.2)
        seg = TubeSegmentation.build(t, 0.1)
        assert seg.segment_length == pytest.approx(0.5)
        seg.check_tiling()
        # 8 full segments of 0.5 plus a 0.2 remainder
        assert seg.num_segments == 9

    def test_a_range_enforced(self):
        t = Tube.around([0, 0, 0], [1, 0, 0], radius=0.05, length=1.0)
        with pytest.raises(UsageError):
            TubeSegmentation.build(t, 0.2)
        with pytest.raises(UsageError):
            TubeSegmentation.build(t, 0.0)

    def test_index_of(self):
        t = Tube.around([2.0, 0, 0], [1, 0, 0], radius=0.05, length=4.0)
        seg = TubeSegmentation.build(t, 0.05)  # segment length 1.0
        idx = seg.index_of(np.array([0.1, 1.5, 3.9]))
        assert list(idx) == [0, 1, 3]


class TestClassifyTube:
    def test_in_plane_tube_is_tangent(self):
        t = Tube.around([0, 0, 0], [1, 0, 0], radius=0.05, length=2.0)
        rep = classify_tube(t, plane(2), ((0.0, 0.0, 0.0), 1.0), 1e-3)
        assert rep.status == TANGENT
        assert rep.witness_angle == pytest.approx(0.0, abs=1e-12)

    def test_perpendicular_tube_is_transverse(self):
        t = Tube.around([0, 0, 0], [0, 0, 1], radius=0.05, length=2.0)
        rep = classify_tube(t, plane(2), ((0.0, 0.0, 0.0), 1.0), 0.5)
        assert rep.status == TRANSVERSE
        assert rep.witness_angle == pytest.approx(math.pi / 2, abs=1e-9)
        assert rep.witness_point is not None

    def test_far_tube_is_disjoint(self):
        t = Tube.around([0, 0, 5.0], [1, 0, 0], radius=0.05, length=2.0)
        rep = classify_tube(t, plane(2), ((0.0, 0.0, 5.0), 1.0), 0.5)
        assert rep.status == DISJOINT

    def test_big_sphere_grazing_vs_crossing(self):
        # tube hugging the north pole of a radius-100 sphere: within the
        # small witness ball, |x| <= ~4 so angles <= arcsin(0.04) < 0.1
        s = sphere3(100.0)
        graze = Tube.around([0.0, 0.0, 99.9995], [1, 0, 0], radius=1.0, length=8.0)
        rep = classify_tube(graze, s, ((0.0, 0.0, 100.0), 2.0), 0.1, sample_spacing=0.25)
        assert rep.status == TANGENT
        assert rep.witness_angle <= 0.05
        # the same direction through the equator sees angle ~ pi/2
        cross = Tube.around([100.0, 0.0, 0.0], [1, 0, 0], radius=1.0, length=8.0)
        rep2 = classify_tube(cross, s, ((100.0, 0.0, 0.0), 2.0), 0.1, sample_spacing=0.25)
        assert rep2.status == TRANSVERSE
        assert rep2.witness_angle > 1.0

    def test_dichotomy_on_wall_hitters(self):
        # every tube that meets the wall is TANGENT xor TRANSVERSE
        rng = np.random.default_rng(50)
        s = sphere3(1.0)
        statuses = []
        for _ in range(12):
            z = rng.normal(size=3)
            z /= np.linalg.norm(z)
            d = rng.normal(size=3)
            t = Tube.around(z, d, radius=0.08, length=1.5)
            rep = classify_tube(t, s, ((0.0, 0.0, 0.0), 1.5), 0.3)
            statuses.append(rep.status)
            assert rep.status in (TANGENT, TRANSVERSE)
        assert TRANSVERSE in statuses


class TestSegmentCount:
    def test_single_perpendicular_plane(self):
        t = Tube.around([0.5, 0, 0], [1, 0, 0], radius=0.05, length=1.0)
        assert transverse_segment_count(t, plane(0, 0.5), 0.1) == 1

    @pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 6])
    def test_parallel_planes_exact(self, d):
        # planes at 1.1 * seg_len * k: occupied segment indices floor(1.1 k)
        # are pairwise distinct, so the count is exactly d
        rho, a = 0.05, 0.1
        seg_len = rho / a
        prod = Polynomial.constant(1.0, 3)
        for k in range(1, d + 1):
            prod = prod * plane(0, 1.1 * seg_len * k)
        t = Tube.around([2.1, 0, 0], [1, 0, 0], radius=rho, length=4.2)
        assert transverse_segment_count(t, prod, a) == d

    def test_parallel_to_plane_not_counted(self):
        # tube inside the plane: all angles are 0 < a, nothing survives
        t = Tube.around([0, 0, 0], [1, 0, 0], radius=0.05, length=2.0)
        assert transverse_segment_count(t, plane(2), 0.1) == 0

    def test_monotone_in_angle_filter(self):
        # two perpendicular planes (angle pi/2: always counted, far enough
        # apart to stay in distinct segments at every tested a) plus a plane
        # tilted at angle 0.06 to the tube axis: its shallow footprint spans
        # ~2 rho / 0.06 of the axis (two segments at a = 0.05) and is filtered
        # out entirely once a > 0.06, so the counts step down 4, 2, 2
        c6, s6 = math.cos(0.06), math.sin(0.06)
        tilted = Polynomial(
            3, {(1, 0, 0): s6, (0, 0, 1): c6, (0, 0, 0): -5.3 * s6}
        )
        q = plane(0, 0.7) * plane(0, 3.9) * tilted
        t = Tube.around([3.0, 0, 0], [1, 0, 0], radius=0.05, length=6.0)
        counts = [transverse_segment_count(t, q, a) for a in (0.05, 0.07, 0.1)]
        assert counts == [4, 2, 2]
        assert counts == sorted(counts, reverse=True)

    def test_random_smoke_within_cubic_bound(self):
        rng = np.random.default_rng(51)
        for deg in (2, 3):
            q = random_polynomial(rng, 3, deg)
            for _ in range(5):
                pt = rng.uniform(-0.5, 0.5, 3)
                t = Tube.around(pt, rng.normal(size=3), radius=0.05, length=2.0)
                c = transverse_segment_count(t, q, 0.1)
                assert c <= 8 * deg**3


class TestCubeCounts:
    def test_single_slab_exact(self):
        assert count_cubes_meeting_zero_set(plane(0, 0.5), (10, 10, 10)) == 100

    def test_two_perpendicular_slabs_inclusion_exclusion(self):
        p = plane(0, 0.5) * plane(1, 0.5)
        assert count_cubes_meeting_zero_set(p, (10, 10, 10)) == 190

    def test_parallel_slabs_linear_in_count(self):
        # k parallel slabs in distinct columns: exactly 100 k cubes
        for k in range(1, 6):
            prod = Polynomial.constant(1.0, 3)
            for i in range(k):
                prod = prod * plane(0, i + 0.5)
            assert count_cubes_meeting_zero_set(prod, (10, 10, 10)) == 100 * k

    def test_anisotropic_dims(self):
        assert count_cubes_meeting_zero_set(plane(0, 1.5), (4, 6, 8)) == 48

    def test_2d_variant(self):
        p = Polynomial(2, {(1, 0): 1.0, (0, 0): -0.5})
        assert count_cubes_meeting_zero_set(p, (10, 10)) == 10

    def test_sphere_count_scales_with_area(self):
        counts = {}
        for L in (8, 16):
            c = L / 2.0
            s = sphere3(L / 2.0, center=(c, c, c))
            counts[L] = count_cubes_meeting_zero_set(s, (L, L, L))
        # area pi L^2: the count/L^2 ratio must be L-independent-ish
        r8 = counts[8] / 8**2
        r16 = counts[16] / 16**2
        assert 0.5 <= r8 / r16 <= 2.0
        assert r16 / 2.0 <= 8.0  # C*D bound with D=2

    def test_scan_conservative_against_sampler(self):
        s = sphere3(1.6, center=(2.0, 2.0, 2.0))
        mask = cubes_meeting_zero_set(s, (4, 4, 4), subsample=4)
        samp = sample_zero_set(s, ([0.0] * 3, [4.0] * 3), 0.15)
        assert len(samp) > 200
        cubes = np.clip(np.floor(samp.points).astype(int), 0, 3)
        assert np.all(mask[tuple(cubes.T)])


class TestCensus:
    def test_plane_census_counts_in_plane_directions(self):
        rho, L = 0.05, 4.0
        thresh = rho / L
        p = plane(2)
        tubes = []
        # 5 tangent: horizontal, well separated in angle
        for k in range(5):
            phi = k * math.pi / 10
            tubes.append(
                Tube.around(
                    [0.2 * k - 0.4, 0.0, 0.0],
                    [math.cos(phi), math.sin(phi), 0.0],
                    rho,
                    2.0,
                )
            )
        # 4 transverse: tilted well above threshold
        for k in range(4):
            tubes.append(
                Tube.around([0.1 * k, 0.1, 0.0], [1.0, 0.0, 0.4 + 0.1 * k], rho, 2.0)
            )
        # 2 disjoint: far above the plane
        for k in range(2):
            tubes.append(Tube.around([0.0, 0.0, 3.0 + k], [1.0, 0.0, 0.0], rho, 2.0))
        rep = tangent_direction_census(
            tubes, p, ((0.0, 0.0, 0.0), 1.5), rho, L, angle_sep=0.1
        )
        assert rep.count == 5
        assert rep.num_tangent == 5
        statuses = [r.status for r in rep.classifications]
        assert statuses.count(TRANSVERSE) == 4
        assert statuses.count(DISJOINT) == 2
        for i in rep.kept_indices:
            # counted directions lie within the threshold angle of the plane
            assert abs(tubes[i].direction[2]) <= math.sin(thresh) + 1e-12

    def test_greedy_separation_dedupes_close_directions(self):
        rho, L = 0.05, 4.0
        p = plane(2)
        tubes = [
            Tube.around([0.0, 0.0, 0.0], [1.0, 0.001 * k, 0.0], rho, 2.0)
            for k in range(5)
        ]
        rep = tangent_direction_census(
            tubes, p, ((0.0, 0.0, 0.0), 1.5), rho, L, angle_sep=0.1
        )
        assert rep.num_tangent == 5
        assert rep.count == 1  # directions nearly identical: greedy keeps one

    def test_direction_angle_symmetric_unsigned(self):
        assert direction_angle(np.array([1.0, 0, 0]), np.array([-1.0, 0, 0])) == 0.0
        assert direction_angle(
            np.array([1.0, 0, 0]), np.array([0.0, 1.0, 0])
        ) == pytest.approx(math.pi / 2)
