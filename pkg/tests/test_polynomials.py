"""Polynomial core: evaluation oracle, calculus, angle predicates, sampling.

The evaluation oracle is an independent term-by-term summation (no Horner), so
agreement is a real cross-check rather than the same code run twice.
"""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partwave.errors import PerturbationFailed, SingularPointError, UsageError
from partwave.polynomials import (
    Polynomial,
    angle_to_zero_set,
    angles_to_zero_set_many,
    critical_angle_polynomial,
    curve_critical_angle_polynomial,
    monomial_exponents,
    perturb_nonsingular,
    poly_space_dim,
    random_polynomial,
    sample_zero_set,
    tangency_polynomial,
    unit_vector,
    univariate_real_roots,
)


def naive_eval(p: Polynomial, x: np.ndarray) -> float:
    """Independent oracle: plain sum of c * prod(x_i ** e_i)."""
    total = 0.0
    for e, c in p.coeffs.items():
        term = c
        for xi, ei in zip(x, e):
            term *= xi**ei
        total += term
    return total


def sphere(radius2: float = 1.0) -> Polynomial:
    return Polynomial(
        3, {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0, (0, 0, 0): -radius2}
    )


class TestEvaluation:
    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(11)
        for num_vars in (1, 2, 3):
            for deg in (0, 1, 3, 6):
                p = random_polynomial(rng, num_vars, deg)
                pts = rng.uniform(-2, 2, size=(50, num_vars))
                got = p.eval_many(pts)
                want = np.array([naive_eval(p, x) for x in pts])
                scale = np.maximum(np.abs(want), 1.0)
                assert np.all(np.abs(got - want) <= 1e-12 * scale)

    def test_single_point_and_call(self):
        p = sphere()
        assert p(np.array([1.0, 0.0, 0.0])) == pytest.approx(0.0, abs=1e-15)
        assert p([0.0, 0.0, 0.0]) == pytest.approx(-1.0)

    def test_tensor_grid_matches_pointwise(self):
        rng = np.random.default_rng(7)
        p = random_polynomial(rng, 3, 4)
        axes = [np.linspace(-1, 1, 5), np.linspace(0, 2, 4), np.linspace(-2, 0, 3)]
        grid = p.eval_tensor_grid(axes)
        for i, x in enumerate(axes[0]):
            for j, y in enumerate(axes[1]):
                for k, z in enumerate(axes[2]):
                    want = naive_eval(p, np.array([x, y, z]))
                    assert grid[i, j, k] == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_zero_polynomial(self):
        z = Polynomial.zero(2)
        assert z.is_zero and z.degree == -1
        assert np.all(z.eval_many(np.zeros((4, 2))) == 0.0)

    def test_dimension_mismatch_raises(self):
        with pytest.raises(UsageError):
            sphere().eval_many(np.zeros((3, 2)))


class TestArithmetic:
    def test_degree_exact_after_cancellation(self):
        x = Polynomial.variable(0, 2)
        p = x * x + x
        q = p - (x * x)
        assert q.degree == 1

    def test_mul_degree_additive(self):
        rng = np.random.default_rng(3)
        p = random_polynomial(rng, 2, 3)
        q = random_polynomial(rng, 2, 4)
        assert (p * q).degree == 7

    def test_mul_degree_drop_warns(self):
        # Over exact reals leading forms cannot cancel, but in float64 the
        # leading coefficient product can underflow to zero; the degree
        # bookkeeping must notice and warn rather than silently drop.
        a = Polynomial(1, {(1,): 1e-200})
        b = Polynomial(1, {(1,): 1e-200, (0,): 1.0})
        with pytest.warns(RuntimeWarning):
            c = a * b
        assert c.degree == 1

    @given(
        st.integers(min_value=0, max_value=4),
        st.integers(min_value=0, max_value=4),
        st.integers(min_value=0, max_value=2**31 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_product_identity_property(self, d1, d2, seed):
        rng = np.random.default_rng(seed)
        p = random_polynomial(rng, 2, d1)
        q = random_polynomial(rng, 2, d2)
        pts = rng.uniform(-1.5, 1.5, size=(20, 2))
        lhs = (p * q).eval_many(pts)
        rhs = p.eval_many(pts) * q.eval_many(pts)
        scale = np.maximum(np.abs(rhs), 1.0)
        assert np.all(np.abs(lhs - rhs) <= 1e-10 * scale)


class TestCalculus:
    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(23)
        h = 1e-4
        for num_vars in (2, 3):
            p = random_polynomial(rng, num_vars, 5)
            pts = rng.uniform(-1, 1, size=(100, num_vars))
            g = p.gradient_at(pts)
            for i in range(num_vars):
                e = np.zeros(num_vars)
                e[i] = h
                fd = (p.eval_many(pts + e) - p.eval_many(pts - e)) / (2 * h)
                # third-derivative bound: |error| <= C h^2 with generous C
                assert np.all(np.abs(g[:, i] - fd) <= 200.0 * h**2)

    def test_sphere_gradient(self):
        g = sphere().gradient_at(np.array([0.3, -0.4, 0.5]))
        assert np.allclose(g, [0.6, -0.8, 1.0])

    def test_derivative_degree(self):
        rng = np.random.default_rng(5)
        p = random_polynomial(rng, 3, 6)
        assert p.derivative(1).degree == 5


class TestCompose:
    def test_restrict_to_line_matches_eval(self):
        rng = np.random.default_rng(17)
        p = random_polynomial(rng, 3, 4)
        base = rng.uniform(-1, 1, 3)
        direction = rng.uniform(-1, 1, 3)
        u = p.restrict_to_line(base, direction)
        ts = np.linspace(-2, 2, 9)
        want = p.eval_many(base[None, :] + ts[:, None] * direction[None, :])
        got = u.eval_many(ts[:, None])
        assert np.allclose(got, want, rtol=1e-10, atol=1e-10)

    def test_compose_affine_rotation(self):
        rng = np.random.default_rng(19)
        p = random_polynomial(rng, 3, 3)
        theta = 0.7
        R = np.array(
            [
                [np.cos(theta), -np.sin(theta), 0],
                [np.sin(theta), np.cos(theta), 0],
                [0, 0, 1],
            ]
        )
        b = np.array([0.2, -0.1, 0.3])
        q = p.compose_affine(R, b)
        pts = rng.uniform(-1, 1, size=(30, 3))
        assert np.allclose(
            q.eval_many(pts), p.eval_many(pts @ R.T + b), rtol=1e-10, atol=1e-10
        )

    def test_univariate_roots(self):
        # (t-1)(t+2)(t-0.5)
        p = Polynomial(1, {(3,): 1.0, (2,): 0.5, (1,): -2.5, (0,): 1.0})
        r = univariate_real_roots(p)
        assert np.allclose(r, [-2.0, 0.5, 1.0], atol=1e-9)


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(29)
        p = random_polynomial(rng, 3, 5)
        q = Polynomial.from_json(p.to_json())
        assert q == p

    def test_deterministic_bytes(self):
        # Same mathematical content in different insertion orders
        a = Polynomial(2, {(1, 0): 2.0, (0, 1): 3.0, (2, 0): -1.0})
        b = Polynomial(2, {(2, 0): -1.0, (0, 1): 3.0, (1, 0): 2.0})
        assert a.to_json() == b.to_json()
        d = json.loads(a.to_json())
        degs = [sum(t[0]) for t in d["terms"]]
        assert degs == sorted(degs)


class TestSpaceDims:
    def test_poly_space_dim(self):
        assert poly_space_dim(3, 2) == 10
        assert poly_space_dim(2, 8) == 45
        assert len(monomial_exponents(3, 4)) == poly_space_dim(3, 4)


class TestAnglePredicates:
    def test_sphere_equator_45_degrees(self):
        # At z=(1,0,0) the tangent plane is x=1; v=(1,1,0)/sqrt 2 makes pi/4.
        p = sphere()
        v = unit_vector([1.0, 1.0, 0.0])
        a = angle_to_zero_set(p, np.array([1.0, 0.0, 0.0]), v)
        assert a == pytest.approx(math.pi / 4, abs=1e-12)

    def test_plane_normal_direction(self):
        p = Polynomial(3, {(0, 0, 1): 1.0})  # z = 0 plane
        a = angle_to_zero_set(p, np.zeros(3), np.array([0.0, 0.0, 1.0]))
        assert a == pytest.approx(math.pi / 2, abs=1e-12)
        b = angle_to_zero_set(p, np.zeros(3), np.array([1.0, 0.0, 0.0]))
        assert b == pytest.approx(0.0, abs=1e-12)

    def test_singular_point_raises(self):
        cone = Polynomial(3, {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): -1.0})
        with pytest.raises(SingularPointError):
            angle_to_zero_set(cone, np.zeros(3), np.array([0.0, 0.0, 1.0]))

    def test_angle_invariant_under_rigid_motion(self):
        rng = np.random.default_rng(31)
        for trial in range(20):
            p = random_polynomial(rng, 3, 3)
            # random rotation via QR
            M = rng.normal(size=(3, 3))
            Q, R = np.linalg.qr(M)
            Q = Q @ np.diag(np.sign(np.diag(R)))
            if np.linalg.det(Q) < 0:
                Q[:, 0] = -Q[:, 0]
            b = rng.uniform(-0.5, 0.5, 3)
            v = unit_vector(rng.normal(size=3))
            # find a nonsingular point of Z(p)
            s = sample_zero_set(p, ([-1.5] * 3, [1.5] * 3), 0.25)
            pts = s.points[s.nonsingular]
            if not len(pts):
                continue
            z = pts[0]
            a1 = angle_to_zero_set(p, z, v)
            # q(y) = p(Q y + b) has zero set Q^T (Z(p) - b)
            q = p.compose_affine(Q, b)
            z2 = Q.T @ (z - b)
            v2 = Q.T @ v
            a2 = angle_to_zero_set(q, z2, v2)
            assert abs(a1 - a2) <= 1e-9

    def test_vectorized_matches_scalar(self):
        p = sphere()
        v = np.array([0.0, 0.0, 1.0])
        s = sample_zero_set(p, ([-1.2] * 3, [1.2] * 3), 0.3)
        angs, ok = angles_to_zero_set_many(p, s.points, v)
        for i in np.flatnonzero(ok)[:25]:
            assert angs[i] == pytest.approx(
                angle_to_zero_set(p, s.points[i], v), abs=1e-12
            )


class TestCriticalAnglePolynomial:
    def test_sphere_closed_form(self):
        # v = e3, a = pi/4: Q1 = (2 x3)^2 - (1/2)(4 x1^2 + 4 x2^2 + 4 x3^2)
        #                      = 4 x3^2 - 2 (x1^2 + x2^2 + x3^2)
        q1 = critical_angle_polynomial(sphere(), np.array([0.0, 0.0, 1.0]), math.pi / 4)
        want = Polynomial(3, {(0, 0, 2): 4.0, (2, 0, 0): -2.0, (0, 2, 0): -2.0})
        want = want + Polynomial(3, {(0, 0, 2): -2.0})
        assert q1.allclose(want, rtol=1e-12)

    def test_degree_bound(self):
        rng = np.random.default_rng(37)
        for deg in (2, 3, 5):
            q = random_polynomial(rng, 3, deg)
            q1 = critical_angle_polynomial(q, np.array([0.0, 0.0, 1.0]), 0.3)
            assert q1.degree <= 2 * (deg - 1)

    def test_vanishes_exactly_at_critical_latitude(self):
        # On the unit sphere, angle(e3) == pi/4 on the circles x3 = +-1/sqrt 2.
        p = sphere()
        v = np.array([0.0, 0.0, 1.0])
        a = math.pi / 4
        q1 = critical_angle_polynomial(p, v, a)
        t = 1.0 / math.sqrt(2.0)
        for phi in np.linspace(0, 2 * math.pi, 9):
            z = np.array([t * math.cos(phi), t * math.sin(phi), t])
            assert abs(q1(z)) <= 1e-12
            assert angle_to_zero_set(p, z, v) == pytest.approx(a, abs=1e-12)

    def test_sign_separates_steep_from_shallow(self):
        p = sphere()
        v = np.array([0.0, 0.0, 1.0])
        q1 = critical_angle_polynomial(p, v, math.pi / 4)
        north = np.array([0.0, 0.0, 1.0])     # angle pi/2 > pi/4
        equator = np.array([1.0, 0.0, 0.0])   # angle 0 < pi/4
        assert q1(north) > 0
        assert q1(equator) < 0


class TestTangencyPolynomial:
    def test_sphere_tangent_to_vertical_field(self):
        # grad(sphere) . e3 = 2 x3: tangency locus is the equator.
        tan = tangency_polynomial(sphere(), np.array([0.0, 0.0, 1.0]))
        assert tan.allclose(Polynomial(3, {(0, 0, 1): 2.0}))

    def test_degree_bound(self):
        rng = np.random.default_rng(41)
        q = random_polynomial(rng, 3, 5)
        assert tangency_polynomial(q, np.ones(3)).degree <= 4


class TestCurveCriticalAngle:
    def test_circle_in_plane(self):
        # Curve: unit circle in the plane x3 = 0 (sphere cap cut by plane).
        # Tangent at (cos t, sin t, 0) is horizontal: angle to e3 is 0
        # everywhere, i.e. cos(angle between tangent and e3) == 0.  Taking
        # a = pi/2 makes Q_a vanish identically on the curve.
        p1 = sphere()
        p2 = Polynomial(3, {(0, 0, 1): 1.0})
        v = np.array([0.0, 0.0, 1.0])
        qa = curve_critical_angle_polynomial(p1, p2, v, math.pi / 2)
        for t in np.linspace(0, 2 * math.pi, 7):
            z = np.array([math.cos(t), math.sin(t), 0.0])
            assert abs(qa(z)) <= 1e-12

    def test_helix_like_curve_angle(self):
        # Curve Z(x3 - x1, x2): the line x2=0, x3=x1 with tangent (1,0,1)/sqrt2,
        # making angle pi/4 with e3; Q_{pi/4} vanishes on it.
        p1 = Polynomial(3, {(0, 0, 1): 1.0, (1, 0, 0): -1.0})
        p2 = Polynomial(3, {(0, 1, 0): 1.0})
        v = np.array([0.0, 0.0, 1.0])
        qa = curve_critical_angle_polynomial(p1, p2, v, math.pi / 4)
        for t in (-1.0, 0.0, 2.0):
            assert abs(qa(np.array([t, 0.0, t]))) <= 1e-12
        qbad = curve_critical_angle_polynomial(p1, p2, v, math.pi / 3)
        assert abs(qbad(np.array([1.0, 0.0, 1.0]))) > 1e-3

    def test_degree_bound(self):
        rng = np.random.default_rng(43)
        q1 = random_polynomial(rng, 3, 3)
        q2 = random_polynomial(rng, 3, 2)
        qa = curve_critical_angle_polynomial(q1, q2, np.array([0.0, 0.0, 1.0]), 0.5)
        assert qa.degree <= 2 * (3 + 2) - 4


class TestZeroSetSampling:
    def test_sphere_sample_lies_on_sphere(self):
        s = sample_zero_set(sphere(), ([-1.5] * 3, [1.5] * 3), 0.2)
        assert len(s) > 100
        r = np.linalg.norm(s.points, axis=1)
        assert np.all(np.abs(r - 1.0) <= 1e-7)
        assert np.all(s.nonsingular)

    def test_empty_when_zero_set_misses_box(self):
        s = sample_zero_set(sphere(), ([2.0] * 3, [3.0] * 3), 0.25)
        assert len(s) == 0

    def test_cone_sample_flags_vertex_region_or_avoids_it(self):
        cone = Polynomial(3, {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): -1.0})
        s = sample_zero_set(cone, ([-1.0] * 3, [1.0] * 3), 0.1)
        assert len(s) > 50
        near_vertex = np.linalg.norm(s.points, axis=1) < 1e-6
        assert np.all(~s.nonsingular[near_vertex])


class TestPerturbation:
    def test_singular_surface_becomes_regular(self):
        cone = Polynomial(3, {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): -1.0})
        q = perturb_nonsingular(cone, seed=2024, magnitude=1e-6)
        s = sample_zero_set(q, ([-1.5] * 3, [1.5] * 3), 0.1)
        assert len(s) > 0
        assert np.all(s.nonsingular)
        # perturbation stayed tiny
        diff = cone - q
        assert diff.degree <= 0
        assert diff.coeff_scale() <= 1e-6

    def test_regular_surface_unchanged_at_zero_magnitude(self):
        q = perturb_nonsingular(sphere(), seed=1, magnitude=0.0)
        assert q == sphere()


class TestUnitVector:
    def test_normalizes(self):
        u = unit_vector([3.0, 4.0, 0.0])
        assert np.allclose(u, [0.6, 0.8, 0.0])
        assert abs(np.linalg.norm(u) - 1.0) <= 1e-12

    def test_zero_raises(self):
        with pytest.raises(UsageError):
            unit_vector([0.0, 0.0, 0.0])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3))
    @settings(max_examples=80, deadline=None)
    def test_norm_within_tolerance(self, v):
        arr = np.asarray(v)
        if np.linalg.norm(arr) < 1e-12:
            return
        u = unit_vector(arr)
        assert abs(float(np.linalg.norm(u)) - 1.0) <= 1e-12
