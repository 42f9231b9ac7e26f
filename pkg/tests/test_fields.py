import math

import numpy as np
import pytest

from partwave.errors import UsageError
from partwave.fields import (
    ComplexField,
    FrequencyGrid,
    bilinear_field,
    broad_part,
    density_l2,
    density_linf,
    direct_eval,
    extension_field,
    mask_to_disk,
    random_smooth_density,
    required_spacing,
)
from partwave.surfaces import Cap, build_cap_grid, paraboloid, perturbed_paraboloid

SURF = paraboloid()
R0 = 16.0
GRID = FrequencyGrid.for_ball(R0)


def naive_sum(surface, grid, f, pts):
    """Independent oracle: plain python triple loop over the support."""
    out = np.zeros(len(pts), dtype=complex)
    J = surface.jacobian_grid(grid.omega1, grid.omega2)
    h = surface.h_grid(grid.omega1, grid.omega2)
    for a in range(grid.n1):
        for b in range(grid.n2):
            if f[a, b] == 0:
                continue
            w1 = grid.omega1[a]
            w2 = grid.omega2[b]
            for m, (x1, x2, x3) in enumerate(pts):
                ph = 2 * math.pi * (w1 * x1 + w2 * x2 + h[a, b] * x3)
                out[m] += f[a, b] * J[a, b] * complex(math.cos(ph), math.sin(ph))
    return out * grid.spacing ** 2


class TestFrequencyGrid:
    def test_for_ball_covers_disk(self):
        assert GRID.spacing == 1.0 / (4 * R0)
        assert GRID.omega1[0] <= -1.0 <= 1.0 <= GRID.omega1[-1]
        assert GRID.box == 4 * R0

    def test_strip_is_contiguous_subrange(self):
        g = FrequencyGrid.strip(R0, omega2_range=(-0.25, 0.25))
        assert g.spacing == GRID.spacing
        assert g.omega2[0] <= -0.25 and g.omega2[-1] >= 0.25
        assert g.n2 < GRID.n2
        with pytest.raises(UsageError):
            FrequencyGrid.strip(R0, omega1_range=(0.5, 0.5))

    def test_window_brackets_cap(self):
        s1, s2, sub = GRID.window((0.3, -0.2), 0.1)
        assert np.all(np.abs(sub.omega1 - 0.3) <= 0.1 + sub.spacing)
        assert np.all(np.abs(sub.omega2 + 0.2) <= 0.1 + sub.spacing)
        np.testing.assert_array_equal(GRID.k1[s1], sub.k1)

    def test_noncontiguous_axis_rejected(self):
        with pytest.raises(UsageError):
            FrequencyGrid(spacing=0.01, k1=np.array([0, 2, 4]), k2=np.array([0, 1]))

    def test_mask_to_disk_zeroes_corners(self):
        f = mask_to_disk(GRID, np.ones(GRID.shape))
        w1, w2 = GRID.mesh()
        assert f[(w1 ** 2 + w2 ** 2) > 1.0 + 1e-9].max() == 0.0
        assert f[GRID.n1 // 2, GRID.n2 // 2] == 1.0


class TestExtensionField:
    def test_value_at_origin_is_quadrature_area(self):
        f = mask_to_disk(GRID, np.ones(GRID.shape))
        fld = extension_field(SURF, GRID, f, R0, x3=[0.0])
        i0 = int(np.argmin(np.abs(fld.x1)))
        J = SURF.jacobian_grid(GRID.omega1, GRID.omega2)
        exact = np.sum(f * J) * GRID.spacing ** 2
        assert abs(fld.values[0, i0, i0] - exact) < 1e-10 * exact
        # Riemann sum approximates the graph area integral
        area = (math.pi / 6) * (5 * math.sqrt(5) - 1)
        assert abs(exact - area) / area < 0.01

    def test_matches_naive_triple_loop(self):
        g = FrequencyGrid.for_ball(4.0)
        f = np.zeros(g.shape, dtype=complex)
        rng = np.random.default_rng(5)
        idx = rng.integers(0, g.n1, (40, 2))
        f[idx[:, 0], idx[:, 1]] = rng.standard_normal(40) + 1j * rng.standard_normal(40)
        f = mask_to_disk(g, f)
        pts = rng.uniform(-3, 3, (6, 3))
        ref = naive_sum(SURF, g, f, pts)
        got = direct_eval(SURF, g, f, pts)
        assert np.max(np.abs(got - ref)) < 1e-12 * max(np.max(np.abs(ref)), 1e-30)

    def test_fft_agrees_with_direct_sum(self):
        f = random_smooth_density(GRID, seed=7)
        fld = extension_field(SURF, GRID, f, R0, x3=[-3.0, 0.0, 5.0])
        rng = np.random.default_rng(2)
        ii = rng.integers(0, len(fld.x1), 20)
        jj = rng.integers(0, len(fld.x2), 20)
        ss = rng.integers(0, len(fld.x3), 20)
        pts = np.column_stack([fld.x1[ii], fld.x2[jj], fld.x3[ss]])
        ref = direct_eval(SURF, GRID, f, pts)
        got = fld.values[ss, ii, jj]
        assert np.max(np.abs(got - ref)) <= 1e-6 * np.max(np.abs(ref))

    def test_linearity_to_roundoff(self):
        fa = random_smooth_density(GRID, seed=1)
        fb = random_smooth_density(GRID, seed=2)
        a = extension_field(SURF, GRID, fa, R0, [0.0]).values
        b = extension_field(SURF, GRID, fb, R0, [0.0]).values
        c = extension_field(SURF, GRID, fa + fb, R0, [0.0]).values
        assert np.max(np.abs(a + b - c)) <= 1e-12 * np.max(np.abs(c))

    def test_resolution_contract_names_required_spacing(self):
        coarse = FrequencyGrid.for_ball(R0, spacing=0.05)
        f = mask_to_disk(coarse, np.ones(coarse.shape))
        with pytest.raises(UsageError) as err:
            extension_field(SURF, coarse, f, R0, [0.0])
        need = required_spacing(SURF, R0)
        assert f"{need:.3g}" in str(err.value)

    def test_slices_outside_ball_rejected_unless_allowed(self):
        f = random_smooth_density(GRID, seed=3)
        with pytest.raises(UsageError):
            extension_field(SURF, GRID, f, R0, [2 * R0])
        fld = extension_field(SURF, GRID, f, R0, [2 * R0], allow_outside_ball=True)
        assert fld.values.shape[0] == 1

    def test_dx_max_controls_output_spacing(self):
        f = random_smooth_density(GRID, seed=3)
        fine = extension_field(SURF, GRID, f, R0, [0.0], dx_max=0.5)
        d1 = fine.x1[1] - fine.x1[0]
        assert d1 <= 0.5 + 1e-12

    def test_perturbed_surface_close_to_paraboloid(self):
        # h differs by ~1e-6 |omega|^2, so fields at |x3| = 1 differ by
        # a few times 2 pi 1e-6 relative
        s2 = perturbed_paraboloid(seed=4)
        f = random_smooth_density(GRID, seed=4)
        a = extension_field(SURF, GRID, f, R0, [1.0]).values
        b = extension_field(s2, GRID, f, R0, [1.0]).values
        assert np.max(np.abs(a - b)) < 1e-4 * np.max(np.abs(a))

    def test_stationary_phase_direction_dominates(self):
        # cap bump at omega0: the field concentrates along (-grad h, 1)
        omega0 = np.array([0.5, 0.0])
        w1, w2 = GRID.mesh()
        rad2 = (w1 - omega0[0]) ** 2 + (w2 - omega0[1]) ** 2
        f = mask_to_disk(GRID, np.where(rad2 < 0.1 ** 2, 1.0, 0.0))
        ray = np.array([-1.0, 0.0, 1.0])  # (-grad h(omega0), 1) = (-1, 0, 1)
        t = (R0 / 2) / np.linalg.norm(ray)
        on_pt = (t * ray)[None, :]
        off_pt = np.array([[t * 1.0, 0.0, t * 1.0]])  # reflected, same length
        on = abs(direct_eval(SURF, GRID, f, on_pt)[0])
        off = abs(direct_eval(SURF, GRID, f, off_pt)[0])
        assert on > 10 * off


class TestComplexFieldNorms:
    def _unit_field(self):
        x = np.linspace(-R0, R0, 9)
        vals = np.ones((9, 9, 9), dtype=complex)
        return ComplexField(x1=x, x2=x, x3=x, values=vals, R=R0)

    def test_ball_mask_smaller_than_box(self):
        f = self._unit_field()
        assert f.lp_norm(2.0, region="ball") < f.lp_norm(2.0, region="box")

    def test_linf_is_max(self):
        f = self._unit_field()
        f.values[4, 4, 4] = 3.0
        assert f.max_abs(region="box") == 3.0

    def test_callable_region(self):
        f = self._unit_field()
        full = f.lp_norm(2.0, region="box")
        half = f.lp_norm(2.0, region=lambda x1, x2, x3: x2 >= 0)
        assert 0 < half < full

    def test_shape_mismatch_rejected(self):
        x = np.linspace(-1, 1, 4)
        with pytest.raises(UsageError):
            ComplexField(x1=x, x2=x, x3=x, values=np.zeros((4, 4, 5)), R=1.0)

    def test_uneven_slices_rejected_for_norms(self):
        x = np.linspace(-1, 1, 4)
        f = ComplexField(x1=x, x2=x, x3=np.array([0.0, 1.0, 3.0]),
                         values=np.zeros((3, 4, 4)), R=1.0)
        with pytest.raises(UsageError):
            f.lp_norm(2.0, region="box")

    def test_grid_mismatch_rejected(self):
        f = self._unit_field()
        g = ComplexField(f.x1, f.x2, f.x3 + 0.5, f.values.copy(), f.R)
        with pytest.raises(UsageError):
            f.require_same_grid(g)


class TestDensityNorms:
    def test_l2_weighting_uses_jacobian(self):
        f = mask_to_disk(GRID, np.ones(GRID.shape))
        l2 = density_l2(SURF, GRID, f)
        J = SURF.jacobian_grid(GRID.omega1, GRID.omega2)
        assert np.isclose(l2, math.sqrt(float(np.sum(np.abs(f) ** 2 * J)) * GRID.spacing ** 2))

    def test_linf(self):
        f = np.zeros(GRID.shape)
        f[3, 5] = -2.5
        assert density_linf(f) == 2.5


def _split_by_tau(field_density, grid, K=4):
    caps = build_cap_grid(R0, K).tau
    idx = caps.cell_index(grid.points()).reshape(grid.shape)
    pieces = []
    for pos, cap in enumerate(caps.caps):
        part = np.where(idx == pos, field_density, 0.0)
        if np.any(part != 0):
            pieces.append((cap, part))
    return pieces


class TestBroadPart:
    def _fields(self, seed=9):
        f = random_smooth_density(GRID, seed=seed)
        x3 = [0.0, 4.0]
        full = extension_field(SURF, GRID, f, R0, x3)
        taus = [extension_field(SURF, GRID, part, R0, x3)
                for _, part in _split_by_tau(f, GRID)]
        return full, taus

    def test_single_cap_edge_cases(self):
        full, _ = self._fields()
        lo = broad_part(full, [full], alpha=0.5)
        assert np.all(lo.broad.values == 0.0)
        hi = broad_part(full, [full], alpha=1.0)
        assert np.array_equal(hi.broad.values, np.abs(full.values))
        assert np.all(hi.narrow.values == 0.0)

    def test_max_identity_exact(self):
        full, taus = self._fields()
        for alpha in (0.1, 0.2, 0.4):
            d = broad_part(full, taus, alpha=alpha)
            assert d.max_identity_holds()
            # split is a partition of |Ef|
            assert np.array_equal(d.broad.values + d.narrow.values,
                                  np.abs(full.values))

    def test_check_sum_catches_bad_partition(self):
        full, taus = self._fields()
        broad_part(full, taus, alpha=0.2, check_sum=full)  # healthy
        taus[0].values = taus[0].values * 1.5
        with pytest.raises(UsageError):
            broad_part(full, taus, alpha=0.2, check_sum=full)

    def test_huge_alpha_makes_everything_broad(self):
        full, taus = self._fields()
        d = broad_part(full, taus, alpha=1e9)
        assert np.array_equal(d.broad.values, np.abs(full.values))

    def test_tau_split_preserves_l2_exactly(self):
        # cap cells partition the disk, so the split loses nothing
        f = random_smooth_density(GRID, seed=12)
        pieces = _split_by_tau(f, GRID)
        total = sum(density_l2(SURF, GRID, part) ** 2 for _, part in pieces)
        assert np.isclose(total, density_l2(SURF, GRID, f) ** 2, rtol=1e-12)

    def test_witness_points_at_dominating_cap(self):
        full, taus = self._fields()
        d = broad_part(full, taus, alpha=0.2)
        stack = np.stack([np.abs(t.values) for t in taus])
        assert np.array_equal(d.witness, np.argmax(stack, axis=0))


class TestBilinearField:
    def _cap(self, c1, c2):
        return Cap(center=(c1, c2), halfwidth=0.125, index=(0, 0))

    def _const_field(self, value):
        x = np.linspace(-2, 2, 5)
        vals = np.full((1, 5, 5), value, dtype=complex)
        return ComplexField(x1=x, x2=x, x3=np.array([0.0]), values=vals, R=2.0)

    def test_single_cap_gives_zero(self):
        out, used = bilinear_field([(self._cap(0, 0), self._const_field(2.0))], K=8)
        assert used == 0
        assert np.all(out.values == 0.0)

    def test_touching_pairs_give_zero(self):
        # edge neighbors and corner neighbors both count as adjacent
        entries = [(self._cap(0, 0), self._const_field(2.0)),
                   (self._cap(0.25, 0), self._const_field(3.0)),
                   (self._cap(0.25, 0.25), self._const_field(5.0))]
        out, used = bilinear_field(entries, K=8)
        assert used == 0
        assert np.all(out.values == 0.0)

    def test_separated_equal_caps_reproduce_constant(self):
        entries = [(self._cap(-0.5, 0), self._const_field(4.0)),
                   (self._cap(0.5, 0), self._const_field(4.0))]
        out, used = bilinear_field(entries, K=8)
        assert used == 1
        assert np.allclose(out.values, 4.0)


class TestRandomDensity:
    def test_deterministic_in_seed(self):
        a = random_smooth_density(GRID, seed=42)
        b = random_smooth_density(GRID, seed=42)
        assert np.array_equal(a, b)
        c = random_smooth_density(GRID, seed=43)
        assert not np.array_equal(a, c)

    def test_supported_on_disk(self):
        f = random_smooth_density(GRID, seed=1)
        w1, w2 = GRID.mesh()
        assert np.all(f[(w1 ** 2 + w2 ** 2) > 1.0 + 1e-9] == 0.0)
