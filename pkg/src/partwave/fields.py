"""Extension fields of densities on graph surfaces.

Conventions, fixed once for the whole package:

    Ef(x) = sum_omega f(omega) J(omega) exp(2 pi i (omega . x' + h(omega) x3)) s^2

where x = (x', x3), s is the frequency grid spacing and J = (1 +
|grad h|^2)^(1/2) is the surface area weight, so the sum is a Riemann
quadrature of the integral over the surface against area measure.  The
2 pi inside the exponential makes every x'-slice a plain discrete
Fourier series: slice Parseval holds with constant 1, x-space is
periodic with box 1/s, and Ef(0) equals the measured surface area when
f is identically 1.

Fields are evaluated slice by slice in x3.  Each slice is one zero
padded (or folded) FFT, exact at its sample points; folding k modulo
the transform length is exact because the sample lattice cannot
distinguish k from k + N.  A separate quadratic-cost direct sum is
kept as the cross-check oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.fft import next_fast_len

from .errors import UsageError
from .surfaces import Cap, SurfaceSpec

BALL_EDGE_TOL = 1e-9


def _contiguous(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=int)
    if len(k) == 0:
        raise UsageError("empty frequency axis")
    if len(k) > 1 and not np.all(np.diff(k) == 1):
        raise UsageError("frequency axis must be a contiguous integer range")
    return k


@dataclass(frozen=True)
class FrequencyGrid:
    """Rectangular lattice omega = (k1 s, k2 s) with contiguous integer ranges."""

    spacing: float
    k1: np.ndarray
    k2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "k1", _contiguous(self.k1))
        object.__setattr__(self, "k2", _contiguous(self.k2))
        if not (0 < self.spacing <= 0.25):
            raise UsageError("frequency spacing must lie in (0, 1/4]")

    @staticmethod
    def for_ball(R: float, spacing: Optional[float] = None,
                 margin: float = 0.0) -> "FrequencyGrid":
        """Symmetric grid covering the unit disk, spacing 1/(4R) by default.

        margin > 0 extends the axes to |omega_i| <= 1 + margin at the
        same spacing.  Densities stay supported in the disk; the extra
        rows exist so smooth frequency cutoffs centred near the disk
        edge fit on the grid without truncation.
        """
        if R < 4:
            raise UsageError("need R >= 4")
        if margin < 0:
            raise UsageError("margin must be nonnegative")
        s = 1.0 / (4.0 * R) if spacing is None else float(spacing)
        m = math.ceil((1.0 + margin) / s)
        k = np.arange(-m, m + 1)
        return FrequencyGrid(spacing=s, k1=k, k2=k)

    @staticmethod
    def strip(R: float, omega1_range: tuple[float, float] = (-1.0, 1.0),
              omega2_range: tuple[float, float] = (-1.0, 1.0),
              spacing: Optional[float] = None) -> "FrequencyGrid":
        """Grid restricted to a rectangle; same spacing rule as for_ball."""
        s = 1.0 / (4.0 * R) if spacing is None else float(spacing)
        lo1, hi1 = omega1_range
        lo2, hi2 = omega2_range
        if not (lo1 < hi1 and lo2 < hi2):
            raise UsageError("empty frequency window")
        k1 = np.arange(math.floor(lo1 / s), math.ceil(hi1 / s) + 1)
        k2 = np.arange(math.floor(lo2 / s), math.ceil(hi2 / s) + 1)
        return FrequencyGrid(spacing=s, k1=k1, k2=k2)

    @property
    def n1(self) -> int:
        return len(self.k1)

    @property
    def n2(self) -> int:
        return len(self.k2)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def box(self) -> float:
        """Spatial period of every field built on this grid."""
        return 1.0 / self.spacing

    @property
    def omega1(self) -> np.ndarray:
        return self.k1 * self.spacing

    @property
    def omega2(self) -> np.ndarray:
        return self.k2 * self.spacing

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.omega1, self.omega2, indexing="ij")

    def disk_mask(self) -> np.ndarray:
        w1, w2 = self.mesh()
        return (w1 * w1 + w2 * w2) <= 1.0 + BALL_EDGE_TOL

    def points(self) -> np.ndarray:
        w1, w2 = self.mesh()
        return np.column_stack([w1.ravel(), w2.ravel()])

    def window(self, center: tuple[float, float], halfwidth: float
               ) -> tuple[slice, slice, "FrequencyGrid"]:
        """Index slices of the sub-rectangle |omega_i - c_i| <= halfwidth."""
        s = self.spacing
        out = []
        for c, k in ((center[0], self.k1), (center[1], self.k2)):
            lo = max(int(math.ceil((c - halfwidth) / s)), int(k[0]))
            hi = min(int(math.floor((c + halfwidth) / s)), int(k[-1]))
            if hi < lo:
                raise UsageError("cap window misses the frequency grid")
            out.append(slice(lo - int(k[0]), hi - int(k[0]) + 1))
        sub = FrequencyGrid(spacing=s, k1=self.k1[out[0]], k2=self.k2[out[1]])
        return out[0], out[1], sub

    def same_grid(self, other: "FrequencyGrid") -> bool:
        return (self.spacing == other.spacing and self.n1 == other.n1
                and self.n2 == other.n2 and self.k1[0] == other.k1[0]
                and self.k2[0] == other.k2[0])

    def embed(self, source: "FrequencyGrid", values: np.ndarray) -> np.ndarray:
        """Scatter an array living on `source` into this (larger) grid."""
        if source.spacing != self.spacing:
            raise UsageError("embed requires identical grid spacing")
        o1 = int(source.k1[0]) - int(self.k1[0])
        o2 = int(source.k2[0]) - int(self.k2[0])
        if o1 < 0 or o2 < 0 or (o1 + source.n1 > self.n1) or (o2 + source.n2 > self.n2):
            raise UsageError("source grid does not fit inside target grid")
        values = np.asarray(values)
        if values.shape != source.shape:
            raise UsageError("values shape does not match source grid")
        out = np.zeros(self.shape, dtype=values.dtype)
        out[o1:o1 + source.n1, o2:o2 + source.n2] = values
        return out


def mask_to_disk(grid: FrequencyGrid, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    if f.shape != grid.shape:
        raise UsageError(f"density shape {f.shape} does not match grid {grid.shape}")
    return np.where(grid.disk_mask(), f, 0.0)


def random_smooth_density(grid: FrequencyGrid, seed: int, band: int = 8,
                          scale: float = 1.0) -> np.ndarray:
    """Random smooth O(1) density: a low order random trig polynomial.

    Coefficients are complex Gaussians damped by 1/(1+|m|^2) so sample
    functions are smooth at the cap scale.  Deterministic in seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xF1E1D)))
    m = np.arange(-band, band + 1)
    cr = rng.standard_normal((len(m), len(m)))
    ci = rng.standard_normal((len(m), len(m)))
    damp = 1.0 / (1.0 + m[:, None] ** 2 + m[None, :] ** 2)
    coef = (cr + 1j * ci) * damp
    w1 = grid.omega1
    w2 = grid.omega2
    e1 = np.exp(1j * math.pi * np.outer(w1, m))   # period 2 in omega
    e2 = np.exp(1j * math.pi * np.outer(w2, m))
    f = e1 @ coef @ e2.T
    return mask_to_disk(grid, scale * f)


def density_l2(surface: SurfaceSpec, grid: FrequencyGrid, f: np.ndarray) -> float:
    """L2 norm of f on the surface: (sum |f|^2 J s^2)^(1/2)."""
    J = surface.jacobian_grid(grid.omega1, grid.omega2)
    return float(np.sqrt(np.sum(np.abs(f) ** 2 * J) * grid.spacing ** 2))


def density_linf(f: np.ndarray) -> float:
    return float(np.max(np.abs(f))) if np.asarray(f).size else 0.0


def _fold_axis_length(n: int, N: int) -> int:
    return int(math.ceil(n / N)) * N


def _slice_fft(vals: np.ndarray, k1: np.ndarray, k2: np.ndarray,
               N1: int, N2: int) -> np.ndarray:
    """Exact evaluation of sum_k vals e^{2 pi i k.(l - N//2)/N} on the l-lattice.

    Contiguous k ranges are folded modulo the transform length before a
    single inverse FFT; folding is exact at the sample points.
    """
    t1 = np.exp(-2j * np.pi * (k1 % N1) * (N1 // 2) / N1)
    t2 = np.exp(-2j * np.pi * (k2 % N2) * (N2 // 2) / N2)
    A = vals * t1[:, None] * t2[None, :]
    off1 = int(k1[0]) % N1
    off2 = int(k2[0]) % N2
    L1 = _fold_axis_length(off1 + len(k1), N1)
    L2 = _fold_axis_length(off2 + len(k2), N2)
    buf = np.zeros((L1, L2), dtype=complex)
    buf[off1:off1 + len(k1), off2:off2 + len(k2)] = A
    folded = buf.reshape(L1 // N1, N1, L2 // N2, N2).sum(axis=(0, 2))
    return np.fft.ifft2(folded) * (N1 * N2)


@dataclass
class ComplexField:
    """Field samples on a separable x-grid: values[i3, i1, i2]."""

    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    values: np.ndarray
    R: float

    def __post_init__(self):
        self.x1 = np.asarray(self.x1, dtype=float)
        self.x2 = np.asarray(self.x2, dtype=float)
        self.x3 = np.asarray(self.x3, dtype=float)
        self.values = np.asarray(self.values)
        expect = (len(self.x3), len(self.x1), len(self.x2))
        if self.values.shape != expect:
            raise UsageError(f"field values shape {self.values.shape}, grid wants {expect}")

    def spacings(self) -> tuple[float, float, float]:
        d1 = float(self.x1[1] - self.x1[0]) if len(self.x1) > 1 else 1.0
        d2 = float(self.x2[1] - self.x2[0]) if len(self.x2) > 1 else 1.0
        if len(self.x3) > 1:
            steps = np.diff(self.x3)
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
                raise UsageError("x3 slices must be evenly spaced for volume norms")
            d3 = float(steps[0])
        else:
            d3 = 1.0  # single slice: norms are per unit slab thickness
        return d1, d2, d3

    def ball_mask(self) -> np.ndarray:
        r2 = (self.x3[:, None, None] ** 2 + self.x1[None, :, None] ** 2
              + self.x2[None, None, :] ** 2)
        return r2 <= self.R * self.R * (1.0 + BALL_EDGE_TOL)

    def _region_mask(self, region) -> Optional[np.ndarray]:
        if region == "box" or region is None:
            return None
        if region == "ball":
            return self.ball_mask()
        if callable(region):
            x3g = self.x3[:, None, None]
            x1g = self.x1[None, :, None]
            x2g = self.x2[None, None, :]
            return np.broadcast_to(region(x1g, x2g, x3g), self.values.shape)
        raise UsageError(f"unknown norm region {region!r}")

    def lp_norm(self, p: float, region="ball") -> float:
        """Riemann Lp norm over the region; p = inf gives the sup of |values|."""
        mask = self._region_mask(region)
        a = np.abs(self.values)
        if mask is not None:
            a = np.where(mask, a, 0.0)
        if math.isinf(p):
            return float(a.max()) if a.size else 0.0
        d1, d2, d3 = self.spacings()
        total = float(np.sum(a ** p, dtype=np.float64)) * d1 * d2 * d3
        return total ** (1.0 / p)

    def max_abs(self, region="ball") -> float:
        return self.lp_norm(math.inf, region)

    def same_grid(self, other: "ComplexField") -> bool:
        return (self.values.shape == other.values.shape
                and np.array_equal(self.x1, other.x1)
                and np.array_equal(self.x2, other.x2)
                and np.array_equal(self.x3, other.x3))

    def require_same_grid(self, other: "ComplexField"):
        if not self.same_grid(other):
            raise UsageError("fields live on different x-grids; rebuild them "
                             "with identical slice lists and dx settings")

    def combine(self, other: "ComplexField", op: Callable) -> "ComplexField":
        self.require_same_grid(other)
        return ComplexField(self.x1, self.x2, self.x3, op(self.values, other.values), self.R)


def _grad_sup(surface: SurfaceSpec, n: int = 64) -> float:
    ax = np.linspace(-1.0, 1.0, n)
    gx, gy = surface.grad_grid(ax, ax)
    w1, w2 = np.meshgrid(ax, ax, indexing="ij")
    inside = (w1 * w1 + w2 * w2) <= 1.0
    g = np.sqrt(gx * gx + gy * gy)
    return float(g[inside].max())


def required_spacing(surface: SurfaceSpec, R: float) -> float:
    """Coarsest spacing for which h moves less than pi/4 / R per cell."""
    gmax = max(_grad_sup(surface), 1e-9)
    return math.pi / (4.0 * R * gmax)


def extension_field(surface: SurfaceSpec, grid: FrequencyGrid, f: np.ndarray,
                    R: float, x3: Sequence[float], dx_max: float = 1.0,
                    x_extent: Optional[float] = None,
                    allow_outside_ball: bool = False) -> ComplexField:
    """Evaluate Ef on the separable grid (x' lattice) x (given x3 slices).

    dx_max caps the output x' spacing (the FFT length is padded to meet
    it); x_extent crops the stored window to |x_i| <= x_extent, default
    R.  Slices must satisfy |x3| <= R unless allow_outside_ball, which
    the large-box bilinear sweeps need.
    """
    f = np.asarray(f, dtype=complex)
    if f.shape != grid.shape:
        raise UsageError(f"density shape {f.shape} does not match grid {grid.shape}")
    need = required_spacing(surface, R)
    if grid.spacing > need * (1.0 + 1e-12):
        raise UsageError(
            f"frequency spacing {grid.spacing:.3g} too coarse for R={R:g}: "
            f"the phase contract needs spacing <= {need:.3g}")
    x3 = np.asarray(list(x3), dtype=float)
    if len(x3) == 0:
        raise UsageError("need at least one x3 slice")
    if not allow_outside_ball and float(np.max(np.abs(x3))) > R * (1.0 + 1e-12):
        raise UsageError("x3 slice outside the ball; pass allow_outside_ball=True "
                         "if the large box is intended")
    if dx_max <= 0:
        raise UsageError("dx_max must be positive")

    box = grid.box
    N1 = next_fast_len(max(int(math.ceil(box / dx_max)), 8))
    N2 = N1
    dx = box / N1
    ax = (np.arange(N1) - N1 // 2) * dx
    extent = R if x_extent is None else float(x_extent)
    keep = np.abs(ax) <= extent + dx * 0.5 + BALL_EDGE_TOL
    x1 = ax[keep]
    x2 = ax[keep]

    J = surface.jacobian_grid(grid.omega1, grid.omega2)
    h = surface.h_grid(grid.omega1, grid.omega2)
    base = f * J * grid.spacing ** 2
    out = np.empty((len(x3), len(x1), len(x2)), dtype=complex)
    nz1, nz2 = np.nonzero(base)
    if 4 * len(nz1) < base.size:
        # sparse support: fold only the nonzero entries per slice
        v0 = base[nz1, nz2]
        hh = h[nz1, nz2]
        kk1 = grid.k1[nz1].astype(int) % N1
        kk2 = grid.k2[nz2].astype(int) % N2
        v0 = v0 * np.exp(-2j * np.pi * (kk1 * (N1 // 2) / N1 + kk2 * (N2 // 2) / N2))
        comp = kk1 * N2 + kk2
        for i, t in enumerate(x3):
            w = v0 * np.exp(2j * np.pi * hh * t)
            folded = (
                np.bincount(comp, weights=w.real, minlength=N1 * N2)
                + 1j * np.bincount(comp, weights=w.imag, minlength=N1 * N2)
            ).reshape(N1, N2)
            sl = np.fft.ifft2(folded) * (N1 * N2)
            out[i] = sl[np.ix_(keep, keep)]
    else:
        for i, t in enumerate(x3):
            sl = _slice_fft(base * np.exp(2j * np.pi * h * t), grid.k1, grid.k2, N1, N2)
            out[i] = sl[np.ix_(keep, keep)]
    return ComplexField(x1=x1, x2=x2, x3=x3, values=out, R=float(R))


def nudft_sum(amp: np.ndarray, w1: np.ndarray, w2: np.ndarray, h: np.ndarray,
              points: np.ndarray, budget: int = 20_000_000) -> np.ndarray:
    """sum_k amp_k exp(2 pi i (w1 x1 + w2 x2 + h x3)) at each point.

    Chunks both the support and the point list so the phase matrix never
    exceeds the element budget.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise UsageError("points must be (m, 3)")
    out = np.zeros(len(pts), dtype=complex)
    if len(amp) == 0:
        return out
    pstep = max(1, min(len(pts), budget // max(len(amp), 1)))
    if pstep >= 1 and len(amp) * pstep <= budget:
        sstep = len(amp)
    else:
        pstep = min(len(pts), 64)
        sstep = max(1, budget // pstep)
    for plo in range(0, len(pts), pstep):
        block = pts[plo:plo + pstep]
        acc = np.zeros(len(block), dtype=complex)
        for slo in range(0, len(amp), sstep):
            shi = slo + sstep
            phase = (np.outer(w1[slo:shi], block[:, 0])
                     + np.outer(w2[slo:shi], block[:, 1])
                     + np.outer(h[slo:shi], block[:, 2]))
            acc += amp[slo:shi] @ np.exp(2j * np.pi * phase)
        out[plo:plo + pstep] = acc
    return out


def direct_eval(surface: SurfaceSpec, grid: FrequencyGrid, f: np.ndarray,
                points: np.ndarray) -> np.ndarray:
    """Quadratic-cost oracle: the literal sum at arbitrary 3d points.

    Crops to the support of f first.  Exact up to roundoff; use for
    cross-checks and scattered-point evaluation.
    """
    f = np.asarray(f, dtype=complex)
    if f.shape != grid.shape:
        raise UsageError(f"density shape {f.shape} does not match grid {grid.shape}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    i1, i2 = np.nonzero(f)
    if len(i1) == 0:
        return np.zeros(len(pts), dtype=complex)
    w1 = grid.omega1[i1]
    w2 = grid.omega2[i2]
    support = np.column_stack([w1, w2])
    J = surface.jacobian_at(support)
    h = surface.h_at(support)
    amp = f[i1, i2] * J * grid.spacing ** 2
    return nudft_sum(amp, w1, w2, h, pts)


# -- broad / narrow splitting -------------------------------------------------

@dataclass
class BroadDecomposition:
    """Pointwise split of |Ef| by cap dominance.

    broad holds |Ef| where no single coarse cap dominates (max_tau |Ef_tau|
    <= alpha |Ef|), zero elsewhere; narrow is the complement.  tau_over_alpha
    is the witness field max_tau / alpha, kept verbatim so the defining
    inequality can be re-checked bitwise.
    """

    alpha: float
    abs_field: ComplexField
    broad: ComplexField
    narrow: ComplexField
    tau_over_alpha: ComplexField
    witness: np.ndarray  # per-point index of the dominating cap

    def max_identity_holds(self) -> bool:
        """|Ef| <= max(broad, max_tau/alpha) at every grid point, exactly."""
        rhs = np.maximum(self.broad.values, self.tau_over_alpha.values)
        return bool(np.all(self.abs_field.values <= rhs))


def broad_part(field: ComplexField, tau_fields: Sequence[ComplexField],
               alpha: float, check_sum: Optional[ComplexField] = None) -> BroadDecomposition:
    """Split |Ef| into cap-dominated (narrow) and spread-out (broad) parts.

    The broad predicate is evaluated as max_tau/alpha <= |Ef| so that the
    reconstruction inequality |Ef| <= max(broad, alpha^{-1} max_tau) holds
    with no tolerance at all.  If check_sum is given it must equal the sum
    of the cap fields on the same grid (linearity sanity).
    """
    if not (0 < alpha):
        raise UsageError("alpha must be positive")
    if len(tau_fields) == 0:
        raise UsageError("need at least one cap field")
    for g in tau_fields:
        field.require_same_grid(g)
    if check_sum is not None:
        field.require_same_grid(check_sum)
        total = np.zeros_like(field.values)
        for g in tau_fields:
            total = total + g.values
        scale = float(np.max(np.abs(check_sum.values))) or 1.0
        if float(np.max(np.abs(total - check_sum.values))) > 1e-9 * scale:
            raise UsageError("cap fields do not sum to the full field on this grid")

    stack = np.stack([np.abs(g.values) for g in tau_fields])
    witness = np.argmax(stack, axis=0)
    tau_max = np.max(stack, axis=0)
    a = np.abs(field.values)
    inv = tau_max / alpha
    broad_mask = inv <= a
    broad_vals = np.where(broad_mask, a, 0.0)
    narrow_vals = np.where(broad_mask, 0.0, a)
    mk = lambda v: ComplexField(field.x1, field.x2, field.x3, v, field.R)
    return BroadDecomposition(alpha=float(alpha), abs_field=mk(a), broad=mk(broad_vals),
                              narrow=mk(narrow_vals), tau_over_alpha=mk(inv),
                              witness=witness)


def cap_set_distance(a: Cap, b: Cap) -> float:
    """Euclidean distance between the two closed square cells."""
    g1 = max(abs(a.center[0] - b.center[0]) - (a.halfwidth + b.halfwidth), 0.0)
    g2 = max(abs(a.center[1] - b.center[1]) - (a.halfwidth + b.halfwidth), 0.0)
    return math.hypot(g1, g2)


def bilinear_field(entries: Sequence[tuple[Cap, ComplexField]],
                   K: int) -> tuple[ComplexField, int]:
    """Sum of |Ef_tau1 Ef_tau2|^(1/2) over non-adjacent unordered cap pairs.

    A pair participates when the distance between the closed cells is at
    least 1/K, so touching caps (sharing an edge or corner) never pair.
    Returns the field and the number of pairs used.
    """
    if len(entries) == 0:
        raise UsageError("need at least one cap entry")
    base = entries[0][1]
    for _, g in entries[1:]:
        base.require_same_grid(g)
    out = np.zeros(base.values.shape, dtype=float)
    used = 0
    for i in range(len(entries)):
        ci, ui = entries[i]
        for j in range(i + 1, len(entries)):
            cj, uj = entries[j]
            if cap_set_distance(ci, cj) < 1.0 / K - 1e-12:
                continue
            out += np.sqrt(np.abs(ui.values) * np.abs(uj.values))
            used += 1
    return ComplexField(base.x1, base.x2, base.x3, out, base.R), used
