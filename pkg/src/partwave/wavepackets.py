"""Wave packet decomposition of extension fields.

A density f on the surface is first split over fine frequency caps
theta of side ~ R^(-1/2) (times the dial c_theta), then each cap piece
is cut in x-space by a smooth partition of unity on a periodic lattice
of spacing ~ R^(1/2+delta).  Each piece is a packet: its frequency
support stays inside the tripled cap (the cutoff psi vanishes outside),
and its field concentrates along a tube in the cap's normal direction

    v_theta = (-grad h(omega_theta), 1) / |...|

of radius c_tube-proportional to R^(1/2+delta).

All packet arithmetic happens on a cropped window around the cap: the
window is demodulated by the cap's carrier frequency, so a small FFT of
length Nc covers the whole spatial box.  Multiplying the demodulated
envelope by the real lattice profile commutes with the carrier, which
is what makes the crop exact rather than an approximation.

The sum of lattice profiles is identically 1, so summing every packet
of a cap returns the cap density exactly.  What the property report
measures is the honest remainder: packets whose tube misses the ball
B_R are pruned, and the reconstruction error is the field of the pruned
mass, evaluated by a direct sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np
from scipy.fft import next_fast_len

from .errors import UsageError
from .fields import FrequencyGrid, density_l2, mask_to_disk
from .surfaces import CellPartition, SurfaceSpec
from .tubes import Tube

C_THETA_DEFAULT = 1.25
C_TUBE_DEFAULT = 3.0
DELTA_DEFAULT = 0.2
TUBE_RADIUS_FACTOR = 5.0 / 3.0   # tube radius over lattice spacing; > 1 so the
                                 # envelope support plus the ray fan stays inside
TOL_DECAY = 1e-6
TOL_ORTHO = 1e-4
TOL_RECON = 1e-3
MEMORY_BUDGET = 2 << 30


def bump(t: np.ndarray) -> np.ndarray:
    """The standard compactly supported profile exp(1 - 1/(1-t^2)) on |t| < 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


def smoothstep(t: np.ndarray) -> np.ndarray:
    """C-infinity monotone step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a = np.zeros_like(t)
    pos = t > 0
    a[pos] = np.exp(-1.0 / t[pos])
    b = np.zeros_like(t)
    neg = t < 1
    b[neg] = np.exp(-1.0 / (1.0 - t[neg]))
    return a / (a + b)


def plateau(u: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """1 on |u| <= inner, 0 on |u| >= outer, smooth monotone between."""
    return smoothstep((outer - np.abs(u)) / (outer - inner))


@dataclass
class PropertyReport:
    """Measured packet properties at desk tolerances."""

    n_theta: int
    n_kept: int
    support_ok: bool
    cover_fraction: float
    decay_max: float
    decay_count: int
    recon_rel: float
    ortho_max: float
    budget_max: float
    budget_min: float
    on_tube_median: float
    params: dict

    def as_dict(self) -> dict:
        return {
            "n_theta": self.n_theta,
            "n_kept": self.n_kept,
            "support_ok": self.support_ok,
            "cover_fraction": self.cover_fraction,
            "decay_max": self.decay_max,
            "decay_count": self.decay_count,
            "recon_rel": self.recon_rel,
            "ortho_max": self.ortho_max,
            "budget_max": self.budget_max,
            "budget_min": self.budget_min,
            "on_tube_median": self.on_tube_median,
            "params": dict(self.params),
        }


class WavePacketSet:
    """Lazy container for one decomposition; see the module docstring."""

    def __init__(self, surface: SurfaceSpec, grid: FrequencyGrid, f: np.ndarray,
                 R: float, delta: float, c_theta: float, c_tube: float):
        self.surface = surface
        self.base_grid = grid
        self.f = mask_to_disk(grid, f)
        self.R = float(R)
        self.delta = float(delta)
        self.c_theta = float(c_theta)
        self.c_tube = float(c_tube)

        n_theta = max(2, math.ceil(2.0 / (c_theta * R ** -0.5)))
        self.caps = CellPartition(n_theta)
        side = self.caps.side

        # edge-cap windows reach past the unit disk; pad the grid so the
        # smooth cutoff psi is never truncated by the grid boundary (a
        # hard truncation leaks slow 1/dist spatial tails off the tube)
        centers = np.array([c.center for c in self.caps.caps])
        reach = float(np.max(np.abs(centers))) + 2.0 * side
        need = int(math.ceil(reach / grid.spacing))
        lo1, hi1 = min(int(grid.k1[0]), -need), max(int(grid.k1[-1]), need)
        lo2, hi2 = min(int(grid.k2[0]), -need), max(int(grid.k2[-1]), need)
        if (lo1, hi1, lo2, hi2) != (int(grid.k1[0]), int(grid.k1[-1]),
                                    int(grid.k2[0]), int(grid.k2[-1])):
            padded = FrequencyGrid(spacing=grid.spacing,
                                   k1=np.arange(lo1, hi1 + 1),
                                   k2=np.arange(lo2, hi2 + 1))
            self.f = padded.embed(grid, self.f)
            grid = padded
        self.grid = grid

        box = grid.box
        rho_target = c_tube * R ** (0.5 + delta)
        self.M = max(3, int(round(box / (0.75 * rho_target))))
        self.lattice_spacing = box / self.M
        self.r_supp = self.lattice_spacing
        self.tube_radius = TUBE_RADIUS_FACTOR * self.lattice_spacing
        self.tube_length = 6.0 * R

        # shared crop transform: window halfwidth 2*side around each cap
        win_bins = int(math.ceil(4.0 * side / grid.spacing)) + 2
        self.Nc = next_fast_len(max(win_bins, 32))
        self.dxc = box / self.Nc
        self.xc = np.arange(self.Nc) * self.dxc

        J = surface.jacobian_grid(grid.omega1, grid.omega2)
        self._F = self.f * J            # the area-weighted density the packets cut up
        self._J = J
        self._h = surface.h_grid(grid.omega1, grid.omega2)

        self._normals = surface.normal_at(np.array([c.center for c in self.caps.caps]))
        self._lattice_P: Optional[np.ndarray] = None
        self._kept: dict[int, np.ndarray] = {}
        self._blocks: dict[int, dict] = {}
        self._block_order: list[int] = []

        # h(w1, w2) = p(w1) + q(w2) (no mixed partial) unlocks a separable
        # evaluation path for dense full-grid densities
        self._h_separable = surface.h.derivative(0).derivative(1).is_zero
        if self._h_separable:
            zero = np.zeros(1)
            self._h_p = surface.h_grid(grid.omega1, zero)[:, 0]
            self._h_q = surface.h_grid(zero, grid.omega2)[0, :]

    # -- lattice geometry ------------------------------------------------

    def lattice_center(self, ij: tuple[int, int]) -> np.ndarray:
        """Planar tube anchor, centered representative in (-box/2, box/2]."""
        box = self.grid.box
        c = np.array([ij[0] * self.lattice_spacing, ij[1] * self.lattice_spacing])
        return (c + box / 2.0) % box - box / 2.0

    def _axis_patch(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Wrapped crop-grid indices within r_supp of lattice coordinate i."""
        box = self.grid.box
        c = i * self.lattice_spacing
        lo = int(math.floor((c - self.r_supp) / self.dxc))
        hi = int(math.ceil((c + self.r_supp) / self.dxc))
        idx = np.arange(lo, hi + 1)
        d = idx * self.dxc - c
        return idx % self.Nc, d

    def _profile_patch(self, ij: tuple[int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        idx1, d1 = self._axis_patch(ij[0])
        idx2, d2 = self._axis_patch(ij[1])
        rad = np.sqrt(d1[:, None] ** 2 + d2[None, :] ** 2) / self.r_supp
        return idx1, idx2, bump(rad)

    def lattice_normalizer(self) -> np.ndarray:
        """P(x) = sum over the lattice of the bump profile; theta independent."""
        if self._lattice_P is None:
            P = np.zeros((self.Nc, self.Nc))
            for i in range(self.M):
                idx1, d1 = self._axis_patch(i)
                for j in range(self.M):
                    idx2, d2 = self._axis_patch(j)
                    rad = np.sqrt(d1[:, None] ** 2 + d2[None, :] ** 2) / self.r_supp
                    P[np.ix_(idx1, idx2)] += bump(rad)
            if P.min() <= 0:
                raise UsageError("lattice profile fails to cover the box")
            self._lattice_P = P
        return self._lattice_P

    def packet_profile(self, ij: tuple[int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(idx1, idx2, values) of the normalized partition function on its support."""
        P = self.lattice_normalizer()
        idx1, idx2, B = self._profile_patch(ij)
        return idx1, idx2, B / P[np.ix_(idx1, idx2)]

    # -- per-cap data ------------------------------------------------------

    @property
    def n_theta(self) -> int:
        return len(self.caps)

    def direction(self, t: int) -> np.ndarray:
        return self._normals[t]

    def kept_indices(self, t: int) -> np.ndarray:
        """Lattice indices (m, 2) whose tube meets the ball B_R."""
        if t not in self._kept:
            v = self._normals[t]
            ii, jj = np.meshgrid(np.arange(self.M), np.arange(self.M), indexing="ij")
            box = self.grid.box
            c1 = (ii.ravel() * self.lattice_spacing + box / 2) % box - box / 2
            c2 = (jj.ravel() * self.lattice_spacing + box / 2) % box - box / 2
            p = np.column_stack([c1, c2, np.zeros(len(c1))])
            proj = p - np.outer(p @ v, v)
            dist = np.linalg.norm(proj, axis=1)
            keep = dist <= self.R + self.tube_radius
            self._kept[t] = np.column_stack([ii.ravel()[keep], jj.ravel()[keep]])
        return self._kept[t]

    def tube(self, t: int, ij: tuple[int, int]) -> Tube:
        c = self.lattice_center(ij)
        return Tube.around(point=(c[0], c[1], 0.0), direction=self.direction(t),
                           radius=self.tube_radius, length=self.tube_length)

    def block(self, t: int) -> dict:
        """Cached window data for cap t: slices, arrays, envelope, cutoff."""
        if t in self._blocks:
            return self._blocks[t]
        cap = self.caps.caps[t]
        side = cap.side
        s1, s2, sub = self.grid.window(cap.center, 2.0 * side)
        w1 = sub.omega1
        w2 = sub.omega2
        # cell membership must agree with cell_index (closed at the outer
        # boundary), else points with a coordinate exactly 1 lose their mass
        ww1, ww2 = sub.mesh()
        idx = self.caps.cell_index(
            np.column_stack([ww1.ravel(), ww2.ravel()])).reshape(sub.shape)
        Fw = np.where(idx == t, self._F[s1, s2], 0.0 + 0.0j)
        psi = (plateau(w1 - cap.center[0], side, 1.5 * side)[:, None]
               * plateau(w2 - cap.center[1], side, 1.5 * side)[None, :])
        pad = np.zeros((self.Nc, self.Nc), dtype=complex)
        pad[:sub.n1, :sub.n2] = Fw
        u = np.fft.ifft2(pad) * (self.Nc * self.Nc)
        blk = {
            "cap": cap, "slices": (s1, s2), "sub": sub, "F": Fw, "psi": psi,
            "u": u, "J": self._J[s1, s2], "h": self._h[s1, s2],
        }
        self._blocks[t] = blk
        self._block_order.append(t)
        if len(self._block_order) > 8:
            self._blocks.pop(self._block_order.pop(0), None)
        return blk

    def theta_l2sq(self, t: int) -> float:
        blk = self.block(t)
        return float(np.sum(np.abs(blk["F"]) ** 2 / blk["J"]) * self.grid.spacing ** 2)

    def theta_mass_ranking(self) -> np.ndarray:
        """Cap indices sorted by descending density mass."""
        idx = self.caps.cell_index(self.grid.points())
        mass = np.zeros(len(self.caps))
        flat = (np.abs(self._F) ** 2).ravel()
        ok = idx >= 0
        np.add.at(mass, idx[ok], flat[ok])
        return np.argsort(-mass)

    # -- packets -----------------------------------------------------------

    def packet_density(self, t: int, ij: tuple[int, int]) -> np.ndarray:
        """Window samples of the packet's weighted density (psi-masked)."""
        blk = self.block(t)
        idx1, idx2, prof = self.packet_profile(tuple(ij))
        w = np.zeros((self.Nc, self.Nc), dtype=complex)
        w[np.ix_(idx1, idx2)] = prof * blk["u"][np.ix_(idx1, idx2)]
        spec = np.fft.fft2(w) / (self.Nc * self.Nc)
        sub = blk["sub"]
        return blk["psi"] * spec[:sub.n1, :sub.n2]

    def packet_sum_density(self, t: int, kept_only: bool = True) -> np.ndarray:
        """Window samples of the sum of packet densities for cap t."""
        blk = self.block(t)
        mask = np.zeros((self.Nc, self.Nc))
        P = self.lattice_normalizer()
        indices = (self.kept_indices(t) if kept_only
                   else [(i, j) for i in range(self.M) for j in range(self.M)])
        for ij in indices:
            idx1, idx2, B = self._profile_patch(tuple(ij))
            mask[np.ix_(idx1, idx2)] += B / P[np.ix_(idx1, idx2)]
        spec = np.fft.fft2(mask * blk["u"]) / (self.Nc * self.Nc)
        sub = blk["sub"]
        return blk["psi"] * spec[:sub.n1, :sub.n2]

    def packet_field_at(self, t: int, ij: tuple[int, int], pts: np.ndarray) -> np.ndarray:
        blk = self.block(t)
        return self._nudft_window(self.packet_density(t, ij), blk, pts)

    def _nudft_window(self, W: np.ndarray, blk: dict, pts: np.ndarray) -> np.ndarray:
        """Direct sum of a weighted window density at arbitrary 3d points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        sub = blk["sub"]
        i1, i2 = np.nonzero(np.abs(W) > 0)
        if len(i1) == 0:
            return np.zeros(len(pts), dtype=complex)
        amp = W[i1, i2] * self.grid.spacing ** 2
        w1 = sub.omega1[i1]
        w2 = sub.omega2[i2]
        h = blk["h"][i1, i2]
        phase = (np.outer(w1, pts[:, 0]) + np.outer(w2, pts[:, 1])
                 + np.outer(h, pts[:, 2]))
        return amp @ np.exp(2j * np.pi * phase)

    def packet_l2sq_kept(self, t: int) -> np.ndarray:
        """||f_T||_2^2 for every kept packet of cap t."""
        blk = self.block(t)
        out = np.empty(len(self.kept_indices(t)))
        for m, ij in enumerate(self.kept_indices(t)):
            FT = self.packet_density(t, tuple(ij))
            out[m] = float(np.sum(np.abs(FT) ** 2 / blk["J"]) * self.grid.spacing ** 2)
        return out

    # -- property measurements ----------------------------------------------

    def global_deficit(self) -> np.ndarray:
        """Weighted density of Ef - sum over kept packets, on the full grid."""
        D = np.zeros(self.grid.shape, dtype=complex)
        for t in range(self.n_theta):
            blk = self.block(t)
            s1, s2 = blk["slices"]
            D[s1, s2] += blk["F"] - self.packet_sum_density(t, kept_only=True)
        return D

    def field_of_weighted(self, W: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Direct field of a full-grid weighted density (no extra J factor)."""
        from .fields import nudft_sum

        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        i1, i2 = np.nonzero(W)
        if len(i1) == 0:
            return np.zeros(len(pts), dtype=complex)
        if self._h_separable and len(i1) > 200_000:
            # phase splits per axis: one matvec pair per point batch
            Ws = W * self.grid.spacing ** 2
            E1 = np.exp(2j * np.pi * (np.outer(self.grid.omega1, pts[:, 0])
                                      + np.outer(self._h_p, pts[:, 2])))
            E2 = np.exp(2j * np.pi * (np.outer(self.grid.omega2, pts[:, 1])
                                      + np.outer(self._h_q, pts[:, 2])))
            return np.sum(E1 * (Ws @ E2), axis=0)
        amp = W[i1, i2] * self.grid.spacing ** 2
        return nudft_sum(amp, self.grid.omega1[i1], self.grid.omega2[i2],
                         self._h[i1, i2], pts)

    def sample_ball_points(self, n: int, seed: int, shrink: Optional[float] = None) -> np.ndarray:
        radius = self.R * (1.0 - self.R ** -self.delta) if shrink is None else shrink
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xBA11)))
        pts = []
        while len(pts) < n:
            cand = rng.uniform(-radius, radius, (4 * n, 3))
            good = cand[np.linalg.norm(cand, axis=1) <= radius]
            pts.extend(good.tolist())
        return np.array(pts[:n])

    def reconstruction_error(self, n_points: int = 48, seed: int = 0) -> float:
        pts = self.sample_ball_points(n_points, seed)
        err = self.field_of_weighted(self.global_deficit(), pts)
        ref = self.field_of_weighted(self._F, pts)
        denom = float(np.linalg.norm(ref))
        if denom == 0:
            return 0.0
        return float(np.linalg.norm(err) / denom)

    def support_check(self, thetas: Sequence[int]) -> bool:
        """Property: the packet density vanishes outside the tripled cap."""
        for t in thetas:
            blk = self.block(t)
            cap = blk["cap"]
            sub = blk["sub"]
            out1 = np.abs(sub.omega1 - cap.center[0]) > 1.5 * cap.side
            out2 = np.abs(sub.omega2 - cap.center[1]) > 1.5 * cap.side
            kept = self.kept_indices(t)
            for ij in kept[:: max(1, len(kept) // 3)]:
                FT = self.packet_density(t, tuple(ij))
                if np.any(FT[out1, :] != 0) or np.any(FT[:, out2] != 0):
                    return False
        return True

    def cover_fraction(self, t: int, n_points: int = 200, seed: int = 1) -> float:
        """Fraction of sampled ball points lying inside some kept tube."""
        pts = self.sample_ball_points(n_points, seed, shrink=self.R)
        kept = self.kept_indices(t)
        covered = np.zeros(len(pts), dtype=bool)
        v = self.direction(t)
        box = self.grid.box
        c1 = (kept[:, 0] * self.lattice_spacing + box / 2) % box - box / 2
        c2 = (kept[:, 1] * self.lattice_spacing + box / 2) % box - box / 2
        anchors = np.column_stack([c1, c2, np.zeros(len(kept))])
        for a in anchors:
            rel = pts - a
            proj = rel - np.outer(rel @ v, v)
            covered |= np.linalg.norm(proj, axis=1) <= self.tube_radius
            if covered.all():
                break
        return float(covered.mean())

    def decay_samples(self, thetas: Sequence[int], tubes_per_theta: int = 3,
                      points_per_tube: int = 6, seed: int = 0) -> list[float]:
        """|Ef_T| at ball points with dist(x, T) >= R^(1/2+delta), over ||f||_2."""
        fl2 = density_l2(self.surface, self.grid, self.f)
        if fl2 == 0:
            return []
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xDECA)))
        gate = self.R ** (0.5 + self.delta)
        out = []
        for t in thetas:
            kept = self.kept_indices(t)
            v = self.direction(t)
            # horizontal unit vector orthogonal to the tube direction
            perp0 = np.array([v[1], -v[0], 0.0])
            if np.linalg.norm(perp0) < 1e-9:
                perp0 = np.array([1.0, 0.0, 0.0])
            perp0 /= np.linalg.norm(perp0)
            perp1 = np.cross(v, perp0)
            pick = rng.choice(len(kept), size=min(tubes_per_theta, len(kept)), replace=False)
            for m in pick:
                tube = self.tube(t, tuple(kept[m]))
                pts = []
                tries = 0
                while len(pts) < points_per_tube and tries < 60:
                    tries += 1
                    mult = rng.choice([1.0, 1.5, 2.0])
                    ang = rng.uniform(0, 2 * math.pi)
                    n_hat = math.cos(ang) * perp0 + math.sin(ang) * perp1
                    t_axis = rng.uniform(-0.4, 0.4) * self.R
                    base = tube.axis.point_at(tube.t_center + t_axis)
                    x = base + (self.tube_radius + mult * gate) * n_hat
                    if np.linalg.norm(x) <= self.R:
                        pts.append(x)
                if not pts:
                    continue
                pts = np.array(pts)
                assert np.all(tube.distance(pts) >= gate * 0.999)
                vals = np.abs(self.packet_field_at(t, tuple(kept[m]), pts))
                out.extend((vals / fl2).tolist())
        return out

    def on_tube_amplitudes(self, thetas: Sequence[int], seed: int = 0) -> list[float]:
        """|Ef_T| sampled on the tube axis, over ||f||_2 (diagnostic)."""
        fl2 = density_l2(self.surface, self.grid, self.f)
        if fl2 == 0:
            return []
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x0A7B)))
        out = []
        for t in thetas:
            kept = self.kept_indices(t)
            pick = rng.choice(len(kept), size=min(2, len(kept)), replace=False)
            for m in pick:
                tube = self.tube(t, tuple(kept[m]))
                ts = rng.uniform(-0.3, 0.3, 4) * self.R
                pts = np.array([tube.axis.point_at(tube.t_center + u) for u in ts])
                vals = np.abs(self.packet_field_at(t, tuple(kept[m]), pts))
                out.extend((vals / fl2).tolist())
        return out

    def orthogonality_max(self, thetas: Sequence[int], max_vectors: int = 20) -> float:
        """max |<f_T1, f_T2>| / theta mass over disjoint same-cap tube pairs."""
        worst = 0.0
        box = self.grid.box
        for t in thetas:
            blk = self.block(t)
            denom = self.theta_l2sq(t)
            if denom <= 0:
                continue
            kept = self.kept_indices(t)
            step = max(1, len(kept) // max_vectors)
            chosen = kept[::step][:max_vectors]
            vecs = []
            for ij in chosen:
                FT = self.packet_density(t, tuple(ij))
                vecs.append((FT / np.sqrt(blk["J"])).ravel())
            W = np.array(vecs)
            gram = (W @ W.conj().T) * self.grid.spacing ** 2
            # planar separation on the torus decides disjointness
            c = chosen * self.lattice_spacing
            d1 = np.abs(c[:, None, 0] - c[None, :, 0])
            d2 = np.abs(c[:, None, 1] - c[None, :, 1])
            d1 = np.minimum(d1, box - d1)
            d2 = np.minimum(d2, box - d2)
            sep = np.hypot(d1, d2)
            disjoint = sep > 2.0 * self.tube_radius + 0.1 * self.lattice_spacing
            np.fill_diagonal(disjoint, False)
            if disjoint.any():
                worst = max(worst, float(np.max(np.abs(gram[disjoint])) / denom))
        return worst

    def budget_ratios(self, thetas: Sequence[int]) -> list[float]:
        """sum_T ||f_T||^2 / theta mass for each sampled cap."""
        out = []
        for t in thetas:
            denom = self.theta_l2sq(t)
            if denom <= 0:
                continue
            out.append(float(self.packet_l2sq_kept(t).sum() / denom))
        return out

    def run_property_checks(self, seed: int = 0, sample_thetas: int = 4,
                            recon_points: int = 48) -> PropertyReport:
        ranking = self.theta_mass_ranking()
        top = [int(t) for t in ranking[:sample_thetas]]
        decays = self.decay_samples(top, seed=seed)
        ratios = self.budget_ratios(top)
        ontube = self.on_tube_amplitudes(top, seed=seed)
        kept_total = sum(len(self.kept_indices(t)) for t in range(self.n_theta))
        return PropertyReport(
            n_theta=self.n_theta,
            n_kept=kept_total,
            support_ok=self.support_check(top[:2]),
            cover_fraction=self.cover_fraction(top[0] if top else 0),
            decay_max=max(decays) if decays else 0.0,
            decay_count=len(decays),
            recon_rel=self.reconstruction_error(recon_points, seed),
            ortho_max=self.orthogonality_max(top),
            budget_max=max(ratios) if ratios else 0.0,
            budget_min=min(ratios) if ratios else 0.0,
            on_tube_median=float(np.median(ontube)) if ontube else 0.0,
            params={
                "R": self.R, "delta": self.delta, "c_theta": self.c_theta,
                "c_tube": self.c_tube, "n_theta": self.n_theta, "M": self.M,
                "tube_radius": self.tube_radius, "lattice_spacing": self.lattice_spacing,
                "Nc": self.Nc, "seed": seed,
            },
        )


def wave_packet_decompose(surface: SurfaceSpec, grid: FrequencyGrid, f: np.ndarray,
                          R: float, delta: float = DELTA_DEFAULT,
                          c_theta: float = C_THETA_DEFAULT,
                          c_tube: float = C_TUBE_DEFAULT,
                          seed: int = 0, run_checks: bool = True,
                          sample_thetas: int = 4, recon_points: int = 48,
                          memory_budget: int = MEMORY_BUDGET
                          ) -> tuple[WavePacketSet, Optional[PropertyReport]]:
    """Decompose f into wave packets and measure the packet properties.

    Preconditions: R >= 64 and 0 < delta < 1/4.  The grid memory
    estimate must stay under memory_budget, else a usage error suggests
    reducing R.
    """
    if R < 64:
        raise UsageError("wave packets need R >= 64")
    if not (0.0 < delta < 0.25):
        raise UsageError("delta must lie in (0, 1/4)")
    # account for the internal edge-cap padding (about 2.5 cap sides)
    side = 2.0 / max(2, math.ceil(2.0 / (c_theta * R ** -0.5)))
    n_pad = 2 * max(math.ceil((1.0 + 2.5 * side) / grid.spacing),
                    int(grid.k1[-1]), int(grid.k2[-1])) + 1
    est = n_pad * n_pad * 16 * 4
    if est > memory_budget:
        raise UsageError(
            f"frequency grid would need ~{est / 2 ** 30:.1f} GiB; "
            "reduce R or raise memory_budget")
    pset = WavePacketSet(surface, grid, f, R, delta, c_theta, c_tube)
    report = pset.run_property_checks(seed=seed, sample_thetas=sample_thetas,
                                      recon_points=recon_points) if run_checks else None
    return pset, report


def decay_probe(R: float, delta: float = DELTA_DEFAULT, c_theta: float = C_THETA_DEFAULT,
                c_tube: float = C_TUBE_DEFAULT, mult: float = 0.25) -> float:
    """Canonical off-tube amplitude used for the decay-mechanism sweep.

    Fixed construction: paraboloid, f = 1 on the disk, the cap nearest
    omega = (0.3, 0), the kept tube nearest the origin, one probe point
    at distance tube_radius + mult * R^(1/2+delta) from the axis along a
    fixed horizontal direction.  Returns |Ef_T| / ||f||_2; strictly
    decreasing in R when the smooth-cutoff mechanism does its job.  The
    default relative distance mult is deliberately small so the probe
    amplitude sits well above the direct-sum rounding floor at desk R.
    """
    from .surfaces import paraboloid

    surf = paraboloid()
    grid = FrequencyGrid.for_ball(R)
    f = mask_to_disk(grid, np.ones(grid.shape))
    pset = WavePacketSet(surf, grid, f, R, delta, c_theta, c_tube)
    centers = np.array([c.center for c in pset.caps.caps])
    t = int(np.argmin(np.hypot(centers[:, 0] - 0.3, centers[:, 1])))
    kept = pset.kept_indices(t)
    anchors = np.array([pset.lattice_center(tuple(ij)) for ij in kept])
    m = int(np.argmin(np.hypot(anchors[:, 0], anchors[:, 1])))
    tube = pset.tube(t, tuple(kept[m]))
    v = pset.direction(t)
    perp = np.array([v[1], -v[0], 0.0])
    perp /= np.linalg.norm(perp)
    x = tube.axis.point_at(tube.t_center) + (pset.tube_radius + mult * R ** (0.5 + delta)) * perp
    val = abs(pset.packet_field_at(t, tuple(kept[m]), x[None, :])[0])
    return val / density_l2(surf, grid, f)
