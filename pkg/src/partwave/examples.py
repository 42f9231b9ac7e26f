"""Sharp-example generators: planar slab fields and regulus ruling fields.

Both constructions place one modulated cap bump per (cap, anchor) pair.  A
bump of radius 0.45*side at cap center c, modulated by e^{-2 pi i x_T . w},
extends to a field concentrated on the tube through x_T with direction
(-grad h(c), 1)/J(c), radius ~ sqrt(R) and length ~ R.

The planar example picks the caps whose tube directions lie within
O(R^{-1/2}) of the plane x2 = 0, then B random anchors per cap with
independent random signs.  The regulus example matches the two ruling
families of the rescaled surface x3 = x1 x2 / R to their nearest caps and
sums the packets unsigned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .fields import FrequencyGrid, density_l2, density_linf, mask_to_disk, nudft_sum
from .surfaces import CellPartition, SurfaceSpec, paraboloid
from .tubes import Tube, direction_angle
from .wavepackets import C_THETA_DEFAULT, bump

BUMP_RADIUS_FRAC = 0.45
# candidate caps may tilt up to mult * R^{-1/2} out of the slab plane; the
# strip then keeps the round(4 sqrt(R)) least-tilted so the expected number
# of tubes through a slab point is 2B for every R
PLANAR_STRIP_MULT = 3.0
PLANAR_STRIP_COUNT = 4.0
# ruling anchors per family are spaced mult * sqrt(R); 1.25 keeps every patch
# point within one tube radius of an anchor line while the per-point tau
# spread stays small enough for the single-family ablation to read as narrow
REGULUS_ANCHOR_MULT = 1.25
# patch of the rescaled regulus used for sampling, as |x1|, |x2| in
# [lo, hi] * R on both sign quadrants
PATCH_RANGE = (0.5, 0.7)

ANCHOR_TAG = 0x51AB
PATCH_TAG = 0xE6


def example_cap_partition(R: float) -> CellPartition:
    """Caps of side ~ c_theta * R^{-1/2}, matching the packet machinery.

    The cell count is forced odd so a center row of caps exists at every R
    and the strip geometry stays self-similar across the scaling sweep.
    """
    n = max(3, math.ceil(2.0 / (C_THETA_DEFAULT * R**-0.5)))
    return CellPartition(n + 1 if n % 2 == 0 else n)


def _add_packet(f, grid: FrequencyGrid, center, side: float, anchor, scale: complex):
    # accumulate on the cap window only; the bump vanishes past 0.45*side
    s1, s2, sub = grid.window(center, 0.55 * side)
    w1, w2 = sub.mesh()
    rad = np.hypot(w1 - center[0], w2 - center[1])
    f[s1, s2] += scale * bump(rad / (BUMP_RADIUS_FRAC * side)) * np.exp(
        -2j * np.pi * (anchor[0] * w1 + anchor[1] * w2)
    )


def _tube_direction(center) -> np.ndarray:
    return np.array([-2.0 * center[0], -2.0 * center[1], 1.0])


@dataclass(frozen=True)
class PlanarExample:
    """Metadata for one planar slab field."""

    R: float
    B: int
    K: int
    seed: int
    cap_centers: tuple[tuple[float, float], ...]
    cap_side: float
    anchors: tuple[tuple[float, ...], ...]
    signs: tuple[tuple[float, ...], ...]
    tubes: tuple[Tube, ...]
    tube_radius: float
    slab_halfwidth: float
    f_l2: float
    f_linf: float
    ratio_l2: float

    def as_dict(self) -> dict:
        return {
            "kind": "planar",
            "R": self.R,
            "B": self.B,
            "K": self.K,
            "seed": self.seed,
            "n_caps": len(self.cap_centers),
            "cap_side": self.cap_side,
            "anchors": [list(a) for a in self.anchors],
            "signs": [list(s) for s in self.signs],
            "tube_radius": self.tube_radius,
            "slab_halfwidth": self.slab_halfwidth,
            "f_l2": self.f_l2,
            "f_linf": self.f_linf,
            "ratio_l2": self.ratio_l2,
        }


def build_planar_example(
    R: float, B: int, K: int, seed: int, n_caps: int | None = None
) -> tuple[np.ndarray, PlanarExample]:
    """Random signed sum of B slab tubes per strip cap.

    The strip takes the round(4 sqrt(R)) caps with the smallest tilt
    2|c2|/J(c), all of it <= 3 R^{-1/2}, so every tube direction lies within
    O(R^{-1/2}) of the plane x2 = 0 and the tubes stay inside a slab of
    thickness ~ sqrt(R).  Anchors sit on a lattice of spacing 2 sqrt(R)
    along x1; each cap draws B of them without replacement.  n_caps trims
    the strip to its innermost caps (n_caps=1 with B=1 gives one packet).
    """
    R = float(R)
    if R < 64:
        raise UsageError("planar example needs R >= 64")
    B = int(B)
    if not 1 <= B <= math.sqrt(R):
        raise UsageError("B must satisfy 1 <= B <= sqrt(R)")
    grid = FrequencyGrid.for_ball(R)
    caps = example_cap_partition(R)
    centers = np.array([c.center for c in caps.caps])
    J = np.sqrt(1.0 + 4.0 * np.sum(centers**2, axis=1))
    tilt = 2.0 * np.abs(centers[:, 1]) / J
    pool = np.where(tilt <= PLANAR_STRIP_MULT * R**-0.5)[0]
    order = pool[np.lexsort((pool, tilt[pool]))]
    strip = np.sort(order[: int(round(PLANAR_STRIP_COUNT * math.sqrt(R)))])
    if n_caps is not None:
        if n_caps < 1:
            raise UsageError("n_caps must be >= 1")
        order = np.argsort(np.abs(centers[strip, 0]), kind="stable")
        strip = strip[order[: int(n_caps)]]

    n_anchor = int(round(grid.box / (2.0 * math.sqrt(R))))
    a_sp = grid.box / n_anchor
    avals = (np.arange(n_anchor) * a_sp + 0.5 * a_sp) % grid.box - 0.5 * grid.box
    rng = np.random.default_rng(np.random.SeedSequence((seed, ANCHOR_TAG)))

    f = np.zeros(grid.shape, dtype=complex)
    radius = math.sqrt(R)
    anchors, signs, tubes = [], [], []
    for t in strip:
        c = centers[t]
        aa = np.sort(rng.choice(avals, size=B, replace=False))
        ss = rng.choice([-1.0, 1.0], size=B)
        for a, sg in zip(aa, ss):
            _add_packet(f, grid, c, caps.side, (a, 0.0), sg * R)
            tubes.append(Tube.around((a, 0.0, 0.0), _tube_direction(c), radius, 2.0 * R))
        anchors.append(tuple(float(a) for a in aa))
        signs.append(tuple(float(s) for s in ss))
    f = mask_to_disk(grid, f)

    surf = paraboloid()
    fl2 = density_l2(surf, grid, f)
    flinf = density_linf(f)
    meta = PlanarExample(
        R=R,
        B=B,
        K=int(K),
        seed=int(seed),
        cap_centers=tuple((float(c[0]), float(c[1])) for c in centers[strip]),
        cap_side=caps.side,
        anchors=tuple(anchors),
        signs=tuple(signs),
        tubes=tuple(tubes),
        tube_radius=radius,
        # strip directions drift at most 3 R^{-1/2} sideways over |x3| <= R,
        # plus one tube radius
        slab_halfwidth=4.0 * math.sqrt(R),
        f_l2=fl2,
        f_linf=flinf,
        ratio_l2=fl2 / (math.sqrt(B) * R**0.75),
    )
    return f, meta


def slab_coverage(example: PlanarExample, core_halfwidth: float | None = None) -> float:
    """Fraction of core-slab lattice points lying in >= ceil(B/2) tubes.

    The core is |x2| <= sqrt(R) (the tube centers' plane); the outer slab up
    to slab_halfwidth only catches tubes near their drift extremes.
    """
    R = example.R
    w = math.sqrt(R) if core_halfwidth is None else float(core_halfwidth)
    step = 0.5 * math.sqrt(R)
    xs = np.arange(-0.5 * R, 0.5 * R + 1e-9, step)
    x2 = np.array([-w, 0.0, w])
    X1, X2, X3 = np.meshgrid(xs, x2, xs, indexing="ij")
    pts = np.column_stack([X1.ravel(), X2.ravel(), X3.ravel()])
    counts = np.zeros(len(pts), dtype=int)
    for tube in example.tubes:
        counts += tube.contains(pts)
    need = math.ceil(example.B / 2)
    return float(np.mean(counts >= need))


@dataclass(frozen=True)
class RegulusExample:
    """Metadata for one regulus ruling field."""

    R: float
    seed: int
    families: tuple[str, ...]
    anchors: tuple[float, ...]
    cap_side: float
    matched_centers_v: tuple[tuple[float, float], ...]
    matched_centers_h: tuple[tuple[float, float], ...]
    tubes_v: tuple[Tube, ...]
    tubes_h: tuple[Tube, ...]
    tube_radius: float
    max_matching_angle: float
    f_l2: float
    f_linf: float

    def as_dict(self) -> dict:
        return {
            "kind": "regulus",
            "R": self.R,
            "seed": self.seed,
            "families": list(self.families),
            "anchors": list(self.anchors),
            "cap_side": self.cap_side,
            "n_tubes_v": len(self.tubes_v),
            "n_tubes_h": len(self.tubes_h),
            "tube_radius": self.tube_radius,
            "max_matching_angle": self.max_matching_angle,
            "f_l2": self.f_l2,
            "f_linf": self.f_linf,
        }


def build_regulus_example(
    R: float,
    seed: int,
    families: tuple[str, ...] = ("v", "h"),
    anchor_mult: float = REGULUS_ANCHOR_MULT,
) -> tuple[np.ndarray, RegulusExample]:
    """Unsigned packet sum along both ruling families of x3 = x1 x2 / R.

    The vertical ruling through (a, 0, 0) has direction (0, 1, a/R), which
    is the tube direction of the cap at (0, -R/(2a)); horizontal rulings map
    to (-R/(2b), 0).  |a| in [R/2, R] keeps those targets inside the unit
    disk.  Each ruling is matched to the nearest cap center and the worst
    angular mismatch is recorded.  `families` restricts the sum, which the
    single-family ablation uses.
    """
    R = float(R)
    if R < 64:
        raise UsageError("regulus example needs R >= 64")
    if not families or any(fam not in ("v", "h") for fam in families):
        raise UsageError("families must be a nonempty subset of ('v', 'h')")
    grid = FrequencyGrid.for_ball(R)
    caps = example_cap_partition(R)
    centers = np.array([c.center for c in caps.caps])

    sp = anchor_mult * math.sqrt(R)
    half = np.arange(R / 2 + sp / 2, R, sp)
    anchors = np.concatenate([-half[::-1], half])

    def nearest(target):
        d = np.hypot(centers[:, 0] - target[0], centers[:, 1] - target[1])
        return centers[int(np.argmin(d))]

    def mismatch(ruling, center):
        u = ruling / np.linalg.norm(ruling)
        v = _tube_direction(center)
        return direction_angle(u, v / np.linalg.norm(v))

    f = np.zeros(grid.shape, dtype=complex)
    radius = math.sqrt(R)
    matched_v, matched_h, tubes_v, tubes_h = [], [], [], []
    worst = 0.0
    for a in anchors:
        if "v" in families:
            c = nearest((0.0, -R / (2.0 * a)))
            _add_packet(f, grid, c, caps.side, (a, 0.0), R)
            ruling = np.array([0.0, 1.0, a / R])
            worst = max(worst, mismatch(ruling, c))
            tubes_v.append(Tube.around((a, 0.0, 0.0), ruling, radius, 2.0 * R))
            matched_v.append((float(c[0]), float(c[1])))
        if "h" in families:
            c = nearest((-R / (2.0 * a), 0.0))
            _add_packet(f, grid, c, caps.side, (0.0, a), R)
            ruling = np.array([1.0, 0.0, a / R])
            worst = max(worst, mismatch(ruling, c))
            tubes_h.append(Tube.around((0.0, a, 0.0), ruling, radius, 2.0 * R))
            matched_h.append((float(c[0]), float(c[1])))
    f = mask_to_disk(grid, f)

    surf = paraboloid()
    meta = RegulusExample(
        R=R,
        seed=int(seed),
        families=tuple(families),
        anchors=tuple(float(a) for a in anchors),
        cap_side=caps.side,
        matched_centers_v=tuple(matched_v),
        matched_centers_h=tuple(matched_h),
        tubes_v=tuple(tubes_v),
        tubes_h=tuple(tubes_h),
        tube_radius=radius,
        max_matching_angle=worst,
        f_l2=density_l2(surf, grid, f),
        f_linf=density_linf(f),
    )
    return f, meta


def ruling_coverage(example: RegulusExample, n_side: int = 12) -> dict:
    """Tube membership counts over an on-surface patch lattice.

    Lattice points (u R, v R, u v R) with |u|, |v| in PATCH_RANGE, restricted
    to |x| <= R.  Reports the minimum per-family tube count over the lattice.
    """
    R = example.R
    lo, hi = PATCH_RANGE
    u = np.linspace(lo, hi, n_side)
    u = np.concatenate([-u[::-1], u])
    U, V = np.meshgrid(u, u, indexing="ij")
    pts = np.column_stack([U.ravel() * R, V.ravel() * R, (U * V).ravel() * R])
    pts = pts[np.linalg.norm(pts, axis=1) <= R]
    out = {"n_points": int(len(pts))}
    for name, tubes in (("v", example.tubes_v), ("h", example.tubes_h)):
        if not tubes:
            continue
        counts = np.zeros(len(pts), dtype=int)
        for tube in tubes:
            counts += tube.contains(pts)
        out[f"min_{name}"] = int(counts.min())
        out[f"mean_{name}"] = float(counts.mean())
    return out


def regulus_patch_points(R: float, seed: int, n: int = 400) -> np.ndarray:
    """Random points near the rescaled regulus patch, inside the ball.

    |x1|, |x2| uniform in PATCH_RANGE * R over all four sign quadrants, x3
    jittered around x1 x2 / R by +-0.5 sqrt(R).
    """
    R = float(R)
    lo, hi = PATCH_RANGE
    rng = np.random.default_rng(np.random.SeedSequence((seed, PATCH_TAG)))
    pts: list[list[float]] = []
    while len(pts) < n:
        u = rng.uniform(lo, hi, 2000) * rng.choice([-1, 1], 2000)
        v = rng.uniform(lo, hi, 2000) * rng.choice([-1, 1], 2000)
        x = u * R
        y = v * R
        z = x * y / R + rng.uniform(-0.5, 0.5, 2000) * math.sqrt(R)
        P = np.column_stack([x, y, z])
        pts.extend(P[np.linalg.norm(P, axis=1) <= R].tolist())
    return np.array(pts[:n])


def tau_fields_at_points(
    surface: SurfaceSpec,
    grid: FrequencyGrid,
    f: np.ndarray,
    points: np.ndarray,
    K: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Extension values at arbitrary points, split over CellPartition(K).

    Returns (total, tau_max) where total is E f and tau_max the largest
    per-cell magnitude, both evaluated by direct summation grouped by cell.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    total = np.zeros(len(points), dtype=complex)
    tau_max = np.zeros(len(points))
    i1, i2 = np.nonzero(f)
    if len(i1) == 0:
        return total, tau_max
    om = np.column_stack([grid.omega1[i1], grid.omega2[i2]])
    amp = f[i1, i2] * surface.jacobian_at(om) * grid.spacing**2
    hh = surface.h_at(om)
    idx = CellPartition(int(K)).cell_index(om)
    for t in np.unique(idx):
        if t < 0:
            continue
        m = idx == t
        ft = nudft_sum(amp[m], om[m, 0], om[m, 1], hh[m], points)
        total += ft
        tau_max = np.maximum(tau_max, np.abs(ft))
    return total, tau_max


def pointwise_broad_fraction(
    surface: SurfaceSpec,
    grid: FrequencyGrid,
    f: np.ndarray,
    points: np.ndarray,
    K: int,
    alpha: float,
    floor: float = 1e-9,
) -> float:
    """Fraction of points that are alpha-broad with |E f| above the floor."""
    total, tau_max = tau_fields_at_points(surface, grid, f, points, K)
    mag = np.abs(total)
    return float(np.mean((tau_max <= alpha * mag) & (mag > floor)))
