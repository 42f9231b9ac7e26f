"""Scaling-law sweeps and bilinear tube-interaction checks.

scaling_experiment measures ||Br_alpha Ef||_{L^p(B_R)} for the sharp
examples across an R sweep and fits log-log slopes.  The L^p integral is
split into the example's concentration region (the slab for planar fields,
the surface patch for regulus fields) plus the rest of the ball, each
estimated by Monte Carlo against exact region volumes with the ball
indicator folded into the integrand.

bilinear_l4_check integrates |Ef1 Ef2|^2 for two transversally separated
cap fields over a large box by exact slice quadrature and compares it, per
wall cube and in aggregate, against the square-function majorant
R^{-1/2} (sum ||f_{T1}||^2)(sum ||f_{T2}||^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .examples import (
    PATCH_RANGE,
    _add_packet,
    _tube_direction,
    build_planar_example,
    build_regulus_example,
    example_cap_partition,
    tau_fields_at_points,
)
from .fields import FrequencyGrid, density_l2, density_linf, extension_field, mask_to_disk
from .surfaces import SurfaceSpec, paraboloid
from .tubes import Tube

SAMPLE_TAG = 0x5CA7

# tau-field evaluations dominate the sweep cost and do not depend on
# (p, alpha); cache them so multi-exponent fits reuse one set of samples
_SAMPLE_CACHE: dict = {}
_SAMPLE_CACHE_MAX = 24


def _fit_loglog(R_vals, y_vals) -> tuple[float, float, float]:
    """Least-squares slope, intercept, rms residual of log y against log R."""
    x = np.log(np.asarray(R_vals, dtype=float))
    y = np.log(np.asarray(y_vals, dtype=float))
    coeffs = np.polyfit(x, y, 1)
    resid = y - np.polyval(coeffs, x)
    return float(coeffs[0]), float(coeffs[1]), float(np.sqrt(np.mean(resid**2)))


@dataclass(frozen=True)
class ScalingRow:
    R: float
    lhs_norm: float
    f_l2: float
    f_linf: float
    ratio: float
    broad_fraction: float

    def as_dict(self) -> dict:
        return {
            "R": self.R,
            "lhs_norm": self.lhs_norm,
            "f_l2": self.f_l2,
            "f_linf": self.f_linf,
            "ratio": self.ratio,
            "broad_fraction": self.broad_fraction,
        }


@dataclass(frozen=True)
class ScalingReport:
    example: str
    p: float
    alpha: float
    K: int
    B: int
    seed: int
    rows: tuple[ScalingRow, ...]
    lhs_slope: float
    lhs_intercept: float
    lhs_residual: float
    ratio_slope: float
    ratio_intercept: float
    ratio_residual: float

    def csv(self) -> str:
        lines = ["R,lhs_norm,f_l2,f_linf,ratio"]
        for r in self.rows:
            lines.append(
                f"{r.R:g},{r.lhs_norm:.10g},{r.f_l2:.10g},{r.f_linf:.10g},{r.ratio:.10g}"
            )
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            "example": self.example,
            "p": self.p,
            "alpha": self.alpha,
            "K": self.K,
            "B": self.B,
            "seed": self.seed,
            "rows": [r.as_dict() for r in self.rows],
            "fits": {
                "lhs_slope": self.lhs_slope,
                "lhs_intercept": self.lhs_intercept,
                "lhs_residual": self.lhs_residual,
                "ratio_slope": self.ratio_slope,
                "ratio_intercept": self.ratio_intercept,
                "ratio_residual": self.ratio_residual,
            },
            "csv": self.csv(),
        }


def _planar_regions(R: float, halfwidth: float, rng, n_main: int):
    pts = np.column_stack(
        [
            rng.uniform(-0.6 * R, 0.6 * R, n_main),
            rng.uniform(-halfwidth, halfwidth, n_main),
            rng.uniform(-0.6 * R, 0.6 * R, n_main),
        ]
    )
    volume = (1.2 * R) ** 2 * 2.0 * halfwidth

    def member(q):
        return (
            (np.abs(q[:, 0]) <= 0.6 * R)
            & (np.abs(q[:, 1]) <= halfwidth)
            & (np.abs(q[:, 2]) <= 0.6 * R)
        )

    return pts, volume, member


def _regulus_regions(R: float, rng, n_main: int):
    lo, hi = PATCH_RANGE[0] - 0.05, PATCH_RANGE[1] + 0.05
    jitter = 3.0 * math.sqrt(R)
    u = rng.uniform(lo, hi, n_main) * rng.choice([-1, 1], n_main)
    v = rng.uniform(lo, hi, n_main) * rng.choice([-1, 1], n_main)
    w = rng.uniform(-jitter, jitter, n_main)
    pts = np.column_stack([u * R, v * R, u * v * R + w])
    volume = 4.0 * ((hi - lo) * R) ** 2 * 2.0 * jitter

    def member(q):
        au = np.abs(q[:, 0]) / R
        av = np.abs(q[:, 1]) / R
        near = np.abs(q[:, 2] - q[:, 0] * q[:, 1] / R) <= jitter
        return (au >= lo) & (au <= hi) & (av >= lo) & (av <= hi) & near

    return pts, volume, member


def scaling_experiment(
    example: str,
    R_list,
    p: float,
    alpha: float,
    K: int,
    B: int,
    seed: int = 0,
    n_main: int = 6000,
    n_rest: int = 1200,
) -> ScalingReport:
    """Broad-part L^p norms and ratio-to-norms fits across an R sweep.

    For each R the example field is built, Br_alpha Ef is sampled over the
    concentration region and over the rest of the ball, and the two pieces
    combine into ||Br_alpha Ef||_{L^p(B_R)}.  The ratio column divides by
    ||f||_2^{12/13} ||f||_inf^{1/13}.  The same unit draws are reused at
    every R so the sweep's quadrature noise largely cancels in the fits.
    """
    if example not in ("planar", "regulus"):
        raise UsageError("example must be 'planar' or 'regulus'")
    R_vals = [float(R) for R in R_list]
    if len(R_vals) < 4:
        raise UsageError("R_list needs at least 4 values")
    if any(b >= a for a, b in zip(R_vals[1:], R_vals)):
        raise UsageError("R_list must be strictly ascending")
    if not 0.0 < alpha < 1.0:
        raise UsageError("alpha must lie in (0, 1)")
    if p <= 0:
        raise UsageError("p must be positive")

    rows = []
    for R in R_vals:
        key = (example, R, K, B, seed, n_main, n_rest)
        if key not in _SAMPLE_CACHE:
            surf = paraboloid()
            if example == "planar":
                f, ex = build_planar_example(R, B, K, seed)
                norms = (ex.f_l2, ex.f_linf)
            else:
                f, exr = build_regulus_example(R, seed)
                norms = (exr.f_l2, exr.f_linf)
            grid = FrequencyGrid.for_ball(R)
            rng = np.random.default_rng(np.random.SeedSequence((seed, SAMPLE_TAG, B)))
            if example == "planar":
                main_pts, V_main, member = _planar_regions(
                    R, ex.slab_halfwidth, rng, n_main)
            else:
                main_pts, V_main, member = _regulus_regions(R, rng, n_main)

            rest = np.empty((0, 3))
            while len(rest) < n_rest:
                q = rng.uniform(-R, R, (4 * n_rest, 3))
                q = q[np.linalg.norm(q, axis=1) <= R]
                q = q[~member(q)]
                rest = np.concatenate([rest, q]) if len(rest) else q
            rest = rest[:n_rest]
            V_ball = 4.0 / 3.0 * math.pi * R**3
            V_rest = max(V_ball - V_main, 0.0)

            evals = {}
            for name, pts, volume in (("main", main_pts, V_main), ("rest", rest, V_rest)):
                total, tau_max = tau_fields_at_points(surf, grid, f, pts, K)
                # the main box may poke out of the ball; integrate Br * 1_ball
                in_ball = np.linalg.norm(pts, axis=1) <= R
                evals[name] = (np.abs(total), tau_max, in_ball, volume)
            if len(_SAMPLE_CACHE) >= _SAMPLE_CACHE_MAX:
                _SAMPLE_CACHE.pop(next(iter(_SAMPLE_CACHE)))
            _SAMPLE_CACHE[key] = (evals, norms)
        evals, norms = _SAMPLE_CACHE[key]

        means = {}
        broad_fraction = 0.0
        for name in ("main", "rest"):
            mag, tau_max, in_ball, volume = evals[name]
            br = np.where((tau_max <= alpha * mag) & in_ball, mag, 0.0)
            means[name] = volume * float(np.mean(br**p))
            if name == "main":
                broad_fraction = float(np.mean(br > 0))
        lhs = (means["main"] + means["rest"]) ** (1.0 / p)
        ratio = lhs / (norms[0] ** (12.0 / 13.0) * norms[1] ** (1.0 / 13.0))
        rows.append(
            ScalingRow(
                R=R,
                lhs_norm=lhs,
                f_l2=norms[0],
                f_linf=norms[1],
                ratio=ratio,
                broad_fraction=broad_fraction,
            )
        )

    lhs_fit = _fit_loglog(R_vals, [r.lhs_norm for r in rows])
    ratio_fit = _fit_loglog(R_vals, [r.ratio for r in rows])
    return ScalingReport(
        example=example,
        p=float(p),
        alpha=float(alpha),
        K=int(K),
        B=int(B),
        seed=int(seed),
        rows=tuple(rows),
        lhs_slope=lhs_fit[0],
        lhs_intercept=lhs_fit[1],
        lhs_residual=lhs_fit[2],
        ratio_slope=ratio_fit[0],
        ratio_intercept=ratio_fit[1],
        ratio_residual=ratio_fit[2],
    )


def transverse_packet_pair(
    R: float, separation: float = 0.35, seed: int = 0
) -> tuple[FrequencyGrid, np.ndarray, np.ndarray, Tube, Tube]:
    """Two single-packet densities on caps near (-sep, 0) and (+sep, 0).

    Both packets anchor at the origin, so their tubes cross there at an
    angle of about 2 arctan(2 sep).
    """
    R = float(R)
    if not 0.1 <= separation <= 0.45:
        raise UsageError("separation must lie in [0.1, 0.45]")
    grid = FrequencyGrid.for_ball(R)
    caps = example_cap_partition(R)
    centers = np.array([c.center for c in caps.caps])
    out = []
    for sx in (-1.0, 1.0):
        target = (sx * separation, 0.0)
        c = centers[int(np.argmin(np.hypot(centers[:, 0] - target[0], centers[:, 1] - target[1])))]
        f = np.zeros(grid.shape, dtype=complex)
        _add_packet(f, grid, c, caps.side, (0.0, 0.0), R)
        f = mask_to_disk(grid, f)
        tube = Tube.around((0.0, 0.0, 0.0), _tube_direction(c), math.sqrt(R), 2.0 * R)
        out.append((f, tube))
    (f1, t1), (f2, t2) = out
    return grid, f1, f2, t1, t2


def wall_cubes(R: float, halfwidth: float | None = None, side: float | None = None):
    """Cube centers of a side-sqrt(R) tiling of the crossing wall region."""
    R = float(R)
    s = math.sqrt(R) if side is None else float(side)
    w = 8.0 * math.sqrt(R) if halfwidth is None else float(halfwidth)
    n = int(math.ceil(w / s))
    axis = (np.arange(-n, n) + 0.5) * s
    C1, C2, C3 = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.column_stack([C1.ravel(), C2.ravel(), C3.ravel()]), s


@dataclass(frozen=True)
class BilinearReport:
    R: float
    p: float
    cube_side: float
    n_cubes: int
    integral_total: float
    integral_in_cubes: float
    f1_l2sq: float
    f2_l2sq: float
    ratio_to_norms: float
    aggregate_ratio: float
    per_cube_ratio_max: float
    tail_fraction: float
    interpolated_exponent: float
    final_exponent: float

    def as_dict(self) -> dict:
        return {
            "R": self.R,
            "p": self.p,
            "cube_side": self.cube_side,
            "n_cubes": self.n_cubes,
            "integral_total": self.integral_total,
            "integral_in_cubes": self.integral_in_cubes,
            "f1_l2sq": self.f1_l2sq,
            "f2_l2sq": self.f2_l2sq,
            "ratio_to_norms": self.ratio_to_norms,
            "aggregate_ratio": self.aggregate_ratio,
            "per_cube_ratio_max": self.per_cube_ratio_max,
            "tail_fraction": self.tail_fraction,
            "interpolated_exponent": self.interpolated_exponent,
            "final_exponent": self.final_exponent,
        }


def bilinear_l4_check(
    surface: SurfaceSpec,
    grid: FrequencyGrid,
    f1: np.ndarray,
    f2: np.ndarray,
    tubes1,
    tube_norms1,
    tubes2,
    tube_norms2,
    cubes: np.ndarray,
    cube_side: float,
    p: float,
    R: float,
    dx: float = 1.0,
    dx3: float = 1.0,
    chi_dilation: float = 4.0,
) -> BilinearReport:
    """Exact-slice integral of |Ef1 Ef2|^2 against the tube majorant.

    The integrand is carrier-free (cap-center phases cancel in the
    modulus), so its x' difference frequencies are bounded by twice the
    two caps' widths and the unit lattice already integrates it exactly;
    likewise the unit x3 sum, up to the truncation tails, which are
    reported.  Cubes must cover the wall, the region within two radii of
    both tube families.
    """
    R = float(R)
    cubes = np.atleast_2d(np.asarray(cubes, dtype=float))
    if cubes.shape[1] != 3:
        raise UsageError("cubes must be (n, 3) centers")
    if min(len(tubes1), len(tubes2)) < 1:
        raise UsageError("need at least one tube per side")

    # wall = points within 2 radii of a tube from each family
    probes = []
    for ta in tubes1:
        for tb in tubes2:
            mid = 0.5 * (np.asarray(ta.axis.base_arr) + np.asarray(tb.axis.base_arr))
            span = 2.0 * (ta.radius + tb.radius)
            g = np.linspace(-span, span, 5)
            G1, G2, G3 = np.meshgrid(g, g, g, indexing="ij")
            cand = mid[None, :] + np.column_stack([G1.ravel(), G2.ravel(), G3.ravel()])
            near = (ta.distance(cand) <= 2.0 * ta.radius) & (
                tb.distance(cand) <= 2.0 * tb.radius
            )
            probes.append(cand[near])
    wall = np.concatenate([q for q in probes if len(q)]) if probes else np.empty((0, 3))
    if len(wall):
        d = np.max(np.abs(wall[:, None, :] - cubes[None, :, :]), axis=2).min(axis=1)
        if float(d.max()) > 0.5 * cube_side + 1e-9:
            raise UsageError("cubes do not cover the wall")

    # dense index map over the cube grid, set up before the field sweep
    ci = np.round(cubes / cube_side - 0.5).astype(int)
    cmin, cmax = ci.min(axis=0), ci.max(axis=0)
    span = cmax - cmin + 1
    key = np.full(span, -1, dtype=int)
    key[tuple((ci - cmin).T)] = np.arange(len(cubes))
    lo = cmin * cube_side
    hi = (cmax + 1) * cube_side
    flat2d = key.reshape(-1, span[2])

    x3_half = 12.0 * math.sqrt(R)
    x3 = np.arange(-x3_half, x3_half + 1e-9, dx3)
    extent = min(max(8.0 * math.sqrt(R), float(np.abs([lo, hi]).max()) + dx),
                 0.47 * grid.box)
    cube_integrals = np.zeros(len(cubes) + 1)
    per_slice = np.zeros(len(x3))
    comp = None
    dxa = dx
    for start in range(0, len(x3), 64):
        sl3 = x3[start:start + 64]
        A = extension_field(surface, grid, f1, R, sl3, dx_max=dx, x_extent=extent,
                            allow_outside_ball=True)
        Bf = extension_field(surface, grid, f2, R, sl3, dx_max=dx, x_extent=extent,
                             allow_outside_ball=True)
        dxa = float(A.x1[1] - A.x1[0])
        prod = (np.abs(A.values) * np.abs(Bf.values)) ** 2
        per_slice[start:start + len(sl3)] = prod.sum(axis=(1, 2)) * dxa * dxa
        if comp is None:
            in1 = (A.x1 >= lo[0]) & (A.x1 < hi[0])
            in2 = (A.x2 >= lo[1]) & (A.x2 < hi[1])
            i1 = np.floor(A.x1[in1] / cube_side).astype(int) - cmin[0]
            i2 = np.floor(A.x2[in2] / cube_side).astype(int) - cmin[1]
            comp = (i1[:, None] * span[1] + i2[None, :]).ravel()
        for s, t in enumerate(sl3):
            if t < lo[2] or t >= hi[2]:
                continue
            i3 = int(math.floor(t / cube_side)) - cmin[2]
            vals = prod[s][np.ix_(in1, in2)].ravel()
            sums = np.bincount(comp, weights=vals, minlength=span[0] * span[1])
            k = flat2d[:, i3]
            np.add.at(cube_integrals, np.where(k >= 0, k, len(cubes)),
                      sums * dxa * dxa * dx3)
    integral_total = float(per_slice.sum() * dx3)
    edge = max(float(per_slice[0]), float(per_slice[-1])) * dx3
    tail_fraction = edge * len(x3) / integral_total if integral_total > 0 else 0.0
    cube_integrals = cube_integrals[:-1]
    integral_in_cubes = float(cube_integrals.sum())

    n1sq = float(np.sum(tube_norms1))
    n2sq = float(np.sum(tube_norms2))
    # chi_dilation widens the tube test so the packet envelope, which
    # carries mass out to a few radii, lands in dominated cubes
    reach = 0.5 * cube_side * math.sqrt(3.0)
    m1 = np.zeros(len(cubes))
    m2 = np.zeros(len(cubes))
    for tube, nsq in zip(tubes1, tube_norms1):
        m1 += nsq * (tube.distance(cubes) <= chi_dilation * tube.radius + reach)
    for tube, nsq in zip(tubes2, tube_norms2):
        m2 += nsq * (tube.distance(cubes) <= chi_dilation * tube.radius + reach)
    maj = R**-0.5 * m1 * m2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(maj > 0, cube_integrals / maj, 0.0)
    stray = cube_integrals[maj == 0]
    if len(stray) and integral_in_cubes > 0:
        # mass in cubes met by neither family must be decay-tail noise
        if float(stray.sum()) > 1e-3 * integral_in_cubes:
            raise UsageError("cube mass outside every tube pair; enlarge tubes")
    agg_maj = R**-0.5 * n1sq * n2sq
    return BilinearReport(
        R=R,
        p=float(p),
        cube_side=float(cube_side),
        n_cubes=len(cubes),
        integral_total=integral_total,
        integral_in_cubes=integral_in_cubes,
        f1_l2sq=n1sq,
        f2_l2sq=n2sq,
        ratio_to_norms=integral_total / (n1sq * n2sq),
        aggregate_ratio=integral_total / agg_maj,
        per_cube_ratio_max=float(ratios.max()) if len(ratios) else 0.0,
        tail_fraction=tail_fraction,
        interpolated_exponent=2.5 - 0.75 * float(p),
        final_exponent=13.0 / 4.0 - float(p),
    )


def l2_ball_ratio(
    surface: SurfaceSpec, grid: FrequencyGrid, f: np.ndarray, R: float, dx3: float = 1.0
) -> float:
    """||Ef||^2_{L^2(B_R)} / (R ||f||_2^2), slice quadrature over the ball."""
    R = float(R)
    x3 = np.arange(-R, R + 1e-9, dx3)
    fld = extension_field(surface, grid, f, R, x3, dx_max=1.0)
    dxa = float(fld.x1[1] - fld.x1[0])
    rr = fld.x1[:, None] ** 2 + fld.x2[None, :] ** 2
    total = 0.0
    for s, t in enumerate(x3):
        mask = rr <= max(R * R - t * t, 0.0)
        total += float(np.sum(np.abs(fld.values[s]) ** 2 * mask)) * dxa * dxa * dx3
    return total / (R * density_l2(surface, grid, f) ** 2)
