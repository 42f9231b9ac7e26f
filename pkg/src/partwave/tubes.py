"""Thick tubes against algebraic surfaces: classification, segments, cubes.

A tube is a finite cylinder around a line segment.  Against the zero set of a
polynomial it is DISJOINT, TANGENT, or TRANSVERSE: tangency means every
non-singular zero-set witness sampled in the dilated tube (10T, within the
doubled ball) makes an angle at most the threshold with the tube direction,
transversality means some witness exceeds it.  The segment counter subdivides
a tube into pieces of length radius/a and counts pieces hit by zero-set
points whose angle to the tube direction is at least a.  The cube counter
scans an integer grid of unit cubes with a per-cube sub-lattice and reports
how many cubes the zero set meets.  The census classifies a family of tubes
and extracts a greedy angle-separated subset of the tangent ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import SingularOnlyError, UsageError
from .incidence import Line
from .polynomials import (  # noqa: F401  (sample_zero_set re-exported on purpose)
    Polynomial,
    ZeroSetSample,
    angles_to_zero_set_many,
    sample_zero_set,
)

TANGENT = "TANGENT"
TRANSVERSE = "TRANSVERSE"
DISJOINT = "DISJOINT"


@dataclass(frozen=True)
class Tube:
    """Finite cylinder: points within `radius` of the axis segment.

    The segment is [t_center - length/2, t_center + length/2] in the axis
    line's canonical parameter.  Dilation kT keeps the segment and scales the
    radius, so x is in kT iff its axis distance is <= k * radius.
    """

    axis: Line
    radius: float
    length: float
    t_center: float = 0.0

    def __post_init__(self):
        if self.radius <= 0 or self.length <= 0:
            raise UsageError("tube radius and length must be positive")

    @staticmethod
    def around(
        point: Sequence[float], direction: Sequence[float], radius: float, length: float
    ) -> "Tube":
        """Tube whose axis segment is centered at `point`."""
        p = np.asarray(point, dtype=float)
        axis = Line.from_point_direction(p, direction)
        t = float(np.dot(p - axis.base_arr, axis.dir_arr))
        return Tube(axis, radius, length, t)

    @property
    def direction(self) -> np.ndarray:
        return self.axis.dir_arr

    @property
    def t_range(self) -> tuple[float, float]:
        h = 0.5 * self.length
        return (self.t_center - h, self.t_center + h)

    @property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        t0, t1 = self.t_range
        return self.axis.point_at(t0), self.axis.point_at(t1)

    def axis_param(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x - self.axis.base_arr) @ self.axis.dir_arr

    def distance(self, x: np.ndarray) -> np.ndarray:
        """Distance from points to the axis *segment* (vectorized)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.clip(self.axis_param(x), *self.t_range)
        foot = self.axis.base_arr + t[:, None] * self.axis.dir_arr[None, :]
        return np.linalg.norm(x - foot, axis=1)

    def contains(self, x: np.ndarray, dilation: float = 1.0) -> np.ndarray:
        return self.distance(x) <= dilation * self.radius

    def dilate(self, k: float) -> "Tube":
        return Tube(self.axis, k * self.radius, self.length, self.t_center)

    def bounding_box(self, pad: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.endpoints
        r = self.radius + pad
        return np.minimum(a, b) - r, np.maximum(a, b) + r


@dataclass
class TubeSegmentation:
    """Axis segments of length radius/a tiling the tube; last may be shorter."""

    tube: Tube
    a: float
    boundaries: np.ndarray  # (k+1,) increasing axis parameters

    @staticmethod
    def build(tube: Tube, a: float) -> "TubeSegmentation":
        if not 0 < a <= 0.1:
            raise UsageError("transversality parameter a must lie in (0, 1/10]")
        seg = tube.radius / a
        t0, t1 = tube.t_range
        inner = np.arange(t0, t1, seg)
        bounds = np.append(inner, t1)
        return TubeSegmentation(tube, a, bounds)

    @property
    def segment_length(self) -> float:
        return self.tube.radius / self.a

    @property
    def num_segments(self) -> int:
        return len(self.boundaries) - 1

    def index_of(self, t: np.ndarray) -> np.ndarray:
        """Segment index per axis parameter (clipped to the tiled range)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.boundaries, t, side="right") - 1
        return np.clip(idx, 0, self.num_segments - 1)

    def check_tiling(self) -> None:
        lens = np.diff(self.boundaries)
        assert np.all(lens[:-1] >= self.segment_length - 1e-12)
        assert abs(float(lens.sum()) - self.tube.length) <= 1e-9 * self.tube.length


@dataclass
class TangencyReport:
    status: str                       # TANGENT | TRANSVERSE | DISJOINT
    witness_point: np.ndarray | None  # transverse: angle > threshold;
    witness_angle: float | None       # tangent: the max sampled angle
    threshold: float
    num_witnesses: int = 0


def _zero_samples_near_tube(
    p: Polynomial,
    tube: Tube,
    extra_box: tuple[np.ndarray, np.ndarray] | None,
    spacing: float,
) -> ZeroSetSample:
    lo, hi = tube.dilate(10.0).bounding_box(pad=spacing)
    if extra_box is not None:
        lo = np.maximum(lo, extra_box[0])
        hi = np.minimum(hi, extra_box[1])
    if np.any(hi <= lo):
        return ZeroSetSample(
            np.zeros((0, p.num_vars)), np.zeros(0), np.zeros(0), np.zeros(0, dtype=bool)
        )
    return sample_zero_set(p, (lo, hi), spacing)


def classify_tube(
    tube: Tube,
    p: Polynomial,
    ball: tuple[Sequence[float], float],
    angle_threshold: float,
    *,
    sample_spacing: float | None = None,
) -> TangencyReport:
    """Tangent/transverse/disjoint classification of a tube against Z(p).

    Disjoint: no sampled zero-set point lies within `radius` of the tube and
    inside the (radius-inflated) ball.  Otherwise witnesses are non-singular
    samples in 10T intersected with the doubled ball; the tube is TRANSVERSE
    when some witness angle exceeds the threshold and TANGENT when none does.
    Raises SingularOnlyError when witnesses exist but all are singular.
    """
    center = np.asarray(ball[0], dtype=float)
    r_ball = float(ball[1])
    if sample_spacing is None:
        sample_spacing = tube.radius / 2.0
    box = (center - 2.0 * r_ball, center + 2.0 * r_ball)
    s = _zero_samples_near_tube(p, tube, box, sample_spacing)
    if not len(s):
        return TangencyReport(DISJOINT, None, None, angle_threshold)
    d_tube = tube.distance(s.points)
    d_ball = np.linalg.norm(s.points - center, axis=1)
    meets = (d_tube <= tube.radius) & (d_ball <= r_ball + tube.radius)
    if not np.any(meets):
        return TangencyReport(DISJOINT, None, None, angle_threshold)
    witness = (d_tube <= 10.0 * tube.radius) & (d_ball <= 2.0 * r_ball)
    ok_witness = witness & s.nonsingular
    if not np.any(ok_witness):
        raise SingularOnlyError(
            "all zero-set witnesses near the tube are singular; perturb p"
        )
    angles, _ = angles_to_zero_set_many(p, s.points[ok_witness], tube.direction)
    i_max = int(np.argmax(angles))
    a_max = float(angles[i_max])
    n_wit = int(np.sum(ok_witness))
    if a_max > angle_threshold:
        return TangencyReport(
            TRANSVERSE, s.points[ok_witness][i_max], a_max, angle_threshold, n_wit
        )
    return TangencyReport(
        TANGENT, s.points[ok_witness][i_max], a_max, angle_threshold, n_wit
    )


def transverse_segment_count(
    tube: Tube,
    q: Polynomial,
    a: float,
    *,
    sample_spacing: float | None = None,
) -> int:
    """Occupied segments: pieces of length radius/a of the tube that contain
    a zero-set sample whose angle to the tube direction is at least a.

    Singular samples are discarded; if every in-tube sample is singular the
    SingularOnlyError asks the caller to perturb q first.
    """
    seg = TubeSegmentation.build(tube, a)
    if sample_spacing is None:
        sample_spacing = tube.radius / 2.0
    lo, hi = tube.bounding_box(pad=sample_spacing)
    s = sample_zero_set(q, (lo, hi), sample_spacing)
    if not len(s):
        return 0
    inside = tube.distance(s.points) <= tube.radius
    if not np.any(inside):
        return 0
    if not np.any(inside & s.nonsingular):
        raise SingularOnlyError("zero set inside the tube is singular everywhere")
    pts = s.points[inside & s.nonsingular]
    angles, _ = angles_to_zero_set_many(q, pts, tube.direction)
    steep = angles >= a
    if not np.any(steep):
        return 0
    t = tube.axis_param(pts[steep])
    return int(len(np.unique(seg.index_of(t))))


def cubes_meeting_zero_set(
    p: Polynomial,
    dims: Sequence[int],
    *,
    subsample: int = 3,
) -> np.ndarray:
    """Boolean mask over the dims[0] x ... x dims[n-1] grid of unit cubes:
    True where Z(p) meets the cube.

    A cube counts when p changes sign on its subsample^n corner lattice or
    dips below the degree-aware zero tolerance there.  Sampling-based, so the
    result is a lower bound plus a near-zero band; constructed families where
    the exact count is known are used to pin accuracy.
    """
    dims = [int(d) for d in dims]
    if len(dims) != p.num_vars:
        raise UsageError("dims arity must match the polynomial")
    if any(d < 1 for d in dims):
        raise UsageError("dims must be positive")
    m = int(subsample)
    if m < 2:
        raise UsageError("subsample must be >= 2")
    axes = [np.linspace(0.0, d, d * (m - 1) + 1) for d in dims]
    vals = p.eval_tensor_grid(axes)
    win = sliding_window_view(vals, (m,) * len(dims))
    step = (slice(None, None, m - 1),) * len(dims)
    win = win[step]
    red_axes = tuple(range(len(dims), 2 * len(dims)))
    vmin = win.min(axis=red_axes)
    vmax = win.max(axis=red_axes)
    corner = np.array([float(d) for d in dims])
    tol = float(p.zero_tolerance_at(corner)[0])
    return (vmin <= tol) & (vmax >= -tol)


def count_cubes_meeting_zero_set(
    p: Polynomial,
    dims: Sequence[int],
    *,
    subsample: int = 3,
) -> int:
    """Count of unit grid cubes meeting Z(p); see cubes_meeting_zero_set."""
    return int(np.count_nonzero(cubes_meeting_zero_set(p, dims, subsample=subsample)))


@dataclass
class CensusReport:
    """Outcome of a tangent-direction census over a tube family."""

    count: int                       # size of the greedy angle-separated set
    kept_indices: list[int]
    classifications: list[TangencyReport]
    threshold: float
    angle_sep: float

    @property
    def num_tangent(self) -> int:
        return sum(1 for r in self.classifications if r.status == TANGENT)


def direction_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Undirected angle between two unit directions, in [0, pi/2]."""
    return float(np.arccos(min(1.0, abs(float(np.dot(u, v))))))


def tangent_direction_census(
    tubes: Sequence[Tube],
    p: Polynomial,
    ball: tuple[Sequence[float], float],
    rho: float,
    length_scale: float,
    angle_sep: float,
    *,
    sample_spacing: float | None = None,
) -> CensusReport:
    """Classify every tube at threshold rho / length_scale, then greedily keep
    tangent tubes whose directions are pairwise at least angle_sep apart.

    The report's count is the census size; kept_indices and the per-tube
    classifications make the selection auditable.
    """
    if angle_sep <= 0:
        raise UsageError("angle_sep must be positive")
    threshold = rho / length_scale
    reports = [
        classify_tube(t, p, ball, threshold, sample_spacing=sample_spacing)
        for t in tubes
    ]
    kept: list[int] = []
    for i, (tube, rep) in enumerate(zip(tubes, reports)):
        if rep.status != TANGENT:
            continue
        if all(
            direction_angle(tube.direction, tubes[j].direction) >= angle_sep
            for j in kept
        ):
            kept.append(i)
    return CensusReport(len(kept), kept, reports, threshold, angle_sep)
