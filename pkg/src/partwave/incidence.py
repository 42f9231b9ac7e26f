"""Lines, rich points, and partitioned incidence counts with certificates.

A point is r-rich for a line family when at least r of the lines pass through
it.  The divide-and-conquer counter partitions space with a low-degree
polynomial, hands each open sign cell only the lines that cross it, counts
wall points (within the degree-aware zero tolerance of some factor) directly,
and recurses.  Every split node carries an exactly-checkable conservation
identity: rich points of the full family inside an open cell coincide with
rich points of the cell's own line family there, because all lines through an
interior point must enter the cell.  The emitted certificate tree records the
counts, the per-cell line budgets (each line meets at most deg P + 1 cells),
and the wall contribution, so a verifier can replay every identity without
rerunning the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import BisectionNotFound, ContainedInVariety, UsageError
from .partition import Partition, build_partition, line_cell_crossings
from .polynomials import Polynomial

# Intersection candidates closer than this merge into one rich point.
CLUSTER_TOL = 1e-8
# A line passes through a point when its distance is below this.
LINE_POINT_TOL = 1e-7


@dataclass(frozen=True)
class Line:
    """Line in R^n, canonical form: unit direction with positive leading
    nonzero coordinate, base point the foot of the perpendicular from 0."""

    base: tuple[float, ...]
    direction: tuple[float, ...]

    @staticmethod
    def through(p: Sequence[float], q: Sequence[float]) -> "Line":
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        d = q - p
        n = np.linalg.norm(d)
        if n < 1e-14:
            raise UsageError("two coincident points do not define a line")
        return Line.from_point_direction(p, d / n)

    @staticmethod
    def from_point_direction(p: Sequence[float], d: Sequence[float]) -> "Line":
        p = np.asarray(p, dtype=float)
        d = np.asarray(d, dtype=float)
        n = np.linalg.norm(d)
        if n < 1e-14:
            raise UsageError("zero direction")
        d = d / n
        for x in d:
            if abs(x) > 1e-12:
                if x < 0:
                    d = -d
                break
        base = p - np.dot(p, d) * d
        return Line(tuple(np.round(base, 12)), tuple(np.round(d, 12)))

    @property
    def base_arr(self) -> np.ndarray:
        return np.asarray(self.base)

    @property
    def dir_arr(self) -> np.ndarray:
        return np.asarray(self.direction)

    def point_at(self, t: float | np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.base_arr + np.multiply.outer(t, self.dir_arr)

    def distance_to(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        v = x - self.base_arr
        return float(np.linalg.norm(v - np.dot(v, self.dir_arr) * self.dir_arr))


def dedupe_lines(lines: Iterable[Line]) -> list[Line]:
    seen = set()
    out = []
    for ln in lines:
        key = (ln.base, ln.direction)
        if key not in seen:
            seen.add(key)
            out.append(ln)
    return out


def pair_intersection(a: Line, b: Line, tol: float = CLUSTER_TOL) -> np.ndarray | None:
    """Intersection point of two lines, or None when skew or parallel.

    The skew test is scale-aware: closest-approach coordinates of almost
    parallel pairs carry rounding proportional to their magnitude, while true
    skew gaps are O(1), so tol * (1 + |x|) separates the two cleanly.
    """
    d1, d2 = a.dir_arr, b.dir_arr
    p1, p2 = a.base_arr, b.base_arr
    dot = float(np.dot(d1, d2))
    denom = 1.0 - dot * dot
    if denom < 1e-16:
        return None  # parallel (coincident lines were deduped upstream)
    w = p2 - p1
    t1 = (np.dot(w, d1) - dot * np.dot(w, d2)) / denom
    t2 = (dot * np.dot(w, d1) - np.dot(w, d2)) / denom
    x1 = p1 + t1 * d1
    x2 = p2 + t2 * d2
    scale = 1.0 + float(np.linalg.norm(x1)) + float(np.linalg.norm(x2))
    if np.linalg.norm(x1 - x2) > tol * scale:
        return None  # skew
    return 0.5 * (x1 + x2)


@dataclass
class RichPointSet:
    points: np.ndarray                 # (M, n), lexicographically sorted
    multiplicities: np.ndarray         # (M,) number of lines through each
    line_indices: list[np.ndarray]     # per point, indices into the family

    def __len__(self) -> int:
        return len(self.points)


def rich_points(
    lines: Sequence[Line],
    r: int = 2,
    *,
    cluster_tol: float = CLUSTER_TOL,
    line_tol: float = LINE_POINT_TOL,
) -> RichPointSet:
    """All r-rich points of the family by pairwise intersection + clustering.

    O(L^2) pair candidates are merged with a union-find over cluster_tol
    neighbors, then every line within line_tol of a cluster mean is counted.
    """
    if r < 2:
        raise UsageError("richness threshold must be >= 2")
    lines = list(lines)
    cands = []
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            x = pair_intersection(lines[i], lines[j], tol=cluster_tol)
            if x is not None:
                cands.append(x)
    if not cands:
        n = len(lines[0].base) if lines else 3
        return RichPointSet(np.zeros((0, n)), np.zeros(0, dtype=int), [])
    cands = np.asarray(cands)
    tree = cKDTree(cands)
    parent = np.arange(len(cands))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in tree.query_pairs(cluster_tol):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
    groups: dict[int, list[int]] = {}
    for i in range(len(cands)):
        groups.setdefault(find(i), []).append(i)
    pts, mults, idxs = [], [], []
    for g in groups.values():
        center = cands[g].mean(axis=0)
        tol_here = line_tol * (1.0 + float(np.linalg.norm(center)))
        through = np.array(
            [k for k, ln in enumerate(lines) if ln.distance_to(center) <= tol_here],
            dtype=int,
        )
        if len(through) >= r:
            pts.append(center)
            mults.append(len(through))
            idxs.append(through)
    if not pts:
        n = cands.shape[1]
        return RichPointSet(np.zeros((0, n)), np.zeros(0, dtype=int), [])
    pts = np.asarray(pts)
    order = np.lexsort(pts.T[::-1])
    return RichPointSet(
        pts[order],
        np.asarray(mults, dtype=int)[order],
        [idxs[i] for i in order],
    )


# -- reference configurations -------------------------------------------------


def generate_configuration(
    kind: str, size: int, seed: int = 0
) -> tuple[list[Line], dict]:
    """Reference line families in R^3 with known rich-point structure.

    kind "planar":  `size` generic lines in the plane z = 0; every pair meets,
                    no three concurrent: C(size, 2) 2-rich points.
    kind "regulus": rulings of z = xy, size//2 from each family x=a and y=b;
                    each cross pair meets at (a, b, ab): (size//2)^2 points.
    kind "pencil":  `size` lines through one point: a single size-rich point.
    kind "grid":    axis-parallel lines of the size x size x size lattice
                    (3 size^2 lines): size^3 3-rich points.
    kind "random":  `size` generic lines: no rich points at all.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0x11C)))
    lines: list[Line] = []
    info: dict = {"kind": kind, "size": size, "seed": seed}
    if kind == "planar":
        # equally spaced direction angles with jitter: pairwise angle gaps of
        # order 1/size keep every intersection well conditioned, and random
        # intercepts rule out three concurrent lines
        span_ang = 0.9 * np.pi
        thetas = (np.arange(size) + 0.5) / size * span_ang - span_ang / 2
        thetas += rng.uniform(-0.2, 0.2, size) * span_ang / size
        inter = rng.uniform(-1, 1, size)
        for th, b in zip(thetas, inter):
            lines.append(
                Line.from_point_direction(
                    [-b * np.sin(th), b * np.cos(th), 0.0],
                    [np.cos(th), np.sin(th), 0.0],
                )
            )
        info["expected_rich"] = size * (size - 1) // 2
        info["richness"] = 2
    elif kind == "regulus":
        half = size // 2
        a_vals = rng.uniform(-1, 1, half)
        b_vals = rng.uniform(-1, 1, half)
        for a in a_vals:
            lines.append(
                Line.from_point_direction([float(a), 0.0, 0.0], [0.0, 1.0, float(a)])
            )
        for b in b_vals:
            lines.append(
                Line.from_point_direction([0.0, float(b), 0.0], [1.0, 0.0, float(b)])
            )
        info["expected_rich"] = half * half
        info["richness"] = 2
        info["surface"] = "z - x*y"
    elif kind == "pencil":
        apex = rng.uniform(-1, 1, 3)
        for _ in range(size):
            d = rng.normal(size=3)
            lines.append(Line.from_point_direction(apex, d))
        lines = dedupe_lines(lines)
        info["expected_rich"] = 1
        info["richness"] = 2
        info["apex"] = apex.tolist()
    elif kind == "pencils":
        # several pencils at scattered apexes: lines from different pencils
        # are generically skew, so the rich points are exactly the apexes,
        # and the family lies on no low-degree surface
        n_apex = max(2, size // 8)
        apexes = rng.uniform(-1, 1, size=(n_apex, 3)) * 2.0
        for i in range(size):
            d = rng.normal(size=3)
            lines.append(Line.from_point_direction(apexes[i % n_apex], d))
        lines = dedupe_lines(lines)
        info["expected_rich"] = n_apex
        info["richness"] = 2
        info["apexes"] = apexes.tolist()
    elif kind == "grid":
        k = size
        rr = range(k)
        for i in rr:
            for j in rr:
                lines.append(Line.from_point_direction([0.0, i, j], [1.0, 0.0, 0.0]))
                lines.append(Line.from_point_direction([i, 0.0, j], [0.0, 1.0, 0.0]))
                lines.append(Line.from_point_direction([i, j, 0.0], [0.0, 0.0, 1.0]))
        info["expected_rich"] = k**3
        info["richness"] = 3
        info["num_lines"] = 3 * k**2
    elif kind == "random":
        for _ in range(size):
            p = rng.uniform(-1, 1, 3)
            d = rng.normal(size=3)
            lines.append(Line.from_point_direction(p, d))
        info["expected_rich"] = 0
        info["richness"] = 2
    else:
        raise UsageError(f"unknown configuration kind {kind!r}")
    return lines, info


def line_in_surface(ln: Line, p: Polynomial, *, num_samples: int = 8) -> bool:
    """Whether the line lies inside Z(p): the univariate restriction of a
    degree-d polynomial vanishing at d+1 points vanishes identically."""
    deg = max(p.degree, 0)
    ts = np.linspace(-1.0, 1.0, max(num_samples, deg + 2))
    vals = p.eval_many(ln.point_at(ts))
    tol = p.zero_tolerance_at(ln.point_at(ts))
    return bool(np.all(np.abs(vals) <= tol * 10))


# -- partitioned counting with certificates -----------------------------------


@dataclass
class CertNode:
    """One node of the incidence certificate tree."""

    kind: str                       # "leaf" or "split"
    num_lines: int
    count: int                      # rich points inside this node's region
    depth: int
    reason: str = ""                # why a leaf stopped ("small", "depth", "no-shrink")
    partition_degree: int = 0
    wall_count: int = 0
    children: list[tuple[str, "CertNode"]] = field(default_factory=list)
    cell_line_counts: dict[str, int] = field(default_factory=dict)
    variety_line_count: int = 0

    def validate(self) -> None:
        """Replay the conservation identity and line budget at every split."""
        if self.kind == "split":
            total = self.wall_count + sum(c.count for _, c in self.children)
            assert total == self.count, (
                f"conservation broken: {self.count} != wall {self.wall_count} "
                f"+ cells {total - self.wall_count}"
            )
            crossings = sum(self.cell_line_counts.values())
            budget = (self.partition_degree + 1) * self.num_lines
            assert crossings <= budget, f"line budget broken: {crossings} > {budget}"
            for _, c in self.children:
                c.validate()

    def total_nodes(self) -> int:
        return 1 + sum(c.total_nodes() for _, c in self.children)

    def to_json_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "num_lines": self.num_lines,
            "count": self.count,
            "depth": self.depth,
        }
        if self.reason:
            d["reason"] = self.reason
        if self.kind == "split":
            d.update(
                partition_degree=self.partition_degree,
                wall_count=self.wall_count,
                variety_line_count=self.variety_line_count,
                cell_line_counts=self.cell_line_counts,
                children=[[k, c.to_json_dict()] for k, c in self.children],
            )
        return d


def _region_mask(pts: np.ndarray, region: list[tuple[Polynomial, int]]) -> np.ndarray:
    """Strict sign membership for accumulated cell constraints."""
    if not len(pts):
        return np.zeros(0, dtype=bool)
    mask = np.ones(len(pts), dtype=bool)
    for f, sgn in region:
        vals = f.eval_many(pts)
        tol = f.zero_tolerance_at(pts)
        if sgn > 0:
            mask &= vals > tol
        else:
            mask &= vals < -tol
    return mask


def _rich_in_region(
    lines: Sequence[Line], r: int, region: list[tuple[Polynomial, int]]
) -> int:
    rp = rich_points(lines, r)
    if not len(rp):
        return 0
    return int(np.sum(_region_mask(rp.points, region)))


def count_rich_points_partitioned(
    lines: Sequence[Line],
    r: int = 2,
    *,
    max_degree: int = 4,
    leaf_size: int = 12,
    max_depth: int = 4,
    samples_per_line: int = 24,
    seed: int = 0,
) -> tuple[int, CertNode]:
    """Count r-rich points by polynomial-partitioned divide and conquer.

    Returns (count, certificate).  The certificate's validate() replays every
    conservation identity; tests additionally compare the root count against
    the direct O(L^2) computation.
    """
    lines = dedupe_lines(lines)
    if not lines:
        return 0, CertNode("leaf", 0, 0, 0, reason="empty")
    # one bounding box for the whole recursion, from pair intersections
    rp_all = rich_points(lines, 2)
    if len(rp_all):
        span = float(np.max(np.abs(rp_all.points))) + 1.0
    else:
        span = float(max(np.max(np.abs(ln.base_arr)) for ln in lines)) + 1.0
    bbox = ([-span] * 3, [span] * 3)
    seq = np.random.SeedSequence(entropy=(seed, 0x1AC))

    def solve(
        fam: list[Line],
        region: list[tuple[Polynomial, int]],
        depth: int,
        node_seed: np.random.SeedSequence,
    ) -> CertNode:
        count = _rich_in_region(fam, r, region)
        if len(fam) <= leaf_size:
            return CertNode("leaf", len(fam), count, depth, reason="small")
        if depth >= max_depth:
            return CertNode("leaf", len(fam), count, depth, reason="depth")
        # proxy points: equal weight per line, sampled inside the box
        ts = np.linspace(-span, span, samples_per_line)
        proxy = np.concatenate([ln.point_at(ts) for ln in fam], axis=0)
        inside = np.all((proxy >= bbox[0][0]) & (proxy <= bbox[1][0]), axis=1)
        if region:
            inside &= _region_mask(proxy, region)
        proxy = proxy[inside]
        if len(proxy) < 10:
            return CertNode("leaf", len(fam), count, depth, reason="no-proxy")
        child_seeds = node_seed.spawn(1)[0]
        try:
            # Loose imbalance: cell balance only affects efficiency here, the
            # conservation identity is exact for any sign-cell decomposition.
            # Collinear proxy sets quantize achievable imbalance at 1/points.
            part = build_partition(
                proxy,
                max_degree,
                seed=int(child_seeds.generate_state(1)[0] % 2**31),
                max_imbalance=0.2,
            )
        except BisectionNotFound:
            return CertNode("leaf", len(fam), count, depth, reason="no-bisection")
        # route lines
        cell_lines: dict[str, list[Line]] = {}
        variety: list[Line] = []
        for ln in fam:
            try:
                cr = line_cell_crossings(part, ln.base_arr, ln.dir_arr, (-span * 2, span * 2))
            except ContainedInVariety:
                variety.append(ln)
                continue
            for key in cr.cells_met:
                cell_lines.setdefault(key, []).append(ln)
        # wall contribution: rich points of the full family within tolerance
        # of some factor (variety lines live there too)
        wall_count = 0
        rp = rich_points(fam, r)
        if len(rp):
            mask = _region_mask(rp.points, region)
            on_wall = np.zeros(len(rp.points), dtype=bool)
            for f in part.factors:
                vals = f.eval_many(rp.points)
                tol = f.zero_tolerance_at(rp.points)
                on_wall |= np.abs(vals) <= tol
            wall_count = int(np.sum(mask & on_wall))
        shrunk = any(len(v) < len(fam) for v in cell_lines.values()) or not cell_lines
        if not shrunk:
            return CertNode("leaf", len(fam), count, depth, reason="no-shrink")
        node = CertNode(
            "split",
            len(fam),
            count,
            depth,
            partition_degree=part.product_degree,
            wall_count=wall_count,
            cell_line_counts={k: len(v) for k, v in sorted(cell_lines.items())},
            variety_line_count=len(variety),
        )
        kid_seeds = node_seed.spawn(len(cell_lines))
        for ks, (key, fam_k) in zip(kid_seeds, sorted(cell_lines.items())):
            constraints = region + [
                (f, 1 if ch == "+" else -1)
                for f, ch in zip(part.factors, key)
            ]
            child = solve(fam_k, constraints, depth + 1, ks)
            node.children.append((key, child))
        return node

    root = solve(list(lines), [], 0, seq)
    root.validate()
    return root.count, root
