"""Constructive polynomial partitioning for weighted point sets in R^2 / R^3.

The builder follows the iterated ham-sandwich scheme: at step k a polynomial
of degree D_k simultaneously bisects (in weight) every nonempty sign cell of
the previous steps.  The schedule picks D_k as the smallest degree whose
monomial space can bisect 2^(k-1) sets and packs as many steps as fit under
the degree budget, so the product polynomial has degree sum(D_k) <= D and at
most 2^s sign cells, each carrying at most ((1+delta)/2)^s of the weight when
every bisection achieves imbalance <= delta.

Bisections are found numerically: lift points through the Veronese map
(all monomials of degree <= D_k, constant included), then run an annealed
tanh-smoothed subgradient descent over unit coefficient vectors, warm-started
from the null space of the first-moment matrix.  The returned imbalance is
always re-verified with exact sign counts; a cell is "on the wall" (excluded
from both sides) when |P| falls below the degree-aware zero tolerance.

Cells here are sign vectors in {+,-}^s, one symbol per factor.  A connected
component of the complement of Z(P) never straddles two sign vectors, so the
per-cell weight bound for sign cells implies the same bound for components.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BisectionNotFound, ContainedInVariety, UsageError
from .polynomials import (
    Polynomial,
    monomial_exponents,
    poly_space_dim,
    univariate_real_roots,
)

# Default per-bisection imbalance target (fraction of set weight).
DEFAULT_IMBALANCE = 0.05


def degree_schedule(num_vars: int, max_degree: int) -> list[int]:
    """Degrees [D_1..D_s]: D_k just large enough to bisect 2^(k-1) sets,
    s maximal with sum <= max_degree."""
    if max_degree < 1:
        raise UsageError("max_degree must be >= 1")
    degrees: list[int] = []
    used = 0
    k = 1
    while True:
        need = 2 ** (k - 1)
        d = 1
        while poly_space_dim(num_vars, d) - 1 < need:
            d += 1
        if used + d > max_degree:
            break
        degrees.append(d)
        used += d
        k += 1
    if not degrees:
        raise UsageError(f"degree budget {max_degree} admits no bisection step")
    return degrees


def max_cell_fraction(num_steps: int, imbalance: float) -> float:
    """Guaranteed weight fraction per sign cell after num_steps bisections."""
    return ((1.0 + imbalance) / 2.0) ** num_steps


@dataclass
class WeightedPointSet:
    points: np.ndarray   # (N, n)
    weights: np.ndarray  # (N,) positive

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.weights is None:
            self.weights = np.ones(len(self.points))
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.weights) != len(self.points):
            raise UsageError("weights length does not match points")
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise UsageError("weights must be positive and finite")

    @property
    def num_vars(self) -> int:
        return self.points.shape[1]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return len(self.points)


def signs_with_wall(p: Polynomial, points: np.ndarray) -> np.ndarray:
    """Per-point sign in {-1, 0, +1}; 0 means within the wall tolerance."""
    vals = p.eval_many(points)
    tol = p.zero_tolerance_at(points)
    out = np.sign(vals).astype(np.int8)
    out[np.abs(vals) <= tol] = 0
    return out


def set_imbalance(p: Polynomial, pset: WeightedPointSet) -> float:
    """|w(+) - w(-)| / (w(+) + w(-)); wall points count toward neither side.

    The off-wall denominator is what makes the iterated cell bound compose:
    each side then carries at most (1+imb)/2 of the off-wall weight, so s
    steps give ((1+imb)/2)^s of the total off-wall weight.
    """
    s = signs_with_wall(p, pset.points)
    w = pset.weights
    plus = float(w[s > 0].sum())
    minus = float(w[s < 0].sum())
    off_wall = plus + minus
    if off_wall == 0.0:
        return 0.0
    return abs(plus - minus) / off_wall


def ham_sandwich(
    sets: Sequence[WeightedPointSet],
    degree: int,
    seed: int | np.random.Generator = 0,
    *,
    max_imbalance: float = DEFAULT_IMBALANCE,
    restarts: int = 8,
    iters: int = 300,
) -> Polynomial:
    """Find a degree <= `degree` polynomial whose zero set simultaneously
    bisects every weighted set to within max_imbalance.

    Requires dim of the monomial space minus 1 to be at least len(sets) (the
    ham-sandwich capacity).  Raises BisectionNotFound when no restart reaches
    the target; the best achieved imbalance is attached to the error.
    """
    if not sets:
        raise UsageError("need at least one point set")
    num_vars = sets[0].num_vars
    if any(s.num_vars != num_vars for s in sets):
        raise UsageError("point sets live in different dimensions")
    capacity = poly_space_dim(num_vars, degree) - 1
    if capacity < len(sets):
        raise UsageError(
            f"degree {degree} bisects at most {capacity} sets, got {len(sets)}"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    exps = monomial_exponents(num_vars, degree)
    dim = len(exps)
    pts = np.concatenate([s.points for s in sets], axis=0)
    wts = np.concatenate([s.weights for s in sets])
    offsets = np.cumsum([0] + [len(s) for s in sets])
    set_w = np.array([s.total_weight for s in sets])
    n_sets = len(sets)

    # Design matrix of the Veronese lift, column-scaled to unit rms so the
    # optimizer sees an O(1) problem at every degree.
    V = np.empty((len(pts), dim))
    for j, e in enumerate(exps):
        col = np.ones(len(pts))
        for i, ei in enumerate(e):
            if ei:
                col = col * pts[:, i] ** ei
        V[:, j] = col
    col_scale = np.sqrt(np.mean(V**2, axis=0)) + 1e-30
    Vn = V / col_scale

    # Membership matrix rows: weighted indicator of each set (for fast sums).
    W = np.zeros((n_sets, len(pts)))
    for k in range(n_sets):
        W[k, offsets[k] : offsets[k + 1]] = wts[offsets[k] : offsets[k + 1]]
    Wn = W / set_w[:, None]

    # First-moment matrix: c in its null space zeroes every set's weighted
    # mean of the lifted coordinates, a strong warm start.
    A = Wn @ Vn
    _, _, vt = np.linalg.svd(A, full_matrices=True)
    null_basis = vt[n_sets:]  # (dim - n_sets, dim), orthonormal

    def exact_imbalances(c: np.ndarray) -> np.ndarray:
        coeffs = c / col_scale
        p = Polynomial.from_coeff_vector(coeffs, exps, num_vars)
        vals = V @ coeffs
        tol = p.zero_tolerance_at(pts)
        s = np.sign(vals)
        s[np.abs(vals) <= tol] = 0.0
        off_wall = W @ np.abs(s)
        return np.abs(W @ s) / np.maximum(off_wall, 1e-300)

    best_c = None
    best_imb = np.inf
    for r in range(restarts):
        if len(null_basis) and r % 2 == 0:
            mix = rng.normal(size=len(null_basis))
            c = null_basis.T @ mix
        else:
            c = rng.normal(size=dim)
        c /= np.linalg.norm(c)
        # Phase 1: annealed smooth descent on the sum of squared set sums.
        lr = 0.2
        for it in range(iters):
            beta = (0.02) ** (it / max(iters - 1, 1))
            u = Vn @ c
            rms = float(np.sqrt(np.mean(u**2))) + 1e-30
            t = np.tanh(u / (beta * rms))
            sums = Wn @ t
            sech2 = (1.0 - t**2) / (beta * rms)
            g = Vn.T @ ((Wn.T @ sums) * sech2)
            gn = np.linalg.norm(g)
            if gn > 0:
                c = c - lr * g / gn
                c /= np.linalg.norm(c)
            lr *= 0.99
            if it % 10 == 9 or it == iters - 1:
                imb = float(np.max(exact_imbalances(c)))
                if imb < best_imb:
                    best_imb = imb
                    best_c = c.copy()
                if best_imb <= max_imbalance:
                    break
        if best_imb <= max_imbalance:
            break
        # Phase 2: stochastic polish directly on the exact imbalances.
        c = best_c.copy()
        imb = best_imb
        for j in range(2 * iters):
            sigma = 0.08 * 0.985**j
            c2 = c + sigma * rng.normal(size=dim)
            c2 /= np.linalg.norm(c2)
            imb2 = float(np.max(exact_imbalances(c2)))
            if imb2 < imb:
                c, imb = c2, imb2
                if imb < best_imb:
                    best_imb, best_c = imb, c.copy()
                if imb <= max_imbalance:
                    break
        if best_imb <= max_imbalance:
            break
    if best_c is None or best_imb > max_imbalance:
        raise BisectionNotFound(best_imb, max_imbalance)
    coeffs = best_c / col_scale
    # Normalize so the largest coefficient is 1: keeps wall tolerances sane.
    p = Polynomial.from_coeff_vector(coeffs, exps, num_vars)
    return p.scale(1.0 / p.coeff_scale())


@dataclass
class Partition:
    """Product partition P = P_1 ... P_s with sign-vector cells."""

    num_vars: int
    factors: list[Polynomial]
    degrees: list[int]
    achieved_imbalance: list[float]
    cells: dict[str, np.ndarray]      # sign string -> indices into the input
    wall: np.ndarray                  # indices on some Z(P_k)
    points: np.ndarray
    weights: np.ndarray
    target_imbalance: float = DEFAULT_IMBALANCE

    @property
    def num_steps(self) -> int:
        return len(self.factors)

    @property
    def product(self) -> Polynomial:
        out = Polynomial.constant(1.0, self.num_vars)
        for f in self.factors:
            out = out * f
        return out

    @property
    def product_degree(self) -> int:
        return sum(f.degree for f in self.factors)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def off_wall_weight(self) -> float:
        return self.total_weight - float(self.weights[self.wall].sum())

    def cell_weight(self, key: str) -> float:
        return float(self.weights[self.cells[key]].sum())

    def max_cell_weight(self) -> float:
        return max((self.cell_weight(k) for k in self.cells), default=0.0)

    def guaranteed_fraction(self) -> float:
        return max_cell_fraction(self.num_steps, self.target_imbalance)

    def sign_vectors(self, pts: np.ndarray) -> list[str]:
        """Sign string per query point; '0' marks a wall coordinate."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        cols = [signs_with_wall(f, pts) for f in self.factors]
        table = {1: "+", -1: "-", 0: "0"}
        return ["".join(table[int(c[i])] for c in cols) for i in range(len(pts))]

    def cell_of(self, pt: np.ndarray) -> str:
        return self.sign_vectors(np.atleast_2d(pt))[0]

    def check_invariants(self) -> None:
        n = len(self.points)
        idx = [self.wall] + [self.cells[k] for k in self.cells]
        allidx = np.concatenate([np.asarray(a, dtype=int) for a in idx]) if idx else np.array([], int)
        assert len(allidx) == n and len(np.unique(allidx)) == n, "cells+wall must partition the input"
        assert len(self.cells) <= 2**self.num_steps
        bound = self.guaranteed_fraction() * self.off_wall_weight
        assert self.max_cell_weight() <= bound + 1e-9 * self.total_weight


def build_partition(
    points: np.ndarray,
    max_degree: int,
    *,
    weights: np.ndarray | None = None,
    seed: int = 0,
    max_imbalance: float = DEFAULT_IMBALANCE,
    restarts: int = 8,
    iters: int = 300,
) -> Partition:
    """Iterated simultaneous bisection up to the degree budget.

    Deterministic for fixed (points, weights, max_degree, seed).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[1]
    if weights is None:
        weights = np.ones(len(points))
    weights = np.asarray(weights, dtype=float).reshape(-1)
    base = WeightedPointSet(points, weights)  # validates

    schedule = degree_schedule(n, max_degree)
    labels = [""] * len(points)
    on_wall = np.zeros(len(points), dtype=bool)
    factors: list[Polynomial] = []
    achieved: list[float] = []
    root_seq = np.random.SeedSequence(entropy=(seed, 0x9A2))
    step_seeds = root_seq.spawn(len(schedule))

    for k, deg in enumerate(schedule):
        groups: dict[str, list[int]] = {}
        for i in range(len(points)):
            if not on_wall[i]:
                groups.setdefault(labels[i], []).append(i)
        keys = sorted(groups)
        sets = [
            WeightedPointSet(points[groups[key]], weights[groups[key]]) for key in keys
        ]
        if not sets:
            break
        rng = np.random.default_rng(step_seeds[k])
        f = ham_sandwich(
            sets,
            deg,
            rng,
            max_imbalance=max_imbalance,
            restarts=restarts,
            iters=iters,
        )
        factors.append(f)
        achieved.append(max(set_imbalance(f, s) for s in sets))
        s_all = signs_with_wall(f, points)
        for i in range(len(points)):
            if on_wall[i]:
                continue
            if s_all[i] == 0:
                on_wall[i] = True
            else:
                labels[i] += "+" if s_all[i] > 0 else "-"

    cells: dict[str, list[int]] = {}
    for i in range(len(points)):
        if not on_wall[i]:
            cells.setdefault(labels[i], []).append(i)
    part = Partition(
        num_vars=n,
        factors=factors,
        degrees=[f.degree for f in factors],
        achieved_imbalance=achieved,
        cells={k: np.asarray(v, dtype=int) for k, v in sorted(cells.items())},
        wall=np.flatnonzero(on_wall),
        points=points,
        weights=weights,
        target_imbalance=max_imbalance,
    )
    part.check_invariants()
    return part


@dataclass
class LineCrossing:
    """How a line t -> base + t*dir traverses the sign cells of a partition."""

    ts: np.ndarray                 # sorted crossing parameters (factor roots)
    segment_midpoints: np.ndarray  # one parameter inside each open segment
    segment_cells: list[str]       # sign vector per segment
    cells_met: list[str]           # distinct wall-free sign vectors, in order

    @property
    def num_segments(self) -> int:
        return len(self.segment_cells)


def line_cell_crossings(
    partition: Partition,
    base: np.ndarray,
    direction: np.ndarray,
    t_range: tuple[float, float] = (-1e3, 1e3),
) -> LineCrossing:
    """Cells met by a line: factor roots split the parameter range, one sign
    vector per open segment.  The segment count is at most product_degree + 1.

    Raises ContainedInVariety(k) when the line lies inside Z(P_k); the caller
    (the incidence recursion) routes such lines to the variety branch.
    """
    base = np.asarray(base, dtype=float)
    direction = np.asarray(direction, dtype=float)
    t0, t1 = t_range
    roots_all: list[np.ndarray] = []
    line_scale = max(1.0, float(np.linalg.norm(base)) + float(np.linalg.norm(direction)))
    for k, f in enumerate(partition.factors):
        u = f.restrict_to_line(base, direction)
        if u.coeff_scale() <= 1e-10 * f.coeff_scale() * line_scale ** f.degree:
            raise ContainedInVariety(k)
        r = univariate_real_roots(u, cluster_tol=1e-12 * line_scale)
        roots_all.append(r[(r > t0) & (r < t1)])
    ts = np.sort(np.concatenate(roots_all)) if roots_all else np.array([])
    cuts = np.concatenate([[t0], ts, [t1]])
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    pts = base[None, :] + mids[:, None] * direction[None, :]
    # Pure signs here, not wall-tolerant ones: a segment interior has constant
    # exact sign, and dropping a segment over a near-wall midpoint would lose
    # a cell from the crossing list and break conservation in the recursion.
    table = {1: "+", -1: "-", 0: "0"}
    sign_cols = [np.sign(f.eval_many(pts)) for f in partition.factors]
    segment_cells = [
        "".join(table[int(col[i])] for col in sign_cols) for i in range(len(pts))
    ]
    cells_met: list[str] = []
    for c in segment_cells:
        if "0" not in c and c not in cells_met:
            cells_met.append(c)
    return LineCrossing(
        ts=ts,
        segment_midpoints=mids,
        segment_cells=segment_cells,
        cells_met=cells_met,
    )
