"""Graph surfaces over the unit disk and their cap decompositions.

A surface is the graph of a polynomial h on the closed unit disk,
subject to hard pinching conditions: h and its gradient vanish at the
origin, the sampled Hessian eigenvalues stay inside [1/2, 2], and all
derivatives of order 3 and up are negligible.  Extension fields and
wave packets are built over these surfaces.

Caps are axis-aligned square cells of the frequency plane.  Two sizes
matter: coarse tau caps with side 2/K, and fine theta caps with side
proportional to R^{-1/2}.  Both are exact partitions of the square
[-1, 1]^2 restricted to cells that meet the disk, so that splitting f
by caps never loses or double counts a sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import UsageError
from .polynomials import Polynomial

DISK_RADIUS = 1.0
HESSIAN_LO = 0.5
HESSIAN_HI = 2.0
HIGH_DERIV_LIMIT = 1e-9
CONDITION_GRID = 64


class ConditionsViolation(UsageError):
    """A surface failed one of the pinching conditions.

    Carries the name of the violated bound, the measured value and the
    allowed limit so callers can report exactly what broke.
    """

    def __init__(self, bound: str, value: float, limit: float):
        self.bound = bound
        self.value = value
        self.limit = limit
        super().__init__(f"surface condition {bound} violated: {value:.6g} vs limit {limit:.6g}")


@dataclass(frozen=True)
class ConditionsReport:
    """Measured derivative bounds for a graph surface."""

    hessian_min: float
    hessian_max: float
    high_deriv_max: float
    order: int

    def as_dict(self) -> dict:
        return {
            "hessian_min": self.hessian_min,
            "hessian_max": self.hessian_max,
            "high_deriv_max": self.high_deriv_max,
            "order": self.order,
        }


def _disk_sample_grid(n: int) -> np.ndarray:
    """Points of an n x n grid over [-1,1]^2 that lie in the closed disk."""
    ax = np.linspace(-1.0, 1.0, n)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return pts[np.hypot(pts[:, 0], pts[:, 1]) <= DISK_RADIUS]


def verify_conditions(h: Polynomial, order: int = 4, grid_n: int = CONDITION_GRID,
                      slack: float = 1.0) -> ConditionsReport:
    """Check the pinching conditions for h on the unit disk.

    Conditions: h(0) = 0 and grad h(0) = 0; Hessian eigenvalues sampled
    on a grid_n x grid_n grid stay within [1/2, 2]; every derivative of
    order 3..order is bounded by HIGH_DERIV_LIMIT * (1 + slack).  The
    paraboloid satisfies all of these exactly.  Raises
    ConditionsViolation naming the first bound that fails.
    """
    if h.num_vars != 2:
        raise UsageError("surface height function must have 2 variables")
    scale = max(h.coeff_scale(), 1.0)
    origin = np.zeros((1, 2))
    h0 = float(h.eval_many(origin)[0])
    if abs(h0) > 1e-12 * scale:
        raise ConditionsViolation("h_at_origin", abs(h0), 1e-12 * scale)
    hx = h.derivative(0)
    hy = h.derivative(1)
    g0 = math.hypot(float(hx.eval_many(origin)[0]), float(hy.eval_many(origin)[0]))
    if g0 > 1e-12 * scale:
        raise ConditionsViolation("grad_at_origin", g0, 1e-12 * scale)

    pts = _disk_sample_grid(grid_n)
    hxx_p = hx.derivative(0)
    hxy_p = hx.derivative(1)
    hyy_p = hy.derivative(1)
    hxx = hxx_p.eval_many(pts)
    hxy = hxy_p.eval_many(pts)
    hyy = hyy_p.eval_many(pts)
    mean = 0.5 * (hxx + hyy)
    # eigenvalues of a symmetric 2x2 matrix in closed form
    spread = np.sqrt((0.5 * (hxx - hyy)) ** 2 + hxy ** 2)
    lo = float(np.min(mean - spread))
    hi = float(np.max(mean + spread))
    eps = 1e-12 * scale
    if lo < HESSIAN_LO - eps:
        raise ConditionsViolation("hessian_min", lo, HESSIAN_LO)
    if hi > HESSIAN_HI + eps:
        raise ConditionsViolation("hessian_max", hi, HESSIAN_HI)

    limit = HIGH_DERIV_LIMIT * (1.0 + slack)
    worst = 0.0
    frontier = [hxx_p, hxy_p, hyy_p]  # all order-2 derivatives, hxy == hyx
    for _ in range(3, order + 1):
        nxt = []
        for p in frontier:
            for var in range(2):
                nxt.append(p.derivative(var))
        # drop duplicates by keeping every mixed pattern; cheap at low order
        frontier = nxt
        for p in frontier:
            if p.is_zero:
                continue
            worst = max(worst, float(np.max(np.abs(p.eval_many(pts)))))
    if worst > limit:
        raise ConditionsViolation("high_deriv_max", worst, limit)
    return ConditionsReport(hessian_min=lo, hessian_max=hi, high_deriv_max=worst, order=order)


@dataclass(frozen=True)
class SurfaceSpec:
    """Graph surface omega3 = h(omega1, omega2) over the unit disk."""

    h: Polynomial
    order: int
    report: ConditionsReport
    name: str = "surface"

    @staticmethod
    def build(h: Polynomial, order: int = 4, name: str = "surface",
              slack: float = 1.0) -> "SurfaceSpec":
        report = verify_conditions(h, order=order, slack=slack)
        return SurfaceSpec(h=h, order=order, report=report, name=name)

    @staticmethod
    def build_unchecked(h: Polynomial, order: int = 4, name: str = "surface") -> "SurfaceSpec":
        """Construct without verification.  Only for exercising error paths."""
        report = ConditionsReport(float("nan"), float("nan"), float("nan"), order)
        return SurfaceSpec(h=h, order=order, report=report, name=name)

    def h_at(self, pts: np.ndarray) -> np.ndarray:
        return self.h.eval_many(np.asarray(pts, dtype=float))

    def h_grid(self, ax1: np.ndarray, ax2: np.ndarray) -> np.ndarray:
        return self.h.eval_tensor_grid([np.asarray(ax1, float), np.asarray(ax2, float)])

    def grad_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        gx = self.h.derivative(0).eval_many(pts)
        gy = self.h.derivative(1).eval_many(pts)
        return np.column_stack([gx, gy])

    def grad_grid(self, ax1: np.ndarray, ax2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a1 = np.asarray(ax1, float)
        a2 = np.asarray(ax2, float)
        return (self.h.derivative(0).eval_tensor_grid([a1, a2]),
                self.h.derivative(1).eval_tensor_grid([a1, a2]))

    def jacobian_grid(self, ax1: np.ndarray, ax2: np.ndarray) -> np.ndarray:
        """Area weight (1 + |grad h|^2)^(1/2) on a tensor grid."""
        gx, gy = self.grad_grid(ax1, ax2)
        return np.sqrt(1.0 + gx * gx + gy * gy)

    def jacobian_at(self, pts: np.ndarray) -> np.ndarray:
        g = self.grad_at(pts)
        return np.sqrt(1.0 + np.sum(g * g, axis=1))

    def normal_at(self, pts: np.ndarray) -> np.ndarray:
        """Unit upward normal (-grad h, 1) / J at each 2d point."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        g = self.grad_at(pts)
        j = np.sqrt(1.0 + np.sum(g * g, axis=1))
        return np.column_stack([-g[:, 0] / j, -g[:, 1] / j, 1.0 / j])


def paraboloid(order: int = 4) -> SurfaceSpec:
    """The model surface h = |omega|^2.  Hessian is exactly 2I."""
    w1 = Polynomial.variable(0, 2)
    w2 = Polynomial.variable(1, 2)
    return SurfaceSpec.build(w1 * w1 + w2 * w2, order=order, name="paraboloid")


def perturbed_paraboloid(seed: int = 0, magnitude: float = 1e-10, order: int = 4) -> SurfaceSpec:
    """Paraboloid plus a tiny random cubic and quartic form.

    The perturbation keeps every condition satisfied: the Hessian moves
    by at most a few times magnitude and the high derivatives stay
    below their limit.
    """
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x5F)))
    w1 = Polynomial.variable(0, 2)
    w2 = Polynomial.variable(1, 2)
    # back the quadratic part off the eigenvalue boundary so the cubic
    # perturbation cannot push the Hessian past 2
    h = Polynomial.constant(1.0 - 1e-6, 2) * (w1 * w1 + w2 * w2)
    cubes = [w1 * w1 * w1, w1 * w1 * w2, w1 * w2 * w2, w2 * w2 * w2]
    for mono in cubes:
        h = h + Polynomial.constant(float(rng.uniform(-magnitude, magnitude)), 2) * mono
    quart = (w1 * w1) * (w2 * w2)
    h = h + Polynomial.constant(float(rng.uniform(-magnitude, magnitude)), 2) * quart
    return SurfaceSpec.build(h, order=order, name=f"perturbed-{seed}")


@dataclass(frozen=True)
class Cap:
    """Square frequency cell: center, halfwidth, grid index."""

    center: tuple[float, float]
    halfwidth: float
    index: tuple[int, int]

    @property
    def side(self) -> float:
        return 2.0 * self.halfwidth

    @property
    def radius(self) -> float:
        # covering radius of the cell, the half diagonal
        return self.halfwidth * math.sqrt(2.0)

    def contains(self, omega: np.ndarray, scale: float = 1.0) -> np.ndarray:
        """Half-open membership test, scaled cell (scale=2 gives 2theta)."""
        omega = np.atleast_2d(np.asarray(omega, float))
        w = self.halfwidth * scale
        d1 = omega[:, 0] - self.center[0]
        d2 = omega[:, 1] - self.center[1]
        return (d1 >= -w) & (d1 < w) & (d2 >= -w) & (d2 < w)


class CellPartition:
    """n x n square cells tiling [-1,1]^2, restricted to cells meeting the disk."""

    def __init__(self, n: int):
        if n < 1:
            raise UsageError("cell partition needs n >= 1")
        self.n = n
        self.side = 2.0 / n
        caps = []
        lookup = {}
        for i in range(n):
            for j in range(n):
                c1 = -1.0 + (i + 0.5) * self.side
                c2 = -1.0 + (j + 0.5) * self.side
                # closest point of the closed cell to the origin
                q1 = float(np.clip(0.0, c1 - self.side / 2, c1 + self.side / 2))
                q2 = float(np.clip(0.0, c2 - self.side / 2, c2 + self.side / 2))
                if math.hypot(q1, q2) <= DISK_RADIUS:
                    lookup[(i, j)] = len(caps)
                    caps.append(Cap(center=(c1, c2), halfwidth=self.side / 2, index=(i, j)))
        self.caps = caps
        self._lookup = lookup
        table = np.full((n, n), -1, dtype=int)
        for (i, j), pos in lookup.items():
            table[i, j] = pos
        self._table = table

    def __len__(self) -> int:
        return len(self.caps)

    def cell_index(self, omega: np.ndarray) -> np.ndarray:
        """Position of each point's cell in .caps, or -1 if the cell was dropped."""
        omega = np.atleast_2d(np.asarray(omega, float))
        ij = np.floor((omega + 1.0) / self.side).astype(int)
        ij = np.clip(ij, 0, self.n - 1)
        return self._table[ij[:, 0], ij[:, 1]]


@dataclass(frozen=True)
class CapGrid:
    """Coarse tau caps (side 2/K) and fine theta caps (side ~ c R^{-1/2})."""

    R: float
    K: int
    mu: float
    tau: CellPartition
    theta: CellPartition

    @property
    def tau_caps(self) -> list:
        return self.tau.caps

    @property
    def theta_caps(self) -> list:
        return self.theta.caps


def build_cap_grid(R: float, K: int, c_theta: float = 1.5) -> CapGrid:
    """Build both cap partitions for ball radius R and coarse parameter K.

    Tau cells have side 2/K, so centers are 2/K >= 1/K separated and the
    covering radius sqrt(2)/K sits inside [1/K, sqrt(mu)/K] with mu = 2.
    Theta cells have side c_theta * R^(-1/2) rounded to an exact tiling.
    """
    if K < 2:
        raise UsageError("need K >= 2")
    if R < 4:
        raise UsageError("need R >= 4")
    tau = CellPartition(K)
    n_theta = max(2, math.ceil(2.0 / (c_theta * R ** -0.5)))
    theta = CellPartition(n_theta)
    return CapGrid(R=float(R), K=int(K), mu=2.0, tau=tau, theta=theta)
