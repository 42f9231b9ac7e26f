"""Dense multivariate polynomials over R^n (n <= 3) with exact degree bookkeeping.

Representation: a mapping from exponent tuples to float coefficients, with
exactly-zero coefficients dropped on construction so the zero polynomial is
the empty map and ``degree`` is always exact.  Evaluation is Horner-style per
variable for stability; tests cross-check against independent term-by-term
summation.

This module also houses the differential-geometric predicates built from
gradients (angle to a zero set, critical-angle and tangency polynomials), the
Newton-projection zero-set sampler, and the random-shift non-singularity
perturbation.  Everything downstream (partitioning, incidence certificates,
tube classification) consumes these primitives.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from itertools import product as iter_product
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import PerturbationFailed, SingularPointError, UsageError

Exponent = tuple[int, ...]
CoeffMap = dict[Exponent, float]

# Singularity floor scale: |grad p| >= SINGULAR_FLOOR_REL * (1 + max |coeff|).
SINGULAR_FLOOR_REL = 1e-8
# Wall / zero tolerance scale: |p(x)| < WALL_TOL_REL * coeff_scale * (1+|x|)^deg.
WALL_TOL_REL = 1e-9
# Unit vectors must have Euclidean norm within this of 1.
UNIT_NORM_TOL = 1e-12
# Default magnitude for the non-singularity shift.
DEFAULT_PERTURB_MAGNITUDE = 1e-6


def monomial_exponents(num_vars: int, max_degree: int) -> list[Exponent]:
    """All exponent tuples with total degree <= max_degree, graded-lex sorted."""
    exps = [
        e
        for e in iter_product(range(max_degree + 1), repeat=num_vars)
        if sum(e) <= max_degree
    ]
    exps.sort(key=lambda e: (sum(e), e))
    return exps


def poly_space_dim(num_vars: int, degree: int) -> int:
    """dim of polynomials of degree <= degree in num_vars variables."""
    return math.comb(degree + num_vars, num_vars)


class Polynomial:
    """Immutable-by-convention dense polynomial in 1..3 variables."""

    __slots__ = ("num_vars", "coeffs", "_nested")

    def __init__(self, num_vars: int, coeffs: Mapping[Exponent, float]):
        if num_vars not in (1, 2, 3):
            raise UsageError(f"num_vars must be 1, 2, or 3, got {num_vars}")
        clean: CoeffMap = {}
        for exp, c in coeffs.items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != num_vars:
                raise UsageError(f"exponent {exp} has wrong arity for {num_vars} vars")
            if any(e < 0 for e in exp):
                raise UsageError(f"negative exponent in {exp}")
            c = float(c)
            if c != 0.0:
                clean[exp] = clean.get(exp, 0.0) + c
                if clean[exp] == 0.0:
                    del clean[exp]
        self.num_vars = num_vars
        self.coeffs = clean
        self._nested = None

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero(num_vars: int) -> "Polynomial":
        return Polynomial(num_vars, {})

    @staticmethod
    def constant(value: float, num_vars: int) -> "Polynomial":
        return Polynomial(num_vars, {(0,) * num_vars: value})

    @staticmethod
    def variable(index: int, num_vars: int) -> "Polynomial":
        if not 0 <= index < num_vars:
            raise UsageError(f"variable index {index} out of range for {num_vars} vars")
        exp = tuple(1 if i == index else 0 for i in range(num_vars))
        return Polynomial(num_vars, {exp: 1.0})

    @staticmethod
    def from_coeff_vector(
        coeff: Sequence[float], exponents: Sequence[Exponent], num_vars: int
    ) -> "Polynomial":
        return Polynomial(num_vars, dict(zip(map(tuple, exponents), coeff)))

    # -- basic properties ----------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def degree(self) -> int:
        """Exact total degree; the zero polynomial reports -1."""
        if not self.coeffs:
            return -1
        return max(sum(e) for e in self.coeffs)

    def coeff_scale(self) -> float:
        """max |coefficient|, 0 for the zero polynomial."""
        if not self.coeffs:
            return 0.0
        return max(abs(c) for c in self.coeffs.values())

    def singular_floor(self) -> float:
        """Gradient-norm floor below which a point counts as singular."""
        return SINGULAR_FLOOR_REL * (1.0 + self.coeff_scale())

    def zero_tolerance_at(self, x: np.ndarray) -> np.ndarray:
        """Degree-aware |p(x)| tolerance: rel * scale * (1+|x|)^deg."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        deg = max(self.degree, 0)
        r = np.linalg.norm(x, axis=-1)
        return WALL_TOL_REL * max(self.coeff_scale(), 1e-300) * (1.0 + r) ** deg

    # -- arithmetic ----------------------------------------------------------

    def _binary_check(self, other: "Polynomial") -> None:
        if self.num_vars != other.num_vars:
            raise UsageError("polynomials have different variable counts")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._binary_check(other)
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, 0.0) + c
        return Polynomial(self.num_vars, out)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.num_vars, {e: -c for e, c in self.coeffs.items()})

    def scale(self, a: float) -> "Polynomial":
        return Polynomial(self.num_vars, {e: a * c for e, c in self.coeffs.items()})

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        self._binary_check(other)
        out: CoeffMap = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        result = Polynomial(self.num_vars, out)
        if not self.is_zero and not other.is_zero:
            if result.degree != self.degree + other.degree:
                # Leading forms cancelled (measure-zero over random inputs).
                warnings.warn(
                    "degree dropped under multiplication: "
                    f"{self.degree}+{other.degree} -> {result.degree}",
                    RuntimeWarning,
                    stacklevel=2,
                )
        return result

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise UsageError("negative power")
        out = Polynomial.constant(1.0, self.num_vars)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.num_vars == other.num_vars
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.num_vars, tuple(sorted(self.coeffs.items()))))

    def allclose(self, other: "Polynomial", rtol: float = 1e-9, atol: float = 1e-12) -> bool:
        self._binary_check(other)
        keys = set(self.coeffs) | set(other.coeffs)
        sc = max(self.coeff_scale(), other.coeff_scale(), 1e-300)
        return all(
            abs(self.coeffs.get(k, 0.0) - other.coeffs.get(k, 0.0)) <= atol + rtol * sc
            for k in keys
        )

    # -- evaluation ----------------------------------------------------------

    def _build_nested(self):
        """Group terms by leading-variable exponent for per-variable Horner."""

        def build(items: list[tuple[Exponent, float]], var: int):
            if var == self.num_vars - 1:
                groups: dict[int, float] = {}
                for e, c in items:
                    groups[e[var]] = groups.get(e[var], 0.0) + c
                return sorted(groups.items(), key=lambda t: -t[0])
            groups2: dict[int, list] = {}
            for e, c in items:
                groups2.setdefault(e[var], []).append((e, c))
            return sorted(
                ((k, build(v, var + 1)) for k, v in groups2.items()),
                key=lambda t: -t[0],
            )

        if self._nested is None:
            self._nested = build(list(self.coeffs.items()), 0)
        return self._nested

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at an (N, num_vars) array of points, Horner per variable."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != self.num_vars:
            raise UsageError(
                f"points have dim {pts.shape[1]}, polynomial has {self.num_vars} vars"
            )
        n = pts.shape[0]
        if self.is_zero:
            out = np.zeros(n)
            return out[0] if single else out

        def horner(groups, var: int) -> np.ndarray:
            x = pts[:, var]
            acc = None
            prev_exp = 0
            for exp, sub in groups:
                val = sub if var == self.num_vars - 1 else horner(sub, var + 1)
                if acc is None:
                    acc = np.broadcast_to(np.asarray(val, dtype=float), (n,)).copy()
                else:
                    acc = acc * x ** (prev_exp - exp) + val
                prev_exp = exp
            assert acc is not None
            if prev_exp:
                acc = acc * x**prev_exp
            return acc

        out = horner(self._build_nested(), 0)
        return out[0] if single else out

    def __call__(self, point) -> float | np.ndarray:
        return self.eval_many(point)

    def eval_tensor_grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Evaluate on the tensor grid axes[0] x ... x axes[n-1].

        Returns an array of shape (len(axes[0]), ..., len(axes[n-1])).  Cost is
        one broadcast multiply-add per term, which is what makes dense cube
        scans over ~10^7 lattice points affordable.
        """
        if len(axes) != self.num_vars:
            raise UsageError("axis count does not match num_vars")
        axes = [np.asarray(a, dtype=float) for a in axes]
        shape = tuple(len(a) for a in axes)
        out = np.zeros(shape)
        max_deg = [max((e[i] for e in self.coeffs), default=0) for i in range(self.num_vars)]
        pows = [
            np.stack([a**d for d in range(m + 1)]) for a, m in zip(axes, max_deg)
        ]
        for e, c in self.coeffs.items():
            term = np.float64(c)
            for i, ei in enumerate(e):
                view = pows[i][ei].reshape(
                    tuple(shape[i] if j == i else 1 for j in range(self.num_vars))
                )
                term = term * view
            out += term
        return out

    # -- calculus ------------------------------------------------------------

    def derivative(self, var: int) -> "Polynomial":
        if not 0 <= var < self.num_vars:
            raise UsageError(f"variable index {var} out of range")
        out: CoeffMap = {}
        for e, c in self.coeffs.items():
            if e[var] == 0:
                continue
            e2 = tuple(x - 1 if i == var else x for i, x in enumerate(e))
            out[e2] = out.get(e2, 0.0) + c * e[var]
        return Polynomial(self.num_vars, out)

    def gradient(self) -> list["Polynomial"]:
        return [self.derivative(i) for i in range(self.num_vars)]

    def gradient_at(self, points: np.ndarray) -> np.ndarray:
        """Gradient rows at an (N, n) array; returns (N, n) (or (n,) for 1 point)."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        g = np.stack([d.eval_many(pts) for d in self.gradient()], axis=-1)
        return g[0] if single else g

    # -- composition ---------------------------------------------------------

    def compose_affine(self, A: np.ndarray, b: np.ndarray) -> "Polynomial":
        """Return q(y) = p(A @ y + b) as a polynomial in m = A.shape[1] variables."""
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != self.num_vars or b.shape[0] != self.num_vars:
            raise UsageError("affine map shape mismatch")
        m = A.shape[1]
        if m not in (1, 2, 3):
            raise UsageError("composed polynomial must have 1..3 variables")
        lin: list[Polynomial] = []
        for i in range(self.num_vars):
            cm: CoeffMap = {(0,) * m: float(b[i])}
            for j in range(m):
                cm[tuple(1 if jj == j else 0 for jj in range(m))] = float(A[i, j])
            lin.append(Polynomial(m, cm))
        pow_cache: list[list[Polynomial]] = [[Polynomial.constant(1.0, m)] for _ in range(self.num_vars)]
        max_deg = [max((e[i] for e in self.coeffs), default=0) for i in range(self.num_vars)]
        for i in range(self.num_vars):
            for _ in range(max_deg[i]):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    pow_cache[i].append(pow_cache[i][-1] * lin[i])
        out = Polynomial.zero(m)
        for e, c in self.coeffs.items():
            term = Polynomial.constant(c, m)
            for i, ei in enumerate(e):
                if ei:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", RuntimeWarning)
                        term = term * pow_cache[i][ei]
            out = out + term
        return out

    def restrict_to_line(self, base: np.ndarray, direction: np.ndarray) -> "Polynomial":
        """Univariate p(base + t * direction) in the parameter t."""
        base = np.asarray(base, dtype=float)
        direction = np.asarray(direction, dtype=float)
        return self.compose_affine(direction.reshape(self.num_vars, 1), base)

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        terms = sorted(self.coeffs.items(), key=lambda t: (sum(t[0]), t[0]))
        return {
            "num_vars": self.num_vars,
            "terms": [[list(e), c] for e, c in terms],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @staticmethod
    def from_json_dict(d: Mapping) -> "Polynomial":
        return Polynomial(int(d["num_vars"]), {tuple(e): c for e, c in d["terms"]})

    @staticmethod
    def from_json(s: str) -> "Polynomial":
        return Polynomial.from_json_dict(json.loads(s))

    def __repr__(self) -> str:
        if self.is_zero:
            return f"Polynomial({self.num_vars}, 0)"
        terms = sorted(self.coeffs.items(), key=lambda t: (sum(t[0]), t[0]))
        body = " + ".join(f"{c:g}*x^{e}" for e, c in terms[:6])
        if len(terms) > 6:
            body += f" + ... ({len(terms)} terms)"
        return f"Polynomial({self.num_vars}, {body})"


def random_polynomial(
    rng: np.random.Generator, num_vars: int, degree: int, scale: float = 1.0
) -> Polynomial:
    """Dense random polynomial with iid uniform[-scale, scale] coefficients."""
    exps = monomial_exponents(num_vars, degree)
    coeffs = rng.uniform(-scale, scale, size=len(exps))
    return Polynomial.from_coeff_vector(coeffs, exps, num_vars)


def univariate_real_roots(p: Polynomial, cluster_tol: float = 0.0) -> np.ndarray:
    """Real roots of a univariate polynomial, ascending, via companion matrix."""
    if p.num_vars != 1:
        raise UsageError("univariate_real_roots needs a 1-variable polynomial")
    if p.is_zero:
        raise UsageError("zero polynomial has no well-defined root set")
    deg = p.degree
    coeffs = np.zeros(deg + 1)
    for (e,), c in p.coeffs.items():
        coeffs[e] = c
    # Trim numerically negligible leading coefficients for conditioning.
    scale = np.max(np.abs(coeffs))
    top = deg
    while top > 0 and abs(coeffs[top]) < 1e-14 * scale:
        top -= 1
    coeffs = coeffs[: top + 1]
    if top == 0:
        return np.array([])
    roots = np.polynomial.polynomial.polyroots(coeffs)
    real = roots[np.abs(roots.imag) <= 1e-8 * (1.0 + np.abs(roots.real))].real
    real = np.sort(real)
    if cluster_tol > 0 and real.size > 1:
        keep = [real[0]]
        for r in real[1:]:
            if r - keep[-1] > cluster_tol:
                keep.append(r)
        real = np.asarray(keep)
    return real


# -- direction vectors -------------------------------------------------------


def unit_vector(v: Sequence[float]) -> np.ndarray:
    """Normalize to Euclidean length 1 (within 1e-12) or raise UsageError."""
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0 or not np.isfinite(n):
        raise UsageError("cannot normalize zero or non-finite vector")
    u = v / n
    # One refinement step keeps the norm within 1e-12 even for extreme inputs.
    u = u / float(np.linalg.norm(u))
    return u


def is_unit(v: np.ndarray) -> bool:
    return abs(float(np.linalg.norm(v)) - 1.0) <= UNIT_NORM_TOL


# -- differential-geometric predicates ---------------------------------------


def angle_to_zero_set(p: Polynomial, z: np.ndarray, v: np.ndarray) -> float:
    """Angle between direction v and the tangent plane of Z(p) at z.

    Equals arcsin(|grad p(z) . v| / |grad p(z)|) for unit v; raises
    SingularPointError when the gradient is below the singularity floor.
    """
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    if not is_unit(v):
        v = unit_vector(v)
    g = p.gradient_at(z)
    gn = float(np.linalg.norm(g))
    floor = p.singular_floor()
    if gn < floor:
        raise SingularPointError(z, gn, floor)
    s = abs(float(np.dot(g, v))) / gn
    return float(np.arcsin(min(1.0, s)))


def angles_to_zero_set_many(
    p: Polynomial, pts: np.ndarray, v: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized angle computation; returns (angles, nonsingular mask).

    Angles at singular points are NaN.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    v = unit_vector(v)
    g = p.gradient_at(pts)
    gn = np.linalg.norm(g, axis=1)
    ok = gn >= p.singular_floor()
    s = np.full(len(pts), np.nan)
    np.divide(np.abs(g @ v), gn, out=s, where=ok)
    return np.arcsin(np.clip(s, 0.0, 1.0)), ok


def critical_angle_polynomial(q: Polynomial, v: np.ndarray, a: float) -> Polynomial:
    """Q1 = (grad q . v)^2 - sin^2(a) |grad q|^2; vanishes where angle == a.

    Degree is at most 2 (deg q - 1).
    """
    v = unit_vector(v)
    grads = q.gradient()
    dot = Polynomial.zero(q.num_vars)
    norm2 = Polynomial.zero(q.num_vars)
    for gi, vi in zip(grads, v):
        dot = dot + gi.scale(float(vi))
        norm2 = norm2 + gi * gi
    return dot * dot - norm2.scale(float(np.sin(a) ** 2))


def tangency_polynomial(q: Polynomial, w: np.ndarray) -> Polynomial:
    """grad q . w: cuts Z(q) down to the locus tangent to the field w."""
    w = np.asarray(w, dtype=float)
    out = Polynomial.zero(q.num_vars)
    for gi, wi in zip(q.gradient(), w):
        out = out + gi.scale(float(wi))
    return out


def curve_critical_angle_polynomial(
    q1: Polynomial, q2: Polynomial, v: np.ndarray, a: float
) -> Polynomial:
    """Q_a for the curve Z(q1, q2): ((g1 x g2) . v)^2 - cos^2(a) |g1 x g2|^2.

    The cross product of the two gradients is tangent to the curve, so Q_a
    vanishes exactly where the curve's tangent makes angle a with v.  Degree
    is at most 2 (deg q1 + deg q2) - 4.  Requires 3 variables.
    """
    if q1.num_vars != 3 or q2.num_vars != 3:
        raise UsageError("curve predicates need 3-variable polynomials")
    v = unit_vector(v)
    g1 = q1.gradient()
    g2 = q2.gradient()
    cross = [
        g1[1] * g2[2] - g1[2] * g2[1],
        g1[2] * g2[0] - g1[0] * g2[2],
        g1[0] * g2[1] - g1[1] * g2[0],
    ]
    dot = Polynomial.zero(3)
    norm2 = Polynomial.zero(3)
    for ci, vi in zip(cross, v):
        dot = dot + ci.scale(float(vi))
        norm2 = norm2 + ci * ci
    return dot * dot - norm2.scale(float(np.cos(a) ** 2))


# -- zero-set sampling and non-singular perturbation --------------------------


@dataclass
class ZeroSetSample:
    """Approximate points of Z(p) in a box, with per-point singularity flags."""

    points: np.ndarray          # (N, n)
    values: np.ndarray          # (N,) residuals p(x)
    grad_norms: np.ndarray      # (N,)
    nonsingular: np.ndarray     # (N,) bool

    def __len__(self) -> int:
        return len(self.points)


def sample_zero_set(
    p: Polynomial,
    box: tuple[Sequence[float], Sequence[float]],
    target_spacing: float,
    *,
    newton_iters: int = 30,
    max_seeds: int = 400_000,
    extra_seeds: np.ndarray | None = None,
) -> ZeroSetSample:
    """Sample Z(p) inside a box: grid sign changes -> Newton projection.

    Points are kept when |p(x)| <= WALL_TOL_REL * coeff_scale * (1+|x|)^deg and
    deduplicated to roughly target_spacing.  An empty sample is a valid result
    (the zero set may miss the box).
    """
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    n = p.num_vars
    if lo.shape != (n,) or hi.shape != (n,) or np.any(hi <= lo):
        raise UsageError("invalid box for zero-set sampling")
    if target_spacing <= 0:
        raise UsageError("target_spacing must be positive")
    axes = [
        np.linspace(lo[i], hi[i], max(2, int(np.ceil((hi[i] - lo[i]) / target_spacing)) + 1))
        for i in range(n)
    ]
    vals = p.eval_tensor_grid(axes)
    seeds = []
    sgn = np.signbit(vals)
    for ax in range(n):
        flips = sgn.take(range(1, vals.shape[ax]), axis=ax) != sgn.take(
            range(vals.shape[ax] - 1), axis=ax
        )
        idx = np.argwhere(flips)
        if idx.size:
            mid = np.empty((len(idx), n))
            for i in range(n):
                coords = axes[i][idx[:, i]]
                if i == ax:
                    step = axes[i][1] - axes[i][0]
                    coords = coords + 0.5 * step
                mid[:, i] = coords
            seeds.append(mid)
    if extra_seeds is not None and len(extra_seeds):
        seeds.append(np.atleast_2d(np.asarray(extra_seeds, dtype=float)))
    if not seeds:
        empty = np.zeros((0, n))
        return ZeroSetSample(empty, np.zeros(0), np.zeros(0), np.zeros(0, dtype=bool))
    x = np.concatenate(seeds, axis=0)
    if len(x) > max_seeds:
        stride = int(np.ceil(len(x) / max_seeds))
        x = x[::stride]
    floor = p.singular_floor()
    margin = 0.05 * (hi - lo)
    for _ in range(newton_iters):
        f = p.eval_many(x)
        g = p.gradient_at(x)
        g2 = np.einsum("ij,ij->i", g, g)
        safe = g2 > floor**2
        step = np.zeros_like(x)
        np.divide(f[:, None] * g, g2[:, None], out=step, where=safe[:, None])
        # Limit step length to one grid cell to keep Newton from escaping.
        slen = np.linalg.norm(step, axis=1, keepdims=True)
        cap = 2.0 * target_spacing
        step = np.where(slen > cap, step * (cap / np.maximum(slen, 1e-300)), step)
        x = x - step
        x = np.clip(x, lo - margin, hi + margin)
    f = p.eval_many(x)
    tol = p.zero_tolerance_at(x)
    inside = np.all((x >= lo - 1e-12) & (x <= hi + 1e-12), axis=1)
    keep = (np.abs(f) <= tol) & inside
    x = x[keep]
    if not len(x):
        empty = np.zeros((0, n))
        return ZeroSetSample(empty, np.zeros(0), np.zeros(0), np.zeros(0, dtype=bool))
    # Deduplicate on a half-spacing lattice, deterministically.
    key = np.round((x - lo) / (0.5 * target_spacing)).astype(np.int64)
    order = np.lexsort(key.T[::-1])
    x = x[order]
    key = key[order]
    uniq = np.ones(len(x), dtype=bool)
    uniq[1:] = np.any(key[1:] != key[:-1], axis=1)
    x = x[uniq]
    f = p.eval_many(x)
    g = p.gradient_at(x)
    gn = np.linalg.norm(g, axis=1)
    return ZeroSetSample(x, f, gn, gn >= p.singular_floor())


def perturb_nonsingular(
    p: Polynomial,
    seed: int | np.random.Generator,
    magnitude: float = DEFAULT_PERTURB_MAGNITUDE,
    *,
    box: tuple[Sequence[float], Sequence[float]] | None = None,
    spacing: float | None = None,
    max_tries: int = 8,
) -> Polynomial:
    """Shift p by a random constant h (|h| <= magnitude) so that Z(p - h) is
    non-singular on a verification sample; p itself is returned when magnitude
    is 0 and it already verifies.

    A constant shift replaces the zero level with a nearby regular level; by
    Sard's theorem almost every level works, so a handful of retries suffices.
    Raises PerturbationFailed when no candidate verifies.
    """
    if magnitude < 0:
        raise UsageError("magnitude must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if box is None:
        box = ([-1.5] * p.num_vars, [1.5] * p.num_vars)
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if spacing is None:
        spacing = float(np.max(hi - lo)) / 24.0
    best_grad = -np.inf
    tries = max_tries if magnitude > 0 else 1
    for t in range(tries):
        if magnitude == 0 or t == 0:
            h = 0.0
        else:
            h = float(rng.uniform(-magnitude, magnitude))
        q = p - Polynomial.constant(h, p.num_vars) if h else p
        sample = sample_zero_set(q, (lo, hi), spacing)
        if len(sample) == 0 or bool(np.all(sample.nonsingular)):
            return q
        worst = float(np.min(sample.grad_norms))
        best_grad = max(best_grad, worst)
    raise PerturbationFailed(tries, best_grad, p.singular_floor())
