"""Experiment configs, gate-checked reports, dispatch, and replay.

Every runnable experiment is described by an ExperimentConfig (kind +
dials).  run() dispatches to the owning module, evaluates the kind's
gates, and returns a Report whose JSON form embeds the config verbatim,
so replay() can rerun it and diff the rows.  Row and gate content is
deterministic for a fixed config; wall clock is excluded from diffs.
"""

from __future__ import annotations

import importlib.resources
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError

EXPERIMENT_IDS = {
    "partition": 1,
    "hamsandwich": 2,
    "incidence": 3,
    "tubes-classify": 4,
    "tubes-segments": 5,
    "tubes-census": 6,
    "wongkew": 7,
    "field": 8,
    "decompose": 9,
    "planar": 10,
    "regulus": 11,
    "scaling": 12,
    "bilinear": 13,
}

_DEFAULTS: dict[str, dict] = {
    "partition": {"D": 8, "points": "fixture", "max_imbalance": 0.05},
    "hamsandwich": {"n_sets": 4, "n_points": 160, "degree": 2, "delta": 0.05},
    "incidence": {"kind": "regulus", "L": 20, "r": 2, "lines": None,
                  "degree": None},
    "tubes-classify": {},
    "tubes-segments": {"degree": 3},
    "tubes-census": {},
    "wongkew": {},
    "field": {"R": 128.0, "n_check": 48},
    "decompose": {"R": 128.0},
    "planar": {"R": 128.0, "B": 2, "K": 10},
    "regulus": {"R": 128.0, "K": 10, "alpha": 0.4, "n_broad": 400},
    "scaling": {
        "example": "planar",
        "R_list": [64.0, 128.0, 256.0, 512.0],
        "p": 3.25,
        # 0.85 re-admits points whose two dominant caps share a tau cell at
        # large |x3|; smaller alpha depresses the p=3 ratio slope
        "alpha": 0.85,
        "K": 10,
        "B": 2,
        "n_main": 6000,
        "n_rest": 1200,
    },
    "bilinear": {"R_list": [64.0, 128.0, 256.0], "p": 3.25, "separation": 0.35},
}


@dataclass
class ExperimentConfig:
    """One experiment kind plus its dials; serialized verbatim into reports."""

    kind: str
    seed: int = 0
    jobs: int = 1
    out: str | None = None
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_IDS:
            raise UsageError(
                f"unknown experiment kind {self.kind!r}; "
                f"one of {sorted(EXPERIMENT_IDS)}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise UsageError("seed must be an integer")
        if self.seed < 0 or self.seed >= 2**64:
            raise UsageError("seed must fit in 64 bits")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise UsageError("jobs must be a positive integer")
        unknown = set(self.params) - set(_DEFAULTS[self.kind])
        if unknown:
            raise UsageError(
                f"unknown parameter(s) for {self.kind}: {sorted(unknown)}")

    def resolved(self) -> dict:
        merged = dict(_DEFAULTS[self.kind])
        merged.update(self.params)
        return merged

    def instance_rng(self, instance: int = 0) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence((self.seed, EXPERIMENT_IDS[self.kind], instance)))

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "jobs": self.jobs,
            "params": self.resolved(),
        }


@dataclass
class Report:
    config: ExperimentConfig
    rows: list
    gates: list
    csv: str
    wall_clock_s: float

    @property
    def passed(self) -> bool:
        return all(g["pass"] for g in self.gates)

    def as_dict(self) -> dict:
        return {
            "config": self.config.as_dict(),
            "rows": self.rows,
            "gates": self.gates,
            "csv": self.csv,
            "wall_clock_s": round(self.wall_clock_s, 3),
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1)

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")


def _gate(name: str, measured, bound, passed: bool) -> dict:
    return {"name": name, "measured": measured, "bound": bound, "pass": bool(passed)}


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x]
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    return x


def load_fixture_points() -> np.ndarray:
    """The bundled 4096-point cluster mixture in R^3."""
    ref = importlib.resources.files("partwave.data") / "fixture_points_4096.json"
    data = json.loads(ref.read_text())
    pts = np.asarray(data["points"], dtype=float)
    if pts.shape != (data["n"], data["dim"]):
        raise UsageError("fixture file is corrupt")
    return pts


def _run_partition(cfg: ExperimentConfig, p: dict):
    from .partition import build_partition, max_cell_fraction

    if p["points"] == "fixture":
        pts = load_fixture_points()
    else:
        pts = np.asarray(p["points"], dtype=float)
    D = int(p["D"])
    if D < 1:
        raise UsageError("D must be >= 1")
    part = build_partition(pts, D, seed=cfg.seed,
                           max_imbalance=float(p["max_imbalance"]))
    frac = max(
        (len(idx) for idx in part.cells.values()), default=0) / len(pts)
    bound = max_cell_fraction(part.num_steps, float(p["max_imbalance"]))
    rows = [
        {
            "step": i,
            "degree": part.degrees[i],
            "achieved_imbalance": part.achieved_imbalance[i],
        }
        for i in range(part.num_steps)
    ]
    rows.append({"max_cell_fraction": frac, "num_cells": len(part.cells),
                 "wall_points": int(len(part.wall)), "product_degree": sum(part.degrees)})
    gates = [
        _gate("max-cell-fraction <= prod (1+imbalance_i)/2", frac, bound, frac <= bound),
        _gate("product degree <= D", sum(part.degrees), D, sum(part.degrees) <= D),
    ]
    return rows, gates, ""


def _run_hamsandwich(cfg: ExperimentConfig, p: dict):
    from .partition import WeightedPointSet, ham_sandwich, set_imbalance

    n_sets, n_points = int(p["n_sets"]), int(p["n_points"])
    degree, delta = int(p["degree"]), float(p["delta"])
    dim_space = (degree + 1) * (degree + 2) // 2 - 1
    if n_sets > dim_space:
        raise UsageError(
            f"degree {degree} bisects at most {dim_space} sets in the plane")
    rng = cfg.instance_rng(0)
    sets = []
    for k in range(n_sets):
        # well-separated cloud centers keep the instance honestly bisectable
        ang = 2.0 * math.pi * k / max(n_sets, 1)
        center = 1.5 * np.array([math.cos(ang), math.sin(ang)])
        pts = center + 0.7 * rng.normal(size=(n_points, 2))
        sets.append(WeightedPointSet(pts, None))
    poly = ham_sandwich(sets, degree, seed=cfg.seed, max_imbalance=delta)
    imbs = [set_imbalance(poly, s) for s in sets]
    rows = [{"set": k, "imbalance": imbs[k]} for k in range(n_sets)]
    gates = [_gate("imbalance <= delta on every set", max(imbs), delta,
                   max(imbs) <= delta)]
    return rows, gates, ""


_EXACT_RICH = {
    "planar": lambda L: L * (L - 1) // 2,
    "regulus": lambda L: (L // 2) ** 2,
    "pencil": lambda L: 1,
    "random": lambda L: 0,
}


def _cert_dict(node) -> dict:
    return {
        "kind": node.kind,
        "num_lines": node.num_lines,
        "count": node.count,
        "depth": node.depth,
        "reason": node.reason,
        "partition_degree": node.partition_degree,
        "wall_count": node.wall_count,
        "children": [[k, _cert_dict(c)] for k, c in node.children],
    }


def _run_incidence(cfg: ExperimentConfig, p: dict):
    from .incidence import (Line, count_rich_points_partitioned,
                            generate_configuration, rich_points)

    r = int(p["r"])
    if p["lines"] is not None:
        try:
            lines = [Line.from_point_direction(d["base"], d["direction"])
                     for d in p["lines"]]
        except (KeyError, TypeError) as e:
            raise UsageError(
                "each line needs 'base' and 'direction' triples") from e
        kind = "file"
    else:
        kind, L = str(p["kind"]), int(p["L"])
        if L < 2 or L > 200:
            raise UsageError("L must lie in [2, 200]")
        lines, _info = generate_configuration(kind, L, seed=cfg.seed)
    rich = rich_points(lines, r)
    count = len(rich.points)
    rows = [{"kind": kind, "r": r, "rich_points": count, "lines": len(lines)}]
    gates = []
    L = len(lines)
    if kind in _EXACT_RICH and r == 2:
        want = _EXACT_RICH[kind](L)
        gates.append(_gate(f"2-rich points == expected for {kind} family",
                           count, want, count == want))
    elif kind == "grid" and r == 3:
        s = int(round((L / 3) ** 0.5))
        gates.append(_gate("3-rich points == s^3 for the s x s x s grid",
                           count, s**3, count == s**3))
    else:
        # no exact prediction: record the count against the trivial pair bound
        bound = L * (L - 1) // 2
        gates.append(_gate("rich points <= C(L, 2)", count, bound, count <= bound))
    if p["degree"] is not None:
        c2, cert = count_rich_points_partitioned(
            lines, r, max_degree=int(p["degree"]), seed=cfg.seed)
        cert.validate()
        rows.append({"partitioned_count": c2, "certificate": _cert_dict(cert)})
        gates.append(_gate("partitioned recount equals direct rich-point count",
                           c2, count, c2 == count))
    return rows, gates, ""


def _tube_fixture():
    from .polynomials import Polynomial
    from .tubes import Tube

    plane = Polynomial(3, {(0, 0, 1): 1.0})
    tubes = []
    for k in range(5):
        phi = k * math.pi / 10
        tubes.append(Tube.around([0.2 * k - 0.4, 0.0, 0.0],
                                 [math.cos(phi), math.sin(phi), 0.0], 0.05, 2.0))
    for k in range(4):
        tubes.append(Tube.around([0.1 * k, 0.1, 0.0],
                                 [1.0, 0.0, 0.4 + 0.1 * k], 0.05, 2.0))
    for k in range(2):
        tubes.append(Tube.around([0.0, 0.0, 3.0 + k], [1.0, 0.0, 0.0], 0.05, 2.0))
    return plane, tubes


def _run_tubes_classify(cfg: ExperimentConfig, p: dict):
    from .tubes import classify_tube

    plane, tubes = _tube_fixture()
    expected = ["TANGENT"] * 5 + ["TRANSVERSE"] * 4 + ["DISJOINT"] * 2
    rows = []
    ok = True
    for i, t in enumerate(tubes):
        rep = classify_tube(t, plane, ((0.0, 0.0, 0.0), 1.5), 0.05 / 4.0)
        rows.append({"tube": i, "status": rep.status,
                     "witness_angle": rep.witness_angle})
        ok = ok and rep.status == expected[i]
    gates = [_gate("plane-family classifications match construction",
                   sum(r["status"] == e for r, e in zip(rows, expected)),
                   len(tubes), ok)]
    return rows, gates, ""


def _run_tubes_segments(cfg: ExperimentConfig, p: dict):
    from .polynomials import Polynomial
    from .tubes import Tube, transverse_segment_count

    d = int(p["degree"])
    if not 1 <= d <= 6:
        raise UsageError("degree must lie in [1, 6]")
    prod = Polynomial.constant(1.0, 3)
    for i in range(d):
        # wall spacing 0.7 > segment length 0.5 so occupied segments == d
        w = (i - (d - 1) / 2.0) * 0.7
        prod = prod * Polynomial(3, {(1, 0, 0): 1.0, (0, 0, 0): -w})
    tube = Tube.around([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.05, 4.0)
    count = transverse_segment_count(tube, prod, 0.1)
    rows = [{"degree": d, "segments": count}]
    gates = [_gate("occupied segments == number of crossed walls",
                   count, d, count == d)]
    return rows, gates, ""


def _run_tubes_census(cfg: ExperimentConfig, p: dict):
    from .tubes import tangent_direction_census

    plane, tubes = _tube_fixture()
    rho, L = 0.05, 4.0
    rep = tangent_direction_census(tubes, plane, ((0.0, 0.0, 0.0), 1.5),
                                   rho, L, angle_sep=0.1)
    bound = 8.0 * 1**2 * math.log(L / rho) ** 2 * (L / rho)
    rows = [{"census": rep.count, "num_tangent": rep.num_tangent,
             "statuses": [r.status for r in rep.classifications]}]
    gates = [
        _gate("census == tangent directions of the construction", rep.count, 5,
              rep.count == 5),
        _gate("census <= 8 D^2 log^2(L/rho) (L/rho)", rep.count, bound,
              rep.count <= bound),
    ]
    return rows, gates, ""


def _run_wongkew(cfg: ExperimentConfig, p: dict):
    from .polynomials import Polynomial
    from .tubes import count_cubes_meeting_zero_set

    slab = Polynomial(3, {(1, 0, 0): 1.0, (0, 0, 0): -0.5})
    c_slab = count_cubes_meeting_zero_set(slab, (10, 10, 10))
    cross = count_cubes_meeting_zero_set(
        slab * Polynomial(3, {(0, 1, 0): 1.0, (0, 0, 0): -0.5}), (10, 10, 10))
    L = 16
    c = L / 2.0
    sph = Polynomial(3, {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0,
                         (1, 0, 0): -2 * c, (0, 1, 0): -2 * c, (0, 0, 1): -2 * c,
                         (0, 0, 0): 3 * c**2 - (L / 2.0) ** 2})
    c_sph = count_cubes_meeting_zero_set(sph, (L, L, L))
    rows = [{"slab_cubes": c_slab, "crossed_slabs_cubes": cross,
             "sphere_cubes": c_sph, "grid": L}]
    gates = [
        _gate("one slab meets exactly 10^2 cubes of the 10^3 grid",
              c_slab, 100, c_slab == 100),
        _gate("two crossed slabs meet 190 cubes (inclusion-exclusion)",
              cross, 190, cross == 190),
        _gate("sphere cubes <= 8 D L^2 (D = 2)", c_sph, 8 * 2 * L**2,
              c_sph <= 8 * 2 * L**2),
    ]
    return rows, gates, ""


def _run_field(cfg: ExperimentConfig, p: dict):
    from .fields import (FrequencyGrid, density_l2, density_linf, direct_eval,
                         extension_field, random_smooth_density)
    from .surfaces import paraboloid

    R = float(p["R"])
    n_check = int(p["n_check"])
    if R < 16:
        raise UsageError("R must be >= 16")
    surf = paraboloid()
    grid = FrequencyGrid.for_ball(R)
    f = random_smooth_density(grid, cfg.seed)
    rng = cfg.instance_rng(0)
    pts = rng.uniform(-R / 2, R / 2, (n_check, 3))
    direct = direct_eval(surf, grid, f, pts)
    # slice evaluation at matching x3 heights, nearest lattice x'
    err = 0.0
    for q, want in zip(pts, direct):
        fld = extension_field(surf, grid, f, R, [q[2]], dx_max=0.5,
                              x_extent=abs(q[0]) + abs(q[1]) + 2.0)
        i1 = int(np.argmin(np.abs(fld.x1 - q[0])))
        i2 = int(np.argmin(np.abs(fld.x2 - q[1])))
        got = direct_eval(surf, grid, f, [[fld.x1[i1], fld.x2[i2], q[2]]])[0]
        err = max(err, abs(fld.values[0, i1, i2] - got))
    scale = max(float(np.max(np.abs(direct))), 1e-300)
    rows = [{"R": R, "f_l2": density_l2(surf, grid, f),
             "f_linf": density_linf(f), "n_check": n_check,
             "max_abs_err": err, "scale": scale}]
    gates = [_gate("slice-FFT matches direct evaluation, rel err <= 1e-9",
                   err / scale, 1e-9, err / scale <= 1e-9)]
    return rows, gates, ""


def _run_decompose(cfg: ExperimentConfig, p: dict):
    from .fields import FrequencyGrid, random_smooth_density
    from .surfaces import paraboloid
    from .wavepackets import wave_packet_decompose

    R = float(p["R"])
    surf = paraboloid()
    grid = FrequencyGrid.for_ball(R)
    f = random_smooth_density(grid, cfg.seed)
    pset, rep = wave_packet_decompose(surf, grid, f, R, seed=cfg.seed)
    rows = [rep.as_dict()]
    gates = [
        _gate("reconstruction rel L2 error <= 1e-3", rep.recon_rel, 1e-3,
              rep.recon_rel <= 1e-3),
        _gate("off-tube decay <= 1e-6", rep.decay_max, 1e-6,
              rep.decay_max <= 1e-6),
        _gate("pairwise packet overlap <= 1e-4", rep.ortho_max, 1e-4,
              rep.ortho_max <= 1e-4),
        _gate("sum ||f_T||^2 <= 4 int |f|^2", rep.budget_max, 4.0,
              rep.budget_max <= 4.0),
    ]
    return rows, gates, ""


def _run_planar(cfg: ExperimentConfig, p: dict):
    from .examples import build_planar_example, slab_coverage

    R, B, K = float(p["R"]), int(p["B"]), int(p["K"])
    f, ex = build_planar_example(R, B, K, cfg.seed)
    cov = slab_coverage(ex)
    rows = [_jsonable(ex.as_dict())]
    rows[0]["slab_coverage"] = cov
    gates = [
        _gate("slab points with >= B/2 tubes: fraction >= 1/2", cov, 0.5,
              cov >= 0.5),
        _gate("||f||_2 within 8x of B^{1/2} R^{3/4}", ex.ratio_l2,
              [1 / 8, 8], 1 / 8 <= ex.ratio_l2 <= 8),
        _gate("||f||_inf <= 8 B R", ex.f_linf, 8 * B * R,
              ex.f_linf <= 8 * B * R),
    ]
    return rows, gates, ""


def _run_regulus(cfg: ExperimentConfig, p: dict):
    from .examples import (build_regulus_example, pointwise_broad_fraction,
                           regulus_patch_points, ruling_coverage)
    from .fields import FrequencyGrid
    from .surfaces import paraboloid

    R, K = float(p["R"]), int(p["K"])
    alpha, n_broad = float(p["alpha"]), int(p["n_broad"])
    f, ex = build_regulus_example(R, cfg.seed)
    cov = ruling_coverage(ex)
    rows = [_jsonable(ex.as_dict())]
    rows[0]["ruling_coverage"] = _jsonable(cov)
    gates = [
        _gate("min tubes on each ruling patch >= 1",
              min(cov["min_v"], cov["min_h"]), 1,
              min(cov["min_v"], cov["min_h"]) >= 1),
        _gate("cap-matching angle <= 1.5 cap sides", ex.max_matching_angle,
              1.5 * ex.cap_side, ex.max_matching_angle <= 1.5 * ex.cap_side),
    ]
    if n_broad > 0:
        surf = paraboloid()
        grid = FrequencyGrid.for_ball(R)
        pts = regulus_patch_points(R, cfg.seed, n=n_broad)
        frac = pointwise_broad_fraction(surf, grid, f, pts, K, alpha)
        rows[0]["broad_fraction"] = frac
        gates.append(_gate("patch broad fraction >= 0.3 (both families driven)",
                           frac, 0.3, frac >= 0.3))
    return rows, gates, ""


def _run_scaling(cfg: ExperimentConfig, p: dict):
    from .experiments import scaling_experiment

    rep = scaling_experiment(str(p["example"]), list(p["R_list"]), float(p["p"]),
                             float(p["alpha"]), int(p["K"]), int(p["B"]),
                             seed=cfg.seed, n_main=int(p["n_main"]),
                             n_rest=int(p["n_rest"]))
    rows = [_jsonable(r.as_dict()) for r in rep.rows]
    gates = []
    if abs(float(p["p"]) - 3.25) < 1e-9 and p["example"] == "planar":
        lo, hi = 10 / 13 - 0.12, 10 / 13 + 0.12
        gates.append(_gate("lhs slope within 0.12 of 10/13", rep.lhs_slope,
                           [lo, hi], lo <= rep.lhs_slope <= hi))
        gates.append(_gate("ratio slope within 0.15 of flat", rep.ratio_slope,
                           [-0.15, 0.15], -0.15 <= rep.ratio_slope <= 0.15))
    if abs(float(p["p"]) - 3.0) < 1e-9 and p["example"] == "planar":
        gates.append(_gate("ratio slope >= +0.05 below the critical exponent",
                           rep.ratio_slope, 0.05, rep.ratio_slope >= 0.05))
    if not gates:
        gates.append(_gate("fit residual <= 0.5 (diagnostic run)",
                           rep.ratio_residual, 0.5, rep.ratio_residual <= 0.5))
    return rows, gates, rep.csv()


def _run_bilinear(cfg: ExperimentConfig, p: dict):
    from .experiments import (bilinear_l4_check, l2_ball_ratio,
                              transverse_packet_pair, wall_cubes)
    from .fields import density_l2
    from .surfaces import paraboloid

    R_list = [float(R) for R in p["R_list"]]
    if not R_list:
        raise UsageError("R_list must be nonempty")
    surf = paraboloid()
    rows = []
    lines = ["R,product_integral,ratio_to_norms,aggregate_ratio,l2_ball_ratio"]
    for R in R_list:
        grid, f1, f2, t1, t2 = transverse_packet_pair(R, float(p["separation"]))
        cubes, side = wall_cubes(R)
        n1 = density_l2(surf, grid, f1) ** 2
        n2 = density_l2(surf, grid, f2) ** 2
        rep = bilinear_l4_check(surf, grid, f1, f2, [t1], [n1], [t2], [n2],
                                cubes, side, float(p["p"]), R)
        sanity = l2_ball_ratio(surf, grid, f1 + f2, R)
        row = rep.as_dict()
        row["l2_ball_ratio"] = sanity
        rows.append(_jsonable(row))
        lines.append(f"{R:g},{rep.integral_total:.10g},{rep.ratio_to_norms:.10g},"
                     f"{rep.aggregate_ratio:.10g},{sanity:.10g}")
    gates = [
        _gate("square-function majorant dominates per cube",
              max(r["per_cube_ratio_max"] for r in rows), 1.0,
              all(r["per_cube_ratio_max"] <= 1.0 for r in rows)),
        _gate("||Ef||^2 over the ball <= 8 R ||f||_2^2",
              max(r["l2_ball_ratio"] for r in rows), 8.0,
              all(r["l2_ball_ratio"] <= 8.0 for r in rows)),
    ]
    if len(R_list) >= 3:
        x = np.log(R_list)
        y = np.log([r["ratio_to_norms"] for r in rows])
        slope = float(np.polyfit(x, y, 1)[0])
        gates.append(_gate("product-integral ratio slope within 0.15 of -1/2",
                           slope, [-0.65, -0.35], -0.65 <= slope <= -0.35))
    return rows, gates, "\n".join(lines)


_RUNNERS = {
    "partition": _run_partition,
    "hamsandwich": _run_hamsandwich,
    "incidence": _run_incidence,
    "tubes-classify": _run_tubes_classify,
    "tubes-segments": _run_tubes_segments,
    "tubes-census": _run_tubes_census,
    "wongkew": _run_wongkew,
    "field": _run_field,
    "decompose": _run_decompose,
    "planar": _run_planar,
    "regulus": _run_regulus,
    "scaling": _run_scaling,
    "bilinear": _run_bilinear,
}


def run(config: ExperimentConfig) -> Report:
    """Validate, dispatch, gate-check; deterministic rows for a fixed config."""
    config.validate()
    params = config.resolved()
    t0 = time.time()
    rows, gates, csv = _RUNNERS[config.kind](config, params)
    report = Report(config=config, rows=_jsonable(rows), gates=_jsonable(gates),
                    csv=csv, wall_clock_s=time.time() - t0)
    if config.out:
        report.write(config.out)
    return report


def config_from_dict(d: dict) -> ExperimentConfig:
    if "kind" not in d:
        raise UsageError("config object needs a 'kind' field")
    cfg = ExperimentConfig(
        kind=d["kind"],
        seed=int(d.get("seed", 0)),
        jobs=int(d.get("jobs", 1)),
        out=d.get("out"),
        params=dict(d.get("params", {})),
    )
    cfg.validate()
    return cfg


def replay(path: str) -> tuple[Report, list[str]]:
    """Re-run the config embedded in a report file and diff the rows.

    Returns the fresh report plus a list of human-readable divergences.
    Wall clock is not compared.  Raises UsageError on unreadable or
    config-less files.
    """
    try:
        with open(path) as fh:
            stored = json.load(fh)
    except FileNotFoundError as e:
        raise UsageError(f"no such report: {path}") from e
    except json.JSONDecodeError as e:
        raise UsageError(f"report is not valid JSON: {e}") from e
    if not isinstance(stored, dict) or "config" not in stored:
        raise UsageError("report has no embedded config")
    cfg = config_from_dict(stored["config"])
    cfg.out = None
    fresh = run(cfg)
    diffs = []
    old_rows = stored.get("rows", [])
    new_rows = fresh.rows
    if len(old_rows) != len(new_rows):
        diffs.append(f"row count {len(old_rows)} -> {len(new_rows)}")
    for i, (a, b) in enumerate(zip(old_rows, new_rows)):
        if json.dumps(a, sort_keys=True) != json.dumps(b, sort_keys=True):
            diffs.append(f"row {i} differs")
            break
    if stored.get("csv", "") != fresh.csv:
        diffs.append("csv section differs")
    old_gates = stored.get("gates", [])
    if json.dumps(old_gates, sort_keys=True) != json.dumps(fresh.gates, sort_keys=True):
        diffs.append("gate section differs")
    return fresh, diffs
