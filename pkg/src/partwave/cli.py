"""Command-line front end: seeded, replayable experiment reports.

Subcommands mirror the library's experiment families.  Every run embeds
its full config in the JSON report so `partwave replay report.json`
can rerun it and diff the rows.  Exit codes: 0 all gates pass, 1 gate
failure, 2 usage/validation error, 3 replay divergence.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import UsageError
from .reports import ExperimentConfig, Report, config_from_dict, replay, run


def _error_object(kind: str, message: str) -> str:
    return json.dumps({"error": {"kind": kind, "message": message}})


def _add_common(sp: argparse.ArgumentParser, suppress: bool = False) -> None:
    # SUPPRESS on sub-subparsers: argparse would otherwise reset values the
    # parent parser already filled in
    d = argparse.SUPPRESS if suppress else None
    sp.add_argument("--seed", type=int, default=d, help="master seed")
    sp.add_argument("--jobs", type=int, default=d, help="parallelism cap")
    sp.add_argument("--out", type=str, default=d, help="report path")
    sp.add_argument("--config", type=str, default=d,
                    help="JSON config file; flags override its fields")


def _parse_R_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise UsageError(f"bad R list {text!r}") from e
    if not vals:
        raise UsageError("empty R list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="partwave",
        description="polynomial partitioning and restriction experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("partition", help="iterated bisection on a point cloud")
    sp.add_argument("--D", type=int, default=None, help="degree budget")
    _add_common(sp)

    sp = sub.add_parser("hamsandwich", help="simultaneous bisection instance")
    sp.add_argument("--n-sets", type=int, default=None)
    sp.add_argument("--degree", type=int, default=None)
    sp.add_argument("--n-points", type=int, default=None)
    sp.add_argument("--delta", type=float, default=None)
    _add_common(sp)

    sp = sub.add_parser("incidence", help="rich points of a line family")
    sp.add_argument("--r", type=int, default=None, help="richness threshold")
    sp.add_argument("--degree", type=int, default=None,
                    help="partitioned recount with certificate")
    _add_common(sp)
    isub = sp.add_subparsers(dest="incidence_command", required=False)
    gsp = isub.add_parser("gen", help="run on a generated configuration")
    gsp.add_argument("--kind", type=str, default=argparse.SUPPRESS,
                     choices=["planar", "regulus", "pencil", "grid", "random"])
    gsp.add_argument("--L", type=int, default=argparse.SUPPRESS,
                     help="number of lines")
    gsp.add_argument("--r", type=int, default=argparse.SUPPRESS,
                     help="richness threshold")
    gsp.add_argument("--degree", type=int, default=argparse.SUPPRESS)
    _add_common(gsp, suppress=True)

    sp = sub.add_parser("tubes", help="tube/variety interaction checks")
    tsub = sp.add_subparsers(dest="tubes_command", required=True)
    for name, extra in (("classify", ()), ("segments", ("--degree",)),
                        ("census", ())):
        tsp = tsub.add_parser(name)
        for flag in extra:
            tsp.add_argument(flag, type=int, default=None)
        _add_common(tsp)

    sp = sub.add_parser("wongkew", help="cube counts along zero sets")
    _add_common(sp)

    sp = sub.add_parser("restriction", help="extension-operator experiments")
    rsub = sp.add_subparsers(dest="restriction_command", required=True)

    rsp = rsub.add_parser("field", help="slice evaluation vs direct sum")
    rsp.add_argument("--R", type=float, default=None)
    _add_common(rsp)

    rsp = rsub.add_parser("decompose", help="wave-packet property report")
    rsp.add_argument("--R", type=float, default=None)
    _add_common(rsp)

    rsp = rsub.add_parser("planar", help="slab-concentrated example")
    rsp.add_argument("--R", type=float, default=None)
    rsp.add_argument("--B", type=int, default=None)
    rsp.add_argument("--K", type=int, default=None)
    _add_common(rsp)

    rsp = rsub.add_parser("regulus", help="two-ruling example + broadness")
    rsp.add_argument("--R", type=float, default=None)
    rsp.add_argument("--K", type=int, default=None)
    rsp.add_argument("--alpha", type=float, default=None)
    rsp.add_argument("--n-broad", type=int, default=None)
    _add_common(rsp)

    rsp = rsub.add_parser("scaling", help="broad-part L^p sweep over R")
    rsp.add_argument("--example", type=str, default=None,
                     choices=["planar", "regulus"])
    rsp.add_argument("--R-list", type=str, default=None,
                     help="comma-separated, ascending")
    rsp.add_argument("--p", type=float, default=None)
    rsp.add_argument("--alpha", type=float, default=None)
    rsp.add_argument("--K", type=int, default=None)
    rsp.add_argument("--B", type=int, default=None)
    rsp.add_argument("--n-main", type=int, default=None)
    rsp.add_argument("--n-rest", type=int, default=None)
    _add_common(rsp)

    rsp = rsub.add_parser("bilinear", help="|Ef1 Ef2|^2 vs tube majorant")
    rsp.add_argument("--R-list", type=str, default=None)
    rsp.add_argument("--p", type=float, default=None)
    rsp.add_argument("--separation", type=float, default=None)
    _add_common(rsp)

    sp = sub.add_parser("replay", help="rerun an existing report and diff rows")
    sp.add_argument("path", type=str)

    return ap


_FLAG_PARAMS = {
    "partition": {"D": "D"},
    "hamsandwich": {"n_sets": "n_sets", "degree": "degree",
                    "n_points": "n_points", "delta": "delta"},
    "incidence": {"kind": "kind", "L": "L", "r": "r", "degree": "degree"},
    "tubes-classify": {},
    "tubes-segments": {"degree": "degree"},
    "tubes-census": {},
    "wongkew": {},
    "field": {"R": "R"},
    "decompose": {"R": "R"},
    "planar": {"R": "R", "B": "B", "K": "K"},
    "regulus": {"R": "R", "K": "K", "alpha": "alpha", "n_broad": "n_broad"},
    "scaling": {"example": "example", "R_list": "R_list", "p": "p",
                "alpha": "alpha", "K": "K", "B": "B", "n_main": "n_main",
                "n_rest": "n_rest"},
    "bilinear": {"R_list": "R_list", "p": "p", "separation": "separation"},
}


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.command == "tubes":
        kind = f"tubes-{args.tubes_command}"
    elif args.command == "restriction":
        kind = args.restriction_command
    else:
        kind = args.command

    base: dict = {"kind": kind}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except FileNotFoundError as e:
            raise UsageError(f"no such config file: {args.config}") from e
        except json.JSONDecodeError as e:
            raise UsageError(f"config is not valid JSON: {e}") from e
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        if kind == "incidence" and "lines" in loaded:
            # a line-family file, not an experiment config
            base["params"] = {"lines": loaded["lines"]}
        else:
            base = loaded
            if base.get("kind", kind) != kind:
                raise UsageError(
                    f"config kind {base.get('kind')!r} does not match "
                    f"subcommand {kind!r}")
            base["kind"] = kind

    params = dict(base.get("params", {}))
    for attr, pname in _FLAG_PARAMS[kind].items():
        val = getattr(args, attr, None)
        if val is not None:
            if pname == "R_list" and isinstance(val, str):
                val = _parse_R_list(val)
            params[pname] = val
    base["params"] = params
    if args.seed is not None:
        base["seed"] = args.seed
    if args.jobs is not None:
        base["jobs"] = args.jobs
    if args.out is not None:
        base["out"] = args.out
    return config_from_dict(base)


def _print_report(report: Report) -> None:
    print(report.to_json())


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0

    if args.command == "replay":
        try:
            fresh, diffs = replay(args.path)
        except UsageError as e:
            print(_error_object("usage", str(e)), file=sys.stderr)
            return 2
        if diffs:
            print(json.dumps({"replay": {"match": False, "diffs": diffs}}))
            return 3
        print(json.dumps({"replay": {"match": True,
                                     "passed": fresh.passed}}))
        return 0

    try:
        cfg = _config_from_args(args)
        report = run(cfg)
    except UsageError as e:
        print(_error_object("usage", str(e)), file=sys.stderr)
        return 2
    _print_report(report)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
