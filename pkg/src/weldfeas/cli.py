"""Command-line front end: ``weldfeas run | validate | plotdata | dump | list``.

Exit codes: 0 on completion (an infeasible weld is a result, not an error),
2 when a file cannot be read or written, 3 when a scenario or report is
invalid.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from weldfeas import __version__
from weldfeas.errors import ConfigError, DataError, InvalidArgument, UndefinedRatio, WeldFeasError
from weldfeas.robotmodel import get_model
from weldfeas.scenarios import (BUILTIN_IDS, RunOptions, find_scenario, load_scenario, relative_performance,
                                run_scenario, scenario_search_path, validate_document)

REPORT_VERSION = 1
EXIT_OK, EXIT_IO, EXIT_CONFIG = 0, 2, 3
SERIES = ("qdot", "tau", "clearance")


def canonical_json(obj) -> str:
    """Sorted keys, shortest round-trip floats, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _split(values) -> list[str]:
    out = []
    for v in values or []:
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return out


def _robots(choice: str):
    keys = ("puma", "ur") if choice == "both" else (choice,)
    return [get_model(k) for k in keys]


def build_report(args) -> dict:
    path = find_scenario(args.scenario)
    scenario = load_scenario(path)
    overrides = {}
    if args.speed is not None:
        if not args.speed > 0:
            raise ConfigError("--speed must be positive")
        overrides["cartesian_speed"] = args.speed / 6000.0
    opts = RunOptions(
        bases=tuple(_split(args.base)) or None,
        cameras=(args.camera,) if args.camera else None,
        margin=args.margin,
        step=args.step,
        params=overrides,
    )
    if not opts.margin >= 0 or not opts.step > 0:
        raise ConfigError("--margin must be >= 0 and --step > 0")
    models = _robots(args.robot)
    results = [run_scenario(scenario, m, opts) for m in models]
    report = {
        "report_version": REPORT_VERSION,
        "tool": {"name": "weldfeas", "version": __version__},
        "config": {
            "scenario": args.scenario,
            "scenario_id": scenario.id,
            "criterion": scenario.criterion,
            "robots": [m.name for m in models],
            "bases": list(opts.bases) if opts.bases else None,
            "camera": args.camera,
            "speed_cm_min": args.speed,
            "margin_m": opts.margin,
            "sample_step_m": opts.step,
            "series": bool(args.series),
        },
        "robots": {m.name: {"morphology": m.morphology, "arm_length_m": m.l_arm,
                            "speed_max_rad_s": m.speed_max.tolist(),
                            "torque_max_n_m": m.torque_max.tolist()} for m in models},
        "results": [r.as_dict(series=args.series) for r in results],
    }
    if len(results) == 2:
        ur = next(r for r in results if r.morphology == "ur")
        puma = next(r for r in results if r.morphology == "puma")
        try:
            report["ur_vs_puma_pct"] = relative_performance(ur, puma)
        except UndefinedRatio:
            report["ur_vs_puma_pct"] = None
    return report


CSV_COLUMNS = (
    "robot", "base", "camera", "seam", "posture", "feasible", "failure", "failure_sample",
    "speed_mean [%]", "speed_max [%]", "speed_argmax_joint", "torque_mean [%]", "torque_max [%]",
    "torque_argmax_joint", "extent [m]", "v_max [cm/min]", "limiting_joint",
)


def report_to_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_COLUMNS)
    for res in report["results"]:
        for o in res["outcomes"]:
            for p in o["postures"] or [{}]:
                st = p.get("stats", {})
                f = p.get("failure", {})
                w.writerow([
                    res["robot"], o["base"], o["camera"], o["seam"], p.get("posture", ""),
                    p.get("feasible", False), f.get("kind", ""), f.get("sample", ""),
                    st.get("speed_mean_pct", ""), st.get("speed_max_pct", ""), st.get("speed_argmax_joint", ""),
                    st.get("torque_mean_pct", ""), st.get("torque_max_pct", ""),
                    st.get("torque_argmax_joint", ""), o.get("extent_m", ""), o.get("v_max_cm_min", ""),
                    o.get("limiting_joint", ""),
                ])
    return buf.getvalue()


def _g(x) -> str:
    return "-" if x is None else f"{x:.6g}"


def report_to_text(report: dict) -> str:
    lines = [f"scenario {report['config']['scenario_id']} ({report['config']['criterion']})"]
    for res in report["results"]:
        lines.append(f"{res['robot']}: value {_g(res['value'])} {res['unit']}, best base {res['best_base'] or '-'}, "
                     f"{res['posture_count']} posture(s)")
        for o in res["outcomes"]:
            head = f"  base {o['base']} camera {o['camera']} seam {o['seam']}:"
            extra = []
            if "extent_m" in o:
                extra.append(f"extent {_g(o['extent_m'])} m")
            if "v_max_cm_min" in o:
                extra.append(f"v_max {_g(o['v_max_cm_min'])} cm/min on joint {o['limiting_joint']}")
            if o["feasible_postures"]:
                extra.append("feasible " + " ".join(o["feasible_postures"]))
            elif "failure" in o:
                f = o["failure"]
                what = f.get("pair") and "-".join(f["pair"]) or f.get("detail") or ""
                extra.append(f"infeasible: {f['kind']} at sample {f['sample']} {what}".rstrip())
            else:
                extra.append("no posture")
            lines.append(head + " " + "; ".join(extra))
    if "ur_vs_puma_pct" in report:
        lines.append(f"UR-like vs PUMA-like: {_g(report['ur_vs_puma_pct'])} %")
    return "\n".join(lines) + "\n"


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def cmd_run(args) -> int:
    report = build_report(args)
    fmt = {"json": canonical_json, "csv": report_to_csv, "text": report_to_text}[args.format]
    _write(fmt(report), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    with open(args.path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            print(f"{args.path}: not valid JSON: {exc}")
            return EXIT_CONFIG
    errors = validate_document(doc)
    if errors:
        for e in errors:
            print(e)
        return EXIT_CONFIG
    print(f"{args.path}: valid")
    return EXIT_OK


def _pick_posture(report: dict, args) -> tuple[dict, dict]:
    for res in report.get("results", []):
        if args.robot and args.robot.lower() not in (res["robot"].lower(), res["morphology"]):
            continue
        for o in res["outcomes"]:
            if args.base and o["base"] != args.base:
                continue
            if args.seam and o["seam"] != args.seam:
                continue
            for p in o["postures"]:
                if args.posture and p["posture"] != args.posture:
                    continue
                if "series" in p:
                    return res, p
    raise DataError("no matching posture with recorded series; run with --series")


def series_csv(report: dict, args) -> str:
    if args.series not in SERIES:
        raise DataError(f"unknown series {args.series!r}")
    res, p = _pick_posture(report, args)
    s = p["series"]
    if args.series not in s:
        raise DataError(f"series {args.series!r} not recorded")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    if args.series == "clearance":
        w.writerow(["t [s]", "clearance [m]"])
        for t, c in zip(s["t"], s["clearance"]):
            w.writerow([repr(t), repr(c)])
        return buf.getvalue()
    limits = report["robots"][res["robot"]]["speed_max_rad_s" if args.series == "qdot" else "torque_max_n_m"]
    w.writerow(["t [s]"] + [f"{args.series}{j + 1}/max [-]" for j in range(6)])
    for t, row in zip(s["t"], s[args.series]):
        w.writerow([repr(t)] + [repr(v / lim) for v, lim in zip(row, limits)])
    return buf.getvalue()


def cmd_plotdata(args) -> int:
    with open(args.report, encoding="utf-8") as fh:
        try:
            report = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{args.report}: not valid JSON ({exc})") from exc
    _write(series_csv(report, args), args.out)
    return EXIT_OK


def cmd_dump(args) -> int:
    s = load_scenario(find_scenario(args.scenario))
    _write(canonical_json(s.to_dict()), args.out)
    return EXIT_OK


def cmd_list(args) -> int:
    seen = set()
    for d in scenario_search_path():
        for p in sorted(d.glob("*.json")) if d.is_dir() else []:
            if p.stem not in seen:
                seen.add(p.stem)
                print(f"{p.stem}\t{p}")
    return EXIT_OK


def _positive_or_nan(text: str) -> float:
    x = float(text)
    if math.isnan(x):
        raise argparse.ArgumentTypeError("not a number")
    return x


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weldfeas", description="Feasibility of fillet-weld trajectories for 6R arms.")
    ap.add_argument("--version", action="version", version=f"weldfeas {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evaluate a scenario")
    r.add_argument("name", nargs="?", help=f"scenario id ({', '.join(BUILTIN_IDS)}) or JSON path")
    r.add_argument("--scenario", help="scenario id or JSON path (alternative to the positional name)")
    r.add_argument("--robot", choices=("ur", "puma", "both"), default="both")
    r.add_argument("--base", action="append", help="base name(s), comma separated or repeated; default all")
    r.add_argument("--camera", choices=("front", "back", "free"))
    r.add_argument("--speed", type=_positive_or_nan, help="weld speed [cm/min]")
    r.add_argument("--margin", type=_positive_or_nan, default=0.01, help="collision margin [m]")
    r.add_argument("--step", type=_positive_or_nan, default=0.002, help="path sample step [m]")
    r.add_argument("--format", choices=("json", "csv", "text"), default="json")
    r.add_argument("--series", action="store_true", help="record per-sample joint series for plotdata")
    r.add_argument("--out", help="output file (default stdout)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a scenario file against the schema")
    v.add_argument("path")
    v.set_defaults(func=cmd_validate)

    p = sub.add_parser("plotdata", help="CSV time series from a report recorded with --series")
    p.add_argument("report")
    p.add_argument("--series", choices=SERIES, default="qdot")
    p.add_argument("--robot")
    p.add_argument("--base")
    p.add_argument("--seam")
    p.add_argument("--posture")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plotdata)

    d = sub.add_parser("dump", help="print a scenario file")
    d.add_argument("scenario")
    d.add_argument("--out")
    d.set_defaults(func=cmd_dump)

    ls = sub.add_parser("list", help="list scenarios on the search path")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    if args.command == "run":
        args.scenario = args.scenario or args.name
        if not args.scenario:
            ap.error("run needs a scenario (positional name or --scenario)")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"weldfeas: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, DataError, InvalidArgument) as exc:
        print(f"weldfeas: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WeldFeasError as exc:
        print(f"weldfeas: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
