"""Command line entry point.

Exit codes: 0 success, 2 bad scenario file or missing record, 3 run failure or
a hard-constraint violation in the closed loop.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from .reference import ReferencePath, generate_sine_road
from .scenario import load_scenario, scenario_to_dict
from .sim import RECORD_COLUMNS, Metrics, RunRecord, Scenario, ScenarioError, run

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_RUN_FAILURE = 3
CIRCLE_POINTS = 64

log = logging.getLogger("lpvmpc")


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    if getattr(args, "controller", None):
        scenario.controller = args.controller
    if getattr(args, "substeps", None) is not None:
        scenario.substeps = args.substeps
    if getattr(args, "seed", None) is not None:
        scenario.seed = args.seed
    scenario.validate()
    return scenario


def write_record_csv(record: RunRecord, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for row in record.rows():
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])


def read_record_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        columns = reader.fieldnames or []
    missing = {"k", "X", "Y", "steer", "accel"} - set(columns)
    if missing:
        raise ValueError(f"record lacks columns {sorted(missing)}")
    out = {}
    for name in columns:
        if name == "status":
            out[name] = np.array([r[name] for r in rows])
        else:
            out[name] = np.array([float(r[name]) for r in rows])
    return out


def write_metrics_json(metrics: Metrics, path: Path) -> None:
    path.write_text(json.dumps(metrics.to_dict(), indent=2) + "\n")


def _dump_qps(record: RunRecord, directory: Path) -> None:
    directory.mkdir(exist_ok=True)
    for k, H, f, G, h in record.qp_dumps:
        np.savez(directory / f"{record.controller}_step{k:05d}.npz", H=H, f=f, G=G, h=h)


def _hard_violations(records: dict[str, RunRecord]) -> list[str]:
    bad = []
    for name, rec in records.items():
        m = rec.metrics
        if m.input_violations or m.obstacle_violations:
            bad.append(f"{name}: {m.input_violations} input and "
                       f"{m.obstacle_violations} obstacle violations")
    return bad


def _execute(scenario: Scenario, out_dir: Path, dump_qp: bool):
    """Run the scenario and write all artifacts to ``out_dir`` in one move."""
    records = run(scenario, dump_qp=dump_qp)
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
    try:
        (staging / "scenario.json").write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")
        for name, rec in records.items():
            write_record_csv(rec, staging / f"{name}_trajectory.csv")
            write_metrics_json(rec.metrics, staging / f"{name}_metrics.json")
            if dump_qp:
                _dump_qps(rec, staging / "qp_dumps")
        for item in staging.iterdir():
            target = out_dir / item.name
            if target.is_dir():
                shutil.rmtree(target)
            item.replace(target)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return records


def _load(args) -> Scenario:
    return _apply_overrides(load_scenario(args.scenario), args)


def cmd_run(args) -> int:
    try:
        scenario = _load(args)
    except ScenarioError as exc:
        return _fail(EXIT_BAD_INPUT, str(exc))
    try:
        records = _execute(scenario, Path(args.out), args.dump_qp)
    except (ScenarioError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_RUN_FAILURE, f"run failed: {exc}")
    for name, rec in records.items():
        m = rec.metrics
        print(f"{name}: {m.steps} steps, avg solve {m.solve_time_avg * 1e3:.3f} ms, "
              f"rmse {m.rmse:.4f} m, min clearance {_fmt_clearance(m.min_clearance)}")
    bad = _hard_violations(records)
    if bad:
        return _fail(EXIT_RUN_FAILURE, "; ".join(bad))
    return EXIT_OK


def _fmt_clearance(value: float) -> str:
    return "N/A" if math.isinf(value) else f"{value:.4f} m"


def compare_report(records: dict[str, RunRecord]) -> dict:
    """Side-by-side timing, tracking and clearance summary of a "both" run."""
    per = {}
    for name, rec in records.items():
        m = rec.metrics
        per[name] = {
            "solve_time_avg": m.solve_time_avg,
            "solve_time_max": m.solve_time_max,
            "solve_time_min": m.solve_time_min,
            "rmse": m.rmse,
            "min_clearance": None if math.isinf(m.min_clearance) else m.min_clearance,
            "constraint_violations": m.constraint_violations,
            "fallbacks": m.fallbacks,
        }
    speedup = None
    if "nmpc" in per and "lpvmpc" in per and per["lpvmpc"]["solve_time_avg"] > 0:
        speedup = per["nmpc"]["solve_time_avg"] / per["lpvmpc"]["solve_time_avg"]
    return {"controllers": per, "speedup": speedup}


def format_report(report: dict) -> str:
    names = list(report["controllers"])
    lines = [f"{'':24s}" + "".join(f"{n:>14s}" for n in names)]
    rows = (("average time [s]", "solve_time_avg", "{:.5f}"),
            ("maximum time [s]", "solve_time_max", "{:.5f}"),
            ("minimum time [s]", "solve_time_min", "{:.5f}"),
            ("rmse [m]", "rmse", "{:.4f}"),
            ("min clearance [m]", "min_clearance", "{:.4f}"),
            ("violations", "constraint_violations", "{:d}"),
            ("fallbacks", "fallbacks", "{:d}"))
    for label, key, fmt in rows:
        cells = []
        for n in names:
            value = report["controllers"][n][key]
            cells.append("N/A" if value is None else fmt.format(value))
        lines.append(f"{label:24s}" + "".join(f"{c:>14s}" for c in cells))
    speedup = report["speedup"]
    lines.append(f"{'speedup (nmpc/lpvmpc)':24s}" + ("N/A" if speedup is None else f"{speedup:.2f}x"))
    return "\n".join(lines)


def cmd_compare(args) -> int:
    args.controller = "both"
    try:
        scenario = _load(args)
    except ScenarioError as exc:
        return _fail(EXIT_BAD_INPUT, str(exc))
    out = Path(args.out)
    try:
        records = _execute(scenario, out, args.dump_qp)
    except (ScenarioError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_RUN_FAILURE, f"run failed: {exc}")
    report = compare_report(records)
    text = format_report(report)
    (out / "compare.json").write_text(json.dumps(report, indent=2) + "\n")
    (out / "compare.txt").write_text(text + "\n")
    print(text)
    bad = _hard_violations(records)
    if bad:
        return _fail(EXIT_RUN_FAILURE, "; ".join(bad))
    return EXIT_OK


def road_edges(scenario: Scenario) -> np.ndarray:
    """Centerline and both road edges, columns X, Y, right_X, right_Y, left_X, left_Y."""
    path = ReferencePath(generate_sine_road(scenario.road), scenario.road.ts)
    pts = path.points
    yaw = path.table[:, 4]
    normal = np.column_stack([-np.sin(yaw), np.cos(yaw)])
    right = pts - scenario.road.r1 * normal
    left = pts + scenario.road.r2 * normal
    return np.hstack([pts, right, left])


def circle_polyline(cx: float, cy: float, radius: float, n: int = CIRCLE_POINTS) -> np.ndarray:
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.column_stack([cx + radius * np.cos(theta), cy + radius * np.sin(theta)])


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_plotdata(args) -> int:
    record_path = Path(args.record)
    if not record_path.is_file():
        return _fail(EXIT_BAD_INPUT, f"record {record_path} not found")
    if args.downsample < 1:
        return _fail(EXIT_BAD_INPUT, "downsample must be at least 1")
    try:
        rec = read_record_csv(record_path)
    except (OSError, ValueError, KeyError) as exc:
        return _fail(EXIT_BAD_INPUT, f"unreadable record {record_path}: {exc}")
    scenario_path = Path(args.scenario) if args.scenario else record_path.parent / "scenario.json"
    try:
        scenario = load_scenario(scenario_path) if scenario_path.is_file() else Scenario()
    except ScenarioError as exc:
        return _fail(EXIT_BAD_INPUT, str(exc))

    out = Path(args.out) if args.out else record_path.parent
    out.mkdir(parents=True, exist_ok=True)
    stem = record_path.stem.removesuffix("_trajectory")
    sel = slice(None, None, args.downsample)
    k = rec["k"][sel].astype(int)
    _write_csv(out / f"{stem}_path.csv", ("k", "X", "Y"),
               zip(k, rec["X"][sel], rec["Y"][sel]))
    _write_csv(out / f"{stem}_inputs.csv", ("k", "steer", "accel"),
               zip(k, rec["steer"][sel], rec["accel"][sel]))
    _write_csv(out / "road.csv", ("X", "Y", "right_X", "right_Y", "left_X", "left_Y"),
               road_edges(scenario)[sel])
    obs = scenario.obstacle
    if obs is not None:
        _write_csv(out / "obstacle.csv", ("X", "Y"), circle_polyline(obs.cx, obs.cy, obs.radius))
    print(f"wrote plot data for {stem} to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpvmpc", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging, incl. SQP traces")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--dump-qp", action="store_true", help="save (H, f, G, h) of every step")
        p.add_argument("--substeps", type=int, help="plant integration substeps per sample")
        p.add_argument("--seed", type=int, help="seed for randomized initial perturbations")
        p.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("run", help="closed-loop run of one or both controllers")
    common(p)
    p.add_argument("--controller", choices=("nmpc", "lpvmpc", "both"))
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run both controllers and print a comparison report")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plotdata", help="export CSV bundles for plotting a recorded run")
    p.add_argument("record", help="<controller>_trajectory.csv written by run/compare")
    p.add_argument("--scenario", help="scenario JSON (default: scenario.json next to the record)")
    p.add_argument("--out", help="output directory (default: the record's directory)")
    p.add_argument("--downsample", type=int, default=5)
    p.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
