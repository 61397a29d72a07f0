import csv
import json
import math

import numpy as np
import pytest

from lpvmpc.cli import circle_polyline, main
from lpvmpc.config import MpcConfig
from lpvmpc.scenario import (load_scenario, scenario_from_dict, scenario_to_dict,
                             shipped_scenario, shipped_scenario_path)
from lpvmpc.sim import Scenario, ScenarioError
from lpvmpc.vehicle import VehicleParams


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def short(doc=None, duration=12):
    doc = dict(doc or {})
    doc["run"] = {**doc.get("run", {}), "duration": duration}
    return doc


def test_empty_document_gives_defaults():
    sc = scenario_from_dict({})
    assert sc.vehicle == VehicleParams()
    ref = MpcConfig()
    for name in ("Q", "R", "P", "state_lo", "state_hi", "input_lo", "input_hi", "rate_lo", "rate_hi"):
        np.testing.assert_array_equal(getattr(sc.mpc, name), getattr(ref, name))
    assert sc.mpc.horizon == 8 and sc.road.r1 == 1 and sc.road.r2 == 4
    assert sc.initial_state == (0, 0, 10, 0, 0, 0)


@pytest.mark.parametrize("doc", [
    {"road": {"bogus": 1}},
    {"extra": {}},
    {"mpc": {"horizon": 0}},
    {"mpc": {"Q": [1, 2]}},
    {"obstacle": {"x": 1}},
    {"run": {"controller": "pid"}},
    {"vehicle": {"mass": -1}},
    {"road": {"speed_profile": [[0, 0.5]]}},
])
def test_schema_rejections(doc):
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc)


def test_round_trip():
    sc = shipped_scenario("scenario_obstacle.json")
    doc = scenario_to_dict(sc)
    assert scenario_to_dict(scenario_from_dict(json.loads(json.dumps(doc)))) == doc


def test_weights_accept_diagonal_or_matrix():
    a = scenario_from_dict({"mpc": {"R": [0.2, 0.3]}})
    b = scenario_from_dict({"mpc": {"R": [[0.2, 0], [0, 0.3]]}})
    np.testing.assert_array_equal(a.mpc.R, b.mpc.R)


def test_shipped_scenarios():
    rt = shipped_scenario("scenario_rt.json")
    ob = shipped_scenario("scenario_obstacle.json")
    assert rt.obstacle is None and rt.duration >= 400
    assert (ob.obstacle.cx, ob.obstacle.cy, ob.obstacle.radius) == (29.4819, 17.4753, 1.0)


def test_malformed_file_writes_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "out"
    assert main(["run", str(bad), "--out", str(out)]) == 2
    assert not out.exists()
    assert "error" in capsys.readouterr().err
    assert main(["run", str(write(tmp_path, {"mpc": {"nope": 1}})), "--out", str(out)]) == 2
    assert not out.exists()


def test_run_writes_artifacts(tmp_path):
    src = write(tmp_path, short(json.loads(shipped_scenario_path("scenario_rt.json").read_text())))
    out = tmp_path / "out"
    assert main(["run", str(src), "--out", str(out), "--controller", "lpvmpc", "--dump-qp"]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"lpvmpc_trajectory.csv", "lpvmpc_metrics.json", "scenario.json", "qp_dumps"} <= names
    assert "nmpc_trajectory.csv" not in names
    metrics = json.loads((out / "lpvmpc_metrics.json").read_text())
    assert metrics["steps"] == 12
    dumps = sorted((out / "qp_dumps").iterdir())
    assert len(dumps) == 12
    with np.load(dumps[0]) as d:
        assert set(d.files) == {"H", "f", "G", "h"}
    with open(out / "lpvmpc_trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 13 and rows[0][:3] == ["k", "X", "Y"]
    # the library gives the same trajectory
    rec = __import__("lpvmpc").run_single(load_scenario(out / "scenario.json"), "lpvmpc")
    np.testing.assert_allclose([float(r[1]) for r in rows[1:]], rec.states[:, 0], rtol=1e-15)


def test_compare_report(tmp_path, capsys):
    src = write(tmp_path, short({"obstacle": None}))
    out = tmp_path / "cmp"
    assert main(["compare", str(src), "--out", str(out)]) == 0
    report = json.loads((out / "compare.json").read_text())
    assert set(report["controllers"]) == {"lpvmpc", "nmpc"}
    assert report["speedup"] > 0
    for row in report["controllers"].values():
        assert row["min_clearance"] is None
        assert row["solve_time_min"] <= row["solve_time_avg"] <= row["solve_time_max"]
    text = capsys.readouterr().out
    assert "speedup" in text and "N/A" in text


def test_overrides(tmp_path):
    src = write(tmp_path, short())
    out = tmp_path / "o"
    assert main(["run", str(src), "--out", str(out), "--controller", "lpvmpc", "--substeps", "3",
                 "--seed", "7"]) == 0
    doc = json.loads((out / "scenario.json").read_text())
    assert doc["run"]["substeps"] == 3 and doc["run"]["seed"] == 7


def test_plotdata(tmp_path):
    out = tmp_path / "rec"
    out.mkdir()
    header = ["k", "X", "Y", "steer", "accel"]
    with open(out / "lpvmpc_trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(500):
            w.writerow([k, 0.5 * k, 0.0, 0.0, 0.0])
    (out / "scenario.json").write_text(json.dumps({"obstacle": {"x": 29.4819, "y": 17.4753}}))
    assert main(["plotdata", str(out / "lpvmpc_trajectory.csv"), "--downsample", "5"]) == 0
    with open(out / "lpvmpc_path.csv") as fh:
        assert len(list(csv.reader(fh))) == 101
    road = np.loadtxt(out / "road.csv", delimiter=",", skiprows=1)
    center, right, left = road[:, :2], road[:, 2:4], road[:, 4:6]
    np.testing.assert_allclose(np.hypot(*(right - center).T), 1.0)
    np.testing.assert_allclose(np.hypot(*(left - center).T), 4.0)
    circle = np.loadtxt(out / "obstacle.csv", delimiter=",", skiprows=1)
    assert circle.shape == (64, 2)
    np.testing.assert_allclose(np.hypot(circle[:, 0] - 29.4819, circle[:, 1] - 17.4753), 1.0)


def test_plotdata_missing_record(tmp_path):
    assert main(["plotdata", str(tmp_path / "none.csv")]) == 2


def test_circle_polyline():
    pts = circle_polyline(1, 2, 3)
    assert len(pts) == 64
    np.testing.assert_allclose(np.hypot(pts[:, 0] - 1, pts[:, 1] - 2), 3)
