import json

import numpy as np
import pytest

from slagflow.cli import EXIT_CONFIG, EXIT_OK, EXIT_SPLIT, dispatch, parse_sweep, set_dotted
from slagflow.curve import hausdorff
from slagflow.output import dumps, read_svg_polylines, read_timeseries

PAIR = {"coeffs": [[-1, 0], [0, 0], [1, 0]]}
THREE = {"roots": [[-1, 0], [0, 0.2], [1, 0]]}


def _config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return str(path)


def _stable(**output):
    return {
        "dimension": 2,
        "polynomial": PAIR,
        "initial_curve": {"type": "sine", "from": 0, "to": 1, "amplitude": 0.05, "n_points": 64},
        "numerics": {"n_points": 64},
        "output": output,
    }


@pytest.fixture(scope="module")
def stable_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("stable")
    out = tmp / "out"
    code = dispatch(["flow", "--config", _config(tmp, _stable(snapshot_every=1000)), "--out", str(out)])
    return code, out


def test_stable_flow_converges(stable_run):
    code, out = stable_run
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"]["kind"] == "Converged"
    assert report["numerics"]["conv_tol"] == 1e-3
    assert report["stability"]["stable"]
    assert sorted(p.name for p in out.glob("final_curve_*.json")) == ["final_curve_0.json"]


def test_report_round_trips(stable_run):
    _, out = stable_run
    text = (out / "report.json").read_text()
    assert dumps(json.loads(text)) == text


def test_timeseries_has_frozen_header(stable_run):
    _, out = stable_run
    header, rows = read_timeseries(out / "timeseries.csv")
    assert header[:3] == ["tau", "sup_theta", "inf_theta"]
    assert header[-1] == "l2_phase_var"
    assert rows.shape[0] > 1 and np.all(np.diff(rows[:, 0]) > 0)


def test_final_curve_file_lists_points_and_grading(stable_run):
    _, out = stable_run
    data = json.loads((out / "final_curve_0.json").read_text())
    assert {"points", "grading_offset"} <= set(data)
    assert data["points"][0] == [-1.0, 0.0]


def test_final_snapshot_overlays_the_connector(stable_run):
    _, out = stable_run
    last = sorted(out.glob("snap_*.svg"))[-1]
    lines = read_svg_polylines(last)
    (curve,) = lines["curve"]
    (ref,) = lines["reference"]
    assert hausdorff(curve, ref) < 1e-3


def test_zero_step_run(tmp_path):
    doc = _stable(snapshot_every=1)
    doc["numerics"]["tau_max"] = 0.0
    out = tmp_path / "out"
    assert dispatch(["flow", "--config", _config(tmp_path, doc), "--out", str(out)]) == EXIT_OK
    assert (out / "report.json").exists()
    _, rows = read_timeseries(out / "timeseries.csv")
    assert rows.shape[0] == 1
    assert not list(out.glob("snap_*.svg"))
    assert json.loads((out / "report.json").read_text())["verdict"]["kind"] == "MaxTime"


@pytest.mark.slow
def test_unstable_flow_splits(tmp_path):
    doc = {
        "dimension": 2,
        "polynomial": THREE,
        "initial_curve": {"type": "arc", "from": 0, "to": 2, "bulge": 0.3, "n_points": 64},
        "numerics": {"n_points": 64},
    }
    out = tmp_path / "out"
    assert dispatch(["flow", "--config", _config(tmp_path, doc), "--out", str(out)]) == EXIT_SPLIT
    assert sorted(p.name for p in out.glob("final_curve_*.json")) == ["final_curve_0.json", "final_curve_1.json"]
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"]["kind"] == "SplitAt"
    assert [f["roots"] for f in report["final"]] == [[0, 1], [1, 2]]


def test_decompose_lists_pieces_by_phase(tmp_path):
    doc = {
        "dimension": 2,
        "polynomial": THREE,
        "initial_curve": {"type": "arc", "from": 0, "to": 2, "bulge": 0.3, "n_points": 200},
        "stability": {"bound": 0},
    }
    out = tmp_path / "out"
    assert dispatch(["decompose", "--config", _config(tmp_path, doc), "--out", str(out)]) == EXIT_OK
    phis = [piece["phi"] for piece in json.loads((out / "report.json").read_text())["pieces"]]
    assert len(phis) == 2
    assert all(a >= b for a, b in zip(phis, phis[1:]))


def test_stability_report_keys(tmp_path):
    doc = {
        "dimension": 2,
        "polynomial": THREE,
        "initial_curve": {"type": "arc", "from": 0, "to": 2, "bulge": 0.3, "n_points": 200},
    }
    out = tmp_path / "out"
    assert dispatch(["stability", "--config", _config(tmp_path, doc), "--out", str(out)]) == EXIT_OK
    block = json.loads((out / "report.json").read_text())["stability"]
    assert not block["close_ok"]
    for s in block["splittings"]:
        assert {"root", "winding", "phi1", "phi2", "close_ok", "vclose_ok", "ineq_filtered"} <= set(s)


def test_crosscheck(tmp_path, capsys):
    doc = {"crosscheck": {"count": 8}}
    out = tmp_path / "out"
    assert dispatch(["crosscheck", "--config", _config(tmp_path, doc), "--out", str(out), "--seed", "3"]) == EXIT_OK
    assert "max relative velocity disagreement" in capsys.readouterr().out
    assert json.loads((out / "report.json").read_text())["seed"] == 3


def test_localmodel(tmp_path):
    out = tmp_path / "out"
    assert dispatch(["localmodel", "--config", _config(tmp_path, {}), "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "report.json").read_text())["max_abs_phase"] < 1e-10


def test_slag_shoot_and_connect(tmp_path):
    doc = {"dimension": 2, "polynomial": PAIR, "slag": {"root": 0, "phi": 0.0}}
    out = tmp_path / "shoot"
    assert dispatch(["slag", "shoot", "--config", _config(tmp_path, doc), "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "report.json").read_text())["captured"]
    doc["slag"] = {"from": 0, "to": 1, "window": [-0.3, 0.2]}
    out = tmp_path / "connect"
    assert dispatch(["slag", "connect", "--config", _config(tmp_path, doc), "--out", str(out)]) == EXIT_OK
    assert abs(json.loads((out / "report.json").read_text())["phi_star"]) < 1e-9


def _config_error(tmp_path, text, capsys):
    path = tmp_path / "bad.json"
    path.write_text(text)
    code = dispatch(["flow", "--config", str(path), "--out", str(tmp_path / "out")])
    return code, capsys.readouterr().err


def test_unknown_numerics_key_reports_its_line(tmp_path, capsys):
    text = '{\n  "dimension": 2,\n  "numerics": {\n    "n_pionts": 10\n  },\n  "polynomial": {"coeffs": [[-1, 0], [0, 0], [1, 0]]}\n}\n'
    code, err = _config_error(tmp_path, text, capsys)
    assert code == EXIT_CONFIG
    assert "line 4:" in err and "n_pionts" in err


def test_invalid_json_reports_its_line(tmp_path, capsys):
    code, err = _config_error(tmp_path, '{\n  "dimension": 2,\n  "polynomial": {}\n  "x": 1\n}\n', capsys)
    assert code == EXIT_CONFIG
    assert "line 4:" in err


def test_unknown_section_and_bad_dimension(tmp_path, capsys):
    code, err = _config_error(tmp_path, '{\n  "dimension": 2,\n  "plot": {}\n}\n', capsys)
    assert code == EXIT_CONFIG and "line 3:" in err
    code, err = _config_error(tmp_path, '{\n  "dimension": 1\n}\n', capsys)
    assert code == EXIT_CONFIG and "line 2:" in err


def test_missing_config_file(tmp_path, capsys):
    assert dispatch(["flow", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG


def test_curve_endpoint_not_a_root(tmp_path, capsys):
    doc = _stable()
    doc["initial_curve"]["to"] = [2.0, 0.0]
    code = dispatch(["flow", "--config", _config(tmp_path, doc), "--out", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    assert "line" in capsys.readouterr().err


def test_sweep_grid():
    grid = parse_sweep(["numerics.c_safety=0.2,0.4", "dimension=2"])
    assert [changes for _, changes in grid] == [
        {"numerics.c_safety": 0.2, "dimension": 2},
        {"numerics.c_safety": 0.4, "dimension": 2},
    ]
    assert set_dotted({"a": {"b": 1}}, "a.c", 2) == {"a": {"b": 1, "c": 2}}


def test_sweep_writes_one_directory_per_point(tmp_path):
    out = tmp_path / "out"
    code = dispatch(
        ["localmodel", "--config", _config(tmp_path, {}), "--out", str(out), "--sweep", "local_model.samples=50,80"]
    )
    assert code == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["local_model-samples=50", "local_model-samples=80"]
