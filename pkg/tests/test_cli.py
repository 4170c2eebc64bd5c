import json
import math
import subprocess
import sys

import pytest

from angenent import svg
from angenent.cli import main
from angenent.curve import axis_crossings, read_curve_csv


def _cfg(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


@pytest.mark.parametrize("bad, field", [
    ('{"lambda": 2, ', "config"),
    ({"lambda": 0.5}, "lambda"),
    ({"lambda": 2, "n_vertices": 15}, "n_vertices"),
    ({"lambda": 2, "cfl": 0.9}, "cfl"),
    ({"lambda": 2, "a": "left"}, "a"),
    ({"lambda": 2, "colour": "red"}, "colour"),
    ({"lambda": 2, "tolerances": {"kg": 1e-3}}, "tolerances.kg"),
    ({"a": 0.3}, "lambda"),
])
def test_malformed_config_exit_2_no_artifacts(tmp_path, capsys, bad, field):
    out = tmp_path / "out"
    code = main(["flow", "--config", _cfg(tmp_path, bad), "--out-dir", str(out)])
    assert code == 2
    assert not out.exists()
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "usage" and err["field"] == field


def test_bad_subcommand_and_flag():
    assert main(["fly"]) == 2
    assert main(["flow", "--format", "png"]) == 2


def test_flow_far_left_falls_left(tmp_path):
    out = tmp_path / "out"
    cfg = _cfg(tmp_path, {"lambda": 3, "a": 0.05, "n_vertices": 128, "max_time": 20})
    assert main(["flow", "--config", cfg, "--out-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["outcome"] == "FellLeft"
    assert summary["r_max"] < math.sqrt(4.0)
    assert summary["final_length"] < summary["2*L_g(P)"]
    names = {p.name for p in out.iterdir()}
    assert {"diagnostics.csv", "initial_curve.csv", "final_curve.csv", "flow.svg", "summary.json",
            "manifest.json"} <= names
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "flow" and man["config"]["a"] == 0.05
    assert {o["path"] for o in man["outputs"]} == names - {"manifest.json"}


def test_flow_is_deterministic(tmp_path):
    cfg = _cfg(tmp_path, {"lambda": 2, "a": 0.3, "n_vertices": 64, "max_time": 1.0, "snapshots": 2})
    for d in ("a", "b"):
        assert main(["flow", "--config", cfg, "--out-dir", str(tmp_path / d)]) == 0
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes(), p.name


def test_flow_svg_regenerates_from_csv(tmp_path):
    out = tmp_path / "out"
    cfg = _cfg(tmp_path, {"lambda": 2, "a": 0.3, "n_vertices": 64, "max_time": 1.0, "snapshots": 2})
    assert main(["flow", "--config", cfg, "--out-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    files = ["initial_curve.csv"] + [s["file"] for s in summary["snapshots"]] + ["final_curve.csv"]
    regen = tmp_path / "regen"
    assert main(["plot", "--lambda", "2", "--out-dir", str(regen), "--name", "flow.svg"]
                + [str(out / f) for f in files]) == 0
    assert (regen / "flow.svg").read_bytes() == (out / "flow.svg").read_bytes()


def test_format_filter(tmp_path):
    out = tmp_path / "out"
    assert main(["init", "--lambda", "2", "--format", "csv", "--out-dir", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"initial_curve.csv", "manifest.json"}


def test_init_outputs(tmp_path):
    out = tmp_path / "out"
    cfg = _cfg(tmp_path, {"lambda": 2, "a": 0.4, "n_vertices": 256})
    assert main(["init", "--config", cfg, "--out-dir", str(out)]) == 0
    meta = json.loads((out / "initial.json").read_text())
    assert abs(meta["gauss_area_residual"]) < 1e-10
    assert meta["perimeter_margin"] > 0
    c = read_curve_csv(out / "initial_curve.csv")
    assert svg.render([("initial_curve", c.points)], math.sqrt(2)) == (out / "initial_curve.svg").read_text()


def test_shoot_and_compare(tmp_path):
    out = tmp_path / "shoot"
    assert main(["shoot", "--lambda", "2", "--out-dir", str(out)]) == 0
    rep = json.loads((out / "summary.json").read_text())
    a, b = sorted(rep["axis_crossings"])
    assert 0 < a < math.sqrt(2) < b
    assert rep["max_abs_kg"] < 1e-6
    assert (out / "sweep.csv").read_text().startswith("launch_r,terminal,return_angle,return_r\n")
    c = read_curve_csv(out / "geodesic.csv")
    assert sorted(axis_crossings(c.points)) == pytest.approx([a, b], abs=1e-12)
    out2 = tmp_path / "cmp"
    assert main(["shoot", "--lambda", "2", "--out-dir", str(out2), "--compare", str(out / "geodesic.csv")]) == 0
    rep2 = json.loads((out2 / "summary.json").read_text())
    assert rep2["hausdorff_to_compare"] < 1e-12
    assert "not asserted" in rep2["compare_note"]


def test_verify_reports_and_exit_code(tmp_path, capsys):
    out = tmp_path / "v"
    code = main(["verify", "--out-dir", str(out)])
    rep = json.loads((out / "verify.json").read_text())
    assert code == (0 if rep["passed"] else 1)
    assert set(rep["summary"]) == {"P_less_C", "base_case", "pointwise", "Q"}
    printed = capsys.readouterr().out
    assert "base_case:" in printed


def test_numerical_failure_exit_1(tmp_path, capsys):
    cfg = _cfg(tmp_path, {"lambda": 2, "a_lo": 0.05, "a_hi": 0.1, "n_vertices": 64, "max_time": 5})
    assert main(["search", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "numerical"


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ANGENENT_THREADS", "zero")
    assert main(["init", "--lambda", "2", "--out-dir", str(tmp_path)]) == 2
    monkeypatch.setenv("ANGENENT_THREADS", "1")
    assert main(["init", "--lambda", "2", "--format", "json", "--out-dir", str(tmp_path)]) == 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "angenent", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "0.1.0"
