import csv
import json
import math

import jsonschema
import numpy as np
import pytest

from cylmap.cli import main
from cylmap.config import ConfigError, example_config, load_config, load_schema, parse_config
from cylmap.examples import EXAMPLES, analytic_momentum, get_example, list_examples
from cylmap.pipeline import run
from cylmap.report import dumps, export_polylines, strip_timing, summary

REPORT_SCHEMA = load_schema("run_report")


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def run_example(name, tmp_path, resolution=16):
    return run(example_config(name, resolution, str(tmp_path)))


# examples registry


def test_registry_names():
    names = [n for n, _ in list_examples()]
    assert {"t2-standard", "t2-doubled", "r2-t2", "linear-torus-rep"} <= set(names)
    assert set(names) == set(EXAMPLES)


def test_unknown_example():
    with pytest.raises(KeyError, match="t2-standard"):
        get_example("nope")


def test_analytic_momentum_closed_forms():
    pts = np.array([[0.5, 1.5], [2.0, 0.25]])
    np.testing.assert_allclose(analytic_momentum("t2-standard", pts), pts[:, 1:2])
    np.testing.assert_allclose(analytic_momentum("t2-doubled", pts), 2 * pts[:, 1:2])
    np.testing.assert_allclose(analytic_momentum("r2-t2", pts), np.stack([pts[:, 1], -pts[:, 0]], 1))


# pipeline on the examples


def test_run_t2_standard(tmp_path):
    res = run_example("t2-standard", tmp_path)
    r = res.report
    assert res.exit_code == 0
    assert abs(r["holonomy"]["group"]["lattice_basis"][0][0]) == pytest.approx(2 * math.pi, abs=1e-9)
    assert r["harness"]["weak_convexity"]["passed"]
    assert r["harness"]["fibers"]["all_connected"]
    assert r["harness"]["fibers"]["histogram"] == {"1": 16}
    jsonschema.validate(r, REPORT_SCHEMA)


def test_run_t2_doubled(tmp_path):
    r = run_example("t2-doubled", tmp_path).report
    assert abs(r["holonomy"]["group"]["lattice_basis"][0][0]) == pytest.approx(4 * math.pi, abs=1e-9)
    assert r["harness"]["weak_convexity"]["passed"]
    assert r["harness"]["fibers"]["histogram"] == {"2": 8}
    kinds = {p["kind"] for p in r["polylines"]}
    assert {"image", "geodesic"} <= kinds
    jsonschema.validate(r, REPORT_SCHEMA)


def test_run_linear_rep(tmp_path):
    res = run(example_config("linear-torus-rep", 8, str(tmp_path)))
    r = res.report
    assert res.exit_code == 0
    assert r["holonomy"]["group"]["lattice_basis"] == []
    assert r["harness"]["fibers"]["all_connected"]
    assert r["harness"]["convexity"]["passed"]
    hull = r["harness"]["image_hull"]
    assert hull["hausdorff"] <= 0.01 * hull["diameter"]
    jsonschema.validate(r, REPORT_SCHEMA)


def test_assumptions_listed(tmp_path):
    r = run_example("t2-standard", tmp_path).report
    text = " ".join(r["assumptions"])
    assert "closedness" in text
    assert "holonomy closed" in text


def test_failed_check_reported(tmp_path):
    doc = {
        "schema_version": 1,
        "model": {"omega": [[0, 1], [-1, 0]], "periods": [6.283185307179586, 6.283185307179586], "generators": [[1, 0]]},
        "mesh": {"resolution": 8},
        "tasks": ["holonomy", "normalform"],
        "tolerances": {"normal_form": 1e-300},
        "slice": {"point": [1.0, 2.0]},
        "output": {"dir": str(tmp_path)},
    }
    res = run(parse_config(doc))
    assert res.exit_code == 3
    assert res.report["exit_code"] == 3
    assert not res.report["checks"]["normal_form"]["passed"]
    jsonschema.validate(res.report, REPORT_SCHEMA)


def test_determinism(tmp_path):
    a = run_example("t2-doubled", tmp_path).report
    b = run_example("t2-doubled", tmp_path).report
    assert dumps(strip_timing(a)) == dumps(strip_timing(b))


# config parsing


def test_config_roundtrip(tmp_path):
    p = write_config(tmp_path, {"schema_version": 1, "example": "t2-standard", "mesh": {"resolution": 12}})
    cfg = load_config(p)
    assert cfg.resolution == 12
    assert cfg.base_dir == tmp_path
    assert cfg.echo()["tasks"] == ["holonomy", "momentum", "harness", "normalform"]
    jsonschema.validate(cfg.raw, load_schema("run_config"))


@pytest.mark.parametrize(
    "doc, match",
    [
        ({"example": "t2-standard"}, "schema_version"),
        ({"schema_version": 2, "example": "t2-standard"}, "schema_version"),
        ({"schema_version": 1, "example": "t2-standard", "mesh": {"resolution": 4}}, "mesh/resolution"),
        ({"schema_version": 1, "example": "t2-standard", "tolerances": {"eps_fiber": 0}}, "tolerances/eps_fiber"),
        ({"schema_version": 1}, "root"),
        ({"schema_version": 1, "example": "t2-standard", "bogus": 1}, "bogus"),
        (
            {"schema_version": 1, "model": {"omega": [[0, 1], [-1, 0]], "periods": [1, 1], "generators": [[1, 0, 0]]}},
            "generators",
        ),
    ],
)
def test_config_errors(doc, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(doc)


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")


def test_config_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(p)


# report serialization


def test_floats_17_digits():
    x = 0.1 + 0.2
    text = dumps({"x": x, "y": 1.0, "z": math.inf, "w": -math.inf, "n": math.nan, "i": 3})
    d = json.loads(text)
    assert d["x"] == x
    assert f"{x:.17g}" in text
    assert d["y"] == 1.0 and "1.0" in text
    assert d["z"] == "Infinity" and d["w"] == "-Infinity" and d["n"] == "NaN"
    assert d["i"] == 3


def test_dumps_numpy_and_order():
    text = dumps({"b": np.array([1.5, 2.0]), "a": np.int64(4), "c": np.bool_(True)})
    assert list(json.loads(text)) == ["b", "a", "c"]
    assert json.loads(text) == {"b": [1.5, 2.0], "a": 4, "c": True}


def test_dumps_rejects_unknown():
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_export_empty_header_only(tmp_path):
    p = export_polylines({"polylines": []}, tmp_path / "p.csv")
    assert p.read_text().strip() == "polyline_id,kind,vertex,c0"


def test_export_five_point_geodesic(tmp_path):
    pts = np.linspace(0, 1, 5)[:, None] * [1.0, 2.0]
    p = export_polylines({"polylines": [{"kind": "geodesic", "points": pts}]}, tmp_path / "p.csv")
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["polyline_id", "kind", "vertex", "c0", "c1"]
    assert len(rows) == 6
    assert [r[2] for r in rows[1:]] == ["0", "1", "2", "3", "4"]
    assert float(rows[-1][4]) == 2.0


def test_export_io_error_has_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        export_polylines({"polylines": []}, blocker / "sub" / "p.csv")


def test_summary_view(tmp_path):
    r = run_example("t2-standard", tmp_path).report
    s = summary(r)
    assert s["passed"] is True
    assert set(s) == {"source", "exit_code", "checks", "passed"}


# CLI


def test_cli_list_examples(capsys):
    assert main(["list-examples"]) == 0
    out = capsys.readouterr().out
    assert "t2-doubled" in out


def test_cli_schema(capsys):
    assert main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out) == REPORT_SCHEMA
    assert main(["schema", "--config"]) == 0
    assert "schema_version" in json.loads(capsys.readouterr().out)["properties"]


def test_cli_example_writes_outputs(tmp_path, capsys):
    assert main(["example", "t2-doubled", "--resolution", "16", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS weak_convexity" in out
    report = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(report, REPORT_SCHEMA)
    assert json.loads((tmp_path / "summary.json").read_text())["passed"] is True
    rows = list(csv.reader((tmp_path / "polylines.csv").open()))
    assert {r[1] for r in rows[1:]} >= {"image", "geodesic"}


def test_cli_run_config_relative_output(tmp_path):
    p = write_config(
        tmp_path,
        {"schema_version": 1, "example": "t2-standard", "mesh": {"resolution": 8}, "output": {"dir": "out"}},
    )
    assert main(["run", "--config", str(p)]) == 0
    assert (tmp_path / "out" / "report.json").exists()


def test_cli_bad_config_exit_1(tmp_path, capsys):
    p = write_config(tmp_path, {"schema_version": 1, "example": "t2-standard", "mesh": {"resolution": 2}})
    assert main(["run", "--config", str(p)]) == 1
    assert "config error" in capsys.readouterr().err


def test_cli_unknown_example_exit_1(tmp_path):
    assert main(["example", "nope", "--out", str(tmp_path)]) == 1


def test_cli_irrational_holonomy_exit_2(tmp_path, capsys):
    doc = {
        "schema_version": 1,
        "model": {
            "omega": [[0, 1], [-1, 0]],
            "periods": [6.283185307179586, 6.283185307179586],
            "generators": [[1, 1.4142135623730951]],
        },
        "mesh": {"resolution": 8},
        "output": {"dir": str(tmp_path)},
    }
    assert main(["run", "--config", str(write_config(tmp_path, doc))]) == 2
    assert "discrete" in capsys.readouterr().err


def test_cli_internal_check_failure_exit_3(tmp_path, capsys):
    doc = {
        "schema_version": 1,
        "example": "t2-standard",
        "mesh": {"resolution": 8},
        "tasks": ["holonomy", "normalform"],
        "tolerances": {"normal_form": 1e-300},
        "output": {"dir": str(tmp_path)},
    }
    p = write_config(tmp_path, doc)
    # rounding noise in the residual exceeds a 1e-300 tolerance
    assert main(["run", "--config", str(p)]) == 3
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["exit_code"] == 3
    assert not report["checks"]["normal_form"]["passed"]
    assert "FAIL normal_form" in capsys.readouterr().out


def test_cli_csv_input(tmp_path):
    # points on a line, values on the circle
    t = np.linspace(0, 2.5, 26)
    with (tmp_path / "pts.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x0", "v0", "boundary"])
        for i, x in enumerate(t):
            w.writerow([x, x, int(i in (0, len(t) - 1))])
    with (tmp_path / "adj.csv").open("w") as fh:
        for i in range(len(t) - 1):
            fh.write(f"{i},{i + 1}\n")
    doc = {
        "schema_version": 1,
        "input": {"points": "pts.csv", "adjacency": "adj.csv"},
        "target_lattice": [[6.283185307179586]],
        "output": {"dir": "out"},
    }
    assert main(["run", "--config", str(write_config(tmp_path, doc))]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["source"]["kind"] == "input"
    assert report["harness"]["weak_convexity"]["passed"]
    assert any("closedness: assumed" in a for a in report["assumptions"])
    jsonschema.validate(report, REPORT_SCHEMA)


def test_cli_csv_missing_points_exit_1(tmp_path):
    doc = {"schema_version": 1, "input": {"points": "nope.csv"}}
    assert main(["run", "--config", str(write_config(tmp_path, doc))]) == 1


def test_cli_unwritable_output_exit_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["example", "t2-standard", "--resolution", "8", "--out", str(blocker / "x")]) == 1
