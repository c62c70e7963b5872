import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from otmesh.analytic_linear import LinearMap, single_shock
from otmesh.cli_io import (
    EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER, MESH_COLUMNS, ConfigError, ScenarioConfig, fmt, main, mesh_table,
    parse_args, parse_config, read_manifest, read_mesh_csv, write_manifest, write_mesh_csv, write_vtk,
)
from otmesh.geometry import Grid2D, MeshMapping, quality_report


@pytest.fixture(scope="module")
def shock_report():
    lm = LinearMap(single_shock(50.0))
    return quality_report(lm.mesh(12), lm.density_field())


# --- number format and CSV -----------------------------------------------------------

@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_round_trips_every_double(v):
    assert float(fmt(v)) == v


def test_format_examples():
    assert fmt(0.1) == "1.0000000000000001e-01"
    assert fmt(-2) == "-2.0000000000000000e+00"


def test_mesh_csv_round_trip_is_bit_exact(tmp_path, shock_report):
    p = write_mesh_csv(tmp_path / "m.csv", shock_report)
    lines = p.read_text().splitlines()
    assert lines[0] == ",".join(MESH_COLUMNS)
    assert len(lines) == 1 + 12 * 12
    assert lines[1].startswith("0,0,")
    got = read_mesh_csv(p)
    want = mesh_table(shock_report)
    for name in MESH_COLUMNS:
        np.testing.assert_array_equal(getattr(got, name), getattr(want, name))
    assert got.shape == (12, 12)
    np.testing.assert_array_equal(got.grid_field("x"), shock_report.mesh.xs)


def test_mesh_csv_rejects_foreign_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_mesh_csv(p)


# --- VTK -------------------------------------------------------------------------

def test_vtk_layout(tmp_path, shock_report):
    p = write_vtk(tmp_path / "m.vtk", shock_report, extra={"u": np.zeros((12, 12))}, title="t")
    lines = p.read_text().splitlines()
    assert lines[:6] == ["# vtk DataFile Version 3.0", "t", "ASCII", "DATASET STRUCTURED_GRID",
                         "DIMENSIONS 12 12 1", "POINTS 144 double"]
    # first index fastest: the second point is node (1, 0)
    x1, y1, _ = map(float, lines[7].split())
    assert (x1, y1) == (shock_report.mesh.xs[1, 0], shock_report.mesh.ys[1, 0])
    assert lines[6 + 144] == "POINT_DATA 144"
    names = [ln.split()[1] for ln in lines if ln.startswith("SCALARS")]
    assert names == ["Qs", "lambda1", "lambda2", "residual", "u"]


def test_vtk_rejects_misshaped_field(tmp_path, shock_report):
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "m.vtk", shock_report, extra={"u": np.zeros(3)})


# --- manifest and config ------------------------------------------------------------

def test_manifest_is_sorted_and_handles_numpy(tmp_path):
    data = {"b": np.float64(1.5), "a": [np.int64(2), np.array([1.0, np.inf])], "c": {"z": np.bool_(True)}}
    p = write_manifest(tmp_path / "m.json", data)
    text = p.read_text()
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert read_manifest(p) == {"a": [2, [1.0, None]], "b": 1.5, "c": {"z": True}}


def test_parse_config():
    text = "# comment\nalpha1 = 20\n\nr-star=0.5  # trailing\nflag = yes\n"
    assert parse_config(text) == {"alpha1": "20", "r_star": "0.5", "flag": "yes"}
    with pytest.raises(ValueError, match="line 1"):
        parse_config("alpha1 20")
    with pytest.raises(ValueError, match="empty key"):
        parse_config(" = 3")


def test_config_file_merges_under_flags(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("alpha1 = 20\nalpha2 = 300\n")
    sc = parse_args(["radial-ring", "--config", str(cfg), "--alpha2", "150", "--out", str(tmp_path)])
    assert sc.params["alpha1"] == 20.0 and sc.params["alpha2"] == 150.0 and sc.params["a"] == 0.25


def test_config_file_unknown_key(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour = red\n")
    with pytest.raises(ConfigError) as e:
        parse_args(["radial-ring", "--config", str(cfg)])
    assert e.value.field == "colour"


def test_scenario_config_validation(tmp_path):
    with pytest.raises(ConfigError, match="n:"):
        ScenarioConfig("radial-ring", {"n": 2}, tmp_path)
    with pytest.raises(ConfigError, match="alpha2"):
        ScenarioConfig("radial-ring", {"alpha2": -1.0}, tmp_path)
    with pytest.raises(ConfigError, match="formats"):
        ScenarioConfig("radial-ring", {}, tmp_path, ("pdf",))


def test_default_output_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("OTMESH_OUT", str(tmp_path / "env"))
    assert parse_args(["linear-shock"]).out == tmp_path / "env"
    monkeypatch.delenv("OTMESH_OUT")
    assert str(parse_args(["linear-shock"]).out) == "otmesh_out"


# --- end to end -----------------------------------------------------------------------

def test_radial_ring_scenario(tmp_path, capsys):
    assert main(["radial-ring", "--out", str(tmp_path), "--n", "21"]) == EXIT_OK
    m = read_manifest(tmp_path / "manifest.json")
    assert m["theta"] == pytest.approx(1.4, abs=1e-3)
    assert m["boundary_qs"] == pytest.approx(1.0571, abs=1e-4)
    assert m["qs_at_a"] == pytest.approx(3.1, abs=0.05)
    assert m["parameters"]["alpha1"] == 10.0
    assert sorted(m["files"]) == sorted(p.name for p in tmp_path.iterdir())
    assert json.loads(capsys.readouterr().out)["theta"] == m["theta"]


def test_scenario_output_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["linear-shock", "--out", str(tmp_path / d), "--n", "16", "--formats", "csv,json"]) == EXIT_OK
    for name in ("manifest.json", "linear_shock_mesh.csv", "linear_shock_ellipses.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_formats_selection(tmp_path):
    assert main(["linear-cross", "--out", str(tmp_path), "--n", "10", "--formats", "vtk"]) == EXIT_OK
    assert [p.name for p in tmp_path.iterdir()] == ["linear_cross_mesh.vtk"]


def test_exit_code_config(tmp_path, capsys):
    assert main(["radial-ring", "--out", str(tmp_path), "--n", "2"]) == EXIT_CONFIG
    assert "n:" in capsys.readouterr().err
    assert main(["radial-ring", "--no-such-flag"]) == EXIT_CONFIG
    assert main(["not-a-scenario"]) == EXIT_CONFIG
    assert main(["radial-ring", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_exit_code_solver(tmp_path, capsys):
    rc = main(["ma-numeric", "--out", str(tmp_path), "--grid", "20", "--max-iter", "3"])
    assert rc == EXIT_SOLVER
    assert "ConvergenceError" in capsys.readouterr().err


def test_exit_code_io(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["linear-shock", "--out", str(blocker / "sub"), "--n", "8"]) == EXIT_IO
    assert "I/O error" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "otmesh.cli_io", "radial-blowup", "--n", "11",
                        "--out", str(tmp_path), "--formats", "json"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    out = json.loads(r.stdout)
    assert out["theta_boundary"] == pytest.approx(1.2) and out["qs_max_formula"] == pytest.approx(1.9, abs=0.05)


def test_fixed_mesh_buckley_leverett_scenario(tmp_path):
    rc = main(["buckley-leverett", "--out", str(tmp_path), "--n", "20", "--end-time", "0.02",
               "--snapshots", "0.01", "--fixed-mesh", "--formats", "json,vtk"])
    assert rc == EXIT_OK
    m = read_manifest(tmp_path / "manifest.json")
    assert [s["t"] for s in m["snapshots"]] == [0.01, 0.02]
    assert (tmp_path / "bl_t0p0100_mesh.vtk").exists()


def test_identity_mesh_csv(tmp_path):
    g = Grid2D.square(4)
    rep = quality_report(MeshMapping.identity(g))
    t = read_mesh_csv(write_mesh_csv(tmp_path / "id.csv", rep))
    np.testing.assert_array_equal(t.x, t.xi)
    np.testing.assert_array_equal(t.Qs, 1.0)
