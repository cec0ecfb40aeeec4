import json

import jsonschema
import pytest

from cvqec.cli import FIG2_HEADER, FIG3_HEADER, VERIFY_SCHEMA, main, resolve_config


def run(tmp_path, *argv, environ=None, name="out.txt"):
    out = tmp_path / name
    code = main([*argv, "-o", str(out)], environ=environ or {})
    return code, out.read_bytes() if out.exists() else b""


def data_lines(blob):
    return [ln for ln in blob.decode().splitlines() if not ln.startswith("#")]


def test_fig2_golden(tmp_path):
    code, blob = run(tmp_path, "fig2", "--eta", "0.9", "--chi", "0.5", "--points", "50")
    assert code == 0
    lines = data_lines(blob)
    assert lines[0] == FIG2_HEADER == "G,eta_ec,p_bound"
    rows = [list(map(float, ln.split(","))) for ln in lines[1:]]
    assert len(rows) == 50
    assert rows[0][1] == pytest.approx(0.9, abs=1e-9)
    assert rows[-1][2] < 1e-10
    assert [r[0] for r in rows] == sorted(r[0] for r in rows)
    assert b"\r" not in blob
    assert blob.startswith(b"# cvqec fig2\n")


def test_fig2_bad_chi_exit_code(capsys):
    assert main(["fig2", "--eta", "0.9", "--chi", "1.1"], environ={}) == 2
    assert "chi" in capsys.readouterr().err


def test_fig2_window_error_names_interval(capsys):
    assert main(["fig2", "--g-start", "1"], environ={}) == 2
    assert "[4, 4.33333333333]" in capsys.readouterr().err


def test_fig2_deterministic(tmp_path):
    a = run(tmp_path, "fig2", "--chi", "0.3", name="a.csv")[1]
    b = run(tmp_path, "fig2", "--chi", "0.3", name="b.csv")[1]
    assert a == b


def test_fig3_small_sweep(tmp_path):
    code, blob = run(tmp_path, "fig3", "--chis", "0.33", "--g-stop", "3", "--points", "3")
    assert code == 0
    lines = data_lines(blob)
    assert lines[0] == FIG3_HEADER == "chi,G,eta_ec,p_success,fidelity"
    assert len(lines) == 4
    assert all(float(ln.split(",")[4]) > 0.995 for ln in lines[1:])


def test_fig3_resource_error(tmp_path, capsys):
    code, _ = run(tmp_path, "fig3", "--chis", "0.5", "--paths", "5", "--g-stop", "2",
                  "--points", "1")
    assert code == 3
    assert "reduce" in capsys.readouterr().err


def test_verify_schema_and_pass(tmp_path):
    code, blob = run(tmp_path, "verify", "--json")
    assert code == 0
    report = json.loads(blob)
    jsonschema.validate(report, VERIFY_SCHEMA)
    assert report["passed"] and report["failed"] == []
    assert set(report["suites"]) == {"algebra", "epr_identity", "teleport_oracle",
                                     "end_to_end", "ensemble_bound"}


def test_verify_coarse_grid(tmp_path, capsys):
    code, blob = run(tmp_path, "verify", "--coarse-grid")
    assert code == 1
    report = json.loads(blob)
    jsonschema.validate(report, VERIFY_SCHEMA)
    assert report["failed"] == ["teleport_oracle"]
    assert report["suites"]["teleport_oracle"]["status"] == "grid-too-coarse"
    assert "teleport_oracle" in capsys.readouterr().err


def test_config_precedence(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[defaults]\neta = 0.7\nchi = 0.2\n[fig2]\nchi = 0.3\npoints = 7\n")
    cfg = resolve_config("fig2", {}, str(ini), {})
    assert (cfg.get("eta"), cfg.get("chi"), cfg.get("points")) == (0.7, 0.3, 7)
    cfg = resolve_config("fig2", {}, str(ini), {"CVQEC_CHI": "0.4"})
    assert cfg.get("chi") == 0.4
    cfg = resolve_config("fig2", {"chi": 0.6}, str(ini), {"CVQEC_CHI": "0.4"})
    assert cfg.get("chi") == 0.6


def test_config_case_preserved(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[bounds]\nV_t = 3\n")
    assert resolve_config("bounds", {}, str(ini), {}).get("V_t") == 3.0


def test_config_unknown_key(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[fig2]\nbogus = 1\n")
    assert main(["--config", str(ini), "fig2"], environ={}) == 2


def test_epr_params_and_bounds(tmp_path):
    code, blob = run(tmp_path, "epr-params", "--V", "3")
    assert data_lines(blob) == ["chi,V,lambda", "0.5,3,0.25"]
    code, blob = run(tmp_path, "bounds", "--eta", "0.5", "--chi", "0.5", "--gain", "2")
    rows = dict(ln.split(",") for ln in data_lines(blob)[1:])
    assert float(rows["p_bound"]) == pytest.approx(0.625 / 1.125)
    assert float(rows["eta_ec"]) == pytest.approx(0.25)
    assert main(["epr-params"], environ={}) == 2
