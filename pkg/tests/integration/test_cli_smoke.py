# CLI "smoke" tests: every subcommand on a small 8-electrode disk,
# checking exit codes and the files each one writes.

import csv
import json
import logging

import numpy as np
import pytest

from umeit_monotonicity.cli import _build_parser, main
from umeit_monotonicity.csv_reader import read_matrix_csv

SMALL = {
    "geometry": {
        "radius": 10,
        "electrodes": {"count": 8, "coverage": 0.5},
        "target_h": 1.5,
        "mesh_level": 0,
    },
    "phantom": {
        "sigma": 1,
        "eps": 1,
        "omega": 10,
        "inclusions": [{"shape": "disk", "center": [5, 0], "radius": 2, "sigma": 1, "eps": 2}],
    },
    "detection": {
        "beta": "max",
        "delta": "auto",
        "regions": [
            {"name": "in", "shape": "disk", "center": [5, 0], "radius": 1.5},
            {"name": "out", "shape": "disk", "center": [-5, 0], "radius": 1.5},
        ],
    },
    "scan": {"ball_radius": 1.5, "spacing": 3, "margin": 0.5},
}


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f)
    return str(path)


def _run(argv):
    with pytest.raises(SystemExit) as ei:
        main(argv)
    return ei.value.code


def _rows(path):
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


@pytest.fixture
def config_path(tmp_path):
    return _write_json(tmp_path / "config.json", SMALL)


def test_parser_flags_after_subcommand():
    args = _build_parser().parse_args(["test", "--delta", "auto", "--beta", "0.3", "--region", "in"])
    assert args.command == "test"
    assert args.delta == "auto"
    assert args.beta == 0.3
    assert args.region == "in"


def test_parser_rejects_bad_values():
    parser = _build_parser()
    with pytest.raises(SystemExit):
        parser.parse_args(["test", "--delta", "-1"])
    with pytest.raises(SystemExit):
        parser.parse_args(["scan", "--threads", "0"])
    with pytest.raises(SystemExit):
        parser.parse_args([])


def test_mesh_subcommand(tmp_path, config_path):
    out = tmp_path / "out"
    assert _run(["mesh", "--config", config_path, "--out", str(out)]) == 0
    text = (out / "mesh.csv").read_text(encoding="utf-8")
    assert text.startswith("# tool: umeit-monotonicity")


def test_missing_radius_is_fatal(tmp_path, caplog):
    cfg = json.loads(json.dumps(SMALL))
    del cfg["geometry"]["radius"]
    path = _write_json(tmp_path / "bad.json", cfg)
    caplog.set_level(logging.ERROR)
    assert _run(["mesh", "--config", path, "--out", str(tmp_path / "out")]) == 2
    assert "geometry.radius" in caplog.text
    assert not (tmp_path / "out" / "mesh.csv").exists()


def test_non_object_block_is_a_single_line_error(tmp_path, monkeypatch, caplog):
    cfg = json.loads(json.dumps(SMALL))
    cfg["detection"] = ["oops"]
    path = _write_json(tmp_path / "list.json", cfg)
    monkeypatch.setenv("UMEIT_DELTA", "auto")
    caplog.set_level(logging.ERROR)
    assert _run(["test", "--config", path, "--out", str(tmp_path / "out")]) == 2
    errors = [r for r in caplog.records if r.levelno >= logging.ERROR]
    assert len(errors) == 1
    assert errors[0].exc_info is None
    assert "detection" in errors[0].getMessage()
    assert "NOT_AN_OBJECT" in errors[0].getMessage()


def test_simulate_writes_matrices(tmp_path, config_path):
    out = tmp_path / "out"
    assert _run(["simulate", "--config", config_path, "--out", str(out)]) == 0
    prov, r_dc = read_matrix_csv(str(out / "R_dc.csv"))
    _, r_ac = read_matrix_csv(str(out / "R_ac.csv"))
    assert r_dc.shape == r_ac.shape == (8, 8)
    assert np.all(r_dc.imag == 0.0)
    assert np.any(r_ac.imag != 0.0)
    assert prov["omega"] == "10"
    for name in ("in", "out"):
        mod_prov, _ = read_matrix_csv(str(out / f"R_mod_{name}.csv"))
        assert mod_prov["region"] == name
        assert mod_prov["case"] == "a"


def test_simulate_beta_zero_writes_dc_matrix(tmp_path, config_path, caplog):
    out = tmp_path / "out"
    caplog.set_level(logging.WARNING)
    assert _run(["simulate", "--config", config_path, "--out", str(out), "--beta", "0"]) == 0
    _, r_dc = read_matrix_csv(str(out / "R_dc.csv"))
    _, r_mod = read_matrix_csv(str(out / "R_mod_in.csv"))
    assert np.array_equal(r_mod, r_dc)
    assert "beta=0" in caplog.text


def test_test_subcommand_auto_delta(tmp_path, config_path):
    out = tmp_path / "out"
    assert _run(["test", "--config", config_path, "--out", str(out)]) == 0
    rows = {r["region"]: r for r in _rows(out / "report.csv")}
    # the ball inside D always passes
    assert rows["in"]["verdict"] == "true"
    assert (out / "in_diagnostic.csv").exists()
    assert (out / "out_diagnostic.csv").exists()


def test_test_reuses_simulated_matrices(tmp_path, config_path):
    sim, solved, reused = tmp_path / "sim", tmp_path / "solved", tmp_path / "reused"
    assert _run(["simulate", "--config", config_path, "--out", str(sim)]) == 0
    assert _run(["test", "--config", config_path, "--out", str(solved), "--delta", "1e-6"]) == 0
    assert _run(["test", "--config", config_path, "--out", str(reused), "--delta", "1e-6",
                 "--matrices", str(sim)]) == 0
    # 17 significant digits round-trip the entries exactly
    assert (reused / "report.csv").read_bytes() == (solved / "report.csv").read_bytes()


def test_matrices_from_another_config_are_rejected(tmp_path, config_path, caplog):
    sim = tmp_path / "sim"
    assert _run(["simulate", "--config", config_path, "--out", str(sim)]) == 0
    other = json.loads(json.dumps(SMALL))
    other["phantom"]["omega"] = 20
    other_path = _write_json(tmp_path / "other.json", other)
    caplog.set_level(logging.ERROR)
    code = _run(["test", "--config", other_path, "--out", str(tmp_path / "out"), "--delta", "1e-6",
                 "--matrices", str(sim)])
    assert code == 2
    assert "config_hash does not match" in caplog.text
    assert not (tmp_path / "out" / "report.csv").exists()


def test_missing_matrices_dir_is_fatal(tmp_path, config_path, caplog):
    caplog.set_level(logging.ERROR)
    code = _run(["test", "--config", config_path, "--out", str(tmp_path / "out"), "--delta", "1e-6",
                 "--matrices", str(tmp_path / "nowhere")])
    assert code == 2
    assert "R_ac.csv" in caplog.text


def test_huge_delta_accepts_every_region(tmp_path, config_path):
    out = tmp_path / "out"
    assert _run(["test", "--config", config_path, "--out", str(out), "--delta", "1e9"]) == 0
    rows = _rows(out / "report.csv")
    assert rows
    assert all(r["verdict"] == "true" for r in rows)


def test_unknown_region_is_fatal(tmp_path, config_path, caplog):
    caplog.set_level(logging.ERROR)
    code = _run(["test", "--config", config_path, "--out", str(tmp_path / "out"), "--region", "nope"])
    assert code == 2
    assert "--region" in caplog.text


def test_scan_is_reproducible(tmp_path, config_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(["scan", "--config", config_path, "--out", str(a), "--delta", "1e-6"]) == 0
    assert _run(["scan", "--config", config_path, "--out", str(b), "--delta", "1e-6", "--threads", "3"]) == 0
    assert (a / "scan.csv").read_bytes() == (b / "scan.csv").read_bytes()
    rows = _rows(a / "scan.csv")
    assert rows
    assert all(r["error"] == "" for r in rows)


def test_empty_scan_grid_exits_nonzero(tmp_path):
    cfg = json.loads(json.dumps(SMALL))
    cfg["scan"] = {"ball_radius": 9.5, "spacing": 1, "margin": 0.6}
    path = _write_json(tmp_path / "empty.json", cfg)
    assert _run(["scan", "--config", path, "--out", str(tmp_path / "out")]) != 0


def test_verify_all_properties_pass(tmp_path, config_path):
    out = tmp_path / "out"
    assert _run(["verify", "--config", config_path, "--out", str(out)]) == 0
    rows = _rows(out / "verify.csv")
    names = {r["property"] for r in rows}
    assert all(r["passed"] == "true" for r in rows)
    assert {"symmetry_dc", "symmetry_ac", "alpha_identity", "scaling", "energy_identity",
            "unmodulated_bound", "theorem_forward", "sandwich"} <= names


def test_verify_negative_sigma_is_fatal(tmp_path, caplog):
    cfg = json.loads(json.dumps(SMALL))
    cfg["phantom"]["sigma"] = -1
    path = _write_json(tmp_path / "neg.json", cfg)
    caplog.set_level(logging.ERROR)
    assert _run(["verify", "--config", path, "--out", str(tmp_path / "out")]) == 2
    assert "phantom.sigma" in caplog.text
    assert not (tmp_path / "out" / "verify.csv").exists()
