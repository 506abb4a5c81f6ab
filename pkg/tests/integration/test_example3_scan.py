# Ball scan over the negative-contrast example (case b, fixed delta).
# Balls inside the inclusion must be marked, balls well away from it must not,
# and the output must not depend on the thread count or the update strategy.

import csv
import math
from dataclasses import replace
from pathlib import Path

import pytest

from umeit_monotonicity.config import load_run_config
from umeit_monotonicity.pipeline import build_mesh, build_patterns, run_scan_command
from umeit_monotonicity.scan import run_scan

CONFIG = Path(__file__).resolve().parents[2] / "configs" / "example3_2d.json"
D_CENTER, D_RADIUS = (4.0, 0.0), 3.0


def _distance_to_d(center):
    return math.hypot(center[0] - D_CENTER[0], center[1] - D_CENTER[1])


def _rows(path):
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


@pytest.fixture(scope="module")
def example3(tmp_path_factory):
    out = tmp_path_factory.mktemp("example3")
    cfg = load_run_config(str(CONFIG), out_dir=str(out), threads=4)
    summary = run_scan_command(cfg)
    return summary, out


def test_scan_marks_inclusion(example3):
    summary, out = example3
    assert summary["case"] == "b"
    assert summary["failed"] == 0
    assert summary["delta"] == 5e-8
    # beta_max_b = omega^2 / (1 + 2 omega^2), just below 1/2
    assert 0.4999 < summary["beta"] < 0.5

    rows = _rows(out / "scan.csv")
    assert len(rows) == summary["balls"]
    inside = far = 0
    for row in rows:
        center = (float(row["center_x"]), float(row["center_y"]))
        r = float(row["radius"])
        d = _distance_to_d(center)
        if d + r <= D_RADIUS:
            inside += 1
            assert row["verdict"] == "true", center
        elif d - D_RADIUS > 2 * r:
            far += 1
            assert row["verdict"] == "false", center
    assert inside >= 5
    assert far >= 20


def test_scan_image_written(example3):
    _, out = example3
    data = (out / "scan.pgm").read_bytes()
    assert data.startswith(b"P2")


@pytest.fixture(scope="module")
def coarse_setup():
    cfg = load_run_config(str(CONFIG), mesh_level=0)
    # a sparser grid keeps the comparison runs short
    scan_cfg = replace(cfg.scan_config(), spacing=3.0)
    return cfg, build_mesh(cfg), build_patterns(cfg), scan_cfg


def test_scan_csv_identical_across_thread_counts(tmp_path):
    one, four = tmp_path / "t1", tmp_path / "t4"
    for out, threads in ((one, 1), (four, 4)):
        cfg = load_run_config(str(CONFIG), mesh_level=0, out_dir=str(out), threads=threads)
        run_scan_command(cfg)
    assert (one / "scan.csv").read_bytes() == (four / "scan.csv").read_bytes()
    assert (one / "scan.pgm").read_bytes() == (four / "scan.pgm").read_bytes()


def test_low_rank_update_matches_full_reassembly(coarse_setup):
    cfg, mesh, patterns, scan_cfg = coarse_setup
    fast = run_scan(cfg.phantom, mesh, patterns, scan_cfg)
    full = run_scan(cfg.phantom, mesh, patterns, replace(scan_cfg, low_rank=False))
    assert len(fast.balls) == len(full.balls)
    for a, b in zip(fast.balls, full.balls):
        assert a.center == b.center
        assert abs(a.min_eigenvalue - b.min_eigenvalue) <= 1e-9
        assert a.verdict == b.verdict


def test_recomputed_ac_matrix_gives_same_verdicts(coarse_setup):
    cfg, mesh, patterns, scan_cfg = coarse_setup
    cached = run_scan(cfg.phantom, mesh, patterns, scan_cfg)
    fresh = run_scan(cfg.phantom, mesh, patterns, replace(scan_cfg, reuse_ac_matrix=False))
    assert [b.verdict for b in cached.balls] == [b.verdict for b in fresh.balls]
