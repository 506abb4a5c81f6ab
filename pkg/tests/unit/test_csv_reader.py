import numpy as np
import pytest

from umeit_monotonicity.csv_reader import read_matrix_csv
from umeit_monotonicity.measurements import MeasurementMatrix, MeasurementProvenance, adjacent_dipole_patterns
from umeit_monotonicity.writers import write_matrix_csv

def _write(tmp_path, name, text):
    p = tmp_path / name  # tmp_path is a fresh temporary directory per test
    p.write_text(text, encoding="utf-8", newline="\n")
    return p

def test_reads_back_written_matrix_exactly(tmp_path):
    rng = np.random.default_rng(0)
    M = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    M = M + M.T
    prov = MeasurementProvenance(mode="AC", mesh_level=2, mesh_size=(10, 12), omega=628.3)
    R = MeasurementMatrix(M, adjacent_dipole_patterns(3), prov)
    path = write_matrix_csv(tmp_path / "R.csv", R, {"config_hash": "abc"})
    header, entries = read_matrix_csv(str(path))
    assert np.array_equal(entries, M)   # 17 significant digits are exact
    assert header["config_hash"] == "abc"
    assert header["mode"] == "AC"
    assert header["mesh_level"] == "2"
    assert header["patterns"] == "1-2 2-3 3-1"
    assert float(header["symmetry_defect"]) == 0.0

def test_missing_section_raises(tmp_path):
    p = _write(tmp_path, "m.csv", "# mode: DC\n[real]\n1,0\n0,1\n")
    with pytest.raises(ValueError, match="Missing section"):
        read_matrix_csv(str(p))

def test_duplicate_section_raises(tmp_path):
    p = _write(tmp_path, "m.csv", "[real]\n1\n[imag]\n0\n[real]\n1\n")
    with pytest.raises(ValueError, match="Duplicate section"):
        read_matrix_csv(str(p))

def test_data_before_section_raises(tmp_path):
    p = _write(tmp_path, "m.csv", "1,2\n[real]\n")
    with pytest.raises(ValueError, match="before first section"):
        read_matrix_csv(str(p))

def test_non_numeric_and_ragged_blocks(tmp_path):
    p = _write(tmp_path, "m.csv", "[real]\n1,x\n[imag]\n0,0\n")
    with pytest.raises(ValueError, match="Non-numeric"):
        read_matrix_csv(str(p))
    p = _write(tmp_path, "r.csv", "[real]\n1,0\n0,1\n[imag]\n0,0\n")
    with pytest.raises(ValueError, match="Ragged"):
        read_matrix_csv(str(p))

def test_blank_lines_and_header_colons(tmp_path):
    p = _write(tmp_path, "m.csv", "# modulation: (1+0.5*chi[disk(center=(5,0),radius=1.25)])\n\n[real]\n2\n\n[imag]\n-1\n")
    header, entries = read_matrix_csv(str(p))
    assert header["modulation"] == "(1+0.5*chi[disk(center=(5,0),radius=1.25)])"
    assert entries.tolist() == [[2 - 1j]]
