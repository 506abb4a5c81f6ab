"""
Structured-text outputs. Every file starts with `# key: value` provenance
lines; numbers use 17 significant digits; nothing time-dependent is written
so reruns are byte-identical.
"""
import csv
import logging
import math
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import TextIO

import numpy as np

from umeit_monotonicity.geometry.mesh import INSULATED, Mesh
from umeit_monotonicity.measurements import MeasurementMatrix
from umeit_monotonicity.monotonicity import DefinitenessReport, EnergyDiagnostic
from umeit_monotonicity.scan import ScanResult
from umeit_monotonicity.types import VerifyItem

logger = logging.getLogger(__name__)

PGM_MARKED = 255
PGM_UNMARKED = 96
PGM_EMPTY = 0


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def matrix_provenance(R: MeasurementMatrix) -> dict[str, str]:
    p = R.provenance
    return {
        "mode": p.mode,
        "modulation": p.modulation or "none",
        "mesh_level": str(p.mesh_level),
        "mesh_nodes": str(p.mesh_size[0]),
        "mesh_triangles": str(p.mesh_size[1]),
        "omega": fmt(p.omega),
        "patterns": R.patterns.label(),
        "symmetrized": str(p.symmetrized).lower(),
        "symmetry_defect": fmt(R.symmetry_defect),
    }


# ---------- public API ------------

def write_mesh(path: str | Path, mesh: Mesh, provenance: Mapping[str, str]) -> Path:
    path = Path(path)
    header = {**provenance, "mesh_level": str(mesh.level), "radius": fmt(mesh.radius),
              "electrodes": str(mesh.n_electrodes), "node_index_base": "0"}
    with _open(path) as f:
        _write_header(f, header)
        w = _writer(f)
        f.write("[nodes]\n")
        w.writerow(["index", "x", "y"])
        for i, (x, y) in enumerate(mesh.nodes):
            w.writerow([i, fmt(x), fmt(y)])
        f.write("[triangles]\n")
        w.writerow(["index", "n1", "n2", "n3"])
        for i, tri in enumerate(mesh.triangles):
            w.writerow([i, *tri.tolist()])
        f.write("[boundary_edges]\n")
        w.writerow(["index", "n1", "n2", "electrode"])
        for i, ((a, b), label) in enumerate(zip(mesh.boundary_edges, mesh.electrode_of_edge)):
            w.writerow([i, int(a), int(b), "insulated" if label == INSULATED else int(label) + 1])
    logger.info("Wrote mesh (%d nodes, %d triangles) to %s", mesh.n_nodes, mesh.n_triangles, path)
    return path


def write_matrix_csv(path: str | Path, R: MeasurementMatrix, provenance: Mapping[str, str]) -> Path:
    path = Path(path)
    with _open(path) as f:
        _write_header(f, {**provenance, **matrix_provenance(R)})
        w = _writer(f)
        for name, block in (("real", R.entries.real), ("imag", R.entries.imag)):
            f.write(f"[{name}]\n")
            for row in block:
                w.writerow([fmt(v) for v in row])
    logger.info("Wrote %s matrix (N=%d) to %s", R.provenance.mode, R.patterns.N, path)
    return path


def write_report_csv(path: str | Path, rows: Iterable[tuple[str, DefinitenessReport]],
                     provenance: Mapping[str, str]) -> Path:
    path = Path(path)
    rows = list(rows)
    n = len(rows[0][1].eigenvalues) if rows else 0
    with _open(path) as f:
        _write_header(f, provenance)
        w = _writer(f)
        w.writerow(["region", *(f"eig_{i + 1}" for i in range(n)), "delta", "verdict", "margin"])
        for name, report in rows:
            w.writerow([name, *(fmt(v) for v in report.eigenvalues), fmt(report.delta),
                        str(report.verdict).lower(), fmt(report.margin)])
    return path


def write_diagnostic_csv(path: str | Path, diagnostics: Iterable[EnergyDiagnostic],
                         provenance: Mapping[str, str]) -> Path:
    path = Path(path)
    with _open(path) as f:
        _write_header(f, provenance)
        w = _writer(f)
        w.writerow(["eigen_index", "eigenvalue", "energy_b_minus_d", "energy_d", "ratio",
                    "ratio_threshold", "localized"])
        for d in diagnostics:
            w.writerow([d.eigen_index + 1, fmt(d.eigenvalue), fmt(d.energy_outside),
                        fmt(d.energy_inside), fmt(d.ratio), fmt(d.threshold), str(d.localized).lower()])
    return path


def write_scan_csv(path: str | Path, result: ScanResult, provenance: Mapping[str, str]) -> Path:
    path = Path(path)
    header = {**provenance, "case": result.case, "beta": fmt(result.beta_used), "delta": fmt(result.delta_used)}
    with _open(path) as f:
        _write_header(f, header)
        w = _writer(f)
        w.writerow(["index", "ix", "iy", "center_x", "center_y", "radius",
                    "verdict", "margin", "min_eigenvalue", "error"])
        for b in result.balls:
            w.writerow([b.index + 1, b.ix, b.iy, fmt(b.center[0]), fmt(b.center[1]), fmt(b.radius),
                        str(b.verdict).lower(), fmt(b.margin), fmt(b.min_eigenvalue), b.error or ""])
    logger.info("Wrote scan results (%d balls) to %s", len(result.balls), path)
    return path


def write_scan_pgm(path: str | Path, result: ScanResult, domain_radius: float,
                   provenance: Mapping[str, str]) -> Path:
    """Plain graymap, one pixel per lattice cell; row 0 is the top (largest y)."""
    path = Path(path)
    n = math.floor(domain_radius / result.spacing)
    size = 2 * n + 1
    raster = np.full((size, size), PGM_EMPTY, dtype=int)
    for b in result.balls:
        if b.error is None:
            raster[n - b.iy, b.ix + n] = PGM_MARKED if b.verdict else PGM_UNMARKED
    with _open(path) as f:
        f.write("P2\n")
        _write_header(f, {
            **provenance,
            "grid": f"{size}x{size} cells, spacing {fmt(result.spacing)}",
            "origin": f"row 0 is y={fmt(n * result.spacing)}, column 0 is x={fmt(-n * result.spacing)}",
            "encoding": f"{PGM_MARKED}=marked {PGM_UNMARKED}=unmarked {PGM_EMPTY}=no ball or failed",
        })
        f.write(f"{size} {size}\n{PGM_MARKED}\n")
        for row in raster:
            f.write(" ".join(str(v) for v in row) + "\n")
    return path


def write_verify_csv(path: str | Path, items: Iterable[VerifyItem], provenance: Mapping[str, str]) -> Path:
    path = Path(path)
    with _open(path) as f:
        _write_header(f, provenance)
        w = _writer(f)
        w.writerow(["property", "passed", "value", "limit", "note"])
        for it in items:
            w.writerow([it["name"], str(it["passed"]).lower(), fmt(it["value"]), fmt(it["limit"]), it["note"]])
    return path


# ---------- helpers -----------

def _open(path: Path) -> TextIO:
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def _writer(f: TextIO):
    return csv.writer(f, lineterminator="\n")


def _write_header(f: TextIO, provenance: Mapping[str, str]) -> None:
    for key, value in provenance.items():
        f.write(f"# {key}: {value}\n")
