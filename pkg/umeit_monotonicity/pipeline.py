import logging
import time
from pathlib import Path
from typing import Any

import numpy as np

from .config import NamedRegion, RunConfig
from .csv_reader import read_matrix_csv
from .errors import ConfigError, ProvenanceMismatch, ValidationError
from .fem.shunt import assemble
from .geometry.mesh import Mesh, build_disk_mesh, elements_in_region, refine_mesh, refine_to_level
from .measurements import (
    DrivePatternSet,
    MeasurementMatrix,
    MeasurementProvenance,
    adjacent_dipole_patterns,
    measurement_matrix,
)
from .monotonicity import (
    DIAGNOSTIC_FACTOR,
    RATIO_THRESHOLD,
    DefinitenessReport,
    difference_matrix,
    estimate_delta,
    localized_energy_diagnostic,
    regularized_test,
)
from .phantom import Modulation, Phantom, contrast_constants, element_admittivity
from .properties import run_property_suite
from .scan import resolve_beta, resolve_case, run_scan
from .types import Case
from .writers import (
    fmt,
    write_diagnostic_csv,
    write_matrix_csv,
    write_mesh,
    write_report_csv,
    write_scan_csv,
    write_scan_pgm,
    write_verify_csv,
)

logger = logging.getLogger(__name__)

# raw and symmetrized spectra are reported separately beyond this relative gap
SPECTRUM_RTOL = 1e-8


# ---------- shared setup ----------

def build_mesh(cfg: RunConfig, *, level: int | None = None) -> Mesh:
    g = cfg.geometry
    base = build_disk_mesh(g.radius, g.layout, g.target_h)
    mesh = refine_to_level(base, g.mesh_level if level is None else level)
    mesh.validate()
    logger.info("Mesh level %d: %d nodes, %d triangles, h=%.4g",
                mesh.level, mesh.n_nodes, mesh.n_triangles, mesh.max_diameter())
    return mesh


def build_patterns(cfg: RunConfig) -> DrivePatternSet:
    # "adjacent" is the only pattern kind the config accepts
    return adjacent_dipole_patterns(cfg.geometry.layout.count)


def _maybe_symmetrize(R: MeasurementMatrix, cfg: RunConfig) -> MeasurementMatrix:
    return R.symmetrized() if cfg.symmetrize else R


def _header(cfg: RunConfig, mesh: Mesh, **extra: str) -> dict[str, str]:
    return {**cfg.provenance(), "mesh_level": str(mesh.level), **extra}


# ---------- subcommands ------------

def run_mesh(cfg: RunConfig) -> dict[str, Any]:
    t0 = time.time()
    mesh = build_mesh(cfg)
    path = write_mesh(Path(cfg.out_dir) / "mesh.csv", mesh, cfg.provenance())
    return {
        "nodes": mesh.n_nodes,
        "triangles": mesh.n_triangles,
        "electrodes": mesh.n_electrodes,
        "file": str(path),
        "duration_s": round(time.time() - t0, 3),
    }


def run_simulate(cfg: RunConfig) -> dict[str, Any]:
    """
    Write the DC and AC measurement matrices and one modulated DC matrix per
    detection region. beta=0 means "no modulation": the DC matrix is written
    under the modulated name.
    """
    t0 = time.time()
    phantom = cfg.phantom
    mesh = build_mesh(cfg)
    patterns = build_patterns(cfg)
    out = Path(cfg.out_dir)

    gamma0 = element_admittivity(phantom, mesh, "DC")
    base = assemble(mesh, gamma0)
    r_dc = _maybe_symmetrize(measurement_matrix(mesh, gamma0, patterns, mode="DC", omega=phantom.omega,
                                                system=base, threads=cfg.threads), cfg)
    r_ac = _maybe_symmetrize(measurement_matrix(mesh, element_admittivity(phantom, mesh, "AC"), patterns,
                                                mode="AC", omega=phantom.omega, threads=cfg.threads), cfg)
    files = [
        write_matrix_csv(out / "R_dc.csv", r_dc, cfg.provenance()),
        write_matrix_csv(out / "R_ac.csv", r_ac, cfg.provenance()),
    ]

    if cfg.detection.regions:
        beta, case = _detection_beta(cfg, allow_zero=True)
        for named in cfg.detection.regions:
            path = out / f"R_mod_{named.name}.csv"
            header = {**cfg.provenance(), "region": named.name, "beta": fmt(beta), "case": case}
            if beta == 0.0:
                logger.warning("beta=0 for region %s: writing the unmodulated DC matrix", named.name)
                files.append(write_matrix_csv(path, r_dc, header))
                continue
            r_mod = _modulated(phantom, mesh, patterns, named, beta, case, threads=cfg.threads)
            files.append(write_matrix_csv(path, _maybe_symmetrize(r_mod, cfg), header))

    return {
        "matrices": len(files),
        "symmetry_defect_dc": r_dc.symmetry_defect,
        "symmetry_defect_ac": r_ac.symmetry_defect,
        "out_dir": str(out),
        "duration_s": round(time.time() - t0, 3),
    }


def run_test(cfg: RunConfig, region: str | None = None, *, matrices_dir: str | None = None) -> dict[str, Any]:
    """
    Regularized definiteness test for each detection region (or the one named).
    Writes report.csv plus a <region>_diagnostic.csv per region.
    With `matrices_dir`, the configured-level R_ac and R_mod_<region> come from
    the files `simulate` wrote there (same config required) instead of a solve.
    """
    t0 = time.time()
    phantom = cfg.phantom
    regions = _select_regions(cfg, region)
    beta, case = _detection_beta(cfg)
    mesh = build_mesh(cfg)
    patterns = build_patterns(cfg)
    out = Path(cfg.out_dir)

    matrices = _difference_matrices(phantom, mesh, patterns, regions, beta, case, cfg,
                                    matrices_dir=matrices_dir)
    if cfg.detection.delta == "auto":
        fine = refine_mesh(mesh)
        fine_matrices = _difference_matrices(phantom, fine, patterns, regions, beta, case, cfg)
        delta = estimate_delta([(matrices[n.name][0], fine_matrices[n.name][0]) for n in regions])
        logger.info("Auto delta from levels %d/%d over %d region(s): %.6g",
                    mesh.level, fine.level, len(regions), delta)
    else:
        delta = float(cfg.detection.delta)

    header = _header(cfg, mesh, beta=fmt(beta), delta=fmt(delta), case=case)
    gamma0 = element_admittivity(phantom, mesh, "DC")
    dc_system = assemble(mesh, gamma0)
    inside = _inclusion_elements(mesh, phantom)

    rows: list[tuple[str, DefinitenessReport]] = []
    verdicts: dict[str, bool] = {}
    for named in regions:
        A, raw = matrices[named.name]
        report = regularized_test(A, delta, case)
        rows.append((named.name, report))
        verdicts[named.name] = report.verdict
        logger.info("Region %s: verdict=%s margin=%.4g min eigenvalue=%.4g",
                    named.name, report.verdict, report.margin, report.min_eigenvalue)
        if raw is not None:
            margin = float(raw[0]) + delta
            rows.append((f"{named.name}_raw", DefinitenessReport(
                eigenvalues=raw, delta=delta, direction=f"case_{case}_raw", verdict=margin >= 0.0, margin=margin)))

        diagnostics = localized_energy_diagnostic(
            report, dc_system, patterns, elements_in_region(mesh, named.region), inside)
        write_diagnostic_csv(out / f"{named.name}_diagnostic.csv", diagnostics, {
            **header, "region": named.name,
            "eigen_cutoff": fmt(-DIAGNOSTIC_FACTOR * delta), "ratio_threshold": fmt(RATIO_THRESHOLD)})

    write_report_csv(out / "report.csv", rows, header)
    return {
        "regions": len(regions),
        "marked": [name for name, v in verdicts.items() if v],
        "delta": delta,
        "beta": beta,
        "case": case,
        "source": "files" if matrices_dir else "solved",
        "duration_s": round(time.time() - t0, 3),
    }


def run_scan_command(cfg: RunConfig) -> dict[str, Any]:
    mesh = build_mesh(cfg)
    patterns = build_patterns(cfg)
    result = run_scan(cfg.phantom, mesh, patterns, cfg.scan_config())
    header = _header(cfg, mesh)
    out = Path(cfg.out_dir)
    write_scan_csv(out / "scan.csv", result, header)
    write_scan_pgm(out / "scan.pgm", result, mesh.radius, {**header, "case": result.case})
    return dict(result.summary())


def run_verify(cfg: RunConfig) -> dict[str, Any]:
    t0 = time.time()
    mesh = build_mesh(cfg)
    patterns = build_patterns(cfg)
    probe = cfg.detection.regions[0].region if cfg.detection.regions else None
    items = run_property_suite(cfg.phantom, mesh, patterns, probe_region=probe, threads=cfg.threads)
    write_verify_csv(Path(cfg.out_dir) / "verify.csv", items, _header(cfg, mesh))
    failed = [it["name"] for it in items if not it["passed"]]
    return {
        "properties": len(items),
        "failed": failed,
        "duration_s": round(time.time() - t0, 3),
    }


# ---------- helpers -----------

def _select_regions(cfg: RunConfig, name: str | None) -> tuple[NamedRegion, ...]:
    regions = cfg.detection.regions
    if not regions:
        raise ConfigError("MISSING", field="detection.regions")
    if name is None:
        return regions
    chosen = tuple(r for r in regions if r.name == name)
    if not chosen:
        raise ConfigError("UNKNOWN_REGION", field="--region",
                          detail=f"{name!r} not in {[r.name for r in regions]}")
    return chosen


def _detection_beta(cfg: RunConfig, *, allow_zero: bool = False) -> tuple[float, Case]:
    constants = contrast_constants(cfg.phantom)
    case = resolve_case(constants, cfg.detection.case)
    requested = cfg.detection.beta
    if allow_zero and requested != "max" and float(requested) == 0.0:
        return 0.0, case
    return resolve_beta(constants, case, requested), case


def _modulated(phantom: Phantom, mesh: Mesh, patterns: DrivePatternSet, named: NamedRegion,
               beta: float, case: Case, *, threads: int) -> MeasurementMatrix:
    modulation = Modulation.for_case(named.region, beta, case)
    gamma = element_admittivity(phantom, mesh, "DC", modulation)
    return measurement_matrix(mesh, gamma, patterns, mode="DC", modulation=modulation,
                              omega=phantom.omega, threads=threads)


def _difference_matrices(
    phantom: Phantom,
    mesh: Mesh,
    patterns: DrivePatternSet,
    regions: tuple[NamedRegion, ...],
    beta: float,
    case: Case,
    cfg: RunConfig,
    *,
    matrices_dir: str | None = None,
) -> dict[str, tuple[np.ndarray, np.ndarray | None]]:
    """
    Sign-normalized difference matrix per region, plus the spectrum of the
    unsymmetrized entrywise difference when it differs visibly (else None).
    """
    if matrices_dir is None:
        r_ac = _maybe_symmetrize(measurement_matrix(mesh, element_admittivity(phantom, mesh, "AC"), patterns,
                                                    mode="AC", omega=phantom.omega, threads=cfg.threads), cfg)
    else:
        r_ac = _load_matrix(Path(matrices_dir) / "R_ac.csv", cfg, mesh, patterns)
    out: dict[str, tuple[np.ndarray, np.ndarray | None]] = {}
    for named in regions:
        if matrices_dir is None:
            r_mod = _maybe_symmetrize(_modulated(phantom, mesh, patterns, named, beta, case,
                                                 threads=cfg.threads), cfg)
        else:
            r_mod = _load_matrix(Path(matrices_dir) / f"R_mod_{named.name}.csv", cfg, mesh, patterns,
                                 modulation=Modulation.for_case(named.region, beta, case))
        A = difference_matrix(r_mod, r_ac, phantom.alpha, case)
        out[named.name] = (A, _raw_spectrum(r_mod, r_ac, phantom.alpha, case, A))
    return out


def _load_matrix(path: Path, cfg: RunConfig, mesh: Mesh, patterns: DrivePatternSet,
                 *, modulation: Modulation | None = None) -> MeasurementMatrix:
    """Read a matrix written by `simulate` and check it belongs to this run."""
    try:
        prov, entries = read_matrix_csv(str(path))
    except (OSError, ValueError) as e:
        raise ValidationError("cannot read simulated matrix", field=str(path), detail=str(e)) from e

    expected = {
        "config_hash": cfg.config_hash,
        "mesh_nodes": str(mesh.n_nodes),
        "mesh_triangles": str(mesh.n_triangles),
        "patterns": patterns.label(),
        "modulation": modulation.describe() if modulation else "none",
    }
    for key, value in expected.items():
        if prov.get(key) != value:
            raise ProvenanceMismatch(f"{key} does not match the current run", field=str(path),
                                     detail=f"file {prov.get(key)!r}, expected {value!r}")
    if entries.shape != (patterns.N, patterns.N):
        raise ProvenanceMismatch(f"matrix shape {entries.shape} for {patterns.N} patterns", field=str(path))

    provenance = MeasurementProvenance(
        mode=prov.get("mode", ""),
        mesh_level=int(prov.get("mesh_level", mesh.level)),
        mesh_size=(mesh.n_nodes, mesh.n_triangles),
        omega=float(prov.get("omega", cfg.phantom.omega)),
        modulation=modulation.describe() if modulation else None,
        modulation_sign=modulation.sign if modulation else 0,
        symmetrized=prov.get("symmetrized") == "true",
    )
    logger.info("Loaded %s matrix %s (hash %s)", provenance.mode, path, cfg.config_hash[:12])
    return MeasurementMatrix(entries, patterns, provenance)


def _raw_spectrum(r_mod: MeasurementMatrix, r_ac: MeasurementMatrix, alpha: complex, case: Case,
                  A: np.ndarray) -> np.ndarray | None:
    diff = r_mod.entries.real - (alpha * r_ac.entries).real
    raw = diff if case == "a" else -diff
    w_raw = np.sort(np.linalg.eigvals(raw).real)
    w_sym = np.linalg.eigvalsh(A)
    gap = float(np.max(np.abs(w_raw - w_sym)))
    if gap <= SPECTRUM_RTOL * max(float(np.linalg.norm(A, 2)), np.finfo(float).tiny):
        return None
    logger.warning("Raw and symmetrized spectra differ by %.3g; reporting both", gap)
    return w_raw


def _inclusion_elements(mesh: Mesh, phantom: Phantom) -> np.ndarray:
    parts = [elements_in_region(mesh, inc.region) for inc in phantom.inclusions]
    return np.unique(np.concatenate(parts)) if parts else np.empty(0, dtype=int)
