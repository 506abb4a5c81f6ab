"""
Definiteness tests on differences of measurement matrices.

Both detection cases are sign-normalized so that the test always reads
lambda_min(A) >= -delta:

- case a (positive contrast):  A = R((1 + beta chi_B) gamma_0) - Re(alpha R(gamma_w))
- case b (negative contrast):  A = Re(alpha R(gamma_w)) - R((1 - beta chi_B) gamma_0)
"""
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from umeit_monotonicity.errors import NotSymmetricError, ProvenanceMismatch, ValidationError, require_finite
from umeit_monotonicity.fem.shunt import ShuntSystem, interior_energy, solve_many
from umeit_monotonicity.measurements import DrivePatternSet, MeasurementMatrix, weighted_real_part
from umeit_monotonicity.types import Case

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-8
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 60
DIAGNOSTIC_FACTOR = 10.0     # eigenvalues below -factor*delta get a diagnostic row
RATIO_THRESHOLD = 1.0        # energy(B\D)/energy(D) above this counts as localized


# ---------- value types ----------

@dataclass(frozen=True, eq=False)
class DefinitenessReport:
    """
    - eigenvalues: ascending, of the sign-normalized difference matrix
    - margin: lambda_min + delta (verdict is margin >= 0; ties pass)
    - eigenvectors: columns matching `eigenvalues`
    """
    eigenvalues: np.ndarray
    delta: float
    direction: str
    verdict: bool
    margin: float
    eigenvectors: np.ndarray | None = None

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1])


@dataclass(frozen=True)
class EnergyDiagnostic:
    eigen_index: int
    eigenvalue: float
    energy_outside: float      # energy in B minus D
    energy_inside: float       # energy in D
    ratio: float
    threshold: float = RATIO_THRESHOLD

    @property
    def localized(self) -> bool:
        return self.ratio > self.threshold


# ---------- public API ------------

def difference_matrix(R_mod: MeasurementMatrix, R_ac: MeasurementMatrix, alpha: complex, case: Case) -> np.ndarray:
    _check_comparable(R_mod, R_ac, case)
    dc = weighted_real_part(R_mod, 1.0)
    ac = weighted_real_part(R_ac, alpha)
    return dc - ac if case == "a" else ac - dc


def jacobi_eigh(A: np.ndarray, *, tol: float = JACOBI_TOL,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """
    Cyclic Jacobi eigensolver for small real symmetric matrices.
    Returns ascending eigenvalues and orthonormal eigenvectors (columns).
    Sweeps stop once the off-diagonal Frobenius norm is <= tol * ||A||_F.
    """
    a = np.array(A, dtype=float)
    n = a.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0 or n == 1:
        w = np.diag(a).copy()
        return w, V

    for sweep in range(max_sweeps):
        off = math.sqrt(2.0) * float(np.linalg.norm(np.triu(a, 1)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                _rotate(a, p, q, c, s, axis=1)
                _rotate(a, p, q, c, s, axis=0)
                a[p, q] = a[q, p] = 0.0
                _rotate(V, p, q, c, s, axis=1)
    else:
        logger.warning("Jacobi eigensolver stopped after %d sweeps (off-norm %.3g, ||A||=%.3g)",
                       max_sweeps, off, scale)

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def eigen_spectrum(A: np.ndarray) -> np.ndarray:
    """All eigenvalues of a real symmetric matrix, ascending."""
    return eigen_decomposition(A)[0]


def eigen_decomposition(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"matrix must be square, got shape {A.shape}", field="A")
    require_finite(A, field="A")
    if np.iscomplexobj(A):
        if np.any(A.imag):
            raise NotSymmetricError("matrix has non-zero imaginary part")
        A = A.real
    norm = np.linalg.norm(A)
    defect = np.linalg.norm(A - A.T)
    if defect > SYMMETRY_RTOL * norm:
        raise NotSymmetricError("matrix is not symmetric; symmetrize first",
                                detail=f"||A-A^T||={defect:.3g}, ||A||={norm:.3g}")
    return jacobi_eigh(A)


def regularized_test(A: np.ndarray, delta: float, case: Case = "a") -> DefinitenessReport:
    """Accept when lambda_min(A) >= -delta (A sign-normalized for either case)."""
    delta = float(delta)
    if not (math.isfinite(delta) and delta >= 0.0):
        raise ValidationError(f"delta must be >= 0 (got {delta!r})", field="detection.delta")
    w, V = eigen_decomposition(A)
    margin = float(w[0]) + delta
    return DefinitenessReport(
        eigenvalues=w, delta=delta, direction=f"case_{case}",
        verdict=margin >= 0.0, margin=margin, eigenvectors=V,
    )


def estimate_delta(level_pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    """Largest spectral norm ||A_fine - A_coarse||_2 over the pairs."""
    if not level_pairs:
        raise ValidationError("no matrix pairs to estimate delta from", field="level_pairs")
    best = 0.0
    for coarse, fine in level_pairs:
        coarse, fine = np.asarray(coarse), np.asarray(fine)
        if coarse.shape != fine.shape:
            raise ValidationError(f"shape mismatch {coarse.shape} vs {fine.shape}", field="level_pairs")
        best = max(best, float(np.linalg.norm(fine - coarse, 2)))
    return best


def localized_energy_diagnostic(
    report: DefinitenessReport,
    system: ShuntSystem,
    patterns: DrivePatternSet,
    region_b: np.ndarray,
    region_d: np.ndarray,
    *,
    factor: float = DIAGNOSTIC_FACTOR,
    ratio_threshold: float = RATIO_THRESHOLD,
) -> list[EnergyDiagnostic]:
    """
    For every eigenvector g with eigenvalue below -factor*delta, the energy
    of the DC potential driven by sum_r g_r (e_{j_r} - e_{k_r}) in B minus D
    and in D. A ratio above `ratio_threshold` marks the localized potential
    behind the failure (`EnergyDiagnostic.localized`).
    """
    if report.eigenvectors is None:
        raise ValidationError("report carries no eigenvectors", field="report")
    failing = np.flatnonzero(report.eigenvalues < -factor * report.delta)
    if failing.size == 0:
        return []

    outside = np.setdiff1d(np.asarray(region_b), np.asarray(region_d))
    inside = np.asarray(region_d)
    J = patterns.currents()
    solutions = solve_many(system, J @ report.eigenvectors[:, failing])

    out = []
    for idx, sol in zip(failing.tolist(), solutions):
        e_out = interior_energy(system.mesh, system.gamma_e, sol, outside)
        e_in = interior_energy(system.mesh, system.gamma_e, sol, inside)
        ratio = e_out / e_in if e_in > 0.0 else math.inf
        out.append(EnergyDiagnostic(idx, float(report.eigenvalues[idx]), e_out, e_in, ratio, ratio_threshold))
        logger.debug("Eigenvector %d (lambda=%.4g): energy B\\D=%.4g D=%.4g ratio=%.4g",
                     idx + 1, report.eigenvalues[idx], e_out, e_in, ratio)
    return out


# ---------- helpers -----------

def _rotate(M: np.ndarray, p: int, q: int, c: float, s: float, *, axis: int) -> None:
    if axis == 1:
        mp, mq = M[:, p].copy(), M[:, q].copy()
        M[:, p] = c * mp - s * mq
        M[:, q] = s * mp + c * mq
    else:
        mp, mq = M[p, :].copy(), M[q, :].copy()
        M[p, :] = c * mp - s * mq
        M[q, :] = s * mp + c * mq


def _check_comparable(R_mod: MeasurementMatrix, R_ac: MeasurementMatrix, case: Case) -> None:
    pm, pa = R_mod.provenance, R_ac.provenance
    if case not in ("a", "b"):
        raise ValidationError(f"unknown case {case!r}", field="detection.case")
    if pm.mode != "DC":
        raise ProvenanceMismatch(f"modulated matrix must be DC data (got {pm.mode})")
    if pa.mode != "AC" or pa.modulation_sign != 0:
        raise ProvenanceMismatch("AC matrix must be unmodulated AC data",
                                 detail=f"mode={pa.mode} modulation={pa.modulation}")
    expected = 1 if case == "a" else -1
    if pm.modulation_sign not in (0, expected):
        raise ProvenanceMismatch(f"modulation sign {pm.modulation_sign:+d} does not match case {case}")
    if R_mod.patterns.pairs != R_ac.patterns.pairs:
        raise ProvenanceMismatch("matrices use different drive pattern sets")
    if (pm.mesh_level, pm.mesh_size) != (pa.mesh_level, pa.mesh_size):
        raise ProvenanceMismatch("matrices come from different meshes",
                                 detail=f"level {pm.mesh_level} {pm.mesh_size} vs {pa.mesh_level} {pa.mesh_size}")
