"""
Cross-module property suite run by `umeit verify`.

Each check returns a VerifyItem; `passed` compares `value` with `limit`.
The suite never raises for a failed property, only for invalid input.
"""
import logging

import numpy as np

from umeit_monotonicity.errors import ContrastError
from umeit_monotonicity.fem.shunt import FieldSolution, assemble, solve_drive, weighted_energy
from umeit_monotonicity.geometry.mesh import Mesh, elements_in_region
from umeit_monotonicity.geometry.regions import Disk, RegionSpec
from umeit_monotonicity.measurements import DrivePatternSet, measurement_matrix, sandwich_check, weighted_real_part
from umeit_monotonicity.monotonicity import difference_matrix, eigen_spectrum
from umeit_monotonicity.phantom import Modulation, Phantom, contrast_constants, element_admittivity, pointwise_identities
from umeit_monotonicity.types import VerifyItem

logger = logging.getLogger(__name__)

SYMMETRY_LIMIT = 1e-10
IDENTITY_LIMIT = 1e-10
SCALING_LIMIT = 1e-10
MONOTONE_RTOL = 1e-8
POINTWISE_LIMIT = 1e-12
SANDWICH_LIMIT = 0.05
SCALE_FACTORS = (0.5, 2.0, 10.0)
SANDWICH_SAMPLES = 20
SANDWICH_BETA = 0.5     # used when the phantom has no usable contrast constants


def _item(name: str, value: float, limit: float, note: str = "") -> VerifyItem:
    return {"name": name, "passed": bool(value <= limit), "value": float(value), "limit": float(limit), "note": note}


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return float(np.linalg.norm(a - b) / scale) if scale > 0 else 0.0


# ---------- public API ------------

def run_property_suite(
    phantom: Phantom,
    mesh: Mesh,
    patterns: DrivePatternSet,
    *,
    probe_region: RegionSpec | None = None,
    samples: int = SANDWICH_SAMPLES,
    seed: int = 0,
    threads: int = 1,
) -> list[VerifyItem]:
    """
    Run every property on one phantom and mesh.
    `probe_region` is the modulated region used by the sandwich check
    (defaults to the first inclusion, or a central disk without inclusions).
    The sandwich modulates it with the largest admissible beta of the
    phantom's contrast case when one exists.
    """
    rng = np.random.default_rng(seed)
    omega = phantom.omega
    gamma0 = element_admittivity(phantom, mesh, "DC")
    gamma_w = element_admittivity(phantom, mesh, "AC")
    sys0 = assemble(mesh, gamma0)
    sys_w = assemble(mesh, gamma_w)
    r_dc = measurement_matrix(mesh, gamma0, patterns, mode="DC", omega=omega, system=sys0, threads=threads)
    r_ac = measurement_matrix(mesh, gamma_w, patterns, mode="AC", omega=omega, system=sys_w, threads=threads)
    alpha = phantom.alpha
    region = probe_region or (phantom.inclusions[0].region if phantom.inclusions
                              else Disk((0.0, 0.0), 0.25 * mesh.radius))

    items: list[VerifyItem] = []
    items.append(_item("symmetry_dc", r_dc.symmetry_defect, SYMMETRY_LIMIT))
    items.append(_item("symmetry_ac", r_ac.symmetry_defect, SYMMETRY_LIMIT))

    # alpha R(gamma_w) = R(gamma_w / alpha)
    r_q = measurement_matrix(mesh, gamma_w / alpha, patterns, mode="AC", omega=omega, threads=threads)
    items.append(_item("alpha_identity", _rel(alpha * r_ac.entries, r_q.entries), IDENTITY_LIMIT))

    worst = max(_rel(measurement_matrix(mesh, k * gamma0, patterns, threads=threads).entries, r_dc.entries / k)
                for k in SCALE_FACTORS)
    items.append(_item("scaling", worst, SCALING_LIMIT, note="k in " + ",".join(f"{k:g}" for k in SCALE_FACTORS)))

    items.append(_item("dc_entries_real", float(np.abs(r_dc.entries.imag).max() / np.abs(r_dc.entries).max()),
                       1e-12))

    # pointwise sigma_1 <= sigma_2 by doubling the conductivity in the probe region
    sigma2 = gamma0.copy()
    sigma2[elements_in_region(mesh, region)] *= 2.0
    r_hi = measurement_matrix(mesh, sigma2, patterns, threads=threads)
    lam = eigen_spectrum(weighted_real_part(r_dc.entries - r_hi.entries, 1.0))
    norm = float(np.linalg.norm(r_dc.entries, 2))
    items.append(_item("real_monotonicity", max(-lam[0], 0.0) / norm, MONOTONE_RTOL,
                       note=f"min eigenvalue {lam[0]:.3e}"))

    items.append(_energy_identity(mesh, sys_w, patterns))
    items.extend(_contrast_checks(phantom, mesh, patterns, r_dc, r_ac, norm, threads=threads))

    # energy sandwich for gamma_2 = (1 +- beta chi_B) gamma_0 against gamma_1 = gamma_w / alpha
    modulation = _sandwich_modulation(phantom, region)
    modulated = element_admittivity(phantom, mesh, "DC", modulation)
    sys_q = assemble(mesh, gamma_w / alpha)
    sys_m = assemble(mesh, modulated)
    worst_slack = 0.0
    for _ in range(samples):
        g = rng.standard_normal(patterns.N) + 1j * rng.standard_normal(patterns.N)
        bounds = sandwich_check(mesh, gamma_w / alpha, modulated, patterns, g, systems=(sys_q, sys_m))
        worst_slack = max(worst_slack, bounds.slack())
    items.append(_item("sandwich", worst_slack, SANDWICH_LIMIT,
                       note=f"{samples} random g, modulation {modulation.describe()}"))

    for it in items:
        logger.info("Property %-20s %s (value=%.3e limit=%.1e) %s",
                    it["name"], "PASS" if it["passed"] else "FAIL", it["value"], it["limit"], it["note"])
    return items


# ---------- checks ----------

def _sandwich_modulation(phantom: Phantom, region: RegionSpec) -> Modulation:
    if phantom.inclusions:
        try:
            constants = contrast_constants(phantom)
        except ContrastError as e:
            logger.warning("Sandwich falls back to beta=%g: %s", SANDWICH_BETA, e)
        else:
            return Modulation.for_case(region, constants.beta_max, constants.case)
    return Modulation(region, SANDWICH_BETA, 1)


def _energy_identity(mesh: Mesh, system, patterns: DrivePatternSet) -> VerifyItem:
    """sum_l conj(I_l) U_l = integral of conj(gamma) |grad u|^2 for the first drive."""
    I = patterns.currents()[:, 0]
    sol: FieldSolution = solve_drive(system, I)
    lhs = complex(np.vdot(sol.I, sol.U))
    rhs = complex(weighted_energy(mesh, system.gamma_e.real, sol.u),
                  -weighted_energy(mesh, system.gamma_e.imag, sol.u))
    return _item("energy_identity", abs(lhs - rhs) / max(abs(lhs), 1e-300), IDENTITY_LIMIT)


def _contrast_checks(phantom: Phantom, mesh: Mesh, patterns: DrivePatternSet, r_dc, r_ac, norm: float,
                     *, threads: int = 1) -> list[VerifyItem]:
    if not phantom.inclusions:
        return [_item("pointwise_identities", 0.0, POINTWISE_LIMIT, note="skipped: no inclusions")]
    try:
        constants = contrast_constants(phantom)
    except ContrastError as e:
        return [_item("contrast_condition", 1.0, 0.0, note=str(e))]

    worst = max(ident.max_relative_error()
                for beta_tilde in (0.0, 0.3, -0.3)
                for ident in pointwise_identities(phantom, beta_tilde))
    items = [_item("pointwise_identities", worst, POINTWISE_LIMIT)]

    # unmodulated pair: sign-normalized difference is positive semidefinite
    case = constants.case
    lam = eigen_spectrum(difference_matrix(r_dc, r_ac, phantom.alpha, case))
    items.append(_item("unmodulated_bound", max(-lam[0], 0.0) / norm, MONOTONE_RTOL,
                       note=f"case {case}, min eigenvalue {lam[0]:.3e}"))

    # B = D with the largest admissible beta: the test must pass
    modulation = Modulation.for_case(phantom.inclusions[0].region, constants.beta_max, case)
    r_mod = measurement_matrix(mesh, element_admittivity(phantom, mesh, "DC", modulation), patterns,
                               mode="DC", modulation=modulation, omega=phantom.omega, threads=threads)
    lam = eigen_spectrum(difference_matrix(r_mod, r_ac, phantom.alpha, case))
    items.append(_item("theorem_forward", max(-lam[0], 0.0) / norm, MONOTONE_RTOL,
                       note=f"beta={constants.beta_max:.6g}, min eigenvalue {lam[0]:.3e}"))
    return items
