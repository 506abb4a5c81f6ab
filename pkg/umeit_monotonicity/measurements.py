import logging
from dataclasses import dataclass, replace

import numpy as np

from umeit_monotonicity.batching import batched, ordered_map
from umeit_monotonicity.errors import ValidationError, require_finite
from umeit_monotonicity.fem.elements import energy_density
from umeit_monotonicity.fem.shunt import ShuntSystem, assemble, solve_many
from umeit_monotonicity.geometry.mesh import Mesh
from umeit_monotonicity.phantom import Modulation
from umeit_monotonicity.types import FrequencyMode

logger = logging.getLogger(__name__)

# drives solved per block; fixed so results do not depend on --threads
DRIVE_CHUNK = 4
SYMMETRY_RTOL = 1e-10


# ---------- value types ----------

@dataclass(frozen=True)
class DrivePatternSet:
    """
    Dipole drive pairs (j_r, k_r), 0-based electrode indices.
    Current +1 enters at j_r and leaves at k_r.
    """
    pairs: tuple[tuple[int, int], ...]
    n_electrodes: int
    name: str = "custom"

    def __post_init__(self) -> None:
        pairs = tuple((int(j), int(k)) for j, k in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if not pairs:
            raise ValidationError("pattern set is empty", field="measurement.patterns")
        if len(set(pairs)) != len(pairs):
            raise ValidationError("drive pairs must be distinct", field="measurement.patterns")
        for j, k in pairs:
            if j == k:
                raise ValidationError(f"drive pair ({j + 1},{k + 1}) uses one electrode twice",
                                      field="measurement.patterns")
            if not (0 <= j < self.n_electrodes and 0 <= k < self.n_electrodes):
                raise ValidationError(f"drive pair ({j + 1},{k + 1}) outside 1..{self.n_electrodes}",
                                      field="measurement.patterns")

    @property
    def N(self) -> int:
        return len(self.pairs)

    def label(self) -> str:
        """Pairs as space-separated 1-based `j-k` tokens."""
        return " ".join(f"{j + 1}-{k + 1}" for j, k in self.pairs)

    def currents(self) -> np.ndarray:
        """Electrode currents of every pattern as columns, shape (m, N)."""
        J = np.zeros((self.n_electrodes, self.N))
        for r, (j, k) in enumerate(self.pairs):
            J[j, r] = 1.0
            J[k, r] = -1.0
        return J


@dataclass(frozen=True)
class MeasurementProvenance:
    mode: FrequencyMode
    mesh_level: int
    mesh_size: tuple[int, int]         # (nodes, triangles)
    omega: float
    modulation: str | None = None
    modulation_sign: int = 0           # +1, -1, or 0 when unmodulated
    symmetrized: bool = False


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    entries: np.ndarray
    patterns: DrivePatternSet
    provenance: MeasurementProvenance

    @property
    def symmetry_defect(self) -> float:
        """||R - R^T||_F / ||R||_F (0 for the zero matrix)."""
        norm = np.linalg.norm(self.entries)
        if norm == 0.0:
            return 0.0
        return float(np.linalg.norm(self.entries - self.entries.T) / norm)

    def symmetrized(self) -> "MeasurementMatrix":
        sym = 0.5 * (self.entries + self.entries.T)
        return MeasurementMatrix(sym, self.patterns, replace(self.provenance, symmetrized=True))


@dataclass(frozen=True)
class SandwichBounds:
    lower: float
    middle: float
    upper: float

    def slack(self) -> float:
        """How far `middle` falls outside [lower, upper], relative to the bound gap."""
        gap = max(self.upper - self.lower, 0.0)
        outside = max(self.lower - self.middle, self.middle - self.upper, 0.0)
        if outside == 0.0:
            return 0.0
        return outside / gap if gap > 0.0 else float("inf")

    def holds(self, rtol: float = 1e-9) -> bool:
        scale = max(abs(self.lower), abs(self.middle), abs(self.upper), 1e-300)
        return self.lower - self.middle <= rtol * scale and self.middle - self.upper <= rtol * scale


# ---------- public API ------------

def adjacent_dipole_patterns(m: int) -> DrivePatternSet:
    """(1,2), (2,3), ..., (m,1) in 1-based electrode numbering."""
    if m < 3:
        raise ValidationError(f"adjacent patterns need m >= 3 electrodes (got {m})", field="electrodes.count")
    return DrivePatternSet(tuple((r, (r + 1) % m) for r in range(m)), m, name="adjacent")


def measurement_matrix(
    mesh: Mesh,
    gamma_e: np.ndarray,
    patterns: DrivePatternSet,
    *,
    mode: FrequencyMode | None = None,
    modulation: Modulation | None = None,
    omega: float = 0.0,
    threads: int = 1,
    system: ShuntSystem | None = None,
) -> MeasurementMatrix:
    """
    R[r, s] = U^(r)_{j_s} - U^(r)_{k_s}, where U^(r) solves drive r.
    Pass a prefactorized `system` to reuse it; otherwise it is assembled here.
    """
    if patterns.n_electrodes != mesh.n_electrodes:
        raise ValidationError(f"patterns for {patterns.n_electrodes} electrodes, mesh has {mesh.n_electrodes}",
                              field="measurement.patterns")
    if system is None:
        system = assemble(mesh, gamma_e)
    if mode is None:
        mode = "DC" if not np.any(np.asarray(gamma_e).imag) else "AC"

    J = patterns.currents()

    def solve_block(cols: list[int]) -> np.ndarray:
        return np.column_stack([s.U for s in solve_many(system, J[:, cols])])

    blocks = list(batched(range(patterns.N), DRIVE_CHUNK))
    U = np.hstack(ordered_map(solve_block, blocks, threads=threads))
    R = U.T @ J
    require_finite(R, field="measurement")

    prov = MeasurementProvenance(
        mode=mode, mesh_level=mesh.level, mesh_size=(mesh.n_nodes, mesh.n_triangles), omega=float(omega),
        modulation=modulation.describe() if modulation is not None else None,
        modulation_sign=modulation.sign if modulation is not None else 0,
    )
    result = MeasurementMatrix(R, patterns, prov)
    defect = result.symmetry_defect
    if defect > SYMMETRY_RTOL:
        logger.warning("Measurement matrix symmetry defect %.3g exceeds %.0e (mode=%s level=%d)",
                       defect, SYMMETRY_RTOL, mode, mesh.level)
    else:
        logger.debug("Measured %s matrix N=%d level=%d defect=%.3g", mode, patterns.N, mesh.level, defect)
    return result


def weighted_real_part(R: MeasurementMatrix | np.ndarray, alpha: complex) -> np.ndarray:
    """
    Self-adjoint part of alpha*R, (aR + (aR)^*)/2, returned as a real array.
    For complex symmetric R this is Re(alpha*R); the imaginary part of the
    self-adjoint part is antisymmetric and only carries the symmetry defect.
    """
    M = alpha * (R.entries if isinstance(R, MeasurementMatrix) else np.asarray(R))
    return (0.5 * (M + M.conj().T)).real


def sandwich_check(
    mesh: Mesh,
    gamma1_e: np.ndarray,
    gamma2_e: np.ndarray,
    patterns: DrivePatternSet,
    g: np.ndarray,
    *,
    systems: tuple[ShuntSystem, ShuntSystem] | None = None,
) -> SandwichBounds:
    """
    Bounds of g^* Re[R(gamma2) - R(gamma1)] g by integrals of |grad u|^2,
    u being the gamma2 potential of the combined drive sum_r g_r (e_{j_r} - e_{k_r}).
    """
    g = np.asarray(g, dtype=complex)
    if g.shape != (patterns.N,):
        raise ValidationError(f"g must have length {patterns.N}", field="g")
    gamma1 = np.asarray(gamma1_e, dtype=complex)
    gamma2 = np.asarray(gamma2_e, dtype=complex)
    sys1, sys2 = systems if systems is not None else (assemble(mesh, gamma1), assemble(mesh, gamma2))

    r1 = measurement_matrix(mesh, gamma1, patterns, system=sys1)
    r2 = measurement_matrix(mesh, gamma2, patterns, system=sys2)
    middle = float(np.real(g.conj() @ (r2.entries - r1.entries) @ g))

    I = patterns.currents() @ g
    u2 = solve_many(sys2, I[:, None])[0].u
    w = mesh.signed_areas * energy_density(mesh, u2)
    re1, re2 = gamma1.real, gamma2.real
    lower = float((w * (re2 / re1 * (re1 - re2) - gamma2.imag ** 2 / re1)).sum())
    upper = float((w * ((re1 - re2) + gamma1.imag ** 2 / re1)).sum())
    return SandwichBounds(lower=lower, middle=middle, upper=upper)
