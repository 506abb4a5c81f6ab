"""
Shunt electrode model, P1 finite elements.

Unknowns: one potential per node off the electrodes plus one potential per
electrode (every node of an electrode arc shares it). The ungauged reduced
stiffness K_r has the constants as kernel; it is bordered with one row and
column e (ones on the electrode unknowns) so the system

    [ K_r  e ] [x]   [b]
    [ e^T  0 ] [mu] = [0]

is uniquely solvable and returns sum_l U_l = 0. Insulated boundary is natural.
"""
import logging
import threading
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from umeit_monotonicity.errors import SolverError, ValidationError, require_finite
from umeit_monotonicity.fem.elements import energy_density, local_stiffness
from umeit_monotonicity.geometry.mesh import Mesh

logger = logging.getLogger(__name__)

RE_GAMMA_FLOOR = 1e-12
ZERO_SUM_RTOL = 1e-12


# ---------- value types ----------

@dataclass(frozen=True, eq=False)
class DofMap:
    node_to_dof: np.ndarray
    n_free: int
    n_electrodes: int

    @property
    def size(self) -> int:
        """Number of reduced unknowns (without the gauge multiplier)."""
        return self.n_free + self.n_electrodes

    @property
    def electrode_dofs(self) -> np.ndarray:
        return self.n_free + np.arange(self.n_electrodes)

    @classmethod
    def for_mesh(cls, mesh: Mesh) -> "DofMap":
        on_electrode = np.full(mesh.n_nodes, -1, dtype=np.int64)
        for l in range(mesh.n_electrodes):
            on_electrode[mesh.electrode_nodes(l)] = l
        free = np.flatnonzero(on_electrode < 0)
        node_to_dof = np.empty(mesh.n_nodes, dtype=np.int64)
        node_to_dof[free] = np.arange(len(free))
        marked = on_electrode >= 0
        node_to_dof[marked] = len(free) + on_electrode[marked]
        node_to_dof.setflags(write=False)
        return cls(node_to_dof=node_to_dof, n_free=len(free), n_electrodes=mesh.n_electrodes)


@dataclass(frozen=True, eq=False)
class FieldSolution:
    u: np.ndarray      # nodal potential
    U: np.ndarray      # electrode potentials
    I: np.ndarray      # drive currents


@dataclass(frozen=True, eq=False)
class _LowRankCorrection:
    """Woodbury terms for K0 + S D S^T with S selecting `dofs`."""
    dofs: np.ndarray
    D: np.ndarray
    Z: np.ndarray                      # K0^{-1} S
    capacitance: tuple                 # lu_factor(I + D S^T Z)

    def apply(self, y: np.ndarray) -> np.ndarray:
        rhs = self.D @ y[self.dofs]
        return y - self.Z @ sla.lu_solve(self.capacitance, rhs)


class ShuntSystem:
    """
    Factorized shunt-model system for one admittivity distribution.
    Safe to share between threads: solves against the factorization are
    serialized by a lock.
    """

    def __init__(
        self,
        mesh: Mesh,
        gamma_e: np.ndarray,
        *,
        dofs: DofMap,
        stiffness: sp.csr_matrix,
        element_matrices: np.ndarray,
        factor,
        lock: threading.Lock,
        correction: _LowRankCorrection | None = None,
        base: "ShuntSystem | None" = None,
    ) -> None:
        self.mesh = mesh
        self.gamma_e = gamma_e
        self.dofs = dofs
        self.stiffness = stiffness
        self._element_matrices = element_matrices
        self._factor = factor
        self._lock = lock
        self._correction = correction
        self._base = base

    @property
    def n_electrodes(self) -> int:
        return self.dofs.n_electrodes

    @property
    def is_low_rank_update(self) -> bool:
        return self._correction is not None

    def solve_reduced(self, rhs: np.ndarray) -> np.ndarray:
        """Solve the bordered system for reduced right-hand sides (size, k) or (size,)."""
        b = np.asarray(rhs, dtype=complex)
        squeeze = b.ndim == 1
        if squeeze:
            b = b[:, None]
        bordered = np.vstack([b, np.zeros((1, b.shape[1]), dtype=complex)])
        x = self._base_solve(bordered)
        if self._correction is not None:
            x = self._correction.apply(x)
        if not np.all(np.isfinite(x)):
            raise SolverError("factorization breakdown: non-finite solution",
                              detail=f"unknowns={self.dofs.size} level={self.mesh.level}")
        x = x[:-1]
        return x[:, 0] if squeeze else x

    def with_element_update(self, elements: np.ndarray, new_gamma: np.ndarray) -> "ShuntSystem":
        """
        System for gamma_e with `elements` set to `new_gamma`, reusing this
        system's base factorization through a Woodbury correction whose rank
        is the number of unknowns touched by the elements that differ from
        the factorized distribution.
        """
        elements = np.asarray(elements, dtype=np.int64)
        gamma = self.gamma_e.copy()
        gamma[elements] = new_gamma
        _check_gamma(gamma, self.mesh)
        gamma.setflags(write=False)

        base_gamma = self._base_gamma
        changed = np.flatnonzero(gamma != base_gamma)
        delta_k = _assemble_reduced(self.mesh, self.dofs, self._element_matrices,
                                    gamma[changed] - base_gamma[changed], changed)
        stiffness = (self._base_stiffness + delta_k).tocsr()
        if changed.size == 0:
            return ShuntSystem(self.mesh, gamma, dofs=self.dofs, stiffness=stiffness,
                               element_matrices=self._element_matrices, factor=self._factor,
                               lock=self._lock, base=self._base or self)

        touched = np.unique(self.dofs.node_to_dof[self.mesh.triangles[changed]].ravel())
        D = delta_k[touched][:, touched].toarray()
        selector = np.zeros((self.dofs.size + 1, len(touched)), dtype=complex)
        selector[touched, np.arange(len(touched))] = 1.0
        Z = self._base_solve(selector)
        capacitance = sla.lu_factor(np.eye(len(touched)) + D @ Z[touched])
        logger.debug("Low-rank update: %d elements, rank %d", changed.size, len(touched))

        update = ShuntSystem(self.mesh, gamma, dofs=self.dofs, stiffness=stiffness,
                             element_matrices=self._element_matrices, factor=self._factor,
                             lock=self._lock,
                             correction=_LowRankCorrection(touched, D, Z, capacitance),
                             base=self._base or self)
        return update

    # ----- internals -----

    @property
    def _base_gamma(self) -> np.ndarray:
        return (self._base or self).gamma_e

    @property
    def _base_stiffness(self) -> sp.csr_matrix:
        return (self._base or self).stiffness

    def _base_solve(self, bordered: np.ndarray) -> np.ndarray:
        with self._lock:
            return self._factor.solve(bordered)


# ---------- public API ------------

def assemble(mesh: Mesh, gamma_e: np.ndarray) -> ShuntSystem:
    """Assemble, gauge and factorize the shunt system for per-element admittivity."""
    gamma = np.array(gamma_e, dtype=complex)
    _check_gamma(gamma, mesh)
    if mesh.n_electrodes < 2:
        raise SolverError("singular gauge: at least 2 electrodes are required",
                          detail=f"m={mesh.n_electrodes}")

    dofs = DofMap.for_mesh(mesh)
    element_matrices = local_stiffness(mesh)
    stiffness = _assemble_reduced(mesh, dofs, element_matrices, gamma, np.arange(mesh.n_triangles))

    n = dofs.size
    e = np.zeros(n)
    e[dofs.electrode_dofs] = 1.0
    border = sp.csr_matrix(e[None, :])
    bordered = sp.bmat([[stiffness, border.T], [border, None]], format="csc", dtype=complex)
    try:
        factor = splu(bordered)
    except RuntimeError as ex:
        raise SolverError("factorization breakdown", detail=f"{ex}; unknowns={n + 1}") from ex

    logger.debug("Assembled shunt system: level=%d unknowns=%d nnz=%d",
                 mesh.level, n + 1, bordered.nnz)
    gamma.setflags(write=False)
    return ShuntSystem(mesh, gamma, dofs=dofs, stiffness=stiffness,
                       element_matrices=element_matrices, factor=factor, lock=threading.Lock())


def solve_drive(system: ShuntSystem, I: np.ndarray) -> FieldSolution:
    return solve_many(system, np.asarray(I)[:, None])[0]


def solve_many(system: ShuntSystem, currents: np.ndarray) -> list[FieldSolution]:
    """Solve for each column of `currents` (shape (m, k))."""
    currents = np.asarray(currents, dtype=complex)
    m = system.n_electrodes
    if currents.ndim != 2 or currents.shape[0] != m:
        raise ValidationError(f"currents must have shape ({m}, k), got {currents.shape}", field="currents")
    require_finite(currents, field="currents")
    _check_zero_sum(currents)

    rhs = np.zeros((system.dofs.size, currents.shape[1]), dtype=complex)
    rhs[system.dofs.electrode_dofs] = currents
    x = system.solve_reduced(rhs)
    u = x[system.dofs.node_to_dof]
    U = x[system.dofs.electrode_dofs]
    return [FieldSolution(u=u[:, k], U=U[:, k], I=currents[:, k]) for k in range(currents.shape[1])]


def electrode_currents(system: ShuntSystem, solution: FieldSolution) -> np.ndarray:
    """Discrete current per electrode: the ungauged residual K_r x on the electrode rows."""
    x = np.zeros(system.dofs.size, dtype=complex)
    x[system.dofs.node_to_dof] = solution.u
    return (system.stiffness @ x)[system.dofs.electrode_dofs]


def interior_energy(mesh: Mesh, gamma_e: np.ndarray, solution: FieldSolution, region: np.ndarray) -> float:
    """Sum over `region` of area(T) * |grad u_T|^2 (unweighted)."""
    if len(gamma_e) != mesh.n_triangles or len(solution.u) != mesh.n_nodes:
        raise ValidationError("solution and admittivity must come from the same mesh", field="solution")
    idx = np.asarray(region, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= mesh.n_triangles):
        raise ValidationError("region element index out of bounds", field="region",
                              detail=f"valid range 0..{mesh.n_triangles - 1}")
    density = energy_density(mesh, solution.u)
    return float((mesh.signed_areas[idx] * density[idx]).sum())


def weighted_energy(mesh: Mesh, weights: np.ndarray, u: np.ndarray) -> float:
    """Sum over all elements of weights_T * area(T) * |grad u_T|^2."""
    return float((np.asarray(weights) * mesh.signed_areas * energy_density(mesh, u)).sum())


# ---------- helpers -----------

def _assemble_reduced(mesh: Mesh, dofs: DofMap, element_matrices: np.ndarray,
                      gamma: np.ndarray, elements: np.ndarray) -> sp.csr_matrix:
    """Condensed stiffness sum_T gamma_T K_T over `elements` (duplicates summed by COO)."""
    local_dofs = dofs.node_to_dof[mesh.triangles[elements]]
    rows = np.repeat(local_dofs, 3, axis=1).ravel()
    cols = np.tile(local_dofs, (1, 3)).ravel()
    vals = (np.asarray(gamma)[:, None, None] * element_matrices[elements]).ravel()
    n = dofs.size
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex).tocsr()


def _check_gamma(gamma: np.ndarray, mesh: Mesh) -> None:
    if gamma.shape != (mesh.n_triangles,):
        raise ValidationError(f"admittivity must have one value per element ({mesh.n_triangles}), "
                              f"got shape {gamma.shape}", field="gamma_e")
    require_finite(gamma, field="gamma_e")
    low = gamma.real < RE_GAMMA_FLOOR
    if np.any(low):
        raise ValidationError("admittivity real part below positive floor",
                              field="gamma_e",
                              detail=f"{int(low.sum())} elements, min Re={gamma.real.min():.3g}")


def _check_zero_sum(currents: np.ndarray) -> None:
    total = np.abs(currents.sum(axis=0))
    scale = np.abs(currents).max(axis=0)
    bad = total > ZERO_SUM_RTOL * scale
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise SolverError("electrode currents must sum to zero",
                          detail=f"pattern {k}: |sum I|={total[k]:.3g}, max|I|={scale[k]:.3g}")
