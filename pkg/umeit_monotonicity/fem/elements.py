"""Piecewise-linear (P1) triangle kernels, vectorized over all elements."""
import numpy as np

from umeit_monotonicity.errors import MeshError
from umeit_monotonicity.geometry.mesh import Mesh


def p1_gradients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """
    Areas (T,) and constant basis gradients (T, 3, 2) of every triangle.
    grad(phi_i) = perp(p_k - p_j) / (2A) for (i, j, k) cyclic.
    """
    p = mesh.nodes[mesh.triangles]
    areas = mesh.signed_areas
    if np.any(areas <= 0.0):
        raise MeshError("non-positive triangle area in P1 kernel")
    p_j = np.roll(p, -1, axis=1)
    p_k = np.roll(p, -2, axis=1)
    grads = np.empty_like(p)
    grads[..., 0] = p_j[..., 1] - p_k[..., 1]
    grads[..., 1] = p_k[..., 0] - p_j[..., 0]
    grads /= (2.0 * areas)[:, None, None]
    return areas, grads


def local_stiffness(mesh: Mesh) -> np.ndarray:
    """Unit-coefficient element matrices A_T * G_T G_T^T, shape (T, 3, 3)."""
    areas, grads = p1_gradients(mesh)
    return areas[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)


def gradient_field(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Per-element gradient of the nodal P1 field u, shape (T, 2)."""
    _, grads = p1_gradients(mesh)
    return np.einsum("tik,ti->tk", grads, np.asarray(u)[mesh.triangles])


def energy_density(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """|grad u|^2 per element (real, also for complex u)."""
    g = gradient_field(mesh, u)
    return (np.abs(g) ** 2).sum(axis=1)
