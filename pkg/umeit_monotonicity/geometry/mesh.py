import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from umeit_monotonicity.errors import ElectrodeUnderResolved, MeshError, ValidationError
from umeit_monotonicity.geometry.regions import RegionSpec

logger = logging.getLogger(__name__)

INSULATED = -1           # electrode_of_edge label for gaps between electrodes
_MIN_RING_NODES = 6
_SLACK = 1e-9            # keeps ceil() from jumping on exact multiples


# ---------- value types ----------

@dataclass(frozen=True)
class ElectrodeLayout:
    """
    m equally sized, equally spaced electrode arcs.
    - coverage: fraction of the perimeter covered by electrodes, in (0, 1)
    - start_angle: where electrode 1 begins (radians); the default centres
      electrode 1 on the +x axis.
    """
    count: int = 16
    coverage: float = 0.5
    start_angle: float | None = None

    def __post_init__(self) -> None:
        if isinstance(self.count, bool) or not isinstance(self.count, int) or self.count < 2:
            raise ValidationError(f"electrode count must be an integer >= 2 (got {self.count!r})",
                                  field="electrodes.count")
        if not 0.0 < float(self.coverage) < 1.0:
            raise ValidationError(f"coverage must be in (0, 1) (got {self.coverage!r})",
                                  field="electrodes.coverage")
        if self.start_angle is None:
            object.__setattr__(self, "start_angle", -math.pi * self.coverage / self.count)

    @property
    def pitch(self) -> float:
        return 2.0 * math.pi / self.count

    @property
    def electrode_angle(self) -> float:
        return self.coverage * self.pitch

    def arcs(self) -> list[tuple[float, float]]:
        """(start, end) angle of each electrode, in electrode order."""
        return [(self.start_angle + l * self.pitch,
                 self.start_angle + l * self.pitch + self.electrode_angle) for l in range(self.count)]


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Immutable 2D triangulation of the disk of radius `radius` centred at the origin.
    - triangles are counterclockwise
    - boundary_edges run counterclockwise around the boundary as one closed cycle
    - electrode_of_edge holds 0-based electrode indices, INSULATED for gaps
    """
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    electrode_of_edge: np.ndarray
    radius: float
    n_electrodes: int
    level: int = 0

    def __post_init__(self) -> None:
        for name, dtype in (("nodes", float), ("triangles", np.int64),
                            ("boundary_edges", np.int64), ("electrode_of_edge", np.int64)):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # ----- geometry -----

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def total_area(self) -> float:
        return float(self.signed_areas.sum())

    def max_diameter(self) -> float:
        p = self.nodes[self.triangles]
        lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        return float(lengths.max())

    # ----- electrodes -----

    def electrode_nodes(self, electrode: int) -> np.ndarray:
        edges = self.boundary_edges[self.electrode_of_edge == electrode]
        return np.unique(edges.ravel())

    def electrode_edge_counts(self) -> np.ndarray:
        labels = self.electrode_of_edge[self.electrode_of_edge >= 0]
        return np.bincount(labels, minlength=self.n_electrodes)

    def electrode_arc_length(self, electrode: int) -> float:
        """Length of the circular arc spanned by the electrode's boundary edges."""
        edges = self.boundary_edges[self.electrode_of_edge == electrode]
        a = self.nodes[edges[:, 0]]
        b = self.nodes[edges[:, 1]]
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        dot = (a * b).sum(axis=1)
        return float(self.radius * np.arctan2(cross, dot).sum())

    # ----- invariants -----

    def validate(self) -> None:
        """Raise MeshError if any structural invariant is broken."""
        if np.any(self.signed_areas <= 0.0):
            bad = int(np.count_nonzero(self.signed_areas <= 0.0))
            raise MeshError("non-positive triangle area", detail=f"{bad} triangles")

        be = self.boundary_edges
        if not np.array_equal(be[:, 1], np.roll(be[:, 0], -1)):
            raise MeshError("boundary edges do not form a closed cycle")
        if len(np.unique(be[:, 0])) != len(be):
            raise MeshError("boundary cycle visits a node twice")

        directed = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                                   self.triangles[:, [2, 0]]])
        n = self.n_nodes
        fwd = directed[:, 0] * n + directed[:, 1]
        if len(np.unique(fwd)) != len(fwd):
            raise MeshError("an edge is used twice with the same orientation")
        rev = set((directed[:, 1] * n + directed[:, 0]).tolist())
        unmatched = {int(k) for k in fwd.tolist() if int(k) not in rev}
        boundary = set((be[:, 0] * n + be[:, 1]).tolist())
        if unmatched != boundary:
            raise MeshError("edges without a reversed twin differ from the boundary cycle")

        labels = self.electrode_of_edge
        counts = self.electrode_edge_counts()
        if np.any(counts < 2):
            raise ElectrodeUnderResolved("electrode under-resolved",
                                         detail=f"edge counts per electrode: {counts.tolist()}")
        # contiguity: each electrode label starts exactly one run along the cycle
        starts = labels[(labels != np.roll(labels, 1)) & (labels >= 0)]
        if len(starts) != self.n_electrodes or len(np.unique(starts)) != self.n_electrodes:
            raise MeshError("electrode arcs are not contiguous")


# ---------- public API ------------

def build_disk_mesh(radius: float, layout: ElectrodeLayout, target_h: float) -> Mesh:
    """
    Structured polar mesh: a centre node, concentric rings of evenly spaced
    nodes, and a boundary ring whose nodes subdivide every electrode arc and
    every gap evenly (so arc endpoints are mesh nodes). Neighbouring rings are
    stitched by merging their angle sequences.
    """
    if not radius > 0:
        raise ValidationError(f"radius must be > 0 (got {radius!r})", field="geometry.radius")
    if not 0 < target_h < radius:
        raise ValidationError(f"target_h must be in (0, radius) (got {target_h!r})",
                              field="geometry.target_h")

    gap_angle = layout.pitch - layout.electrode_angle
    n_el = math.ceil(radius * layout.electrode_angle / target_h - _SLACK)
    if n_el < 2:
        raise ElectrodeUnderResolved(
            "electrode under-resolved",
            field="geometry.target_h",
            detail=f"arc length {radius * layout.electrode_angle:.4g} with target_h {target_h:g} "
                   f"gives {n_el} edge(s)",
        )
    n_gap = max(1, math.ceil(radius * gap_angle / target_h - _SLACK))

    b_angles: list[float] = []
    b_labels: list[int] = []
    for l, (start, end) in enumerate(layout.arcs()):
        b_angles.extend(start + layout.electrode_angle * j / n_el for j in range(n_el))
        b_labels.extend([l] * n_el)
        b_angles.extend(end + gap_angle * j / n_gap for j in range(n_gap))
        b_labels.extend([INSULATED] * n_gap)

    # rotate so the boundary ring starts at its smallest angle in [0, 2pi)
    wrapped = np.mod(np.array(b_angles), 2.0 * math.pi)
    k = int(np.argmin(wrapped))
    b_theta = np.roll(wrapped, -k)
    labels = np.roll(np.array(b_labels), -k)

    n_rings = math.ceil(radius / target_h - _SLACK)
    rings = []
    for ring in range(1, n_rings):
        r = radius * ring / n_rings
        count = max(_MIN_RING_NODES, 2 * math.ceil(math.pi * r / target_h - _SLACK))
        rings.append((r, 2.0 * math.pi * np.arange(count) / count))
    rings.append((radius, b_theta))

    nodes = [np.zeros((1, 2))]
    ring_index = []
    offset = 1
    for r, theta in rings:
        nodes.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
        ring_index.append(np.arange(offset, offset + len(theta)))
        offset += len(theta)
    nodes_arr = np.vstack(nodes)

    tris: list[tuple[int, int, int]] = []
    first = ring_index[0]
    for j in range(len(first)):
        tris.append((0, int(first[j]), int(first[(j + 1) % len(first)])))
    for (_, inner_t), (_, outer_t), inner, outer in zip(rings[:-1], rings[1:], ring_index[:-1], ring_index[1:]):
        tris.extend(_stitch_rings(inner, inner_t, outer, outer_t))

    tri_arr = _orient_ccw(nodes_arr, np.array(tris, dtype=np.int64))
    boundary = ring_index[-1]
    b_edges = np.column_stack([boundary, np.roll(boundary, -1)])

    mesh = Mesh(nodes=nodes_arr, triangles=tri_arr, boundary_edges=b_edges,
                electrode_of_edge=labels, radius=float(radius), n_electrodes=layout.count, level=0)
    mesh.validate()
    logger.debug("Disk mesh radius=%g m=%d target_h=%g: nodes=%d triangles=%d h_max=%.4g",
                 radius, layout.count, target_h, mesh.n_nodes, mesh.n_triangles, mesh.max_diameter())
    return mesh


def refine_mesh(mesh: Mesh) -> Mesh:
    """
    Red refinement: every triangle is split into 4 through its edge midpoints.
    Midpoints of boundary edges are projected onto the circle; boundary edges
    are bisected and keep their electrode labels.
    """
    n = mesh.n_nodes
    tri = mesh.triangles
    t = len(tri)
    edges = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    keys = edges.min(axis=1) * n + edges.max(axis=1)
    uniq, inv = np.unique(keys, return_inverse=True)
    lo, hi = uniq // n, uniq % n
    mids = 0.5 * (mesh.nodes[lo] + mesh.nodes[hi])

    be = mesh.boundary_edges
    b_ids = np.searchsorted(uniq, be.min(axis=1) * n + be.max(axis=1))
    b_mid = mids[b_ids]
    mids[b_ids] = b_mid * (mesh.radius / np.linalg.norm(b_mid, axis=1))[:, None]

    m_ab, m_bc, m_ca = n + inv[:t], n + inv[t:2 * t], n + inv[2 * t:]
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    children = np.stack([
        np.column_stack([a, m_ab, m_ca]),
        np.column_stack([m_ab, b, m_bc]),
        np.column_stack([m_ca, m_bc, c]),
        np.column_stack([m_ab, m_bc, m_ca]),
    ], axis=1).reshape(-1, 3)

    b_mid_idx = n + b_ids
    new_be = np.stack([np.column_stack([be[:, 0], b_mid_idx]),
                       np.column_stack([b_mid_idx, be[:, 1]])], axis=1).reshape(-1, 2)
    new_labels = np.repeat(mesh.electrode_of_edge, 2)

    refined = Mesh(nodes=np.vstack([mesh.nodes, mids]), triangles=children, boundary_edges=new_be,
                   electrode_of_edge=new_labels, radius=mesh.radius,
                   n_electrodes=mesh.n_electrodes, level=mesh.level + 1)
    logger.debug("Refined mesh to level %d: nodes=%d triangles=%d",
                 refined.level, refined.n_nodes, refined.n_triangles)
    return refined


def refine_to_level(mesh: Mesh, level: int) -> Mesh:
    """Refine repeatedly until `mesh.level == level`."""
    if level < mesh.level:
        raise ValidationError(f"cannot coarsen mesh from level {mesh.level} to {level}",
                              field="geometry.mesh_level")
    while mesh.level < level:
        mesh = refine_mesh(mesh)
    return mesh


def elements_in_region(mesh: Mesh, region: RegionSpec) -> np.ndarray:
    """Indices (ascending) of the triangles whose centroid lies in `region`."""
    return np.flatnonzero(region.contains(mesh.centroids))


# ---------- helpers -----------

def _stitch_rings(inner: np.ndarray, inner_t: np.ndarray,
                  outer: np.ndarray, outer_t: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate the annulus between two rings by merging their sorted angles."""
    na, nb = len(inner), len(outer)
    a_ext = np.append(inner_t, inner_t[0] + 2.0 * math.pi)
    b_ext = np.append(outer_t, outer_t[0] + 2.0 * math.pi)
    out = []
    i = j = 0
    while i < na or j < nb:
        if j == nb or (i < na and a_ext[i + 1] <= b_ext[j + 1]):
            out.append((int(inner[i % na]), int(inner[(i + 1) % na]), int(outer[j % nb])))
            i += 1
        else:
            out.append((int(inner[i % na]), int(outer[(j + 1) % nb]), int(outer[j % nb])))
            j += 1
    return out


def _orient_ccw(nodes: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p = nodes[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(area2 == 0.0):
        raise MeshError("degenerate triangle while stitching rings")
    flip = area2 < 0.0
    tris = tris.copy()
    tris[flip, 1], tris[flip, 2] = tris[flip, 2].copy(), tris[flip, 1].copy()
    return tris
