"""
Regions used for inclusions D, focusing regions B and scan balls.

A region only answers two questions: which points lie inside it, and whether
it sits strictly inside the disk-shaped imaging domain. Membership of mesh
elements is decided by centroid (see geometry.mesh.elements_in_region).
"""
import math
from dataclasses import dataclass

import numpy as np
from matplotlib.path import Path

from umeit_monotonicity.errors import ValidationError


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValidationError(f"disk radius must be > 0 (got {self.radius!r})", field="radius")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        d2 = (p[:, 0] - self.center[0]) ** 2 + (p[:, 1] - self.center[1]) ** 2
        return d2 <= self.radius ** 2

    def area(self) -> float:
        return math.pi * self.radius ** 2

    def inside_disk(self, domain_radius: float) -> bool:
        """True if the whole disk lies strictly inside the origin-centred domain."""
        return math.hypot(*self.center) + self.radius < domain_radius

    def distance_to(self, other: "Disk") -> float:
        """Gap between the two disks (negative when they overlap)."""
        gap = math.hypot(self.center[0] - other.center[0], self.center[1] - other.center[1])
        return gap - self.radius - other.radius

    def describe(self) -> str:
        return f"disk(center=({self.center[0]:g},{self.center[1]:g}),radius={self.radius:g})"


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise ValidationError("polygon needs at least 3 vertices", field="vertices")
        object.__setattr__(self, "vertices", verts)
        if self.area() <= 0.0:
            raise ValidationError("polygon has zero area", field="vertices")

    def _path(self) -> Path:
        return Path(np.array(self.vertices + (self.vertices[0],)), closed=True)

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return self._path().contains_points(p)

    def area(self) -> float:
        v = np.array(self.vertices)
        x, y = v[:, 0], v[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    def inside_disk(self, domain_radius: float) -> bool:
        # the domain is convex, so checking the vertices is enough
        return all(math.hypot(x, y) < domain_radius for x, y in self.vertices)

    def boundary_distance(self, point: tuple[float, float]) -> float:
        """Shortest distance from `point` to the polygon's edges."""
        a = np.array(self.vertices)
        b = np.roll(a, -1, axis=0)
        ab = b - a
        len2 = (ab * ab).sum(axis=1)
        proj = ((np.asarray(point) - a) * ab).sum(axis=1)
        t = np.clip(np.divide(proj, len2, out=np.zeros_like(proj), where=len2 > 0.0), 0.0, 1.0)
        nearest = a + t[:, None] * ab
        return float(np.linalg.norm(nearest - np.asarray(point), axis=1).min())

    def describe(self) -> str:
        pts = ";".join(f"{x:g},{y:g}" for x, y in self.vertices)
        return f"polygon({pts})"


RegionSpec = Disk | Polygon


def regions_overlap(a: RegionSpec, b: RegionSpec) -> bool:
    """
    Overlap test for inclusion bookkeeping (shared interior, touching does
    not count for disks). Polygon pairs use matplotlib's filled path
    intersection, so crossing edges and containment both count.
    """
    if isinstance(a, Disk) and isinstance(b, Disk):
        return a.distance_to(b) < 0.0
    if isinstance(a, Polygon) and isinstance(b, Polygon):
        return bool(a._path().intersects_path(b._path(), filled=True))
    disk, poly = (a, b) if isinstance(a, Disk) else (b, a)
    if poly.contains(np.array(disk.center))[0]:
        return True
    return poly.boundary_distance(disk.center) < disk.radius
