"""Whole-instance shapes: control nets, surface sampling, meshing, ray queries.

All 3D points are (z, y, x) world coordinates.  An instance is a center plus
one nonnegative radial distance per control-layout entry; adjacent patches
reference the same layout entries, so the assembled surface is continuous
across patch edges by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import bezier
from ._raycast import farthest_hits
from .lattice import (
    ControlLayout,
    MeshTopology,
    apply_anisotropy,
    build_topology,
    canonical_directions,
    control_layout,
    fibonacci_directions,
)

CANONICAL_RAY_COUNTS = (4, 6, 12)


def parameter_count(rays: int) -> int:
    """Free parameters of a curved instance with V vertex rays: 9V - 16."""
    return 9 * rays - 16


def default_kind(rays: int) -> str:
    return "canonical" if rays in CANONICAL_RAY_COUNTS else "fibonacci"


@dataclass(frozen=True)
class ShapeLayout:
    """Immutable bundle tying ray directions, topology and control layout together."""

    rays: int
    kind: str
    anisotropy: tuple[float, float, float]
    directions: np.ndarray
    topology: MeshTopology
    controls: ControlLayout

    @cached_property
    def patch_entries(self) -> np.ndarray:
        """Layout entry index of each patch control point, shape (T, 10)."""
        return _patch_entry_table(self.topology, self.controls)

    @cached_property
    def _plans(self) -> dict:
        return {}

    def sample_plan(self, level: int) -> "_SamplePlan":
        plan = self._plans.get(level)
        if plan is None:
            plan = _build_sample_plan(self.topology, level)
            self._plans[level] = plan
        return plan


def make_layout(rays: int, kind: str | None = None, anisotropy=(1.0, 1.0, 1.0)) -> ShapeLayout:
    """Build the full layout for a ray count, lattice kind, and grid anisotropy."""
    if kind is None:
        kind = default_kind(rays)
    if kind == "canonical":
        base = canonical_directions(rays)
    elif kind == "fibonacci":
        base = fibonacci_directions(rays)
    else:
        raise ValueError(f"unknown lattice kind {kind!r} (expected canonical or fibonacci)")
    anisotropy = tuple(float(a) for a in anisotropy)
    dirs = apply_anisotropy(base, anisotropy)
    topo = build_topology(dirs)
    controls = control_layout(topo, dirs)
    return ShapeLayout(
        rays=rays,
        kind=kind,
        anisotropy=anisotropy,
        directions=dirs,
        topology=topo,
        controls=controls,
    )


def _patch_entry_table(topo: MeshTopology, controls: ControlLayout) -> np.ndarray:
    edge_index = topo.edge_index

    def near(p: int, q: int) -> int:
        # entry on edge (p, q) whose ray lies at the chord third closest to p
        e = edge_index[(p, q) if p < q else (q, p)]
        pair = controls.edge_entries[e]
        return int(pair[0] if p < q else pair[1])

    table = np.empty((topo.triangle_count, 10), dtype=np.int64)
    for t, (a, b, c) in enumerate(topo.triangles):
        a, b, c = int(a), int(b), int(c)
        table[t] = (
            a, b, c,
            near(a, b), near(a, c), near(b, a),
            near(b, c), near(c, a), near(c, b),
            controls.interior_entries[t],
        )
    return table


@dataclass(frozen=True)
class InstanceShape:
    """A curved instance: center plus radial distances for every control entry."""

    center: np.ndarray
    distances: np.ndarray
    layout: ShapeLayout

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        distances = np.asarray(self.distances, dtype=float)
        if center.shape != (3,):
            raise ValueError("center must be a 3D point")
        expected = parameter_count(self.layout.rays)
        if distances.shape != (expected,):
            raise ValueError(f"expected {expected} control distances, got {distances.shape}")
        if np.any(distances < 0) or not np.all(np.isfinite(distances)):
            raise ValueError("control distances must be finite and nonnegative")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "distances", distances)

    @property
    def max_radius(self) -> float:
        return float(self.distances.max()) if len(self.distances) else 0.0


@dataclass(frozen=True)
class PolyhedralInstance:
    """Flat-faceted baseline instance: one radial distance per vertex ray."""

    center: np.ndarray
    distances: np.ndarray
    layout: ShapeLayout

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        distances = np.asarray(self.distances, dtype=float)
        if center.shape != (3,):
            raise ValueError("center must be a 3D point")
        if distances.shape != (self.layout.rays,):
            raise ValueError(f"expected {self.layout.rays} vertex distances")
        if np.any(distances < 0) or not np.all(np.isfinite(distances)):
            raise ValueError("vertex distances must be finite and nonnegative")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "distances", distances)

    @property
    def max_radius(self) -> float:
        return float(self.distances.max()) if len(self.distances) else 0.0

    def vertices(self) -> np.ndarray:
        dirs = self.layout.directions
        return self.center + self.distances[:, None] * dirs

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices(), self.layout.topology.triangles


@dataclass(frozen=True)
class SurfaceSampleSet:
    """Deduplicated surface samples with per-point (triangle, barycentric) provenance."""

    points: np.ndarray
    triangle: np.ndarray
    bary: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class _SamplePlan:
    m: int
    triangle: np.ndarray   # (n,) owning patch of each unique sample
    grid: np.ndarray       # (n, 3) integer barycentric triple
    slot_rows: np.ndarray  # (T, S) unique-row id for every per-patch grid slot


def _build_sample_plan(topo: MeshTopology, level: int) -> _SamplePlan:
    if level < 0:
        raise ValueError("sample level must be >= 0")
    m = 1 << level
    grid = bezier.barycentric_grid(m)
    n_slots = len(grid)
    tris = topo.triangles
    edge_index = topo.edge_index

    first: dict = {}
    tri_ids: list[int] = []
    grid_rows: list[tuple[int, int, int]] = []
    slot_rows = np.empty((len(tris), n_slots), dtype=np.int64)

    for t, (a, b, c) in enumerate(tris):
        a, b, c = int(a), int(b), int(c)
        for s, (i, j, k) in enumerate(grid):
            i, j, k = int(i), int(j), int(k)
            if j == 0 and k == 0:
                key = ("v", a)
            elif i == 0 and k == 0:
                key = ("v", b)
            elif i == 0 and j == 0:
                key = ("v", c)
            elif k == 0:
                e = edge_index[(a, b) if a < b else (b, a)]
                key = ("e", e, j if a < b else i)
            elif j == 0:
                e = edge_index[(a, c) if a < c else (c, a)]
                key = ("e", e, k if a < c else i)
            elif i == 0:
                e = edge_index[(b, c) if b < c else (c, b)]
                key = ("e", e, k if b < c else j)
            else:
                key = ("f", t, i, j)
            row = first.get(key)
            if row is None:
                row = len(tri_ids)
                first[key] = row
                tri_ids.append(t)
                grid_rows.append((i, j, k))
            slot_rows[t, s] = row

    return _SamplePlan(
        m=m,
        triangle=np.array(tri_ids, dtype=np.int64),
        grid=np.array(grid_rows, dtype=np.int64),
        slot_rows=slot_rows,
    )


def assemble_patches(shape: InstanceShape) -> np.ndarray:
    """Control points of every patch, shape (T, 10, 3); shared entries are reused."""
    layout = shape.layout
    points = shape.center + shape.distances[:, None] * layout.controls.directions
    return points[layout.patch_entries]


def _flat_patches(vertices: np.ndarray, topo: MeshTopology) -> np.ndarray:
    """Degree-elevated flat patches whose surface is the faceted mesh itself."""
    corners = vertices[topo.triangles]  # (T, 3, 3)
    weights = np.array(bezier.CONTROL_INDICES, dtype=float) / 3.0  # (10, 3)
    return np.einsum("cv,tvd->tcd", weights, corners)


def _sample_points(patches: np.ndarray, plan: _SamplePlan) -> np.ndarray:
    bary = plan.grid / float(plan.m)
    weights = bezier.bernstein_weights(bary)  # (n, 10)
    return np.einsum("nc,ncd->nd", weights, patches[plan.triangle])


def surface_samples(shape: InstanceShape, level: int = 2) -> SurfaceSampleSet:
    """Sample every patch on the level grid, deduplicated across shared edges.

    The default level of 2 evaluates the barycentric points of two successive
    midpoint subdivisions of each triangular domain.
    """
    plan = shape.layout.sample_plan(level)
    points = _sample_points(assemble_patches(shape), plan)
    return SurfaceSampleSet(points=points, triangle=plan.triangle, bary=plan.grid / float(plan.m))


def polyhedron_samples(poly: PolyhedralInstance, level: int = 2) -> SurfaceSampleSet:
    """Like surface_samples but over the flat faces spanned by the vertex rays."""
    plan = poly.layout.sample_plan(level)
    points = _sample_points(_flat_patches(poly.vertices(), poly.layout.topology), plan)
    return SurfaceSampleSet(points=points, triangle=plan.triangle, bary=plan.grid / float(plan.m))


def sample_weight_matrix(layout: ShapeLayout, level: int = 2) -> np.ndarray:
    """Linear map W with sample_offset_i = sum_e W[i, e] * distance_e * ray_e.

    Rows follow the deduplicated sample order of surface_samples; columns are
    control-layout entries.  Shared boundary samples receive identical weights
    from either adjacent patch, so the choice of owner does not matter.
    """
    plan = layout.sample_plan(level)
    weights = bezier.bernstein_weights(plan.grid / float(plan.m))
    entries = layout.patch_entries[plan.triangle]  # (n, 10)
    W = np.zeros((len(plan.triangle), len(layout.controls)))
    np.add.at(W, (np.arange(len(plan.triangle))[:, None], entries), weights)
    return W


def radial_directions(samples: SurfaceSampleSet, voxel) -> np.ndarray:
    """Unit directions from a voxel coordinate to every surface sample."""
    offsets = samples.points - np.asarray(voxel, dtype=float)
    norms = np.linalg.norm(offsets, axis=1)
    if np.any(norms < 1e-12):
        raise ValueError("degenerate radial direction: a sample coincides with the voxel")
    return offsets / norms[:, None]


def to_triangle_mesh(shape: InstanceShape, subdiv: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Flat watertight triangle mesh approximating the instance surface.

    Each patch contributes 4**subdiv corner-connected faces; vertices shared
    between patches are emitted once, so every edge borders exactly 2 faces.
    """
    plan = shape.layout.sample_plan(subdiv)
    vertices = _sample_points(assemble_patches(shape), plan)
    faces = _grid_faces(plan)
    return vertices, faces


def _grid_faces(plan: _SamplePlan) -> np.ndarray:
    m = plan.m

    def slot(i: int, j: int) -> int:
        # lexicographic (i, j) enumeration of barycentric_grid(m)
        return i * (m + 1) - i * (i - 1) // 2 + j

    faces: list[tuple[int, int, int]] = []
    for t in range(plan.slot_rows.shape[0]):
        rows = plan.slot_rows[t]
        for i in range(m):
            for j in range(m - i):
                faces.append((rows[slot(i, j)], rows[slot(i + 1, j)], rows[slot(i, j + 1)]))
                if i + j <= m - 2:
                    faces.append((rows[slot(i + 1, j)], rows[slot(i + 1, j + 1)], rows[slot(i, j + 1)]))
    return np.array(faces, dtype=np.int64)


def radial_surface_distances(shape: InstanceShape, origin, directions, subdiv: int = 3) -> np.ndarray:
    """Farthest intersection distance along each direction; 0.0 for misses.

    The query runs against the level-`subdiv` flat triangulation of the patch
    mesh, which converges to the curved surface as subdiv grows.
    """
    vertices, faces = to_triangle_mesh(shape, subdiv)
    return farthest_hits(origin, directions, vertices, faces)


def radial_surface_distance(shape: InstanceShape, origin, direction, subdiv: int = 3) -> float:
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must be unit length")
    return float(radial_surface_distances(shape, origin, direction[None, :], subdiv)[0])
