"""Unit-sphere ray lattices, hull topology, and control-point layout.

An instance mesh is fixed by choosing V ray directions on the unit sphere
and triangulating them with their convex hull.  For a closed genus-0
triangulation E = 3V - 6 and T = 2V - 4, so attaching one control ray per
vertex, two per edge (at the chord thirds) and one per face center always
yields V + 2E + T = 9V - 16 control entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))

ROLE_VERTEX = 0
ROLE_EDGE = 1
ROLE_INTERIOR = 2

ROLE_NAMES = {ROLE_VERTEX: "vertex", ROLE_EDGE: "edge", ROLE_INTERIOR: "interior"}

_PHI = (1.0 + np.sqrt(5.0)) / 2.0


def _normalize_rows(vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=float)
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize a zero vector")
    return vectors / norms


def fibonacci_directions(n: int) -> np.ndarray:
    """Spherical Fibonacci lattice of n unit vectors in (z, y, x) order.

    Latitudes sit at z_i = 1 - (2i + 1)/n while longitudes advance by the
    golden angle, spreading points nearly uniformly for any n.
    """
    if n < 4:
        raise ValueError("insufficient vertices for a closed surface (need n >= 4)")
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    theta = GOLDEN_ANGLE * i
    dirs = np.column_stack((z, rho * np.sin(theta), rho * np.cos(theta)))
    return _normalize_rows(dirs)


def canonical_directions(n: int) -> np.ndarray:
    """Vertices of the regular tetrahedron (4), octahedron (6) or icosahedron (12)."""
    if n == 4:
        raw = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
    elif n == 6:
        raw = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    elif n == 12:
        p = _PHI
        raw = [
            (0, 1, p), (0, 1, -p), (0, -1, p), (0, -1, -p),
            (1, p, 0), (1, -p, 0), (-1, p, 0), (-1, -p, 0),
            (p, 0, 1), (-p, 0, 1), (p, 0, -1), (-p, 0, -1),
        ]
    else:
        raise ValueError(
            f"no canonical equidistant lattice with {n} rays; use fibonacci_directions"
        )
    return _normalize_rows(np.array(raw, dtype=float))


def apply_anisotropy(dirs: np.ndarray, anisotropy) -> np.ndarray:
    """Skew unit directions for an anisotropic grid: divide per axis, renormalize."""
    a = np.asarray(anisotropy, dtype=float)
    if a.shape != (3,) or np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise ValueError("anisotropy must be 3 positive finite scale factors")
    return _normalize_rows(np.asarray(dirs, dtype=float) / a)


@dataclass(frozen=True)
class MeshTopology:
    """Closed oriented triangle mesh over a set of sphere directions.

    Edges are sorted index pairs in lexicographic order; triangles are wound
    outward with their lowest vertex index first and listed lexicographically,
    which makes the construction bit-reproducible.
    """

    vertex_count: int
    edges: np.ndarray
    triangles: np.ndarray

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(i), int(j)): e for e, (i, j) in enumerate(self.edges)}

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)


def build_topology(dirs: np.ndarray) -> MeshTopology:
    """Triangulate sphere directions by convex hull, oriented outward.

    Every input direction must be a hull vertex; duplicate or coplanar
    inputs raise ValueError.
    """
    dirs = np.asarray(dirs, dtype=float)
    if dirs.ndim != 2 or dirs.shape[1] != 3:
        raise ValueError("directions must be an (n, 3) array")
    if len(dirs) < 4:
        raise ValueError("insufficient vertices for a closed surface (need n >= 4)")
    if len(np.unique(dirs, axis=0)) != len(dirs):
        raise ValueError("degenerate direction set: duplicate directions")
    try:
        hull = ConvexHull(dirs, qhull_options="Qt")
    except QhullError as err:
        raise ValueError(f"degenerate direction set: {err}") from err
    if len(hull.vertices) != len(dirs):
        raise ValueError("degenerate direction set: not every direction is a hull vertex")

    tris = np.array(hull.simplices, dtype=np.int64)
    a, b, c = dirs[tris[:, 0]], dirs[tris[:, 1]], dirs[tris[:, 2]]
    outward = np.einsum("ij,ij->i", np.cross(b - a, c - a), (a + b + c) / 3.0)
    tris[outward < 0] = tris[outward < 0][:, ::-1]

    # canonical form: lowest index first (cyclic), then lexicographic rows
    shift = np.argmin(tris, axis=1)
    for s in (1, 2):
        rows = shift == s
        tris[rows] = np.roll(tris[rows], -s, axis=1)
    tris = tris[np.lexsort((tris[:, 2], tris[:, 1], tris[:, 0]))]

    all_edges = np.sort(tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    edges = np.unique(all_edges, axis=0)
    return MeshTopology(vertex_count=len(dirs), edges=edges, triangles=tris)


@dataclass(frozen=True)
class ControlLayout:
    """Per-control-point unit rays and their roles.

    Entry order is fixed: all vertex entries (vertex index order), then two
    per edge (edge order, lower third first relative to the lower vertex
    index), then one per triangle (triangle order).  `owners` holds the
    defining vertex indices, padded with -1.
    """

    directions: np.ndarray
    roles: np.ndarray
    owners: np.ndarray
    vertex_count: int
    edge_entries: np.ndarray
    interior_entries: np.ndarray

    def __len__(self) -> int:
        return len(self.directions)


def control_layout(topo: MeshTopology, dirs: np.ndarray) -> ControlLayout:
    """Lay out V + 2E + T control rays for a hull topology built from dirs."""
    dirs = _normalize_rows(dirs)
    V, E, T = topo.vertex_count, topo.edge_count, topo.triangle_count
    if len(dirs) != V:
        raise ValueError("direction count does not match topology vertex count")

    lo = dirs[topo.edges[:, 0]]
    hi = dirs[topo.edges[:, 1]]
    edge_dirs = np.empty((2 * E, 3))
    edge_dirs[0::2] = _normalize_rows((2.0 * lo + hi) / 3.0)
    edge_dirs[1::2] = _normalize_rows((lo + 2.0 * hi) / 3.0)
    centers = _normalize_rows(dirs[topo.triangles].mean(axis=1))

    directions = np.vstack((dirs, edge_dirs, centers))
    roles = np.concatenate((
        np.full(V, ROLE_VERTEX, dtype=np.int8),
        np.full(2 * E, ROLE_EDGE, dtype=np.int8),
        np.full(T, ROLE_INTERIOR, dtype=np.int8),
    ))
    owners = np.full((V + 2 * E + T, 3), -1, dtype=np.int64)
    owners[:V, 0] = np.arange(V)
    owners[V:V + 2 * E, :2] = np.repeat(topo.edges, 2, axis=0)
    owners[V + 2 * E:, :] = topo.triangles

    edge_entries = V + np.arange(2 * E, dtype=np.int64).reshape(E, 2)
    interior_entries = V + 2 * E + np.arange(T, dtype=np.int64)
    return ControlLayout(
        directions=directions,
        roles=roles,
        owners=owners,
        vertex_count=V,
        edge_entries=edge_entries,
        interior_entries=interior_entries,
    )
