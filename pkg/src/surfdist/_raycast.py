"""Batch ray casting against triangle soups (Moller-Trumbore, farthest hit)."""

from __future__ import annotations

import numpy as np
from numba import njit

_BARY_EPS = 1e-9
_DET_EPS = 1e-14


@njit(cache=True, nogil=True)
def _farthest_hits_kernel(tri_a, edge1, edge2, dirs, out):  # pragma: no cover - jitted
    n_faces = tri_a.shape[0]
    for r in range(dirs.shape[0]):
        dz = dirs[r, 0]
        dy = dirs[r, 1]
        dx = dirs[r, 2]
        best = 0.0
        for f in range(n_faces):
            e1z = edge1[f, 0]
            e1y = edge1[f, 1]
            e1x = edge1[f, 2]
            e2z = edge2[f, 0]
            e2y = edge2[f, 1]
            e2x = edge2[f, 2]
            pz = dy * e2x - dx * e2y
            py = dx * e2z - dz * e2x
            px = dz * e2y - dy * e2z
            det = e1z * pz + e1y * py + e1x * px
            if det > -_DET_EPS and det < _DET_EPS:
                continue
            inv = 1.0 / det
            # ray origin is 0; tvec = -tri_a[f]
            tz = -tri_a[f, 0]
            ty = -tri_a[f, 1]
            tx = -tri_a[f, 2]
            u = (tz * pz + ty * py + tx * px) * inv
            if u < -_BARY_EPS or u > 1.0 + _BARY_EPS:
                continue
            qz = ty * e1x - tx * e1y
            qy = tx * e1z - tz * e1x
            qx = tz * e1y - ty * e1z
            v = (dz * qz + dy * qy + dx * qx) * inv
            if v < -_BARY_EPS or u + v > 1.0 + _BARY_EPS:
                continue
            t = (e2z * qz + e2y * qy + e2x * qx) * inv
            if t > best:
                best = t
        out[r] = best
    return out


def farthest_hits(origin, directions, vertices, faces) -> np.ndarray:
    """Distance to the farthest forward intersection per ray; 0.0 when none.

    Rays start at `origin`; directions need not be normalized (distances are
    then in units of the direction length).  Shared mesh edges are handled
    with a small barycentric slack so rays through them cannot slip between
    adjacent faces.
    """
    directions = np.ascontiguousarray(np.atleast_2d(directions), dtype=np.float64)
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    tri = vertices[faces] - np.asarray(origin, dtype=np.float64)
    tri_a = np.ascontiguousarray(tri[:, 0])
    edge1 = np.ascontiguousarray(tri[:, 1] - tri[:, 0])
    edge2 = np.ascontiguousarray(tri[:, 2] - tri[:, 0])
    out = np.empty(len(directions), dtype=np.float64)
    _farthest_hits_kernel(tri_a, edge1, edge2, directions, out)
    return out
