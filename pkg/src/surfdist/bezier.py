"""Bicubic Bezier triangles over a barycentric domain.

A patch is 10 control points b_ijk with i + j + k = 3, stored in the
canonical order b300, b030, b003, b210, b201, b120, b021, b102, b012, b111.
Surface points are the Bernstein-Bezier sum

    p(u, v, w) = sum_{i+j+k=3} 3!/(i! j! k!) u^i v^j w^k b_ijk

whose multinomial coefficients give partition of unity and exact corner
interpolation.  Subdivision restricts the patch to sub-domains via the
polar form (blossom), so child surfaces tile the parent exactly.
"""

from __future__ import annotations

import numpy as np

CONTROL_INDICES: tuple[tuple[int, int, int], ...] = (
    (3, 0, 0), (0, 3, 0), (0, 0, 3),
    (2, 1, 0), (2, 0, 1), (1, 2, 0),
    (0, 2, 1), (1, 0, 2), (0, 1, 2),
    (1, 1, 1),
)

CONTROL_NAMES = tuple(f"b{i}{j}{k}" for i, j, k in CONTROL_INDICES)

_FACT = (1, 1, 2, 6)
_COEFF = np.array([6 / (_FACT[i] * _FACT[j] * _FACT[k]) for i, j, k in CONTROL_INDICES])

_DEG2 = ((2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1))
_DEG1 = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


def bernstein_weights(bary) -> np.ndarray:
    """Degree-3 Bernstein weights at barycentric coordinates, shape (..., 10)."""
    b = np.asarray(bary, dtype=float)
    u, v, w = b[..., 0], b[..., 1], b[..., 2]
    cols = [
        _COEFF[n] * u**i * v**j * w**k
        for n, (i, j, k) in enumerate(CONTROL_INDICES)
    ]
    return np.stack(cols, axis=-1)


def evaluate(controls: np.ndarray, bary) -> np.ndarray:
    """Evaluate a patch at one or many barycentric coordinates."""
    controls = np.asarray(controls, dtype=float)
    if controls.shape != (10, 3):
        raise ValueError("a bicubic triangular patch has exactly 10 control points")
    return bernstein_weights(bary) @ controls


def _decasteljau_step(values: dict, next_indices, t) -> dict:
    u, v, w = t
    return {
        (i, j, k): u * values[(i + 1, j, k)] + v * values[(i, j + 1, k)] + w * values[(i, j, k + 1)]
        for i, j, k in next_indices
    }


def blossom(controls: np.ndarray, t1, t2, t3) -> np.ndarray:
    """Polar form of the patch: symmetric, multi-affine, blossom(t,t,t) = p(t)."""
    values = {idx: np.asarray(controls[n], dtype=float) for n, idx in enumerate(CONTROL_INDICES)}
    values = _decasteljau_step(values, _DEG2, t1)
    values = _decasteljau_step(values, _DEG1, t2)
    u, v, w = t3
    return u * values[(1, 0, 0)] + v * values[(0, 1, 0)] + w * values[(0, 0, 1)]


_CORNER_U = (1.0, 0.0, 0.0)
_CORNER_V = (0.0, 1.0, 0.0)
_CORNER_W = (0.0, 0.0, 1.0)
_MID_UV = (0.5, 0.5, 0.0)
_MID_UW = (0.5, 0.0, 0.5)
_MID_VW = (0.0, 0.5, 0.5)

# midpoint 1-to-4 split; the center child is wound to preserve orientation
CHILD_DOMAINS: tuple[tuple[tuple[float, float, float], ...], ...] = (
    (_CORNER_U, _MID_UV, _MID_UW),
    (_MID_UV, _CORNER_V, _MID_VW),
    (_MID_UW, _MID_VW, _CORNER_W),
    (_MID_VW, _MID_UW, _MID_UV),
)


def subdivide(controls: np.ndarray) -> np.ndarray:
    """Split a patch at its edge midpoints into 4 bicubic children, shape (4, 10, 3)."""
    controls = np.asarray(controls, dtype=float)
    out = np.empty((4, 10, 3))
    for child, (da, db, dc) in enumerate(CHILD_DOMAINS):
        for n, (i, j, k) in enumerate(CONTROL_INDICES):
            args = (da,) * i + (db,) * j + (dc,) * k
            out[child, n] = blossom(controls, *args)
    return out


def child_to_parent(child: int, bary) -> np.ndarray:
    """Map barycentric coordinates on a subdivision child into the parent domain."""
    corners = np.array(CHILD_DOMAINS[child], dtype=float)
    return np.asarray(bary, dtype=float) @ corners


def barycentric_grid(m: int) -> np.ndarray:
    """Integer triples (i, j, k), i + j + k = m, in lexicographic (i, j) order."""
    if m < 1:
        raise ValueError("grid resolution must be >= 1")
    idx = [(i, j, m - i - j) for i in range(m + 1) for j in range(m + 1 - i)]
    return np.array(idx, dtype=np.int64)


def sample_grid(controls: np.ndarray, level: int) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the patch on the uniform barycentric grid with m = 2**level.

    Returns (barycentric coords, points), both with (m+1)(m+2)/2 rows in
    lexicographic grid order.  The grid matches the corner vertices produced
    by `level` recursive midpoint subdivisions of the domain.
    """
    if level < 0:
        raise ValueError("subdivision level must be >= 0")
    m = 1 << level
    bary = barycentric_grid(m) / float(m)
    return bary, evaluate(controls, bary)
