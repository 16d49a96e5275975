"""Independent brute-force oracles the tests check the library against.

Everything here is deliberately naive (full scans, exhaustive enumeration,
finite differences) and shares no code with the implementation paths it
verifies.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy.spatial import ConvexHull


def brute_force_object_probabilities(labels: np.ndarray, anisotropy) -> np.ndarray:
    """O(n^2) nearest-exterior scan with per-instance max normalization."""
    anisotropy = np.asarray(anisotropy, dtype=float)
    out = np.zeros(labels.shape, dtype=float)
    coords = np.argwhere(np.ones(labels.shape, dtype=bool))
    flat = labels.ravel()
    for inst in np.unique(labels):
        if inst == 0:
            continue
        inside = coords[flat == inst]
        outside = coords[flat != inst]
        if len(outside) == 0:
            out[tuple(inside.T)] = 1.0
            continue
        diffs = (inside[:, None, :] - outside[None, :, :]) * anisotropy
        dmin = np.sqrt((diffs ** 2).sum(axis=-1)).min(axis=1)
        out[tuple(inside.T)] = dmin / dmin.max()
    return out


def exhaustive_match(iou: np.ndarray, tau: float):
    """Best one-to-one assignment with IoU >= tau by full enumeration.

    Returns (tp, total_iou, pairs) maximizing total matched IoU with ties
    broken toward more pairs.  Feasible only for tiny instance counts.
    """
    nt, npred = iou.shape
    best = (0, 0.0, ())
    k = min(nt, npred)
    rows = list(range(nt))
    cols = list(range(npred))
    for r_sub in _subsets(rows, k):
        for c_perm in permutations(cols, len(r_sub)):
            pairs = [(r, c) for r, c in zip(r_sub, c_perm) if iou[r, c] >= tau]
            total = sum(iou[r, c] for r, c in pairs)
            cand = (len(pairs), total, tuple(sorted(pairs)))
            if (cand[1], cand[0]) > (best[1], best[0]):
                best = cand
    return best


def _subsets(items, max_size):
    from itertools import combinations

    for size in range(max_size + 1):
        yield from combinations(items, size)


def greedy_match(iou: np.ndarray, tau: float):
    """Greedy max-IoU-first matching, used only to exhibit suboptimal cases."""
    iou = iou.copy()
    pairs = []
    while True:
        r, c = np.unravel_index(np.argmax(iou), iou.shape)
        if iou[r, c] < tau:
            break
        pairs.append((int(r), int(c), float(iou[r, c])))
        iou[r, :] = -1
        iou[:, c] = -1
    return pairs


def in_convex_hull(points: np.ndarray, hull_points: np.ndarray, slack: float = 1e-9) -> bool:
    """True when every point satisfies all facet inequalities of the hull."""
    hull = ConvexHull(hull_points)
    # equations rows are (normal, offset) with normal . x + offset <= 0 inside
    values = points @ hull.equations[:, :3].T + hull.equations[:, 3]
    return bool(np.all(values <= slack))


def edge_face_counts(faces: np.ndarray) -> dict:
    """Undirected edge -> number of incident faces."""
    counts: dict = {}
    for a, b, c in np.asarray(faces, dtype=np.int64):
        for e in ((a, b), (b, c), (c, a)):
            key = (min(e), max(e))
            counts[key] = counts.get(key, 0) + 1
    return counts


def is_watertight(faces: np.ndarray) -> bool:
    return all(n == 2 for n in edge_face_counts(faces).values())


def is_consistently_oriented(faces: np.ndarray) -> bool:
    """Each undirected edge must be traversed once in each direction."""
    directed: dict = {}
    for a, b, c in np.asarray(faces, dtype=np.int64):
        for e in ((a, b), (b, c), (c, a)):
            directed[e] = directed.get(e, 0) + 1
    if any(n != 1 for n in directed.values()):
        return False
    return all((b, a) in directed for (a, b) in directed)


def point_triangle_distance(p: np.ndarray, tri: np.ndarray) -> float:
    """Exact distance from a point to a 3D triangle (projection + edge clamps)."""
    a, b, c = tri
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = ab @ ap
    d2 = ac @ ap
    if d1 <= 0 and d2 <= 0:
        return float(np.linalg.norm(p - a))
    bp = p - b
    d3 = ab @ bp
    d4 = ac @ bp
    if d3 >= 0 and d4 <= d3:
        return float(np.linalg.norm(p - b))
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        t = d1 / (d1 - d3)
        return float(np.linalg.norm(p - (a + t * ab)))
    cp = p - c
    d5 = ab @ cp
    d6 = ac @ cp
    if d6 >= 0 and d5 <= d6:
        return float(np.linalg.norm(p - c))
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        t = d2 / (d2 - d6)
        return float(np.linalg.norm(p - (a + t * ac)))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return float(np.linalg.norm(p - (b + t * (c - b))))
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return float(np.linalg.norm(p - (a + ab * v + ac * w)))


def point_mesh_distance(p: np.ndarray, vertices: np.ndarray, faces: np.ndarray) -> float:
    return min(point_triangle_distance(p, vertices[f]) for f in faces)


def central_difference_gradient(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    grad = np.empty_like(x, dtype=float)
    for k in range(len(x)):
        hi = x.copy()
        lo = x.copy()
        hi[k] += h
        lo[k] -= h
        grad[k] = (fn(hi) - fn(lo)) / (2.0 * h)
    return grad
