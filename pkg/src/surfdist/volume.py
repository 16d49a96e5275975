"""Label volumes: file I/O, training targets, ray casting and voxelization.

Voxel support convention: the voxel with integer index i occupies the world
interval [i - 0.5, i + 0.5) per axis after anisotropy scaling, so voxel
centers sit at index * anisotropy and a single-voxel instance extends half a
voxel from its center along each axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from ._raycast import farthest_hits
from .instance import InstanceShape, PolyhedralInstance, to_triangle_mesh

DTYPES = {"u8": np.dtype("<u1"), "u16": np.dtype("<u2"), "u32": np.dtype("<u4")}

MARCH_STEP_VOXELS = 0.25
MARCH_TOL_VOXELS = 1e-3


@dataclass
class LabelVolume:
    """3D nonnegative integer labels (0 = background) plus per-axis voxel size."""

    labels: np.ndarray
    anisotropy: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 3 or min(labels.shape) < 1:
            raise ValueError("labels must be a non-empty (z, y, x) array")
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValueError("labels must be integers")
        if labels.min() < 0:
            raise ValueError("labels must be nonnegative")
        anisotropy = np.asarray(self.anisotropy, dtype=float)
        if anisotropy.shape != (3,) or np.any(anisotropy <= 0) or not np.all(np.isfinite(anisotropy)):
            raise ValueError("anisotropy must be 3 positive finite voxel sizes")
        self.labels = labels
        self.anisotropy = anisotropy

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape

    def instance_ids(self) -> np.ndarray:
        ids = np.unique(self.labels)
        return ids[ids > 0]


def _base_path(path) -> Path:
    path = Path(path)
    if path.suffix in (".json", ".raw"):
        path = path.with_suffix("")
    return path


def save_volume(vol: LabelVolume, path, dtype: str | None = None) -> None:
    """Write `<path>.json` sidecar and `<path>.raw` little-endian payload.

    dtype is one of u8/u16/u32; None picks the smallest that fits the labels.
    """
    base = _base_path(path)
    max_label = int(vol.labels.max()) if vol.labels.size else 0
    if dtype is None:
        for key in ("u8", "u16", "u32"):
            if max_label <= np.iinfo(DTYPES[key]).max:
                dtype = key
                break
        else:
            raise ValueError("labels exceed u32 range")
    if dtype not in DTYPES:
        raise ValueError(f"unsupported dtype {dtype!r} (expected u8, u16 or u32)")
    if max_label > np.iinfo(DTYPES[dtype]).max:
        raise ValueError(f"label {max_label} exceeds dtype {dtype}")
    header = {
        "shape": [int(s) for s in vol.shape],
        "dtype": dtype,
        "order": "zyx-C",
        "anisotropy": [float(a) for a in vol.anisotropy],
    }
    base.with_suffix(".json").write_text(json.dumps(header) + "\n")
    base.with_suffix(".raw").write_bytes(
        np.ascontiguousarray(vol.labels.astype(DTYPES[dtype])).tobytes()
    )


def load_volume(path) -> LabelVolume:
    """Read a `<name>.json` + `<name>.raw` pair written by save_volume."""
    base = _base_path(path)
    try:
        header = json.loads(base.with_suffix(".json").read_text())
    except json.JSONDecodeError as err:
        raise ValueError(f"malformed header: {err}") from err
    if not isinstance(header, dict):
        raise ValueError("malformed header: expected a JSON object")
    for key in ("shape", "dtype", "order", "anisotropy"):
        if key not in header:
            raise ValueError(f"malformed header: missing field {key!r}")
    shape = header["shape"]
    if (not isinstance(shape, list) or len(shape) != 3
            or not all(isinstance(s, int) and s >= 1 for s in shape)):
        raise ValueError("malformed header: shape must be 3 positive integers")
    if header["dtype"] not in DTYPES:
        raise ValueError(f"unsupported dtype {header['dtype']!r}")
    if header["order"] != "zyx-C":
        raise ValueError(f"malformed header: unsupported order {header['order']!r}")
    dtype = DTYPES[header["dtype"]]
    payload = base.with_suffix(".raw").read_bytes()
    expected = int(np.prod(shape)) * dtype.itemsize
    if len(payload) != expected:
        raise ValueError(f"size mismatch: header implies {expected} bytes, payload has {len(payload)}")
    labels = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
    return LabelVolume(labels=labels, anisotropy=np.asarray(header["anisotropy"], dtype=float))


def object_probabilities(vol: LabelVolume) -> np.ndarray:
    """Per-voxel normalized distance to the nearest voxel outside its instance.

    Distances are center-to-center Euclidean in world units; each instance is
    normalized by its own maximum, so its innermost voxel scores exactly 1 and
    background stays 0.
    """
    labels = vol.labels
    p = np.zeros(labels.shape, dtype=float)
    for inst in vol.instance_ids():
        zs, ys, xs = np.nonzero(labels == inst)
        lo = np.array([zs.min(), ys.min(), xs.min()])
        hi = np.array([zs.max(), ys.max(), xs.max()])
        lo = np.maximum(lo - 1, 0)
        hi = np.minimum(hi + 1, np.array(labels.shape) - 1)
        crop = tuple(slice(int(l), int(h) + 1) for l, h in zip(lo, hi))
        mask = labels[crop] == inst
        if mask.all() and mask.size == labels.size:
            p[crop][mask] = 1.0
            continue
        dist = ndimage.distance_transform_edt(mask, sampling=vol.anisotropy)
        peak = dist[mask].max()
        target = p[crop]
        target[mask] = dist[mask] / peak
    return p


def _mask_ray_exits(labels, anisotropy, instance_id, origin_world, directions) -> np.ndarray:
    """First-exit distance from the instance voxel set along each direction.

    Fixed-step marching (0.25 voxel) brackets the boundary, then bisection
    refines it to 1e-3 voxel.  Distances are world units.
    """
    a = anisotropy
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    origin = np.asarray(origin_world, dtype=float)

    def inside(points):
        idx = np.floor(points / a + 0.5).astype(np.int64)
        ok = np.all((idx >= 0) & (idx < np.array(labels.shape)), axis=-1)
        vals = np.zeros(idx.shape[:-1], dtype=labels.dtype)
        flat = idx[ok]
        vals[ok] = labels[flat[:, 0], flat[:, 1], flat[:, 2]]
        return ok & (vals == instance_id)

    zs, ys, xs = np.nonzero(labels == instance_id)
    if len(zs) == 0:
        raise ValueError(f"instance {instance_id} not present in volume")
    corners_lo = (np.array([zs.min(), ys.min(), xs.min()]) - 0.5) * a
    corners_hi = (np.array([zs.max(), ys.max(), xs.max()]) + 0.5) * a
    reach = np.maximum(np.abs(corners_lo - origin), np.abs(corners_hi - origin))
    max_t = float(np.linalg.norm(reach)) + 1e-9

    step = MARCH_STEP_VOXELS * float(a.min())
    n_steps = int(np.ceil(max_t / step)) + 1
    t = step * np.arange(1, n_steps + 1)
    pos = origin[None, None, :] + t[None, :, None] * dirs[:, None, :]
    inside_grid = inside(pos)
    outside_any = ~inside_grid.all(axis=1)
    if not outside_any.all():
        raise RuntimeError("marching never left the instance bounding box")
    first_out = np.argmax(~inside_grid, axis=1)
    hi_t = t[first_out]
    lo_t = hi_t - step

    tol = MARCH_TOL_VOXELS * float(a.min())
    while (hi_t - lo_t).max() > tol:
        mid = 0.5 * (lo_t + hi_t)
        mid_inside = inside(origin[None, :] + mid[:, None] * dirs)
        lo_t = np.where(mid_inside, mid, lo_t)
        hi_t = np.where(mid_inside, hi_t, mid)
    return 0.5 * (lo_t + hi_t)


def ray_cast_mask_distance(vol: LabelVolume, instance_id: int, origin_voxel, direction) -> float:
    """World-unit distance from a voxel center to the first exit from its instance."""
    return float(ground_truth_distances(vol, instance_id, origin_voxel, np.atleast_2d(direction))[0])


def ground_truth_distances(vol: LabelVolume, instance_id: int, voxel, directions) -> np.ndarray:
    """Map the mask ray cast over a direction set, preserving order."""
    voxel = np.asarray(voxel, dtype=np.int64)
    if voxel.shape != (3,):
        raise ValueError("voxel must be a 3D integer index")
    if np.any(voxel < 0) or np.any(voxel >= np.array(vol.shape)):
        raise ValueError("origin voxel outside the volume")
    if vol.labels[tuple(voxel)] != instance_id:
        raise ValueError(f"origin voxel {tuple(int(v) for v in voxel)} is not inside instance {instance_id}")
    origin_world = voxel * vol.anisotropy
    return _mask_ray_exits(vol.labels, vol.anisotropy, instance_id, origin_world, directions)


def _voxelize_mesh(center, vertices, faces, grid_shape, anisotropy, max_radius) -> np.ndarray:
    a = np.asarray(anisotropy, dtype=float)
    center = np.asarray(center, dtype=float)
    grid_shape = tuple(int(s) for s in grid_shape)
    center_idx = np.floor(center / a + 0.5).astype(np.int64)
    if np.any(center_idx < 0) or np.any(center_idx >= np.array(grid_shape)):
        raise ValueError("instance center lies outside the grid")

    lo = np.maximum(np.floor((center - max_radius) / a - 0.5).astype(np.int64), 0)
    hi = np.minimum(np.ceil((center + max_radius) / a + 0.5).astype(np.int64), np.array(grid_shape) - 1)
    labels = np.zeros(grid_shape, dtype=np.uint8)
    if np.any(lo > hi):
        return labels

    axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
    zz, yy, xx = np.meshgrid(*axes, indexing="ij")
    idx = np.stack([zz, yy, xx], axis=-1).reshape(-1, 3)
    offsets = idx * a - center
    rnorm = np.linalg.norm(offsets, axis=1)
    inside = np.zeros(len(idx), dtype=bool)
    at_center = rnorm == 0.0
    inside[at_center] = True
    if np.any(~at_center):
        dirs = offsets[~at_center] / rnorm[~at_center, None]
        hits = farthest_hits(center, dirs, vertices, faces)
        inside[~at_center] = rnorm[~at_center] <= hits
    sel = idx[inside]
    labels[sel[:, 0], sel[:, 1], sel[:, 2]] = 1
    return labels


def voxelize(shape: InstanceShape, grid_shape, anisotropy=(1.0, 1.0, 1.0), subdiv: int = 3) -> LabelVolume:
    """Rasterize a curved instance: voxel set iff its center is radially inside.

    A voxel center v is inside when |v - c| does not exceed the farthest
    intersection of the ray from the center through v with the level-subdiv
    triangulation.  Work is restricted to the instance bounding box.
    """
    vertices, faces = to_triangle_mesh(shape, subdiv)
    labels = _voxelize_mesh(shape.center, vertices, faces, grid_shape, anisotropy, shape.max_radius)
    return LabelVolume(labels=labels, anisotropy=np.asarray(anisotropy, dtype=float))


def voxelize_polyhedron(poly: PolyhedralInstance, grid_shape, anisotropy=(1.0, 1.0, 1.0)) -> LabelVolume:
    """Rasterize a flat-faceted instance directly against its facet mesh."""
    vertices, faces = poly.mesh()
    labels = _voxelize_mesh(poly.center, vertices, faces, grid_shape, anisotropy, poly.max_radius)
    return LabelVolume(labels=labels, anisotropy=np.asarray(anisotropy, dtype=float))
