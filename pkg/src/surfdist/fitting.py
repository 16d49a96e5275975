"""Sphere reconstruction experiments and fitting instance shapes to label masks.

The sphere experiment compares two parameterizations of a voxelized ball:
a flat star-convex polyhedron (one distance per vertex ray) and a curved
patch mesh whose vertex distances are fixed while a single shared edge
scalar and a single shared face scalar are optimized by damped least
squares.  Reports carry both the RMS surface radial error and the voxel
IoU against the ball mask, which bracket reasonable readings of
reconstruction quality.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .instance import (
    InstanceShape,
    PolyhedralInstance,
    make_layout,
    parameter_count,
    polyhedron_samples,
    sample_weight_matrix,
    surface_samples,
)
from .volume import (
    LabelVolume,
    _mask_ray_exits,
    ground_truth_distances,
    voxelize,
    voxelize_polyhedron,
)

LM_MAX_ITER = 200
LM_STEP_TOL = 1e-10


class ConvergenceError(RuntimeError):
    """Raised when an optimizer cannot reach its tolerance."""


@dataclass(frozen=True)
class ReconstructionReport:
    radius: int
    kind: str
    rays: int
    params: int
    iou: float
    rms_radial_error: float
    converged: bool


def thread_count() -> int:
    """Parallelism cap: SURFDIST_THREADS if set, else a small default."""
    raw = os.environ.get("SURFDIST_THREADS", "")
    if raw.strip():
        return max(1, int(raw))
    return min(4, os.cpu_count() or 1)


def sphere_mask(radius: int) -> LabelVolume:
    """Centered voxel ball: (2r+1)^3 grid, voxel set iff center distance <= r."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    n = 2 * radius + 1
    axis = np.arange(n) - radius
    zz, yy, xx = np.meshgrid(axis, axis, axis, indexing="ij")
    labels = (zz * zz + yy * yy + xx * xx <= radius * radius).astype(np.uint8)
    return LabelVolume(labels=labels)


def _binary_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def _numeric_jacobian(fn, x, fx):
    J = np.empty((len(fx), len(x)))
    for i in range(len(x)):
        h = 1e-6 * max(1.0, abs(x[i]))
        lo = x.copy()
        hi = x.copy()
        lo[i] -= h
        hi[i] += h
        J[:, i] = (fn(hi) - fn(lo)) / (2.0 * h)
    return J


def levenberg_marquardt(residual_fn, x0, max_iter: int = LM_MAX_ITER, step_tol: float = LM_STEP_TOL):
    """Damped Gauss-Newton with a numerically differenced Jacobian.

    Returns (x, converged); converged is False only when the iteration cap is
    hit while steps are still above the tolerance.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = residual_fn(x)
    cost = 0.5 * float(r @ r)
    lam = 1e-3
    for _ in range(max_iter):
        J = _numeric_jacobian(residual_fn, x, r)
        g = J.T @ r
        H = J.T @ J
        delta = None
        for _ in range(50):
            A = H + lam * np.diag(np.maximum(np.diag(H), 1e-12))
            try:
                candidate = np.linalg.solve(A, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new = residual_fn(x + candidate)
            cost_new = 0.5 * float(r_new @ r_new)
            if cost_new < cost:
                delta = candidate
                x = x + candidate
                r = r_new
                cost = cost_new
                lam = max(lam / 3.0, 1e-12)
                break
            lam *= 10.0
        if delta is None:
            return x, True  # no descent direction left: numerical minimum
        if np.linalg.norm(delta) < step_tol:
            return x, True
    return x, False


def _shared_scalar_shape(layout, center, vertex_distances, edge_scalar, face_scalar) -> InstanceShape:
    E2 = 2 * layout.topology.edge_count
    T = layout.topology.triangle_count
    distances = np.concatenate((
        np.asarray(vertex_distances, dtype=float),
        np.full(E2, max(float(edge_scalar), 0.0)),
        np.full(T, max(float(face_scalar), 0.0)),
    ))
    return InstanceShape(center, distances, layout)


def reconstruct_sphere_stardist(radius: int, rays: int, level: int = 3) -> ReconstructionReport:
    """Flat-polyhedron baseline: per-ray distances measured directly on the mask."""
    mask = sphere_mask(radius)
    layout = make_layout(rays)
    center_voxel = (radius, radius, radius)
    distances = ground_truth_distances(mask, 1, center_voxel, layout.directions)
    center = np.array(center_voxel, dtype=float)
    poly = PolyhedralInstance(center, distances, layout)
    predicted = voxelize_polyhedron(poly, mask.shape)
    radii = np.linalg.norm(polyhedron_samples(poly, level).points - center, axis=1)
    rms = float(np.sqrt(np.mean((radii - radius) ** 2)))
    return ReconstructionReport(
        radius=radius, kind="stardist", rays=rays, params=rays,
        iou=_binary_iou(mask.labels, predicted.labels), rms_radial_error=rms, converged=True,
    )


def reconstruct_sphere_surfdist(radius: int, rays: int, level: int = 3, subdiv: int = 3) -> ReconstructionReport:
    """Curved reconstruction: vertex distances pinned to the measured mask
    radial lengths, one shared edge scalar and one shared face scalar
    optimized by least squares on the sampled surface radii."""
    mask = sphere_mask(radius)
    layout = make_layout(rays)
    center = np.full(3, float(radius))
    vertex_distances = ground_truth_distances(mask, 1, (radius, radius, radius), layout.directions)

    W = sample_weight_matrix(layout, level)
    U = layout.controls.directions
    E2 = 2 * layout.topology.edge_count
    T = layout.topology.triangle_count
    V = rays

    def residuals(x):
        d = np.concatenate((
            vertex_distances,
            np.full(E2, max(float(x[0]), 0.0)),
            np.full(T, max(float(x[1]), 0.0)),
        ))
        radii = np.linalg.norm((W * d) @ U, axis=1)
        return radii - radius

    x, converged = levenberg_marquardt(residuals, np.array([float(radius)] * 2))
    shape = _shared_scalar_shape(layout, center, vertex_distances, x[0], x[1])
    predicted = voxelize(shape, mask.shape, subdiv=subdiv)
    radii = np.linalg.norm(surface_samples(shape, level).points - center, axis=1)
    rms = float(np.sqrt(np.mean((radii - radius) ** 2)))
    return ReconstructionReport(
        radius=radius, kind="surfdist", rays=rays, params=parameter_count(rays),
        iou=_binary_iou(mask.labels, predicted.labels), rms_radial_error=rms, converged=converged,
    )


def reconstruct_sphere(radius: int, rays: int, kind: str, level: int = 3, subdiv: int = 3) -> ReconstructionReport:
    if kind == "surfdist":
        return reconstruct_sphere_surfdist(radius, rays, level=level, subdiv=subdiv)
    if kind == "stardist":
        return reconstruct_sphere_stardist(radius, rays, level=level)
    raise ValueError(f"unknown model kind {kind!r} (expected surfdist or stardist)")


def sweep(radii, rays_list, kinds, level: int = 3, subdiv: int = 3) -> list[ReconstructionReport]:
    """Cross product of kinds x ray counts x radii, reported in that order."""
    configs = [(r, v, k) for k in kinds for v in rays_list for r in radii]
    workers = thread_count()
    if workers == 1 or len(configs) == 1:
        return [reconstruct_sphere(r, v, k, level=level, subdiv=subdiv) for r, v, k in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(reconstruct_sphere, r, v, k, level=level, subdiv=subdiv)
                   for r, v, k in configs]
        return [f.result() for f in futures]


def sweep_csv(reports) -> str:
    """CSV per report: fixed header, repr floats, LF line endings."""
    lines = ["radius,kind,rays,params,iou,rms_radial_error,converged"]
    for rep in reports:
        lines.append(",".join((
            str(rep.radius), rep.kind, str(rep.rays), str(rep.params),
            repr(float(rep.iou)), repr(float(rep.rms_radial_error)),
            "true" if rep.converged else "false",
        )))
    return "\n".join(lines) + "\n"


def fit_mask(init: InstanceShape, vol: LabelVolume, instance_id: int,
             level: int = 2, max_iter: int = 200) -> InstanceShape:
    """Projected subgradient descent of mean |d - dhat| over control distances.

    Each iteration refreshes the per-voxel direction set from the current
    surface samples, casts ground-truth distances along it, then takes one
    backtracking step on that frozen objective.  Distances are projected to
    stay nonnegative; the run is deterministic given the initial shape.
    """
    layout = init.layout
    center = np.asarray(init.center, dtype=float)
    anis = vol.anisotropy
    voxel = np.floor(center / anis + 0.5).astype(np.int64)
    if np.any(voxel < 0) or np.any(voxel >= np.array(vol.shape)) \
            or vol.labels[tuple(voxel)] != instance_id:
        raise ValueError("initial center is not inside the target instance")

    W = sample_weight_matrix(layout, level)
    U = layout.controls.directions
    d = init.distances.copy()
    if d.max() <= 0:
        raise ValueError("initial shape must have at least one positive distance")

    step0 = 1.0
    objective = np.inf
    for iteration in range(max_iter):
        offsets = (W * d) @ U
        radii = np.linalg.norm(offsets, axis=1)
        if radii.max() < 1e-9:
            break
        K = offsets / np.maximum(radii, 1e-12)[:, None]
        d_true = _mask_ray_exits(vol.labels, anis, instance_id, center, K)
        objective = float(np.mean(np.abs(d_true - radii)))
        if objective < 1e-6:
            break
        direction = (((np.sign(radii - d_true))[:, None] * (K @ U.T)) * W).mean(axis=0)
        peak = np.abs(direction).max()
        if peak < 1e-15:
            break
        direction = direction / peak

        def frozen(dd):
            rr = np.linalg.norm((W * dd) @ U, axis=1)
            return float(np.mean(np.abs(d_true - rr)))

        # diminishing cap keeps late iterations from oscillating
        eta = step0 * max(1.0, 0.25 * float(d_true.max())) / (1.0 + iteration / 20.0)
        accepted = False
        for _ in range(30):
            trial = np.maximum(d - eta * direction, 0.0)
            if frozen(trial) < objective:
                d = trial
                accepted = True
                break
            eta *= 0.5
        if not accepted or eta < 1e-7:
            break
    return InstanceShape(center, d, layout)
