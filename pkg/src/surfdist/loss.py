"""Per-voxel training losses over object probabilities and radial distances.

The voxel loss is L_obj + lambda_d * L_dist, where L_obj is binary
cross-entropy on the object probability and

    L_dist = p * [p > 0] * mean_k |d_k - dhat_k|
           + lambda_reg * [p = 0] * mean_k |dhat_k|

with d and dhat measured along the same per-voxel direction set: the unit
vectors from the voxel to the predicted surface samples.  The predicted
distance along each such direction is by construction the sample's radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import InstanceShape, radial_directions, surface_samples
from .volume import LabelVolume, ground_truth_distances

BCE_EPS = 1e-7


@dataclass(frozen=True)
class LossConfig:
    lambda_d: float = 0.1
    lambda_reg: float = 1e-4
    sample_level: int = 2

    def __post_init__(self):
        if not (np.isfinite(self.lambda_d) and self.lambda_d >= 0):
            raise ValueError("lambda_d must be finite and >= 0")
        if not (np.isfinite(self.lambda_reg) and self.lambda_reg >= 0):
            raise ValueError("lambda_reg must be finite and >= 0")
        if self.sample_level < 0:
            raise ValueError("sample_level must be >= 0")


@dataclass(frozen=True)
class VoxelPrediction:
    """One voxel's prediction: foreground confidence and a shape centered on it."""

    p_hat: float
    shape: InstanceShape

    def __post_init__(self):
        if not 0.0 <= self.p_hat <= 1.0:
            raise ValueError("p_hat must lie in [0, 1]")


def object_loss(p: float, p_hat: float) -> float:
    """Binary cross-entropy with the prediction clamped to [eps, 1 - eps]."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    q = min(max(float(p_hat), BCE_EPS), 1.0 - BCE_EPS)
    return float(-(p * np.log(q) + (1.0 - p) * np.log(1.0 - q)))


def distance_loss(p: float, d, d_hat, cfg: LossConfig) -> float:
    """Radial distance term; foreground and background branches are exclusive."""
    d = np.asarray(d, dtype=float)
    d_hat = np.asarray(d_hat, dtype=float)
    if d.shape != d_hat.shape or d.ndim != 1 or len(d) < 1:
        raise ValueError("d and d_hat must be equal-length nonempty vectors")
    if p > 0:
        return float(p * np.mean(np.abs(d - d_hat)))
    return float(cfg.lambda_reg * np.mean(np.abs(d_hat)))


def distance_loss_gradient(p: float, d, d_hat, cfg: LossConfig) -> np.ndarray:
    """Analytic d(distance_loss)/d(d_hat); the |.| subgradient at 0 is taken as 0."""
    d = np.asarray(d, dtype=float)
    d_hat = np.asarray(d_hat, dtype=float)
    if d.shape != d_hat.shape or d.ndim != 1 or len(d) < 1:
        raise ValueError("d and d_hat must be equal-length nonempty vectors")
    n = len(d)
    if p > 0:
        return p * np.sign(d_hat - d) / n
    return cfg.lambda_reg * np.sign(d_hat) / n


def _prediction_rays(pred: VoxelPrediction, cfg: LossConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-voxel directions K and predicted radii along them.

    A fully collapsed shape (all distances 0) is still valid: its predicted
    radii are 0 and K falls back to the directions of the unit-distance shape
    with the same layout, keeping the result well defined.
    """
    shape = pred.shape
    samples = surface_samples(shape, cfg.sample_level)
    offsets = samples.points - shape.center
    radii = np.linalg.norm(offsets, axis=1)
    if np.all(radii < 1e-12):
        unit = InstanceShape(shape.center, np.ones_like(shape.distances), shape.layout)
        K = radial_directions(surface_samples(unit, cfg.sample_level), shape.center)
        return K, np.zeros(len(K))
    K = radial_directions(samples, shape.center)
    return K, radii


def voxel_loss(p: float, pred: VoxelPrediction, vol: LabelVolume, cfg: LossConfig) -> float:
    """Full per-voxel loss; ground-truth distances are cast only for foreground."""
    obj = object_loss(p, pred.p_hat)
    if cfg.lambda_d == 0.0:
        return obj
    K, d_hat = _prediction_rays(pred, cfg)
    if p > 0:
        voxel = np.floor(pred.shape.center / vol.anisotropy + 0.5).astype(np.int64)
        instance_id = int(vol.labels[tuple(voxel)])
        if instance_id == 0:
            raise ValueError("foreground voxel (p > 0) carries no instance label")
        d = ground_truth_distances(vol, instance_id, voxel, K)
    else:
        d = np.zeros_like(d_hat)
    return obj + cfg.lambda_d * distance_loss(p, d, d_hat, cfg)


def volume_loss(preds, vol: LabelVolume, targets: np.ndarray, cfg: LossConfig) -> float:
    """Mean voxel loss over every voxel of the volume, in fixed C order."""
    targets = np.asarray(targets, dtype=float)
    if targets.shape != vol.shape:
        raise ValueError("targets must match the volume shape")
    total = 0.0
    count = 0
    for voxel in np.ndindex(vol.shape):
        pred = preds.get(voxel) if hasattr(preds, "get") else None
        if pred is None:
            raise ValueError(f"missing prediction for voxel {voxel}")
        total += voxel_loss(float(targets[voxel]), pred, vol, cfg)
        count += 1
    if count == 0:
        raise ValueError("empty volume")
    return total / count
