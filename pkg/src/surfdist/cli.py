"""Command-line entry point.

Every subcommand is deterministic given its flags (plus --seed where one
exists); reruns produce byte-identical outputs regardless of the
SURFDIST_THREADS parallelism cap.  Exit codes: 0 success, 2 usage or schema
error, 3 I/O error, 4 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fitting, loss, matching, serialize, volume
from .instance import (
    InstanceShape,
    make_layout,
    parameter_count,
    surface_samples,
    to_triangle_mesh,
)

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surfdist", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lattice", help="emit topology and control layout as JSON")
    p.add_argument("--rays", type=int, required=True)
    p.add_argument("--kind", choices=("canonical", "fibonacci"), default=None)
    p.add_argument("--anisotropy", type=_floats, default=[1.0, 1.0, 1.0])
    p.add_argument("--out", default=None)

    p = sub.add_parser("reconstruct-sphere", help="sphere reconstruction sweep to CSV")
    p.add_argument("--radii", type=_ints, required=True)
    p.add_argument("--rays", type=_ints, required=True)
    p.add_argument("--kinds", default="surfdist,stardist")
    p.add_argument("--level", type=int, default=3)
    p.add_argument("--subdiv", type=int, default=3)
    p.add_argument("--out", default=None)

    p = sub.add_parser("fit", help="fit an instance shape to a labeled mask")
    p.add_argument("--volume", required=True)
    p.add_argument("--instance-id", type=int, required=True)
    p.add_argument("--rays", type=int, required=True)
    p.add_argument("--kind", choices=("canonical", "fibonacci"), default=None)
    p.add_argument("--level", type=int, default=2)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--out", required=True)

    p = sub.add_parser("voxelize", help="rasterize an instance JSON onto a grid")
    p.add_argument("--instance", required=True)
    p.add_argument("--grid", type=_ints, required=True, help="Z,Y,X voxel counts")
    p.add_argument("--anisotropy", type=_floats, default=None)
    p.add_argument("--subdiv", type=int, default=3)
    p.add_argument("--out", required=True)

    p = sub.add_parser("export-obj", help="write the instance surface as a Wavefront OBJ")
    p.add_argument("--instance", required=True)
    p.add_argument("--subdiv", type=int, default=2)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="matching metrics between two label volumes")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--taus", type=_floats, default=list(matching.DEFAULT_TAUS))
    p.add_argument("--out", default=None)

    p = sub.add_parser("nms", help="suppress overlapping candidates")
    p.add_argument("--candidates", required=True)
    p.add_argument("--grid", type=_ints, required=True)
    p.add_argument("--anisotropy", type=_floats, default=[1.0, 1.0, 1.0])
    p.add_argument("--prob-threshold", type=float, default=0.5)
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--subdiv", type=int, default=2)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference loss gradients")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-4)

    p = sub.add_parser("loss-eval", help="loss components for one predicted voxel")
    p.add_argument("--volume", required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--p-hat", type=float, required=True)
    p.add_argument("--lambda-d", type=float, default=0.1)
    p.add_argument("--lambda-reg", type=float, default=1e-4)
    p.add_argument("--level", type=int, default=2)
    p.add_argument("--out", default=None)
    return parser


def cmd_lattice(args) -> int:
    layout = make_layout(args.rays, args.kind, tuple(args.anisotropy))
    _emit(json.dumps(serialize.layout_to_dict(layout), indent=2) + "\n", args.out)
    return 0


def cmd_reconstruct_sphere(args) -> int:
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    reports = fitting.sweep(args.radii, args.rays, kinds, level=args.level, subdiv=args.subdiv)
    _emit(fitting.sweep_csv(reports), args.out)
    if not all(r.converged for r in reports):
        return EXIT_NUMERIC
    return 0


def cmd_fit(args) -> int:
    vol = volume.load_volume(args.volume)
    mask = vol.labels == args.instance_id
    if not mask.any():
        raise ValueError(f"instance {args.instance_id} not present in volume")
    layout = make_layout(args.rays, args.kind, tuple(float(a) for a in vol.anisotropy))
    # start at the instance's innermost voxel so the center is safely interior
    from scipy import ndimage

    dist = ndimage.distance_transform_edt(mask, sampling=vol.anisotropy)
    center_voxel = np.unravel_index(int(np.argmax(dist)), vol.shape)
    center = np.array(center_voxel, dtype=float) * vol.anisotropy
    init = InstanceShape(center, np.ones(parameter_count(args.rays)), layout)
    fitted = fitting.fit_mask(init, vol, args.instance_id, level=args.level, max_iter=args.max_iter)
    serialize.write_instance_json(fitted, args.out)
    return 0


def cmd_voxelize(args) -> int:
    shape = serialize.read_instance_json(args.instance)
    anis = tuple(args.anisotropy) if args.anisotropy else shape.layout.anisotropy
    vol = volume.voxelize(shape, tuple(args.grid), anisotropy=anis, subdiv=args.subdiv)
    volume.save_volume(vol, args.out)
    return 0


def cmd_export_obj(args) -> int:
    shape = serialize.read_instance_json(args.instance)
    vertices, faces = to_triangle_mesh(shape, args.subdiv)
    serialize.write_obj(vertices, faces, args.out)
    return 0


def cmd_evaluate(args) -> int:
    truth = volume.load_volume(args.truth)
    pred = volume.load_volume(args.pred)
    lines = ["tau,precision,recall,accuracy,f1,pq"]
    rows = []
    for tau in args.taus:
        m = matching.metrics(matching.match_instances(truth, pred, tau))
        rows.append(m)
        lines.append(",".join([repr(float(tau))] + [repr(float(m[k])) for k in matching.METRIC_NAMES]))
    mean = {k: float(np.mean([r[k] for r in rows])) for k in matching.METRIC_NAMES}
    lines.append(",".join(["mean"] + [repr(float(mean[k])) for k in matching.METRIC_NAMES]))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_nms(args) -> int:
    candidates = serialize.read_candidates_json(args.candidates)
    kept = matching.nms(
        candidates, tuple(args.grid), anisotropy=tuple(args.anisotropy),
        prob_threshold=args.prob_threshold, iou_threshold=args.iou_threshold,
        subdiv=args.subdiv,
    )
    serialize.write_candidates_json(kept, args.out)
    return 0


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    cfg_base = loss.LossConfig()
    worst = 0.0
    for _ in range(args.trials):
        n = int(rng.integers(2, 12))
        p = 0.0 if rng.random() < 0.5 else float(rng.uniform(0.05, 1.0))
        cfg = loss.LossConfig(lambda_d=cfg_base.lambda_d, lambda_reg=float(rng.uniform(0.01, 1.0)))
        d = rng.uniform(0.5, 10.0, size=n)
        d_hat = rng.uniform(0.5, 10.0, size=n)
        # stay away from the |.| kinks so central differences are valid
        close = np.abs(d_hat - d) < 1e-3
        d_hat[close] += 2e-3
        d_hat = np.abs(d_hat)
        analytic = loss.distance_loss_gradient(p, d, d_hat, cfg)
        fd = np.empty(n)
        h = 1e-5
        for k in range(n):
            hi = d_hat.copy(); hi[k] += h
            lo = d_hat.copy(); lo[k] -= h
            fd[k] = (loss.distance_loss(p, d, hi, cfg) - loss.distance_loss(p, d, lo, cfg)) / (2 * h)
        scale = np.maximum(np.abs(fd), 1e-12)
        worst = max(worst, float(np.max(np.abs(analytic - fd) / scale)))
    print(f"gradcheck: {args.trials} trials, worst relative error {worst!r}")
    if worst > args.tolerance:
        return EXIT_NUMERIC
    return 0


def cmd_loss_eval(args) -> int:
    vol = volume.load_volume(args.volume)
    shape = serialize.read_instance_json(args.instance)
    cfg = loss.LossConfig(lambda_d=args.lambda_d, lambda_reg=args.lambda_reg, sample_level=args.level)
    targets = volume.object_probabilities(vol)
    voxel = np.floor(shape.center / vol.anisotropy + 0.5).astype(np.int64)
    if np.any(voxel < 0) or np.any(voxel >= np.array(vol.shape)):
        raise ValueError("instance center lies outside the volume")
    p = float(targets[tuple(voxel)])
    pred = loss.VoxelPrediction(p_hat=args.p_hat, shape=shape)
    obj = loss.object_loss(p, args.p_hat)
    total = loss.voxel_loss(p, pred, vol, cfg)
    payload = {
        "voxel": [int(v) for v in voxel],
        "p": p,
        "p_hat": float(args.p_hat),
        "object_loss": obj,
        "distance_loss": (total - obj) / cfg.lambda_d if cfg.lambda_d > 0 else 0.0,
        "voxel_loss": total,
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


_COMMANDS = {
    "lattice": cmd_lattice,
    "reconstruct-sphere": cmd_reconstruct_sphere,
    "fit": cmd_fit,
    "voxelize": cmd_voxelize,
    "export-obj": cmd_export_obj,
    "evaluate": cmd_evaluate,
    "nms": cmd_nms,
    "gradcheck": cmd_gradcheck,
    "loss-eval": cmd_loss_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except serialize.SchemaError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except fitting.ConvergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
