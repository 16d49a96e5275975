"""File formats: instance JSON, candidate lists, lattice dumps, and OBJ meshes.

Instance schema (version 1):

    {"version": 1, "rays": V, "kind": "canonical"|"fibonacci",
     "anisotropy": [az, ay, ax], "center": [z, y, x],
     "distances": [... 9V-16 nonnegative reals ...]}

Distances follow the control-layout entry order (vertices, then two per
edge, then one per triangle).  All writers are deterministic byte for byte.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .instance import InstanceShape, make_layout, parameter_count
from .lattice import ROLE_NAMES


class SchemaError(ValueError):
    """A structured input file violates its schema; message carries file:line."""


def _key_line(text: str, key: str) -> int:
    match = re.search(f'"{re.escape(key)}"', text)
    if match is None:
        return 1
    return text.count("\n", 0, match.start()) + 1


def _fail(path, text: str, key: str, message: str):
    raise SchemaError(f"{path}:{_key_line(text, key)}: {message}")


def _load_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text), text
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}:{err.lineno}: {err.msg}") from err


def instance_to_dict(shape: InstanceShape) -> dict:
    layout = shape.layout
    return {
        "version": 1,
        "rays": layout.rays,
        "kind": layout.kind,
        "anisotropy": [float(a) for a in layout.anisotropy],
        "center": [float(c) for c in shape.center],
        "distances": [float(d) for d in shape.distances],
    }


def write_instance_json(shape: InstanceShape, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(shape), indent=2) + "\n")


def instance_from_dict(data: dict, path="<instance>", text: str = "") -> InstanceShape:
    if not isinstance(data, dict):
        raise SchemaError(f"{path}:1: expected a JSON object")
    for key in ("version", "rays", "kind", "anisotropy", "center", "distances"):
        if key not in data:
            raise SchemaError(f"{path}:1: missing field {key!r}")
    if data["version"] != 1:
        _fail(path, text, "version", f"unsupported version {data['version']!r}")
    rays = data["rays"]
    if not isinstance(rays, int) or rays < 4:
        _fail(path, text, "rays", "rays must be an integer >= 4")
    if data["kind"] not in ("canonical", "fibonacci"):
        _fail(path, text, "kind", f"unknown kind {data['kind']!r}")
    anis = data["anisotropy"]
    if (not isinstance(anis, list) or len(anis) != 3
            or not all(isinstance(a, (int, float)) and a > 0 for a in anis)):
        _fail(path, text, "anisotropy", "anisotropy must be 3 positive numbers")
    center = data["center"]
    if not isinstance(center, list) or len(center) != 3 \
            or not all(isinstance(c, (int, float)) for c in center):
        _fail(path, text, "center", "center must be 3 numbers")
    distances = data["distances"]
    expected = parameter_count(rays)
    if not isinstance(distances, list) or len(distances) != expected:
        _fail(path, text, "distances", f"distances must have length {expected} for rays={rays}")
    if not all(isinstance(d, (int, float)) and d >= 0 for d in distances):
        _fail(path, text, "distances", "distances must be nonnegative numbers")
    try:
        layout = make_layout(rays, data["kind"], tuple(anis))
    except ValueError as err:
        _fail(path, text, "kind", str(err))
    return InstanceShape(np.array(center, dtype=float), np.array(distances, dtype=float), layout)


def read_instance_json(path) -> InstanceShape:
    data, text = _load_json(path)
    return instance_from_dict(data, path=path, text=text)


def write_candidates_json(candidates, path) -> None:
    """Candidates are (InstanceShape, probability) pairs."""
    payload = {
        "version": 1,
        "candidates": [
            {"prob": float(prob), "instance": instance_to_dict(shape)}
            for shape, prob in candidates
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def read_candidates_json(path):
    data, text = _load_json(path)
    if not isinstance(data, dict) or data.get("version") != 1:
        raise SchemaError(f"{path}:1: expected a version-1 candidates object")
    entries = data.get("candidates")
    if not isinstance(entries, list):
        _fail(path, text, "candidates", "candidates must be a list")
    out = []
    for n, entry in enumerate(entries):
        if not isinstance(entry, dict) or "prob" not in entry or "instance" not in entry:
            _fail(path, text, "candidates", f"candidate {n} needs prob and instance fields")
        prob = entry["prob"]
        if not isinstance(prob, (int, float)) or not 0.0 <= prob <= 1.0:
            _fail(path, text, "prob", f"candidate {n} prob must lie in [0, 1]")
        shape = instance_from_dict(entry["instance"], path=path, text=text)
        out.append((shape, float(prob)))
    return out


def layout_to_dict(layout) -> dict:
    controls = layout.controls
    entries = []
    for n in range(len(controls)):
        owners = [int(o) for o in controls.owners[n] if o >= 0]
        entries.append({
            "role": ROLE_NAMES[int(controls.roles[n])],
            "owners": owners,
            "direction": [float(x) for x in controls.directions[n]],
        })
    return {
        "version": 1,
        "rays": layout.rays,
        "kind": layout.kind,
        "anisotropy": [float(a) for a in layout.anisotropy],
        "vertices": [[float(x) for x in v] for v in layout.directions],
        "edges": [[int(i), int(j)] for i, j in layout.topology.edges],
        "triangles": [[int(a), int(b), int(c)] for a, b, c in layout.topology.triangles],
        "controls": entries,
    }


def write_obj(vertices: np.ndarray, faces: np.ndarray, path) -> None:
    """ASCII Wavefront export of a triangle mesh.

    Vertices are stored internally as (z, y, x); lines are written in x y z
    world order, as noted in the file header.  Face indices are 1-based.
    """
    lines = [
        "# triangle mesh export",
        "# vertex lines are x y z; internal storage order is z y x",
    ]
    for v in np.asarray(vertices, dtype=float):
        lines.append(f"v {v[2]!r} {v[1]!r} {v[0]!r}")
    for f in np.asarray(faces, dtype=np.int64):
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    Path(path).write_text("\n".join(lines) + "\n")
