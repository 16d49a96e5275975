import itertools

import numpy as np
import pytest

from surfdist.lattice import (
    ROLE_EDGE,
    ROLE_INTERIOR,
    ROLE_VERTEX,
    apply_anisotropy,
    build_topology,
    canonical_directions,
    control_layout,
    fibonacci_directions,
)


def test_fibonacci_unit_norm():
    dirs = fibonacci_directions(6)
    assert dirs.shape == (6, 3)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)


def test_fibonacci_minimum_separation_96():
    # brute-force pairwise angle scan
    dirs = fibonacci_directions(96)
    dots = np.clip(dirs @ dirs.T, -1.0, 1.0)
    np.fill_diagonal(dots, -1.0)
    assert np.arccos(dots.max()) > 0.15


def test_fibonacci_rejects_small_n():
    with pytest.raises(ValueError, match="insufficient"):
        fibonacci_directions(3)


def test_fibonacci_deterministic():
    assert np.array_equal(fibonacci_directions(17), fibonacci_directions(17))


def test_canonical_octahedron_axes():
    dirs = canonical_directions(6)
    expected = {(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)}
    got = {tuple(int(round(x)) for x in d) for d in dirs}
    assert got == expected


def test_canonical_icosahedron_dot_products():
    dirs = canonical_directions(12)
    # reference set: normalized permutation pattern of (0, +-1, +-phi)
    phi = (1 + np.sqrt(5)) / 2
    ref = []
    for signs in itertools.product((1, -1), repeat=2):
        base = np.array([0.0, signs[0], signs[1] * phi])
        for perm in ((0, 1, 2), (2, 0, 1), (1, 2, 0)):
            ref.append(base[list(perm)])
    ref = np.unique(np.round(np.array(ref) / np.linalg.norm(ref[0]), 12), axis=0)
    assert len(ref) == 12
    got = np.unique(np.round(dirs, 12), axis=0)
    assert np.allclose(np.sort(got, axis=0), np.sort(ref, axis=0), atol=1e-9)

    dots = dirs @ dirs.T
    allowed = np.array([1.0, -1.0, 1 / np.sqrt(5), -1 / np.sqrt(5)])
    assert np.all(np.min(np.abs(dots[..., None] - allowed), axis=-1) < 1e-9)


def test_canonical_rejects_unsupported():
    with pytest.raises(ValueError, match="fibonacci"):
        canonical_directions(5)


def test_octahedron_topology_counts():
    topo = build_topology(canonical_directions(6))
    assert topo.vertex_count == 6
    assert topo.edge_count == 12
    assert topo.triangle_count == 8


def test_icosahedron_face_count():
    topo = build_topology(canonical_directions(12))
    assert topo.triangle_count == 20


@pytest.mark.parametrize("V", [4, 6, 12, 23, 96])
def test_euler_characteristic(V):
    dirs = canonical_directions(V) if V in (4, 6, 12) else fibonacci_directions(V)
    topo = build_topology(dirs)
    assert topo.vertex_count - topo.edge_count + topo.triangle_count == 2
    assert topo.edge_count == 3 * V - 6
    assert topo.triangle_count == 2 * V - 4


def test_every_edge_in_two_triangles():
    topo = build_topology(fibonacci_directions(30))
    counts: dict = {}
    for tri in topo.triangles:
        for e in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(e), max(e))
            counts[key] = counts.get(key, 0) + 1
    assert all(n == 2 for n in counts.values())
    assert set(counts) == {tuple(e) for e in topo.edges}


def test_outward_orientation():
    dirs = fibonacci_directions(40)
    topo = build_topology(dirs)
    a, b, c = (dirs[topo.triangles[:, k]] for k in range(3))
    normals = np.cross(b - a, c - a)
    assert np.all(np.einsum("ij,ij->i", normals, (a + b + c) / 3) > 0)


def test_build_topology_deterministic():
    dirs = fibonacci_directions(50)
    t1 = build_topology(dirs)
    t2 = build_topology(dirs)
    assert np.array_equal(t1.edges, t2.edges)
    assert np.array_equal(t1.triangles, t2.triangles)


def test_degenerate_inputs_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        build_topology(np.array([[1.0, 0, 0]] * 2 + [[0, 1.0, 0], [0, 0, 1.0]]))
    coplanar = np.array([[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]], dtype=float)
    with pytest.raises(ValueError, match="degenerate"):
        build_topology(coplanar)


def test_control_layout_counts():
    for V, expected in ((6, 38), (12, 92)):
        dirs = canonical_directions(V)
        topo = build_topology(dirs)
        layout = control_layout(topo, dirs)
        assert len(layout) == expected == 9 * V - 16
        assert (layout.roles == ROLE_VERTEX).sum() == V
        assert (layout.roles == ROLE_EDGE).sum() == 2 * topo.edge_count
        assert (layout.roles == ROLE_INTERIOR).sum() == topo.triangle_count


@pytest.mark.parametrize("V", [4, 6, 12, 96])
def test_layout_count_formula(V):
    dirs = canonical_directions(V) if V in (4, 6, 12) else fibonacci_directions(V)
    topo = build_topology(dirs)
    assert len(control_layout(topo, dirs)) == 9 * V - 16


def test_layout_directions_unit_norm():
    dirs = fibonacci_directions(25)
    layout = control_layout(build_topology(dirs), dirs)
    assert np.allclose(np.linalg.norm(layout.directions, axis=1), 1.0, atol=1e-12)


def test_layout_edge_order_lower_third_first():
    dirs = fibonacci_directions(9)
    topo = build_topology(dirs)
    layout = control_layout(topo, dirs)
    for e, (i, j) in enumerate(topo.edges):
        first, second = layout.edge_entries[e]
        d_first = layout.directions[first]
        d_second = layout.directions[second]
        # the first entry must sit closer to the lower-index endpoint
        assert np.linalg.norm(d_first - dirs[i]) < np.linalg.norm(d_second - dirs[i])
        assert np.linalg.norm(d_second - dirs[j]) < np.linalg.norm(d_first - dirs[j])


def test_layout_interior_is_normalized_centroid():
    dirs = canonical_directions(6)
    topo = build_topology(dirs)
    layout = control_layout(topo, dirs)
    for t, tri in enumerate(topo.triangles):
        centroid = dirs[tri].mean(axis=0)
        centroid /= np.linalg.norm(centroid)
        assert np.allclose(layout.directions[layout.interior_entries[t]], centroid, atol=1e-12)


def test_apply_anisotropy():
    dirs = fibonacci_directions(10)
    assert np.allclose(apply_anisotropy(dirs, (1, 1, 1)), dirs, atol=1e-15)
    skewed = apply_anisotropy(dirs, (2.0, 1.0, 1.0))
    assert np.allclose(np.linalg.norm(skewed, axis=1), 1.0, atol=1e-12)
    assert not np.allclose(skewed, dirs)
    with pytest.raises(ValueError):
        apply_anisotropy(dirs, (0.0, 1.0, 1.0))
