import numpy as np
import pytest

from oracles import in_convex_hull, point_mesh_distance
from surfdist.bezier import (
    CONTROL_INDICES,
    barycentric_grid,
    bernstein_weights,
    child_to_parent,
    evaluate,
    sample_grid,
    subdivide,
)


def random_bary(rng, n):
    raw = rng.dirichlet(np.ones(3), size=n)
    return raw


def random_patch(rng, scale=5.0):
    return rng.normal(scale=scale, size=(10, 3))


def flat_patch(a, b, c):
    """Control points on the barycentric grid of a flat triangle."""
    weights = np.array(CONTROL_INDICES, dtype=float) / 3.0
    return weights @ np.stack([a, b, c])


def test_corner_interpolation():
    rng = np.random.default_rng(0)
    patch = random_patch(rng)
    assert np.array_equal(evaluate(patch, (1.0, 0.0, 0.0)), patch[0])
    assert np.allclose(evaluate(patch, (0.0, 1.0, 0.0)), patch[1], atol=1e-12)
    assert np.allclose(evaluate(patch, (0.0, 0.0, 1.0)), patch[2], atol=1e-12)


def test_partition_of_unity():
    rng = np.random.default_rng(1)
    bary = random_bary(rng, 1000)
    sums = bernstein_weights(bary).sum(axis=1)
    assert np.allclose(sums, 1.0, atol=1e-12)
    q = np.array([3.0, -2.0, 7.0])
    patch = np.tile(q, (10, 1))
    assert np.allclose(evaluate(patch, bary), q, atol=1e-12)


def test_linear_precision():
    # flat control nets must reproduce the affine map exactly
    rng = np.random.default_rng(2)
    a, b, c = rng.normal(size=(3, 3)) * 4
    patch = flat_patch(a, b, c)
    bary = random_bary(rng, 50)
    direct = bary @ np.stack([a, b, c])
    assert np.allclose(evaluate(patch, bary), direct, atol=1e-12)


def test_affine_invariance():
    rng = np.random.default_rng(3)
    for _ in range(20):
        patch = random_patch(rng)
        M = rng.normal(size=(3, 3))
        t = rng.normal(size=3)
        bary = random_bary(rng, 30)
        lhs = evaluate(patch @ M.T + t, bary)
        rhs = evaluate(patch, bary) @ M.T + t
        assert np.allclose(lhs, rhs, atol=1e-9)


def test_subdivide_child_corners_at_midpoints():
    rng = np.random.default_rng(4)
    patch = random_patch(rng)
    children = subdivide(patch)
    mid_uv = evaluate(patch, (0.5, 0.5, 0.0))
    mid_uw = evaluate(patch, (0.5, 0.0, 0.5))
    mid_vw = evaluate(patch, (0.0, 0.5, 0.5))
    assert np.allclose(children[0, 0], patch[0], atol=1e-12)      # b300 of corner child
    assert np.allclose(children[0, 1], mid_uv, atol=1e-12)
    assert np.allclose(children[0, 2], mid_uw, atol=1e-12)
    assert np.allclose(children[3, 0], mid_vw, atol=1e-12)


def test_subdivision_membership_oracle():
    # child surface points must lie on the parent surface at mapped coordinates
    rng = np.random.default_rng(5)
    patch = random_patch(rng)
    children = subdivide(patch)
    for child in range(4):
        bary = random_bary(rng, 200)
        on_child = evaluate(children[child], bary)
        on_parent = evaluate(patch, child_to_parent(child, bary))
        assert np.allclose(on_child, on_parent, atol=1e-9)


def test_flat_patch_subdivides_flat():
    rng = np.random.default_rng(6)
    a, b, c = rng.normal(size=(3, 3))
    children = subdivide(flat_patch(a, b, c))
    normal = np.cross(b - a, c - a)
    normal /= np.linalg.norm(normal)
    for child in children:
        assert np.allclose((child - a) @ normal, 0.0, atol=1e-9)


@pytest.mark.parametrize("level,count", [(0, 3), (1, 6), (2, 15), (3, 45)])
def test_sample_grid_counts(level, count):
    rng = np.random.default_rng(7)
    bary, points = sample_grid(random_patch(rng), level)
    assert len(bary) == len(points) == count


def test_sample_grid_corners_hit_control_corners():
    rng = np.random.default_rng(8)
    patch = random_patch(rng)
    bary, points = sample_grid(patch, 2)
    for corner, control in (((1, 0, 0), patch[0]), ((0, 1, 0), patch[1]), ((0, 0, 1), patch[2])):
        row = np.where((bary == corner).all(axis=1))[0][0]
        assert np.allclose(points[row], control, atol=1e-12)


def test_sample_grid_matches_recursive_subdivision():
    # direct grid evaluation equals the corner set of literal recursion
    rng = np.random.default_rng(9)
    patch = random_patch(rng)
    level = 2
    stack = [patch]
    for _ in range(level):
        stack = [child for p in stack for child in subdivide(p)]
    corners = np.concatenate([p[:3] for p in stack])
    _, points = sample_grid(patch, level)
    grid_set = np.unique(np.round(points, 8), axis=0)
    corner_set = np.unique(np.round(corners, 8), axis=0)
    assert np.allclose(grid_set, corner_set, atol=1e-7)


def test_convex_hull_property():
    rng = np.random.default_rng(10)
    for _ in range(10):
        patch = random_patch(rng)
        bary = random_bary(rng, 200)
        assert in_convex_hull(evaluate(patch, bary), patch, slack=1e-9)


def test_flat_approximation_converges():
    # error of the level-k piecewise-flat approximation shrinks monotonically
    rng = np.random.default_rng(11)
    for _ in range(5):
        patch = random_patch(rng)
        errors = []
        for k in (0, 1, 2):
            m = 1 << k
            _, coarse = sample_grid(patch, k)
            faces = []
            def slot(i, j):
                return i * (m + 1) - i * (i - 1) // 2 + j
            for i in range(m):
                for j in range(m - i):
                    faces.append((slot(i, j), slot(i + 1, j), slot(i, j + 1)))
                    if i + j <= m - 2:
                        faces.append((slot(i + 1, j), slot(i + 1, j + 1), slot(i, j + 1)))
            _, fine = sample_grid(patch, k + 3)
            err = max(point_mesh_distance(p, coarse, np.array(faces)) for p in fine)
            errors.append(err)
        assert errors[0] >= errors[1] >= errors[2]


def test_barycentric_grid_lexicographic():
    grid = barycentric_grid(2)
    expected = [(0, 0, 2), (0, 1, 1), (0, 2, 0), (1, 0, 1), (1, 1, 0), (2, 0, 0)]
    assert [tuple(g) for g in grid] == expected


def test_evaluate_rejects_bad_patch():
    with pytest.raises(ValueError):
        evaluate(np.zeros((9, 3)), (1, 0, 0))
