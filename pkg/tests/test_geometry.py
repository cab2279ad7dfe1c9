import math

import numpy as np
import pytest
from numba import njit

from mirrorshape.errors import EmptyMesh, InvalidTriangle, MeshLoadError
from mirrorshape.geometry import (
    Pose, TriMesh, load_obj, local_patch, shapes, vec3,
)
from mirrorshape.geometry.kernels import (
    ray_triangle_t_indexed, tri_closest_point_d2,
)


# Exhaustive per-triangle oracles: same per-triangle routine, independent
# selection loop with the same (metric, index) tie-break.

@njit(cache=True)
def brute_closest(vertices, triangles, q):
    best_d2 = np.inf
    best_idx = -1
    bx = by = bz = 0.0
    for tri in range(triangles.shape[0]):
        px, py, pz, d2 = tri_closest_point_d2(vertices, triangles, tri, q)
        if d2 < best_d2 or (d2 == best_d2 and tri < best_idx):
            best_d2 = d2
            best_idx = tri
            bx, by, bz = px, py, pz
    return bx, by, bz, best_d2, best_idx


@njit(cache=True)
def brute_raycast(vertices, triangles, origin, direction):
    best_t = np.inf
    best_idx = -1
    for tri in range(triangles.shape[0]):
        t = ray_triangle_t_indexed(vertices, triangles, tri, origin, direction)
        if t >= 0.0 and (t < best_t or (t == best_t and tri < best_idx)):
            best_t = t
            best_idx = tri
    if best_idx < 0:
        return -1.0, -1
    return best_t, best_idx


@pytest.fixture(scope="module")
def single_triangle():
    return TriMesh(np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0]]),
                   np.array([[0, 1, 2]]))


def test_closest_point_interior_projection(single_triangle):
    p, tri, d = single_triangle.closest_point(vec3(0.25, 0.25, 1.0))
    assert np.allclose(p, [0.25, 0.25, 0.0])
    assert tri == 0
    assert d == pytest.approx(1.0)


def test_closest_point_edge_projection(single_triangle):
    p, _, _ = single_triangle.closest_point(vec3(2.0, 2.0, 0.0))
    assert np.allclose(p, [0.5, 0.5, 0.0])


def test_closest_point_matches_bruteforce_on_cube():
    mesh = shapes.box(shared_vertices=True)
    rng = np.random.default_rng(7)
    qs = rng.uniform(-2.0, 2.0, size=(10_000, 3))
    for q in qs:
        p, tri, d = mesh.closest_point(q)
        bx, by, bz, bd2, bidx = brute_closest(mesh.vertices, mesh.triangles, q)
        assert tri == bidx
        assert (p[0], p[1], p[2]) == (bx, by, bz)
        assert d == math.sqrt(bd2)


def test_closest_point_vertex_lower_bound():
    mesh = shapes.icosphere(0.1, 2)
    rng = np.random.default_rng(3)
    for q in rng.uniform(-0.3, 0.3, size=(200, 3)):
        _, _, d = mesh.closest_point(q)
        vert_d = np.linalg.norm(mesh.vertices - q, axis=1).min()
        assert d <= vert_d + 1e-12


def test_ray_cast_hit_and_miss():
    mesh = shapes.plane(size=2.0)
    hit = mesh.ray_cast(vec3(0, 0, 0.1), vec3(0, 0, -1.0))
    assert hit is not None
    point, _, t = hit
    assert np.allclose(point, [0, 0, 0], atol=1e-12)
    assert t == pytest.approx(0.1)
    assert mesh.ray_cast(vec3(0, 0, 0.1), vec3(0, 0, 1.0)) is None


def test_ray_cast_matches_bruteforce_on_cube():
    mesh = shapes.box(shared_vertices=True)
    rng = np.random.default_rng(11)
    origins = rng.uniform(-2.0, 2.0, size=(1000, 3))
    dirs = rng.normal(size=(1000, 3))
    # aim half the rays at a point inside the cube for dense hit coverage
    dirs[::2] = rng.uniform(-0.4, 0.4, size=(500, 3)) - origins[::2]
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    n_hits = 0
    for o, d in zip(origins, dirs):
        got = mesh.ray_cast(o, d)
        bt, bidx = brute_raycast(mesh.vertices, mesh.triangles, o, d)
        if got is None:
            assert bidx == -1
        else:
            _, tri, t = got
            assert tri == bidx
            assert t == bt
            n_hits += 1
    assert n_hits > 100


def test_ray_hit_reprojects_onto_surface():
    mesh = shapes.icosphere(0.1, 3)
    rng = np.random.default_rng(5)
    for _ in range(100):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        hit = mesh.ray_cast(vec3(0.5, 0.02, -0.01), -d if d[0] < 0 else d)
        if hit is None:
            continue
        point, _, _ = hit
        _, _, dist = mesh.closest_point(point)
        assert dist < 1e-9


def test_degenerate_triangle_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        TriMesh(np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]]),
                np.array([[0, 1, 2]]))


def test_empty_mesh_rejected():
    with pytest.raises(EmptyMesh):
        TriMesh(np.zeros((3, 3)), np.zeros((0, 3), dtype=int))


def test_local_patch_plane_is_flat():
    mesh = shapes.plane(size=1.0)
    q = vec3(0.1, 0.05, 0.0)
    _, tri, _ = mesh.closest_point(q)
    patch = local_patch(mesh, q, tri, sample_radius=0.1)
    assert patch.flat
    assert np.allclose(patch.normal, [0, 0, 1], atol=1e-9)
    assert abs(patch.normal @ patch.tangent) < 1e-9


def test_local_patch_sphere_radius():
    mesh = shapes.icosphere(0.1, 3)
    rng = np.random.default_rng(2)
    for _ in range(5):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        p, tri, _ = mesh.closest_point(0.2 * d)
        patch = local_patch(mesh, p, tri, sample_radius=0.03)
        assert not patch.flat
        assert patch.curvature_radius == pytest.approx(0.1, rel=0.10)


def test_local_patch_cylinder_radius():
    mesh = shapes.tube(radius=0.2, length=0.4, segments=64, axial_cuts=8)
    p, tri, _ = mesh.closest_point(vec3(0.01, 0.0, 0.5))
    patch = local_patch(mesh, p, tri, sample_radius=0.05)
    assert not patch.flat
    assert patch.curvature_radius == pytest.approx(0.2, rel=0.10)
    # principal direction is around the circumference, not along the axis
    assert abs(patch.tangent[0]) < 0.3


def test_local_patch_normal_orthonormal():
    mesh = shapes.icosphere(0.1, 2)
    p, tri, _ = mesh.closest_point(vec3(0.2, 0.1, 0.05))
    patch = local_patch(mesh, p, tri, sample_radius=0.03)
    assert abs(np.linalg.norm(patch.normal) - 1.0) < 1e-9
    assert abs(patch.normal @ patch.tangent) < 1e-9


def test_local_patch_rejects_bad_triangle():
    mesh = shapes.plane(size=1.0)
    with pytest.raises(InvalidTriangle):
        local_patch(mesh, vec3(0, 0, 0.5), 0, sample_radius=0.1)
    with pytest.raises(InvalidTriangle):
        local_patch(mesh, vec3(0, 0, 0.0), 99, sample_radius=0.1)


def test_obj_loader_roundtrip(tmp_path):
    path = tmp_path / "tri.obj"
    path.write_text(
        "# comment line\n"
        "vn 0 0 1\n"
        "v 0 0 0\n"
        "v 1 0 0\n"
        "v 0 1 0\n"
        "f 1 2 3\n")
    mesh = load_obj(path)
    assert mesh.n_triangles == 1
    assert np.allclose(mesh.vertices[1], [1, 0, 0])


def test_obj_loader_accepts_slash_indices(tmp_path):
    path = tmp_path / "tri.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2 3/3\n")
    assert load_obj(path).n_triangles == 1


@pytest.mark.parametrize("body,msg", [
    ("v 0 0\n", "vertex"),
    ("v a b c\n", "non-numeric"),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3 1\n", "triangulated"),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n", "beyond"),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", ">= 1"),
])
def test_obj_loader_rejects_malformed(tmp_path, body, msg):
    path = tmp_path / "bad.obj"
    path.write_text(body)
    with pytest.raises(MeshLoadError, match=msg):
        load_obj(path)


def test_pose_roundtrip_and_compose():
    rng = np.random.default_rng(0)
    for _ in range(50):
        r = rng.normal(size=3)
        from mirrorshape.geometry import rotvec_to_quat
        pose = Pose(rotvec_to_quat(r), rng.normal(size=3))
        again = Pose.from_matrix(pose.matrix())
        assert np.allclose(pose.matrix(), again.matrix(), atol=1e-12)
        inv = pose.inverse()
        ident = pose.compose(inv)
        assert np.allclose(ident.pos, 0, atol=1e-12)
        assert np.allclose(ident.rotation_matrix(), np.eye(3), atol=1e-12)


def test_pose_rejects_non_unit_quaternion():
    with pytest.raises(ValueError):
        Pose(np.array([1.0, 0.1, 0.0, 0.0]), np.zeros(3))
