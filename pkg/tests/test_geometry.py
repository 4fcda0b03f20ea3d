import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import NaiveMesh, all_triangle_hits, equirect_dir, equirect_uv, pixel_dir, project
from refractsync.geometry import (BVH, DepthMap, GeometryError, PanoCamera, PerspectiveCamera,
                                  PlacementError, Ray, Sphere, TriMesh, box_mesh, depth_to_mesh,
                                  intersect, merge_meshes, pano_dirs, pano_uv, place_object,
                                  sphere_with_triangles, unproject, uv_sphere)
from refractsync.pipeline.fixtures import tabletop_depth


def test_ray_requires_unit_direction():
    with pytest.raises(GeometryError):
        Ray(np.zeros(3), np.array([0.0, 0.0, 2.0]))
    r = Ray.towards(np.zeros(3), [0, 0, 5])
    assert np.allclose(r.at(2.0), [0, 0, 2])


def test_trimesh_validation():
    with pytest.raises(GeometryError, match="out of range"):
        TriMesh(np.zeros((3, 3)), [[0, 1, 5]])
    with pytest.raises(GeometryError, match="degenerate"):
        TriMesh(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0.0]]), [[0, 1, 2]])
    open_tri = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]])
    with pytest.raises(GeometryError, match="watertight"):
        TriMesh(open_tri, [[0, 1, 2]], tag="object")


def test_uv_sphere_is_closed_and_outward():
    m = uv_sphere(1.0, 8, 16)
    assert m.is_watertight()
    assert len(m.triangles) == 2 * 16 * 7
    cent = m.vertices[m.triangles].mean(axis=1)
    assert np.all(np.einsum("ij,ij->i", m.face_normals, cent) > 0)


def test_sphere_with_triangles_reaches_target():
    assert len(sphere_with_triangles(100_000).triangles) >= 100_000


def test_box_mesh_normals_point_outward():
    b = box_mesh([0, 0, 0], [1, 2, 3])
    cent = b.vertices[b.triangles].mean(axis=1) - np.array([0.5, 1, 1.5])
    assert np.all(np.einsum("ij,ij->i", b.face_normals, cent) > 0)


def test_sphere_axis_hit():
    bvh = BVH(uv_sphere(1.0, 32, 64))
    hit = bvh.hit(Ray(np.array([0, 0, 5.0]), np.array([0, 0, -1.0])))
    assert hit.distance == pytest.approx(4.0, abs=1e-3)
    assert hit.front_face
    assert hit.normal @ np.array([0, 0, 1.0]) > 0.999


def test_empty_geometry_is_rejected():
    with pytest.raises(GeometryError, match="empty geometry"):
        BVH(TriMesh(np.zeros((0, 3)), np.zeros((0, 3), int)))


def test_ray_parallel_to_triangle_misses():
    tri = TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]]), [[0, 1, 2]])
    bvh = BVH(tri)
    assert bvh.hit(Ray(np.array([0.2, 0.2, 0.0]), np.array([1.0, 0, 0]))) is None


def test_bvh_matches_naive_all_triangles(rng):
    mesh = merge_meshes([uv_sphere(1.0, 10, 20), box_mesh([-3, -3, -3], [3, 3, 3])])
    bvh = BVH(mesh)
    naive = NaiveMesh(mesh.vertices, mesh.triangles)
    for _ in range(300):
        o = rng.uniform(-2.5, 2.5, 3)
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        t, tri, _, _ = bvh.nearest(Ray(o, d))
        tt, _, _ = all_triangle_hits(o, d, naive.v0, naive.v1, naive.v2, 0.0)
        assert t == pytest.approx(tt.min(), rel=1e-12)


def test_intersect_picks_nearest_shape():
    a = Sphere(np.array([0, 0, -3.0]), 1.0)
    b = Sphere(np.array([0, 0, -6.0]), 1.0, tag="background")
    hit = intersect(Ray(np.zeros(3), np.array([0, 0, -1.0])), [b, a])
    assert hit.distance == pytest.approx(2.0)
    assert hit.mesh_tag == "object"


# --- cameras --------------------------------------------------------------

def test_camera_projection_round_trip(rng):
    cam = PerspectiveCamera.from_fov(80, 60, 70.0)
    xs = rng.uniform(0, 79, 50)
    ys = rng.uniform(0, 59, 50)
    d = cam.pixel_directions(xs, ys)
    xy, z, front = cam.project_points(cam.center + 3.0 * d)
    assert front.all()
    assert np.allclose(xy, np.stack([xs, ys], -1), atol=1e-9)
    for k in range(5):
        assert np.allclose(d[k], pixel_dir(cam, xs[k], ys[k]), atol=1e-12)
    ref, _ = project(cam, cam.center + 3.0 * d)
    assert np.allclose(ref, xy, atol=1e-9)


def test_default_pose_looks_down_negative_z():
    cam = PerspectiveCamera.from_fov(65, 49, 60.0)
    d = cam.pixel_directions(32.0, 24.0)
    assert np.allclose(d, [0, 0, -1])
    assert np.allclose(cam.up, [0, 1, 0])
    # image row 0 looks up
    assert cam.pixel_directions(32.0, 0.0)[1] > 0


def test_pano_requires_two_to_one():
    with pytest.raises(Exception):
        PanoCamera(np.zeros(3), 100, 60)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 255.99), st.floats(0.01, 127.99))
def test_pano_round_trip(u, v):
    d = pano_dirs(np.array(u), np.array(v), 256, 128)
    assert np.allclose(d, equirect_dir(u, v, 256, 128), atol=1e-12)
    uu, vv = pano_uv(d[None], 256, 128)[0]
    eu, ev = equirect_uv(d, 256, 128)
    assert abs(uu - eu) < 1e-9 or abs(abs(uu - eu) - 256) < 1e-9
    assert vv == pytest.approx(ev, abs=1e-9)


def test_pano_forward_is_image_centre():
    u, v = pano_uv(np.array([[0.0, 0.0, -1.0]]), 256, 128)[0]
    assert (u, v) == pytest.approx((128.0, 64.0))


# --- depth ----------------------------------------------------------------

def test_plane_depth_unprojects_onto_plane():
    cam = PerspectiveCamera.from_fov(40, 30, 60.0)
    depth, pts = tabletop_depth(cam, table_y=-0.6, wall_z=-5.0)
    p = unproject(DepthMap(depth), cam)
    assert np.allclose(p, pts, atol=1e-9)


def test_depth_mesh_drops_discontinuities():
    cam = PerspectiveCamera.from_fov(20, 20, 60.0)
    d = np.full((20, 20), 2.0)
    d[:, 10:] = 10.0
    mesh = depth_to_mesh(DepthMap(d), cam, discontinuity_ratio=3.0)
    assert len(mesh.triangles) == 2 * 19 * 18
    d[5, 5] = 0.0
    mesh = depth_to_mesh(DepthMap(d), cam)
    assert len(mesh.triangles) == 2 * 19 * 18 - 8


def test_depth_mesh_rejects_empty():
    cam = PerspectiveCamera.from_fov(8, 8, 60.0)
    with pytest.raises(GeometryError, match="no reconstructable surface"):
        depth_to_mesh(DepthMap(np.zeros((8, 8))), cam)


# --- placement --------------------------------------------------------------

def test_placement_rests_object_on_table():
    cam = PerspectiveCamera.from_fov(96, 72, 60.0)
    depth, _ = tabletop_depth(cam, table_y=-0.6, wall_z=-5.0)
    bg = depth_to_mesh(DepthMap(depth), cam)
    obj = uv_sphere(1.0, 12, 24)
    m = place_object(obj, bg, cam, size=0.3)
    placed = obj.transformed(m)
    lo, hi = placed.bounds()
    assert lo[1] == pytest.approx(-0.6, abs=1e-9)
    assert hi[0] - lo[0] == pytest.approx(0.3, rel=1e-6)
    centre = 0.5 * (lo + hi)
    assert abs(centre[0]) < 1e-6
    assert -5.0 < centre[2] < 0.0


def test_placement_without_floor_fails():
    cam = PerspectiveCamera.from_fov(32, 24, 60.0)
    wall = depth_to_mesh(DepthMap(np.full((24, 32), 4.0)), cam)
    with pytest.raises(PlacementError, match="no supporting surface"):
        place_object(uv_sphere(1.0, 8, 16), wall, cam)


def test_placement_ignores_floor_far_below_axis():
    cam = PerspectiveCamera.from_fov(64, 48, 90.0)
    depth, _ = tabletop_depth(cam, table_y=-3.0, wall_z=-8.0)
    bg = depth_to_mesh(DepthMap(depth), cam)
    with pytest.raises(PlacementError):
        place_object(uv_sphere(1.0, 8, 16), bg, cam)
