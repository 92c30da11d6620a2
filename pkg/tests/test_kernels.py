"""Numerical kernels against brute-force oracles and analytic ground truth."""
import numpy as np
import pytest

from xrflow import PointCloud, Pose, Similarity, Volume3D
from xrflow.errors import (AllPixelsInvalid, DegenerateCloud, RectOutOfBounds,
                           RoiOutsideVolume)
from xrflow.geometry import rotation_about_axis
from xrflow.nodes.curvature import compute_curvature
from xrflow.nodes.isosurface import iso_surface
from xrflow.nodes.points import select_region, volume_to_points
from xrflow.nodes.registration import register_icp
from xrflow.nodes.roi import extract_roi
from xrflow.synthetic import icosphere, sphere_sdf_volume, splat_depth
from xrflow.values import Image2D

from oracles import (euler_characteristic, is_closed_mesh, max_radial_error,
                     random_rotation, rotation_angle, volume_points_bruteforce)


# ---------------------------------------------------------- marching cubes

def test_iso_surface_small_sphere_is_closed_and_accurate():
    spacing = 1.0
    vol = sphere_sdf_volume(n=24, radius=8.0, spacing=spacing)
    mesh = iso_surface(vol, isovalue=0.0)
    assert len(mesh.triangles) > 0
    assert is_closed_mesh(mesh.triangles)
    assert euler_characteristic(mesh.vertices, mesh.triangles) == 2
    assert max_radial_error(mesh.vertices, (0, 0, 0), 8.0) <= 1.5 * spacing


def test_iso_surface_normals_point_outward():
    vol = sphere_sdf_volume(n=20, radius=6.0, spacing=1.0)
    mesh = iso_surface(vol, isovalue=0.0)
    radial = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
    agree = (radial * mesh.normals).sum(axis=1)
    assert (agree > 0.8).all()


def test_iso_surface_winding_matches_normals():
    vol = sphere_sdf_volume(n=20, radius=6.0, spacing=1.0)
    mesh = iso_surface(vol, isovalue=0.0)
    tri = mesh.vertices[mesh.triangles]
    face_n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    centroid = tri.mean(axis=1)
    outward = (face_n * centroid).sum(axis=1)
    assert (outward > 0).mean() > 0.999


def test_iso_surface_empty_when_level_outside_range():
    vol = sphere_sdf_volume(n=12, radius=4.0, spacing=1.0)
    mesh = iso_surface(vol, isovalue=1e9)
    assert mesh.counts() == (0, 0)


def test_iso_surface_threshold_of_dense_phantom():
    from xrflow.synthetic import ct_volume
    vol = ct_volume(n=32, spacing=1.0)
    mesh = iso_surface(vol, isovalue=700.0)
    assert len(mesh.triangles) > 100  # the dense shell surfaces


# --------------------------------------------------------------------- icp

def test_icp_recovers_random_rigid_transform():
    rng = np.random.default_rng(21)
    src = rng.uniform(0, 1, size=(1000, 3))
    R = random_rotation(rng, np.deg2rad(25.0))
    t = rng.uniform(-0.5, 0.5, size=3)
    dst = src @ R.T + t
    R_est, t_est, rms = register_icp(PointCloud(points=src),
                                     PointCloud(points=dst))
    assert rotation_angle(R_est @ R.T) < 1e-3
    assert np.linalg.norm(t_est - t) < 1e-3
    assert rms < 1e-6


def test_icp_rejects_degenerate_clouds():
    line = np.outer(np.linspace(0, 1, 50), [1.0, 2.0, 0.5])
    with pytest.raises(DegenerateCloud):
        register_icp(PointCloud(points=line), PointCloud(points=line + 0.1))
    with pytest.raises(DegenerateCloud):
        register_icp(PointCloud(points=np.zeros((2, 3))),
                     PointCloud(points=np.zeros((2, 3))))


def test_icp_inverse_parameterization():
    # the inverse transform places the target's frame in the source's frame
    rng = np.random.default_rng(22)
    src = rng.uniform(0, 1, size=(400, 3))
    R = random_rotation(rng, 0.3)
    t = np.array([0.2, -0.1, 0.05])
    dst = src @ R.T + t
    R_est, t_est, _ = register_icp(PointCloud(points=src),
                                   PointCloud(points=dst))
    R_inv, t_inv = R_est.T, -(R_est.T @ t_est)
    back = dst @ R_inv.T + t_inv
    assert np.abs(back - src).max() < 1e-6


# --------------------------------------------------------------- curvature

def test_curvature_unit_icosphere():
    mesh = compute_curvature(icosphere(subdivisions=3, radius=1.0))
    within = np.abs(mesh.vertex_scalars - 1.0) <= 0.05
    assert within.mean() >= 0.95


def test_curvature_scales_inversely_with_radius():
    mesh = compute_curvature(icosphere(subdivisions=3, radius=2.0))
    within = np.abs(mesh.vertex_scalars - 0.5) <= 0.025
    assert within.mean() >= 0.95


def test_curvature_flat_grid_is_zero_inside():
    n = 9
    xs, ys = np.meshgrid(np.arange(n, dtype=float), np.arange(n, dtype=float))
    verts = np.stack([xs.ravel(), ys.ravel(), np.zeros(n * n)], axis=1)
    tris = []
    for j in range(n - 1):
        for i in range(n - 1):
            a = j * n + i
            tris.append([a, a + 1, a + n])
            tris.append([a + 1, a + n + 1, a + n])
    from xrflow import Mesh
    mesh = compute_curvature(Mesh(vertices=verts, triangles=np.array(tris)))
    interior = [j * n + i for j in range(1, n - 1) for i in range(1, n - 1)]
    assert np.abs(mesh.vertex_scalars[interior]).max() < 1e-9


# --------------------------------------------------------------------- roi

def ramp_volume(dims=(9, 7, 5), spacing=(1.0, 1.0, 1.0), origin=(0, 0, 0)):
    nx, ny, nz = dims
    vals = np.zeros(nx * ny * nz, dtype="<f4")
    idx = 0
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                vals[idx] = i + 100 * j + 10000 * k
                idx += 1
    return Volume3D(dims=dims, spacing=spacing, origin=np.array(origin, float),
                    samples=vals)


def test_extract_roi_matches_slicing_oracle():
    vol = ramp_volume()
    roi = extract_roi(vol, center=(4.0, 3.0, 2.0), extent=(4.0, 2.0, 2.0))
    # voxel centers inside the box: x 2..6, y 2..4, z 1..3
    assert roi.dims == (5, 3, 3)
    assert np.allclose(roi.origin, [2.0, 2.0, 1.0])
    expected = vol.grid()[1:4, 2:5, 2:7]
    assert np.array_equal(roi.grid(), expected)


def test_extract_roi_clamps_to_volume_bounds():
    vol = ramp_volume()
    roi = extract_roi(vol, center=(0.0, 0.0, 0.0), extent=(20.0, 20.0, 20.0))
    assert roi.dims == vol.dims
    assert np.array_equal(roi.grid(), vol.grid())


def test_extract_roi_respects_placement_transform():
    vol = ramp_volume()
    # volume shifted +10 in world x: a world box at x=12 lands at local x=2
    placed = Similarity(rotation=np.eye(3),
                        translation=np.array([10.0, 0.0, 0.0]), scale=1.0)
    roi = extract_roi(vol, center=(12.0, 3.0, 2.0), extent=(2.0, 2.0, 2.0),
                      vis_transform=placed)
    sub = extract_roi(vol, center=(2.0, 3.0, 2.0), extent=(2.0, 2.0, 2.0))
    assert np.array_equal(roi.grid(), sub.grid())


def test_extract_roi_outside_raises():
    vol = ramp_volume()
    with pytest.raises(RoiOutsideVolume):
        extract_roi(vol, center=(100.0, 0.0, 0.0), extent=(1.0, 1.0, 1.0))


# ---------------------------------------------------------- volume->points

@pytest.mark.parametrize("stride", [1, 2, 3])
def test_volume_to_points_matches_bruteforce(stride):
    rng = np.random.default_rng(31)
    dims = (7, 6, 5)
    vals = rng.uniform(0, 100, size=np.prod(dims)).astype("<f4")
    vol = Volume3D(dims=dims, spacing=(0.5, 1.0, 2.0),
                   origin=np.array([1.0, -2.0, 0.0]), samples=vals)
    cloud = volume_to_points(vol, threshold=40.0, stride=stride)
    want_pts, want_w = volume_points_bruteforce(
        vals.astype(np.float64), dims, (0.5, 1.0, 2.0), (1.0, -2.0, 0.0),
        40.0, stride)
    assert len(cloud) == len(want_pts)
    got = {tuple(np.round(p, 9)) for p in cloud.points}
    want = {tuple(np.round(p, 9)) for p in want_pts}
    assert got == want
    assert np.isclose(np.sort(cloud.weights), np.sort(want_w)).all()


# ------------------------------------------------------------ depth region

CAMERA = {"fx": 120.0, "fy": 120.0, "cx": 79.5, "cy": 59.5,
          "depth_scale": 0.001}


def test_select_region_inverts_splat():
    rng = np.random.default_rng(41)
    pts = np.stack([rng.uniform(-0.3, 0.3, 200),
                    rng.uniform(-0.2, 0.2, 200),
                    rng.uniform(0.8, 1.6, 200)], axis=1)
    img = splat_depth(pts, width=160, height=120, fx=120.0, fy=120.0)
    frame = Image2D(pixels=img, format="u16", meta={"camera": CAMERA})
    cloud = select_region(frame, rect=(0, 0, 159, 119))
    # half a pixel laterally at the farthest depth, plus depth quantization
    from scipy.spatial import cKDTree
    d, _ = cKDTree(pts).query(cloud.points)
    assert d.max() < 1.6 / 120.0 * 0.75 + 1e-3


def test_select_region_applies_capture_pose():
    pts = np.array([[0.0, 0.0, 1.0]])
    img = splat_depth(pts, width=160, height=120, fx=120.0, fy=120.0)
    frame = Image2D(pixels=img, format="u16", meta={"camera": CAMERA})
    pose = Pose.from_floats([0, 0, 0, 1, 5.0, 0.0, 0.0])
    cloud = select_region(frame, rect=(0, 0, 159, 119), pose=pose)
    assert np.allclose(cloud.points.mean(axis=0), [5.0, 0.0, 1.0], atol=5e-3)


def test_select_region_validates_rect():
    frame = Image2D(pixels=np.zeros((120, 160), dtype="<u2"), format="u16",
                    meta={"camera": CAMERA})
    with pytest.raises(RectOutOfBounds):
        select_region(frame, rect=(10, 10, 5, 20))
    with pytest.raises(RectOutOfBounds):
        select_region(frame, rect=(0, 0, 160, 119))
    with pytest.raises(AllPixelsInvalid):
        select_region(frame, rect=(0, 0, 10, 10))
