"""Deterministic synthetic datasets for the demo workspaces and tests.

Everything here is seeded or closed-form so fixtures regenerate bit-identical.
Volumes stay at or under 64^3: big enough to exercise every kernel, small
enough for sub-second demo runs.
"""
from __future__ import annotations

import numpy as np

from .values import Mesh, Table, Volume3D


def lebron_table(n: int = 240, seed: int = 7) -> Table:
    """Shot-chart style table: court location, attempts, successes."""
    rng = np.random.default_rng(seed)
    loc_x = np.round(rng.uniform(-24.0, 24.0, n), 1)
    loc_y = np.round(np.abs(rng.normal(12.0, 8.0, n)), 1)
    dist = np.hypot(loc_x, loc_y)
    attempts = rng.integers(1, 40, n)
    p = np.clip(0.75 - dist / 60.0, 0.05, 0.95)
    successes = rng.binomial(attempts, p)
    rows = [{"loc_x": float(x), "loc_y": float(y),
             "attempts": int(a), "successes": int(s)}
            for x, y, a, s in zip(loc_x, loc_y, attempts, successes)]
    return Table.from_records(rows)


def cars_table(n: int = 120, seed: int = 11) -> Table:
    rng = np.random.default_rng(seed)
    cylinders = rng.choice([4, 6, 8], n, p=[0.5, 0.3, 0.2])
    displacement = np.round(cylinders * rng.uniform(20, 60, n), 0)
    horsepower = np.round(displacement * rng.uniform(0.5, 0.9, n), 0)
    weight = np.round(1500 + displacement * rng.uniform(4, 8, n), 0)
    mpg = np.round(np.clip(50 - weight / 120 + rng.normal(0, 2, n), 8, 45), 1)
    rows = [{"cylinders": int(c), "displacement": float(d),
             "horsepower": float(h), "weight": float(w), "mpg": float(m)}
            for c, d, h, w, m in zip(cylinders, displacement, horsepower,
                                     weight, mpg)]
    return Table.from_records(rows)


def _grid(n: int, spacing: float):
    """Voxel-center coordinates of an n^3 grid centered on the origin."""
    half = (n - 1) / 2.0
    axis = (np.arange(n) - half) * spacing
    z, y, x = np.meshgrid(axis, axis, axis, indexing="ij")
    origin = (-half * spacing,) * 3
    return x, y, z, origin


def ct_volume(n: int = 64, spacing: float = 1.0) -> Volume3D:
    """CT-like u16 phantom: soft-tissue ball with dense bone-like structures.

    The dense part is deliberately asymmetric (a hemispherical shell plus an
    off-axis rod) so that rigid registration against it is well conditioned;
    a full spherical shell would leave rotation unidentifiable.
    """
    x, y, z, origin = _grid(n, spacing)
    r = np.sqrt(x * x + y * y + z * z)
    body_r = 0.42 * n * spacing
    shell_r = 0.28 * n * spacing
    values = np.zeros((n, n, n), dtype=np.float64)
    values += 300.0 * (r < body_r)
    shell = (np.abs(r - shell_r) < 2.2 * spacing) & (z <= 0)
    values[shell] = 1100.0
    rod = (np.abs(y - 0.12 * n * spacing) < 1.6 * spacing) \
        & (np.abs(z) < 1.6 * spacing) & (np.abs(x) < 0.3 * n * spacing)
    values[rod] = 1100.0
    # deterministic low-amplitude texture so the histogram is not flat
    rng = np.random.default_rng(1234)
    values += rng.integers(0, 30, values.shape)
    samples = values.astype("<u2").ravel()
    return Volume3D(dims=(n, n, n), spacing=(spacing,) * 3, origin=origin,
                    samples=samples)


def microscopy_volume(n: int = 48, spacing: float = 1.0, seed: int = 21,
                      blobs: int = 6) -> Volume3D:
    """Fluorescence-like u8 volume: bright gaussian blobs on dark background."""
    rng = np.random.default_rng(seed)
    x, y, z, origin = _grid(n, spacing)
    values = np.zeros((n, n, n), dtype=np.float64)
    lim = 0.3 * n * spacing
    for _ in range(blobs):
        c = rng.uniform(-lim, lim, 3)
        sigma = rng.uniform(0.04, 0.09) * n * spacing
        d2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
        values += 220.0 * np.exp(-d2 / (2 * sigma * sigma))
    samples = np.clip(values, 0, 255).astype("<u1").ravel()
    return Volume3D(dims=(n, n, n), spacing=(spacing,) * 3, origin=origin,
                    samples=samples)


def sphere_sdf_volume(n: int = 64, radius: float = 20.0,
                      spacing: float = 1.0) -> Volume3D:
    """Signed distance to a centered sphere; negative inside."""
    x, y, z, origin = _grid(n, spacing)
    sdf = (np.sqrt(x * x + y * y + z * z) - radius).astype("<f4")
    return Volume3D(dims=(n, n, n), spacing=(spacing,) * 3, origin=origin,
                    samples=sdf.ravel())


# ---------------------------------------------------------------- icosphere

def icosphere(subdivisions: int = 4, radius: float = 1.0) -> Mesh:
    """Unit icosahedron subdivided and projected onto the sphere."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts[0])
    tris = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v for v in verts]
    for _ in range(subdivisions):
        cache: dict = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            idx = cache.get(key)
            if idx is None:
                m = verts[a] + verts[b]
                m /= np.linalg.norm(m)
                verts.append(m)
                idx = len(verts) - 1
                cache[key] = idx
            return idx

        nxt = []
        for a, b, c in tris:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            nxt += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        tris = nxt
    v = np.array(verts) * radius
    normals = np.array(verts)
    return Mesh(vertices=v, triangles=np.array(tris, dtype=np.int64),
                normals=normals)


# ------------------------------------------------------------- depth frames

def splat_depth(points: np.ndarray, width: int = 160, height: int = 120,
                fx: float = 120.0, fy: float = 120.0,
                camera_pose=None) -> np.ndarray:
    """Project world points through a pinhole into a u16 millimeter image.

    Points behind the camera or outside the frustum are dropped; nearest
    depth wins per pixel. camera_pose maps camera to world (optional).
    """
    pts = np.asarray(points, dtype=np.float64)
    if camera_pose is not None:
        sim = camera_pose.to_similarity()
        inv = sim.inverse()
        pts = inv.apply(pts)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    img = np.zeros((height, width), dtype=np.uint16)
    zs = pts[:, 2]
    keep = zs > 1e-6
    pts = pts[keep]
    if len(pts) == 0:
        return img
    u = np.round(fx * pts[:, 0] / pts[:, 2] + cx).astype(int)
    v = np.round(fy * pts[:, 1] / pts[:, 2] + cy).astype(int)
    mm = np.round(pts[:, 2] * 1000.0).astype(np.uint32)
    ok = (u >= 0) & (u < width) & (v >= 0) & (v < height) & (mm > 0) & (mm < 65536)
    for ui, vi, di in zip(u[ok], v[ok], mm[ok]):
        cur = img[vi, ui]
        if cur == 0 or di < cur:
            img[vi, ui] = di
    return img
