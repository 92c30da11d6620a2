"""Marching cubes isosurface extraction.

Vectorized over all active cells. Vertices are welded by global edge id so
shared cell faces reuse identical vertices and closed level sets come out
watertight. A cube corner counts as "inside" when its sample is below the
isolevel; normals follow the sample gradient (toward increasing values,
outward for signed-distance volumes).
"""
from __future__ import annotations

import logging

import numpy as np

from ..values import Mesh, Volume3D
from .mc_tables import CORNER_OFFSETS, EDGE_CORNERS, EDGE_TABLE, TRI_TABLE

log = logging.getLogger(__name__)

# canonical (base corner offset, axis) per edge, for global edge ids
_EDGE_BASE = np.minimum(CORNER_OFFSETS[EDGE_CORNERS[0]], CORNER_OFFSETS[EDGE_CORNERS[1]])
_EDGE_AXIS = np.argmax(
    CORNER_OFFSETS[EDGE_CORNERS[0]] != CORNER_OFFSETS[EDGE_CORNERS[1]], axis=1)


def _empty_mesh() -> Mesh:
    return Mesh(vertices=np.zeros((0, 3)), triangles=np.zeros((0, 3), dtype=np.int64),
                normals=np.zeros((0, 3)))


def _trilinear(field: np.ndarray, pts_xyz: np.ndarray) -> np.ndarray:
    """Sample a (nz,ny,nx) field at continuous (x,y,z) index positions."""
    nz, ny, nx = field.shape
    x = np.clip(pts_xyz[:, 0], 0, nx - 1)
    y = np.clip(pts_xyz[:, 1], 0, ny - 1)
    z = np.clip(pts_xyz[:, 2], 0, nz - 1)
    x0 = np.clip(np.floor(x).astype(np.int64), 0, max(nx - 2, 0))
    y0 = np.clip(np.floor(y).astype(np.int64), 0, max(ny - 2, 0))
    z0 = np.clip(np.floor(z).astype(np.int64), 0, max(nz - 2, 0))
    if nx == 1:
        x0 = np.zeros_like(x0)
    if ny == 1:
        y0 = np.zeros_like(y0)
    if nz == 1:
        z0 = np.zeros_like(z0)
    x1 = np.minimum(x0 + 1, nx - 1)
    y1 = np.minimum(y0 + 1, ny - 1)
    z1 = np.minimum(z0 + 1, nz - 1)
    fx, fy, fz = x - x0, y - y0, z - z0
    c000 = field[z0, y0, x0]
    c100 = field[z0, y0, x1]
    c010 = field[z0, y1, x0]
    c110 = field[z0, y1, x1]
    c001 = field[z1, y0, x0]
    c101 = field[z1, y0, x1]
    c011 = field[z1, y1, x0]
    c111 = field[z1, y1, x1]
    return ((c000 * (1 - fx) + c100 * fx) * (1 - fy)
            + (c010 * (1 - fx) + c110 * fx) * fy) * (1 - fz) + \
           ((c001 * (1 - fx) + c101 * fx) * (1 - fy)
            + (c011 * (1 - fx) + c111 * fx) * fy) * fz


def iso_surface(volume: Volume3D, isovalue: float) -> Mesh:
    isovalue = float(isovalue)
    if not np.isfinite(isovalue):
        raise ValueError("isovalue must be finite")
    lo, hi = volume.value_range()
    if isovalue < lo or isovalue > hi:
        log.warning("EmptySurface: isovalue %g outside sample range [%g, %g]",
                    isovalue, lo, hi)
        return _empty_mesh()
    nx, ny, nz = volume.dims
    if nx < 2 or ny < 2 or nz < 2:
        return _empty_mesh()
    g = volume.grid().astype(np.float64)

    # per-cell corner values, shape (nz-1, ny-1, nx-1)
    def corner(ox, oy, oz):
        return g[oz:oz + nz - 1, oy:oy + ny - 1, ox:ox + nx - 1]

    corners = [corner(*CORNER_OFFSETS[c]) for c in range(8)]
    cube_index = np.zeros((nz - 1, ny - 1, nx - 1), dtype=np.int32)
    for c in range(8):
        cube_index |= (corners[c] < isovalue).astype(np.int32) << c
    active = (EDGE_TABLE[cube_index] != 0)
    if not active.any():
        return _empty_mesh()
    cells_zyx = np.argwhere(active)
    cidx = cube_index[active]
    cells_xyz = cells_zyx[:, ::-1].astype(np.int64)

    tri_edges = TRI_TABLE[cidx]                      # (m, 16) edge numbers
    valid = tri_edges >= 0
    flat_cell = np.repeat(np.arange(len(cidx)), valid.sum(axis=1))
    flat_edge = tri_edges[valid]

    base = cells_xyz[flat_cell] + _EDGE_BASE[flat_edge]   # (k, 3) x,y,z
    axis = _EDGE_AXIS[flat_edge]
    edge_ids = ((base[:, 2] * ny + base[:, 1]) * nx + base[:, 0]) * 3 + axis
    uniq, first, inverse = np.unique(edge_ids, return_index=True, return_inverse=True)

    # interpolate one vertex per unique edge
    rep_cell = flat_cell[first]
    rep_edge = flat_edge[first]
    ca = cells_xyz[rep_cell] + CORNER_OFFSETS[EDGE_CORNERS[0][rep_edge]]
    cb = cells_xyz[rep_cell] + CORNER_OFFSETS[EDGE_CORNERS[1][rep_edge]]
    va = g[ca[:, 2], ca[:, 1], ca[:, 0]]
    vb = g[cb[:, 2], cb[:, 1], cb[:, 0]]
    t = np.clip((isovalue - va) / (vb - va), 0.0, 1.0)
    pos_idx = ca + t[:, None] * (cb - ca)            # continuous index space
    spacing = np.asarray(volume.spacing)
    verts = volume.origin + pos_idx * spacing

    # the table's winding faces low values; flip so winding matches the
    # outward gradient normals (high-side out for value<iso inside convention)
    tris = inverse.reshape(-1, 3)[:, ::-1]

    # gradient normals, sampled trilinearly at the vertices
    dz, dy, dx = np.gradient(g, spacing[2], spacing[1], spacing[0])
    n = np.stack([_trilinear(dx, pos_idx), _trilinear(dy, pos_idx),
                  _trilinear(dz, pos_idx)], axis=1)
    norms = np.linalg.norm(n, axis=1)
    flat = norms < 1e-12
    if flat.any():
        n[flat] = (0.0, 0.0, 1.0)
        norms[flat] = 1.0
    n /= norms[:, None]

    return Mesh(vertices=verts, triangles=tris.astype(np.int64), normals=n)
