"""Discrete mean curvature on triangle meshes.

Uses the cotangent Laplacian with mixed Voronoi one-ring areas:
H_i = |sum_j (cot a_ij + cot b_ij) (x_i - x_j)| / (4 A_i). Boundary and
otherwise unmeasurable vertices get scalar 0 and a logged warning.
"""
from __future__ import annotations

import logging

import numpy as np

from ..errors import EmptyMesh
from ..values import Mesh

log = logging.getLogger(__name__)


def compute_curvature(mesh: Mesh) -> Mesh:
    if len(mesh.triangles) == 0:
        raise EmptyMesh("mesh has no triangles")
    V = mesh.vertices
    T = mesh.triangles
    nv = len(V)

    # cotangents of each triangle's three angles
    p0, p1, p2 = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
    cot = np.empty((len(T), 3))
    areas = np.empty(len(T))
    for k, (a, b, c) in enumerate(((p0, p1, p2), (p1, p2, p0), (p2, p0, p1))):
        u = b - a
        w = c - a
        cross = np.cross(u, w)
        cn = np.linalg.norm(cross, axis=1)
        cn = np.where(cn < 1e-300, 1e-300, cn)
        cot[:, k] = (u * w).sum(axis=1) / cn
        if k == 0:
            areas = 0.5 * cn

    # mixed Voronoi area per vertex (Meyer et al. style obtuse fallback)
    A = np.zeros(nv)
    obtuse_any = (cot < 0).any(axis=1)
    for k in range(3):
        i = T[:, k]
        j = T[:, (k + 1) % 3]
        l = T[:, (k + 2) % 3]
        # Voronoi contribution at corner k: (|e_ij|^2 cot_at_l + |e_il|^2 cot_at_j) / 8
        e_ij = ((V[i] - V[j]) ** 2).sum(axis=1)
        e_il = ((V[i] - V[l]) ** 2).sum(axis=1)
        voro = (e_ij * cot[:, (k + 2) % 3] + e_il * cot[:, (k + 1) % 3]) / 8.0
        corner_obtuse = cot[:, k] < 0
        contrib = np.where(obtuse_any,
                           np.where(corner_obtuse, areas / 2.0, areas / 4.0),
                           voro)
        np.add.at(A, i, contrib)

    # Laplacian vectors: sum over half-edges of cot(opposite angle) * (x_i - x_j)
    L = np.zeros((nv, 3))
    for k in range(3):
        i = T[:, k]
        j = T[:, (k + 1) % 3]
        w = cot[:, (k + 2) % 3]  # angle opposite edge (i, j)
        d = V[i] - V[j]
        np.add.at(L, i, w[:, None] * d)
        np.add.at(L, j, -w[:, None] * d)

    # boundary detection: an edge used by exactly one triangle
    edges = np.sort(np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    boundary = np.zeros(nv, dtype=bool)
    rim = uniq[counts == 1]
    if len(rim):
        boundary[rim.reshape(-1)] = True
        log.warning("curvature: %d boundary vertices set to 0", int(boundary.sum()))
    unused = np.ones(nv, dtype=bool)
    unused[T.reshape(-1)] = False

    H = np.zeros(nv)
    measurable = ~boundary & ~unused & (A > 1e-300)
    H[measurable] = np.linalg.norm(L[measurable], axis=1) / (4.0 * A[measurable])
    return Mesh(vertices=V.copy(), triangles=T.copy(),
                normals=None if mesh.normals is None else mesh.normals.copy(),
                vertex_scalars=H)
