"""Axis-aligned region-of-interest extraction from placed volumes."""
from __future__ import annotations

import numpy as np

from ..errors import RoiOutsideVolume
from ..geometry import Similarity
from ..values import Volume3D

_EPS = 1e-9


def extract_roi(volume: Volume3D, center, extent,
                vis_transform: Similarity = None) -> Volume3D:
    """Copy the sub-volume under a world-space box.

    ``center`` and ``extent`` (both meters) describe the box in world space;
    ``vis_transform`` is how the volume is currently placed in the world
    (identity when the volume is unplaced). The box corners are pulled back
    through the inverse placement into volume-local space, bounded, and the
    covered voxel centers are copied with an adjusted origin.
    """
    sim = vis_transform if vis_transform is not None else Similarity.identity()
    center = np.asarray(center, dtype=np.float64).reshape(3)
    extent = np.asarray(extent, dtype=np.float64).reshape(3)
    if (extent <= 0).any():
        raise ValueError("extent must be positive componentwise")

    half = extent / 2.0
    corners = center + half * np.array(
        [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    local = sim.inverse().apply(corners)
    lo = local.min(axis=0)
    hi = local.max(axis=0)

    spacing = np.asarray(volume.spacing)
    dims = np.asarray(volume.dims)
    # voxel centers sit at origin + i * spacing; include centers inside [lo, hi]
    i_lo = np.ceil((lo - volume.origin) / spacing - _EPS).astype(np.int64)
    i_hi = np.floor((hi - volume.origin) / spacing + _EPS).astype(np.int64)
    i_lo = np.maximum(i_lo, 0)
    i_hi = np.minimum(i_hi, dims - 1)
    if (i_lo > i_hi).any():
        raise RoiOutsideVolume(
            f"box center={center.tolist()} extent={extent.tolist()} misses the volume")

    g = volume.grid()
    sub = g[i_lo[2]:i_hi[2] + 1, i_lo[1]:i_hi[1] + 1, i_lo[0]:i_hi[0] + 1]
    new_dims = (i_hi - i_lo + 1)
    return Volume3D(
        dims=tuple(int(d) for d in new_dims),
        spacing=volume.spacing,
        origin=volume.origin + i_lo * spacing,
        samples=np.ascontiguousarray(sub).reshape(-1),
    )
