"""Point extraction kernels: thresholded voxel sampling and depth back-projection."""
from __future__ import annotations

import logging

import numpy as np

from ..errors import AllPixelsInvalid, ParseError, RectOutOfBounds
from ..geometry import Pose
from ..values import Image2D, PointCloud, Volume3D

log = logging.getLogger(__name__)


def volume_to_points(volume: Volume3D, threshold: float, stride: int = 1) -> PointCloud:
    """One point at the world center of every voxel with sample >= threshold.

    Indices are visited in steps of ``stride`` per axis, so only voxels whose
    indices are all multiples of stride are considered.
    """
    stride = int(stride)
    if stride < 1:
        raise ValueError("stride must be a positive integer")
    nx, ny, nz = volume.dims
    g = volume.grid()[::stride, ::stride, ::stride]
    hits = np.argwhere(g.astype(np.float64) >= float(threshold))  # (n, 3) z,y,x
    if len(hits) == 0:
        log.warning("EmptySelection: no voxel reaches threshold %g", threshold)
        return PointCloud(points=np.zeros((0, 3)))
    idx_xyz = hits[:, ::-1].astype(np.float64) * stride
    pts = volume.origin + idx_xyz * np.asarray(volume.spacing)
    weights = g[hits[:, 0], hits[:, 1], hits[:, 2]].astype(np.float64)
    return PointCloud(points=pts, weights=weights)


def select_region(frame: Image2D, rect, camera: dict = None, pose: Pose = None) -> PointCloud:
    """Back-project the depth pixels inside an inclusive (u0, v0, u1, v1) rect.

    Each pixel with depth d at (u, v) maps to camera space
    ((u - cx) d / fx, (v - cy) d / fy, d) and then to world via the capture
    pose. Zero-depth pixels are skipped. Camera model and pose default to the
    frame's own metadata.
    """
    if frame.format != "u16":
        raise ParseError("region selection needs a u16 depth frame")
    camera = camera if camera is not None else frame.meta.get("camera")
    if not camera:
        raise ParseError("depth frame carries no camera model")
    fx, fy = float(camera["fx"]), float(camera["fy"])
    cx, cy = float(camera["cx"]), float(camera["cy"])
    depth_scale = float(camera.get("depth_scale", 0.001))
    if fx <= 0 or fy <= 0:
        raise ParseError("camera focal lengths must be positive")
    if pose is None:
        pose_floats = frame.meta.get("pose")
        pose = Pose.from_floats(pose_floats) if pose_floats else Pose.identity()

    u0, v0, u1, v1 = (int(v) for v in rect)
    if u0 > u1 or v0 > v1:
        raise RectOutOfBounds(f"inverted rect {(u0, v0, u1, v1)}")
    if u0 < 0 or v0 < 0 or u1 >= frame.width or v1 >= frame.height:
        raise RectOutOfBounds(
            f"rect {(u0, v0, u1, v1)} outside {frame.width}x{frame.height} frame")

    depth = frame.pixels[v0:v1 + 1, u0:u1 + 1].astype(np.float64) * depth_scale
    vv, uu = np.mgrid[v0:v1 + 1, u0:u1 + 1]
    good = depth > 0
    if not good.any():
        raise AllPixelsInvalid("every pixel in the rect has zero depth")
    d = depth[good]
    u = uu[good].astype(np.float64)
    v = vv[good].astype(np.float64)
    cam = np.stack([(u - cx) * d / fx, (v - cy) * d / fy, d], axis=1)
    world = pose.to_similarity().apply(cam)
    return PointCloud(points=world)
