"""Point-to-point iterative closest point registration."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..errors import DegenerateCloud
from ..geometry import kabsch
from ..values import PointCloud

DEFAULT_MAX_ITERATIONS = 100
DEFAULT_TOLERANCE = 1e-8


def register_icp(source: PointCloud, target: PointCloud,
                 max_iterations: int = DEFAULT_MAX_ITERATIONS,
                 tolerance: float = DEFAULT_TOLERANCE):
    """Rigid transform (R, t) mapping source into the target frame, plus rms.

    Correspondences are exact nearest neighbors on a k-d tree; each round
    re-solves the absolute transform with Kabsch. Terminates when the rms
    improvement drops below ``tolerance`` or at ``max_iterations``; running
    out of iterations is not an error, the best transform is returned.
    """
    src = np.asarray(source.points, dtype=np.float64)
    dst = np.asarray(target.points, dtype=np.float64)
    if len(src) < 3 or len(dst) < 3:
        raise DegenerateCloud("both clouds need at least 3 points")
    _check_rank(src)
    tree = cKDTree(dst)

    # centroid alignment as the initial guess
    R = np.eye(3)
    t = dst.mean(axis=0) - src.mean(axis=0)
    prev_rms = np.inf
    rms = np.inf
    for _ in range(int(max_iterations)):
        moved = src @ R.T + t
        _, idx = tree.query(moved, k=1)
        corr = dst[idx]
        try:
            R, t = kabsch(src, corr)
        except ValueError as e:
            raise DegenerateCloud(str(e)) from None
        resid = src @ R.T + t - corr
        rms = float(np.sqrt((resid ** 2).sum(axis=1).mean()))
        if prev_rms - rms < tolerance:
            break
        prev_rms = rms
    return R, t, rms


def _check_rank(points: np.ndarray) -> None:
    centered = points - points.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[1] <= 1e-9 * max(s[0], 1e-12):
        raise DegenerateCloud("points are collinear; rotation is under-determined")
