"""Rotations, quaternions, poses, and similarity transforms.

Conventions, used everywhere in this package: right-handed frames, meters,
Y-up. Quaternions are ``[qx, qy, qz, qw]`` (scalar last). Rotation matrices
act on column vectors: ``world = R @ local``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EPS = 1e-12


def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n < _EPS:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def quat_to_matrix(q):
    """Unit quaternion [qx,qy,qz,qw] to a 3x3 rotation matrix."""
    x, y, z, w = quat_normalize(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R):
    """3x3 rotation matrix to a unit quaternion [qx,qy,qz,qw], qw >= 0."""
    R = np.asarray(R, dtype=np.float64)
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array([(R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s, 0.25 * s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(R[i, i] - R[j, j] - R[k, k] + 1.0, 0.0)) * 2
        q = np.empty(4)
        q[i] = 0.25 * s
        q[j] = (R[j, i] + R[i, j]) / s
        q[k] = (R[k, i] + R[i, k]) / s
        q[3] = (R[k, j] - R[j, k]) / s
    if q[3] < 0:
        q = -q
    return quat_normalize(q)


def quat_nlerp(q0, q1, t):
    """Shortest-arc normalized lerp between two unit quaternions."""
    q0 = quat_normalize(q0)
    q1 = quat_normalize(q1)
    if np.dot(q0, q1) < 0:
        q1 = -q1
    return quat_normalize((1.0 - t) * q0 + t * q1)


def rotation_about_axis(axis, angle):
    """Rodrigues rotation by ``angle`` radians about a (not necessarily unit) axis."""
    a = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(a)
    if n < _EPS:
        raise ValueError("zero rotation axis")
    x, y, z = a / n
    K = np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def shortest_arc(a, b):
    """Rotation matrix taking unit vector ``a`` onto unit vector ``b``.

    Antiparallel inputs rotate pi about an arbitrary perpendicular axis,
    chosen deterministically.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    c = float(np.dot(a, b))
    if c > 1.0 - 1e-14:
        return np.eye(3)
    if c < -1.0 + 1e-14:
        helper = np.array([1.0, 0.0, 0.0])
        if abs(a[0]) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        axis = np.cross(a, helper)
        return rotation_about_axis(axis, np.pi)
    axis = np.cross(a, b)
    return rotation_about_axis(axis, np.arccos(np.clip(c, -1.0, 1.0)))


def kabsch(src, dst):
    """Least-squares rigid transform (R, t) with R @ src[i] + t ~ dst[i].

    Reflections are repaired by flipping the sign of the smallest singular
    vector when det < 0. Raises ValueError on a rank-deficient
    cross-covariance (second singular value ~ 0), which callers translate
    into their own degenerate-input error.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    ca = src.mean(axis=0)
    cb = dst.mean(axis=0)
    H = (src - ca).T @ (dst - cb)
    U, S, Vt = np.linalg.svd(H)
    if S[1] <= 1e-12 * max(S[0], _EPS):
        raise ValueError("rank-deficient cross-covariance")
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = cb - R @ ca
    return R, t


def is_rotation(R, tol=1e-9):
    R = np.asarray(R, dtype=np.float64)
    return (np.abs(R.T @ R - np.eye(3)).max() < tol
            and abs(np.linalg.det(R) - 1.0) < tol)


@dataclass(frozen=True)
class Similarity:
    """Uniform-scale rigid transform: x -> scale * R @ x + t.

    Composition is written outer-first: ``outer.compose(inner)`` applies
    ``inner`` and then ``outer``, so it is associative by construction.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "rotation",
                           np.asarray(self.rotation, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "translation",
                           np.asarray(self.translation, dtype=np.float64).reshape(3))
        object.__setattr__(self, "scale", float(self.scale))
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @staticmethod
    def identity() -> "Similarity":
        return Similarity()

    def apply(self, points):
        p = np.asarray(points, dtype=np.float64)
        return self.scale * (p @ self.rotation.T) + self.translation

    def compose(self, inner: "Similarity") -> "Similarity":
        return Similarity(
            rotation=self.rotation @ inner.rotation,
            translation=self.scale * (self.rotation @ inner.translation) + self.translation,
            scale=self.scale * inner.scale,
        )

    def inverse(self) -> "Similarity":
        Rinv = self.rotation.T
        s = 1.0 / self.scale
        return Similarity(rotation=Rinv, translation=-s * (Rinv @ self.translation), scale=s)

    def to_wire(self) -> dict:
        return {
            "rotation": [float(v) for v in self.rotation.reshape(9)],
            "translation": [float(v) for v in self.translation],
            "scale": float(self.scale),
        }

    @staticmethod
    def from_wire(d: dict) -> "Similarity":
        return Similarity(
            rotation=np.array(d["rotation"], dtype=np.float64).reshape(3, 3),
            translation=np.array(d["translation"], dtype=np.float64),
            scale=float(d["scale"]),
        )

    def almost_equal(self, other: "Similarity", tol: float = 1e-9) -> bool:
        return (np.abs(self.rotation - other.rotation).max() < tol
                and np.abs(self.translation - other.translation).max() < tol
                and abs(self.scale - other.scale) < tol)


@dataclass(frozen=True)
class Pose:
    """Rigid placement as unit quaternion + translation."""

    quat: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "quat", quat_normalize(self.quat))
        object.__setattr__(self, "translation",
                           np.asarray(self.translation, dtype=np.float64).reshape(3))

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_matrix(R, t) -> "Pose":
        return Pose(quat=matrix_to_quat(R), translation=t)

    def to_similarity(self, scale: float = 1.0) -> Similarity:
        return Similarity(rotation=quat_to_matrix(self.quat),
                          translation=self.translation, scale=scale)

    def to_floats(self) -> list:
        """Wire order [qx,qy,qz,qw,tx,ty,tz]."""
        return [float(v) for v in (*self.quat, *self.translation)]

    @staticmethod
    def from_floats(vals) -> "Pose":
        vals = [float(v) for v in vals]
        if len(vals) != 7:
            raise ValueError("pose needs exactly 7 floats")
        return Pose(quat=np.array(vals[:4]), translation=np.array(vals[4:]))
