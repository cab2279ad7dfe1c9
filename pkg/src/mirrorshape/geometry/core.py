"""Vectors, unit quaternions and rigid transforms.

Positions and directions are plain float64 numpy arrays of shape (3,).
Quaternions are stored (w, x, y, z) and kept unit-norm.
"""
from dataclasses import dataclass

import numpy as np

QUAT_NORM_TOL = 1e-9


def vec3(x, y, z):
    return np.array([float(x), float(y), float(z)])


def normalized(v):
    n = np.linalg.norm(v)
    if n < 1e-15:
        raise ValueError("cannot normalize near-zero vector")
    return v / n


def quat_identity():
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_multiply(q1, q2):
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_matrix(R):
    """Shepperd's method; picks the numerically largest component first."""
    m00, m01, m02 = R[0]
    m10, m11, m12 = R[1]
    m20, m21, m22 = R[2]
    tr = m00 + m11 + m22
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s])
    elif m00 >= m11 and m00 >= m22:
        s = np.sqrt(1.0 + m00 - m11 - m22) * 2.0
        q = np.array([(m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s])
    elif m11 >= m22:
        s = np.sqrt(1.0 + m11 - m00 - m22) * 2.0
        q = np.array([(m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s])
    else:
        s = np.sqrt(1.0 + m22 - m00 - m11) * 2.0
        q = np.array([(m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s])
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quat_rotate(q, v):
    return quat_to_matrix(q) @ v


def quat_to_rotvec(q):
    """Axis-angle vector (rad) of a unit quaternion; zero for identity."""
    w = q[0]
    v = q[1:]
    if w < 0.0:
        w, v = -w, -v
    s = np.linalg.norm(v)
    if s < 1e-15:
        return np.zeros(3)
    angle = 2.0 * np.arctan2(s, w)
    return v * (angle / s)


def rotvec_to_quat(r):
    angle = np.linalg.norm(r)
    if angle < 1e-15:
        return quat_identity()
    half = 0.5 * angle
    axis = r / angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotation as a unit quaternion plus translation (m)."""

    quat: np.ndarray
    pos: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.quat, dtype=float)
        p = np.asarray(self.pos, dtype=float)
        if q.shape != (4,) or p.shape != (3,):
            raise ValueError("Pose expects quat (4,) and pos (3,)")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("Pose components must be finite")
        if abs(np.linalg.norm(q) - 1.0) > QUAT_NORM_TOL:
            raise ValueError("quaternion is not unit norm")
        object.__setattr__(self, "quat", q)
        object.__setattr__(self, "pos", p)

    @staticmethod
    def identity():
        return Pose(quat_identity(), np.zeros(3))

    @staticmethod
    def from_matrix(T):
        T = np.asarray(T, dtype=float)
        return Pose(quat_from_matrix(T[:3, :3]), T[:3, 3].copy())

    @staticmethod
    def from_rotation_translation(R, t):
        return Pose(quat_from_matrix(np.asarray(R, dtype=float)),
                    np.asarray(t, dtype=float).copy())

    def rotation_matrix(self):
        return quat_to_matrix(self.quat)

    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.rotation_matrix()
        T[:3, 3] = self.pos
        return T

    def apply(self, points):
        """Transform a point (3,) or an array of points (..., 3)."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation_matrix().T + self.pos

    def compose(self, other):
        """self ∘ other: apply `other` first, then `self`."""
        return Pose(quat_multiply(self.quat, other.quat),
                    self.apply(other.pos))

    def inverse(self):
        qc = quat_conjugate(self.quat)
        return Pose(qc, -quat_rotate(qc, self.pos))


def pose_from_z_axis(point, z_axis, up_hint=None):
    """Pose at `point` whose z-axis is `z_axis`; x chosen deterministically."""
    z = normalized(np.asarray(z_axis, dtype=float))
    up = np.array([0.0, 0.0, 1.0]) if up_hint is None else np.asarray(up_hint, float)
    x = np.cross(up, z)
    if np.linalg.norm(x) < 1e-8:
        x = np.cross(np.array([1.0, 0.0, 0.0]), z)
    x = normalized(x)
    y = np.cross(z, x)
    R = np.column_stack([x, y, z])
    return Pose.from_rotation_translation(R, np.asarray(point, dtype=float))


def pose_difference(target, current):
    """(position error vector, rotation error vector) taking current→target."""
    dp = target.pos - current.pos
    dq = quat_multiply(target.quat, quat_conjugate(current.quat))
    return dp, quat_to_rotvec(dq)
