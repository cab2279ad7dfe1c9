"""6-DOF serial arm kinematics from a DH table.

Convention per row i: T_i = Rz(theta_i + offset_i) · Tz(d_i) · Tx(a_i) · Rx(alpha_i).
Shipped defaults describe a UR3-class arm; override them from config for
other geometry (verify against the manufacturer's datasheet before use on
anything real).
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import LimitViolation, NoConvergence, Unreachable
from .geometry.core import Pose, quat_from_matrix, quat_to_matrix, quat_to_rotvec

_UR3_A = (0.0, -0.24365, -0.21325, 0.0, 0.0, 0.0)
_UR3_D = (0.1519, 0.0, 0.0, 0.11235, 0.08535, 0.0819)
_UR3_ALPHA = (np.pi / 2, 0.0, 0.0, np.pi / 2, -np.pi / 2, 0.0)

IK_POS_TOL = 1e-6
IK_ROT_TOL = 1e-5
IK_DAMPING = 0.01
IK_MAX_ITER = 200
IK_MAX_STEP = 0.5          # rad per joint per iteration
UNREACHABLE_POS_ERR = 1e-3  # residual beyond this at the cap means out of reach


@dataclass(frozen=True)
class DHTable:
    """Six rows of (a, d, alpha, theta_offset)."""

    a: np.ndarray
    d: np.ndarray
    alpha: np.ndarray
    theta_offset: np.ndarray

    def __post_init__(self):
        for name in ("a", "d", "alpha", "theta_offset"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (6,):
                raise ValueError(f"DH {name} must have 6 entries")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"DH {name} must be finite")
            object.__setattr__(self, name, v)

    @staticmethod
    def ur3():
        return DHTable(np.array(_UR3_A), np.array(_UR3_D),
                       np.array(_UR3_ALPHA), np.zeros(6))

    @staticmethod
    def from_dict(d):
        return DHTable(np.asarray(d["a"], dtype=float),
                       np.asarray(d["d"], dtype=float),
                       np.asarray(d["alpha"], dtype=float),
                       np.asarray(d.get("theta_offset", np.zeros(6)), dtype=float))

    def reach_bound(self):
        """Loose upper bound on TCP distance from the base."""
        return float(np.sum(np.abs(self.a)) + np.sum(np.abs(self.d)))


@dataclass(frozen=True)
class JointLimits:
    lower: np.ndarray = field(default_factory=lambda: np.full(6, -2 * np.pi))
    upper: np.ndarray = field(default_factory=lambda: np.full(6, 2 * np.pi))
    max_velocity: np.ndarray = field(default_factory=lambda: np.full(6, 3.14))
    max_acceleration: np.ndarray = field(default_factory=lambda: np.full(6, 6.28))

    def __post_init__(self):
        for name in ("lower", "upper", "max_velocity", "max_acceleration"):
            v = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (6,)).copy()
            object.__setattr__(self, name, v)
        if not np.all(self.lower < self.upper):
            raise ValueError("joint limits need lower < upper")
        if not (np.all(self.max_velocity > 0) and np.all(self.max_acceleration > 0)):
            raise ValueError("velocity/acceleration limits must be positive")

    @staticmethod
    def from_dict(d):
        kwargs = {}
        for key in ("lower", "upper", "max_velocity", "max_acceleration"):
            if key in d:
                kwargs[key] = np.asarray(d[key], dtype=float)
        return JointLimits(**kwargs)

    def contains(self, q):
        return bool(np.all(q >= self.lower - 1e-12) and np.all(q <= self.upper + 1e-12))


def dh_transform(a, d, alpha, theta):
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array([
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0, sa, ca, d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def fk_matrix(dh, q):
    q = np.asarray(q, dtype=float)
    T = np.eye(4)
    for i in range(6):
        T = T @ dh_transform(dh.a[i], dh.d[i], dh.alpha[i],
                             q[i] + dh.theta_offset[i])
    return T


def forward_kinematics(dh, q):
    """Tool-flange pose in the base frame."""
    T = fk_matrix(dh, q)
    return Pose(quat_from_matrix(T[:3, :3]), T[:3, 3].copy())


def tcp_position(dh, q):
    return fk_matrix(dh, q)[:3, 3]


def _joint_frames(dh, q):
    """Origins and z-axes of the base frame and each joint frame."""
    q = np.asarray(q, dtype=float)
    origins = np.zeros((7, 3))
    zaxes = np.zeros((7, 3))
    zaxes[0] = (0.0, 0.0, 1.0)
    T = np.eye(4)
    for i in range(6):
        T = T @ dh_transform(dh.a[i], dh.d[i], dh.alpha[i],
                             q[i] + dh.theta_offset[i])
        origins[i + 1] = T[:3, 3]
        zaxes[i + 1] = T[:3, 2]
    return origins, zaxes


def jacobian(dh, q):
    """Geometric Jacobian: rows 0-2 linear (m/rad), rows 3-5 angular."""
    origins, zaxes = _joint_frames(dh, q)
    p_end = origins[6]
    J = np.zeros((6, 6))
    for i in range(6):
        J[:3, i] = np.cross(zaxes[i], p_end - origins[i])
        J[3:, i] = zaxes[i]
    return J


def _pose_error(target, T_current):
    dp = target.pos - T_current[:3, 3]
    R_err = target.rotation_matrix() @ T_current[:3, :3].T
    dr = quat_to_rotvec(quat_from_matrix(R_err))
    return dp, dr


def _wrap_into_limits(q, limits):
    out = q.copy()
    for i in range(6):
        v = out[i]
        if limits.lower[i] - 1e-12 <= v <= limits.upper[i] + 1e-12:
            continue
        done = False
        for k in (-2, -1, 1, 2):
            w = v + k * 2 * np.pi
            if limits.lower[i] - 1e-12 <= w <= limits.upper[i] + 1e-12:
                out[i] = w
                done = True
                break
        if not done:
            return None
    return out


def inverse_kinematics(dh, target, seed, limits=None, damping=IK_DAMPING,
                       max_iter=IK_MAX_ITER, pos_tol=IK_POS_TOL,
                       rot_tol=IK_ROT_TOL):
    """Damped-least-squares IK from a seed configuration.

    Pose error below (pos_tol, rot_tol) is the contract; the joint solution
    follows the seed's branch. Raises Unreachable / NoConvergence /
    LimitViolation.
    """
    if limits is None:
        limits = JointLimits()
    if np.linalg.norm(target.pos) > dh.reach_bound():
        raise Unreachable(
            f"target at {np.linalg.norm(target.pos):.3f} m exceeds reach bound "
            f"{dh.reach_bound():.3f} m", pos_error=float("inf"))

    q = np.asarray(seed, dtype=float).copy()
    eye6 = np.eye(6)
    best_pos = np.inf
    best_rot = np.inf
    for _ in range(max_iter + 1):
        T = fk_matrix(dh, q)
        dp, dr = _pose_error(target, T)
        pos_err = float(np.linalg.norm(dp))
        rot_err = float(np.linalg.norm(dr))
        if pos_err < best_pos:
            best_pos, best_rot = pos_err, rot_err
        if pos_err < pos_tol and rot_err < rot_tol:
            wrapped = _wrap_into_limits(q, limits)
            if wrapped is None:
                raise LimitViolation("IK converged only outside joint limits")
            return wrapped
        J = jacobian(dh, q)
        e = np.concatenate([dp, dr])
        # error-proportional damping, capped at the nominal value: keeps the
        # step stable far out without stalling terminal convergence
        lam = min(damping, float(np.linalg.norm(e)))
        lam2 = max(lam * lam, 1e-18)
        dq = J.T @ np.linalg.solve(J @ J.T + lam2 * eye6, e)
        step = np.max(np.abs(dq))
        if step > IK_MAX_STEP:
            dq *= IK_MAX_STEP / step
        q = q + dq

    if best_pos > UNREACHABLE_POS_ERR:
        raise Unreachable(
            f"no solution within reach; best residual {best_pos:.4g} m",
            pos_error=best_pos, rot_error=best_rot)
    raise NoConvergence(
        f"iteration cap {max_iter} hit; best residual {best_pos:.4g} m / "
        f"{best_rot:.4g} rad", pos_error=best_pos, rot_error=best_rot)
