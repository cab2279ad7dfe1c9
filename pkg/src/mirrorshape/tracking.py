"""Hand-tracking feed: frames, adaptive smoothing, rigid calibration.

Smoothing is an adaptive-cutoff exponential filter (One-Euro scheme) applied
independently to each tracked coordinate; calibration is a no-scale rigid
fit between tracker-frame and robot-frame point pairs.
"""
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateConfiguration, NonMonotonicTimestamp
from .geometry.core import Pose, quat_from_matrix

N_COORDS = 18  # 5 fingertips + palm, xyz each


@dataclass(frozen=True)
class HandFrame:
    timestamp: float
    fingertips: np.ndarray          # (5, 3) m, tracker frame
    palm: np.ndarray                # (3,) m
    valid: bool = True

    def __post_init__(self):
        tips = np.asarray(self.fingertips, dtype=float)
        palm = np.asarray(self.palm, dtype=float)
        if tips.shape != (5, 3) or palm.shape != (3,):
            raise ValueError("HandFrame expects fingertips (5,3) and palm (3,)")
        if self.valid and not (np.all(np.isfinite(tips)) and np.all(np.isfinite(palm))):
            raise ValueError("valid frame has non-finite positions")
        object.__setattr__(self, "fingertips", tips)
        object.__setattr__(self, "palm", palm)

    def coords(self):
        return np.concatenate([self.fingertips.ravel(), self.palm])

    def with_coords(self, coords):
        return HandFrame(timestamp=self.timestamp,
                         fingertips=coords[:15].reshape(5, 3),
                         palm=coords[15:18], valid=self.valid)


@dataclass(frozen=True)
class FilterParams:
    min_cutoff: float = 1.0   # Hz
    beta: float = 0.007
    d_cutoff: float = 1.0     # Hz

    def __post_init__(self):
        if not (self.min_cutoff > 0 and self.d_cutoff > 0 and self.beta >= 0):
            raise ValueError("need min_cutoff > 0, d_cutoff > 0, beta >= 0")


@dataclass(frozen=True)
class FilterState:
    params: FilterParams = field(default_factory=FilterParams)
    x_prev: np.ndarray = None
    dx_prev: np.ndarray = None
    t_prev: float = None

    @property
    def initialized(self):
        return self.t_prev is not None


def _smoothing_factor(t_e, cutoff):
    r = 2.0 * np.pi * cutoff * t_e
    return r / (r + 1.0)


def filter_step(state, frame):
    """Advance the filter by one frame; returns (new state, smoothed frame).

    The first frame passes through unchanged; invalid frames reset the
    derivative state so the next valid frame re-initializes.
    """
    if not frame.valid:
        return FilterState(params=state.params), frame
    if not state.initialized:
        x = frame.coords()
        return FilterState(params=state.params, x_prev=x,
                           dx_prev=np.zeros(N_COORDS),
                           t_prev=frame.timestamp), frame
    if frame.timestamp <= state.t_prev:
        raise NonMonotonicTimestamp(
            f"frame at t={frame.timestamp} after t={state.t_prev}")

    t_e = frame.timestamp - state.t_prev
    x = frame.coords()
    a_d = _smoothing_factor(t_e, state.params.d_cutoff)
    dx = (x - state.x_prev) / t_e
    dx_hat = a_d * dx + (1.0 - a_d) * state.dx_prev
    cutoff = state.params.min_cutoff + state.params.beta * np.abs(dx_hat)
    a = _smoothing_factor(t_e, cutoff)
    x_hat = a * x + (1.0 - a) * state.x_prev
    new_state = FilterState(params=state.params, x_prev=x_hat,
                            dx_prev=dx_hat, t_prev=frame.timestamp)
    return new_state, frame.with_coords(x_hat)


@dataclass(frozen=True)
class CalibrationTransform:
    """Tracker frame -> robot base frame, with the fit's RMS residual (m)."""

    pose: Pose
    rms_residual: float

    @staticmethod
    def identity():
        return CalibrationTransform(pose=Pose.identity(), rms_residual=0.0)


def estimate_calibration(pairs):
    """Least-squares rigid transform (rotation + translation, no scale)
    mapping tracker points onto robot points via SVD.

    Needs at least 3 non-collinear pairs.
    """
    if len(pairs) < 3:
        raise DegenerateConfiguration("need at least 3 point pairs")
    A = np.array([np.asarray(p[0], dtype=float) for p in pairs])
    B = np.array([np.asarray(p[1], dtype=float) for p in pairs])
    ca = A.mean(axis=0)
    cb = B.mean(axis=0)
    A0 = A - ca
    B0 = B - cb
    sv = np.linalg.svd(A0, compute_uv=False)
    if sv[1] < 1e-9 * max(sv[0], 1e-12):
        raise DegenerateConfiguration("point pairs are collinear")
    H = A0.T @ B0
    U, _, Vt = np.linalg.svd(H)
    V = Vt.T
    d = np.sign(np.linalg.det(V @ U.T))
    R = V @ np.diag([1.0, 1.0, d]) @ U.T
    t = cb - R @ ca
    residuals = A @ R.T + t - B
    rms = float(np.sqrt(np.mean(np.sum(residuals ** 2, axis=1))))
    return CalibrationTransform(pose=Pose(quat_from_matrix(R), t), rms_residual=rms)


def apply_calibration(cal, frame):
    """Map all frame positions into the robot base frame."""
    R = cal.pose.rotation_matrix()
    t = cal.pose.pos
    return HandFrame(timestamp=frame.timestamp,
                     fingertips=frame.fingertips @ R.T + t,
                     palm=R @ frame.palm + t,
                     valid=frame.valid)


def frame_to_record(frame):
    return {"t": frame.timestamp,
            "tips": frame.fingertips.tolist(),
            "palm": frame.palm.tolist(),
            "valid": bool(frame.valid)}


def record_to_frame(rec):
    return HandFrame(timestamp=float(rec["t"]),
                     fingertips=np.asarray(rec["tips"], dtype=float),
                     palm=np.asarray(rec["palm"], dtype=float),
                     valid=bool(rec.get("valid", True)))


def save_trajectory(path, frames):
    """Write frames as newline-delimited JSON records."""
    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(json.dumps(frame_to_record(frame)) + "\n")


def load_trajectory(path):
    frames = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                frames.append(record_to_frame(json.loads(line)))
    return frames
