"""Approach detection, contact-point prediction and contact events."""
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidHysteresis

V_MIN = 0.02          # m/s; below this the approach direction is unreliable
D_APPROACH = 0.15     # m; default radius of the approach field
D_ON = 0.005          # m; contact onset threshold
D_OFF = 0.010         # m; contact offset threshold (hysteresis)


@dataclass(frozen=True)
class ContactTarget:
    """Where the end-effector must meet the hand: surface point, outward
    normal, and estimated time-to-contact (inf when not on a collision
    course)."""

    point: np.ndarray
    normal: np.ndarray
    eta: float
    fingertip_index: int = 0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("contact normal must be unit length")
        if not self.eta >= 0.0:
            raise ValueError("eta must be non-negative")
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        object.__setattr__(self, "normal", n)


class ApproachMode(Enum):
    FAR = "far"
    APPROACHING = "approaching"
    IN_CONTACT = "in_contact"


_MODE_ORDER = [ApproachMode.FAR, ApproachMode.APPROACHING, ApproachMode.IN_CONTACT]


@dataclass(frozen=True)
class ApproachState:
    """Hysteretic proximity classification of the closest fingertip."""

    mode: ApproachMode = ApproachMode.FAR
    distance: float = math.inf
    d_on: float = D_ON
    d_off: float = D_OFF

    def update(self, distance, d_approach=D_APPROACH):
        """One hysteresis step; moves at most one mode per update."""
        target = self.mode
        if self.mode is ApproachMode.FAR:
            if distance < d_approach:
                target = ApproachMode.APPROACHING
        elif self.mode is ApproachMode.APPROACHING:
            if distance < self.d_on:
                target = ApproachMode.IN_CONTACT
            elif distance >= d_approach:
                target = ApproachMode.FAR
        else:
            if distance > self.d_off:
                target = ApproachMode.APPROACHING
        # adjacency is structural: each branch moves one step at most
        assert abs(_MODE_ORDER.index(target) - _MODE_ORDER.index(self.mode)) <= 1
        return ApproachState(mode=target, distance=distance,
                             d_on=self.d_on, d_off=self.d_off)


def detect_approach(frame, mesh, d_approach=D_APPROACH):
    """Fingertip with the smallest mesh distance if inside the approach
    field, else None. Returns (fingertip_index, distance)."""
    if d_approach <= 0.0:
        raise ValueError("d_approach must be positive")
    if not frame.valid:
        return None
    best_idx = -1
    best_d = math.inf
    for i in range(5):
        _, _, d = mesh.closest_point(frame.fingertips[i])
        if d < best_d:
            best_d = d
            best_idx = i
    if best_d < d_approach:
        return best_idx, best_d
    return None


def predict_contact(position, velocity, mesh, v_min=V_MIN, fingertip_index=0):
    """Predict where the hand will meet the surface.

    Casts a ray along the velocity; on a hit the target is the hit point
    with the interpolated surface normal and eta = distance/speed. With no
    hit (or speed below v_min) it falls back to the closest surface point
    with eta = inf.
    """
    position = np.asarray(position, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    speed = float(np.linalg.norm(velocity))
    if speed > v_min:
        hit = mesh.ray_cast(position, velocity / speed)
        if hit is not None:
            point, tri, t = hit
            normal = mesh.interpolated_normal(point, tri)
            return ContactTarget(point=point, normal=normal,
                                 eta=t / speed, fingertip_index=fingertip_index)
    point, tri, _ = mesh.closest_point(position)
    normal = mesh.interpolated_normal(point, tri)
    return ContactTarget(point=point, normal=normal, eta=math.inf,
                         fingertip_index=fingertip_index)


def contact_events(stream, d_on=D_ON, d_off=D_OFF):
    """Onset/offset pairs from a timestamped distance stream.

    Onset fires when the distance crosses below d_on; offset when it later
    crosses above d_off. Only completed (onset, offset) pairs are returned;
    a contact still open at the end of the stream is dropped.
    """
    if not d_off > d_on > 0.0:
        raise InvalidHysteresis(f"need d_off > d_on > 0, got {d_on}, {d_off}")
    pairs = []
    onset_t = None
    for t, d in stream:
        if onset_t is None:
            if d < d_on:
                onset_t = t
        else:
            if d > d_off:
                pairs.append((onset_t, t))
                onset_t = None
    return pairs
