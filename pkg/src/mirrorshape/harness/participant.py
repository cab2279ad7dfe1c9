"""Simulated participant: scripted index-fingertip paths plus tracker noise.

The sweep model drags the fingertip along a platform at constant speed and
fixed height; the poke model descends onto a point, dwells, and withdraws.
Only the index fingertip interacts; the remaining fingers ride above it.
"""
import numpy as np

from ..errors import ConfigError
from ..tracking import HandFrame, load_trajectory

FINGER_SPREAD = 0.03
FINGER_LIFT = 0.12
PALM_LIFT = 0.16
INDEX = 1


def hand_frame_at(t, index_tip):
    tips = np.tile(np.asarray(index_tip, dtype=float), (5, 1))
    for i in range(5):
        if i == INDEX:
            continue
        tips[i] += [FINGER_SPREAD * (i - INDEX), 0.0, FINGER_LIFT]
    palm = np.asarray(index_tip, dtype=float) + [0.0, 0.0, PALM_LIFT]
    return HandFrame(timestamp=t, fingertips=tips, palm=palm)


class SweepTrajectory:
    """Constant-velocity pass along the platform's long (x) axis."""

    def __init__(self, length=0.4, speed=0.1, height=0.005, lead=0.15,
                 exit_margin=0.12, y=0.19, top_z=0.10):
        if speed <= 0 or length <= 0:
            raise ConfigError("sweep needs positive speed and length")
        self.speed = speed
        self.y = y
        self.z = top_z + height
        self.x_start = -length / 2.0 - lead
        self.x_end = length / 2.0 + exit_margin

    @property
    def duration(self):
        return (self.x_end - self.x_start) / self.speed

    def index_position(self, t):
        x = min(self.x_start + self.speed * max(t, 0.0), self.x_end)
        return np.array([x, self.y, self.z])

    def frame(self, t):
        return hand_frame_at(t, self.index_position(t))


class PokeTrajectory:
    """Straight-line descent onto a surface point, dwell, then withdrawal."""

    def __init__(self, target=(0.05, 0.19, 0.10), lead=0.3, speed=0.2,
                 dwell=0.5, retreat_speed=0.4, direction=(0.0, 0.0, -1.0)):
        if speed <= 0 or lead <= 0:
            raise ConfigError("poke needs positive speed and lead")
        self.target = np.asarray(target, dtype=float)
        d = np.asarray(direction, dtype=float)
        self.direction = d / np.linalg.norm(d)
        self.lead = lead
        self.speed = speed
        self.dwell = dwell
        self.retreat_speed = retreat_speed
        self.start = self.target - self.direction * lead

    @property
    def arrival_time(self):
        return self.lead / self.speed

    def index_position(self, t):
        t_arr = self.arrival_time
        if t < t_arr:
            return self.start + self.direction * self.speed * t
        if t < t_arr + self.dwell:
            return self.target.copy()
        back = self.retreat_speed * (t - t_arr - self.dwell)
        return self.target - self.direction * back

    def frame(self, t):
        return hand_frame_at(t, self.index_position(t))


class AbsentHand:
    """No hand for the whole run: every frame is invalid."""

    def index_position(self, t):
        return np.full(3, np.nan)

    def frame(self, t):
        return HandFrame(timestamp=t, fingertips=np.zeros((5, 3)),
                         palm=np.zeros(3), valid=False)


class RecordedTrajectory:
    """Frames replayed from a trajectory file (raw tracker feed)."""

    def __init__(self, path):
        self.frames = load_trajectory(path)
        if not self.frames:
            raise ConfigError(f"trajectory file {path} has no frames")
        self._times = np.array([f.timestamp for f in self.frames])

    def _latest(self, t):
        idx = int(np.searchsorted(self._times, t, side="right")) - 1
        return self.frames[max(idx, 0)]

    def index_position(self, t):
        return self._latest(t).fingertips[INDEX]

    def frame(self, t):
        latest = self._latest(t)
        if latest.timestamp > t:
            return HandFrame(timestamp=t, fingertips=np.zeros((5, 3)),
                             palm=np.zeros(3), valid=False)
        return HandFrame(timestamp=t, fingertips=latest.fingertips,
                         palm=latest.palm, valid=latest.valid)


def build_trajectory(spec):
    """Trajectory object from a scenario `trajectory` entry."""
    if spec is None:
        spec = {"sweep": {}}
    if isinstance(spec, str):
        return RecordedTrajectory(spec)
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError("trajectory must be a path or a single-kind object")
    kind, params = next(iter(spec.items()))
    params = dict(params)
    if kind == "sweep":
        allowed = ("length", "speed", "height", "lead", "exit_margin", "y",
                   "top_z")
        unknown = set(params) - set(allowed)
        if unknown:
            raise ConfigError(f"unknown keys in trajectory.sweep: {sorted(unknown)}")
        return SweepTrajectory(**params)
    if kind == "poke":
        allowed = ("target", "lead", "speed", "dwell", "retreat_speed",
                   "direction")
        unknown = set(params) - set(allowed)
        if unknown:
            raise ConfigError(f"unknown keys in trajectory.poke: {sorted(unknown)}")
        return PokeTrajectory(**params)
    if kind == "none":
        if params:
            raise ConfigError("trajectory.none takes no parameters")
        return AbsentHand()
    raise ConfigError(f"unknown trajectory kind {kind!r}")


def add_noise(frame, rng, sigma):
    """Additive iid Gaussian tracker noise on every position."""
    if sigma == 0.0 or not frame.valid:
        return frame
    tips = frame.fingertips + rng.normal(0.0, sigma, size=(5, 3))
    palm = frame.palm + rng.normal(0.0, sigma, size=3)
    return HandFrame(timestamp=frame.timestamp, fingertips=tips, palm=palm,
                     valid=frame.valid)
