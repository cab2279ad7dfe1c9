"""Encounter-rendering controller.

Mode machine: Idle -> Approaching -> Holding -> Retracting -> Idle, plus
Approaching -> Retracting when the hand withdraws and any -> Retracting on
IK failure or safety stop. Idle holds position until a fingertip enters the
approach field; Approaching re-predicts the contact every tick and tracks a
trapezoidal joint profile toward it; Holding servoes the contact point under
the fingertip's surface projection; Retracting returns to the retract pose.

The controller is feed-forward on its own commanded state: arrival checks
use the forward kinematics of the command, not plant feedback. All emitted
commands pass the safety envelope (workspace box, TCP speed caps, reduced
speed near the hand).
"""
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import contact
from .arm_kinematics import (
    JointLimits, forward_kinematics, inverse_kinematics, jacobian,
    tcp_position,
)
from .errors import (
    ConfigError, InvalidTriangle, LimitViolation, NoConvergence, SafetyStop,
    Unreachable,
)
from .geometry.core import Pose, pose_from_z_axis
from .geometry.patch import SurfacePatch, local_patch
from .mirrorglide import LinkageGeometry, LinkageState, fit_shape, linkage_ik
from .tracking import HandFrame

IK_ERRORS = (Unreachable, NoConvergence, LimitViolation)
SPEED_TOL = 1e-9          # relative slack when re-checking scaled commands
HOLD_ROT_GAIN = 0.5       # orientation correction weight in Holding servo


class Mode(Enum):
    IDLE = "idle"
    APPROACHING = "approaching"
    HOLDING = "holding"
    RETRACTING = "retracting"


@dataclass(frozen=True)
class ControllerConfig:
    tick_rate: float = 125.0
    d_approach: float = 0.15
    v_min: float = contact.V_MIN
    replan_threshold: float = 0.005
    arrive_tolerance: float = 0.002
    d_on: float = contact.D_ON
    d_off: float = contact.D_OFF
    max_tcp_speed: float = 0.5
    max_tcp_speed_near: float = 0.25
    near_distance: float = 0.2
    lead_time: float = 0.2
    track_servo_radius: float = 0.03
    workspace_min: np.ndarray = field(
        default_factory=lambda: np.array([-0.36, 0.04, 0.015]))
    workspace_max: np.ndarray = field(
        default_factory=lambda: np.array([0.36, 0.42, 0.42]))
    retract_pose: Pose = field(
        default_factory=lambda: pose_from_z_axis(
            np.array([-0.15, 0.19, 0.24]), np.array([0.0, 0.0, 1.0])))
    home_q: np.ndarray = field(
        default_factory=lambda: np.array([-1.955, -0.166, 1.121, 0.616,
                                          -1.571, -1.187]))
    display_home_y: float = 0.15
    patch_sample_radius: float = 0.03

    def __post_init__(self):
        object.__setattr__(self, "workspace_min",
                           np.asarray(self.workspace_min, dtype=float))
        object.__setattr__(self, "workspace_max",
                           np.asarray(self.workspace_max, dtype=float))
        object.__setattr__(self, "home_q", np.asarray(self.home_q, dtype=float))
        if not (self.tick_rate > 0 and self.max_tcp_speed > 0
                and self.max_tcp_speed_near > 0):
            raise ConfigError("rates and speed caps must be positive")
        if not np.all(self.workspace_min < self.workspace_max):
            raise ConfigError("workspace box is empty")


@dataclass(frozen=True)
class JointCommand:
    """One tick's joint setpoint plus the state it moves from."""

    q: np.ndarray
    q_prev: np.ndarray
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "q_prev", np.asarray(self.q_prev, dtype=float))


@dataclass(frozen=True)
class MotionProfile:
    """Per-joint trapezoidal profiles synchronized to a common duration."""

    start: np.ndarray
    goal: np.ndarray
    duration: float
    v_peak: np.ndarray
    t_acc: np.ndarray
    accel: np.ndarray

    @staticmethod
    def plan(start, goal, limits):
        start = np.asarray(start, dtype=float)
        goal = np.asarray(goal, dtype=float)
        h = np.abs(goal - start)
        duration = 0.0
        for j in range(6):
            if h[j] < 1e-15:
                continue
            v = limits.max_velocity[j]
            a = limits.max_acceleration[j]
            if h[j] >= v * v / a:
                tj = h[j] / v + v / a
            else:
                tj = 2.0 * math.sqrt(h[j] / a)
            duration = max(duration, tj)
        v_peak = np.zeros(6)
        t_acc = np.zeros(6)
        accel = limits.max_acceleration.astype(float).copy()
        if duration > 0.0:
            for j in range(6):
                if h[j] < 1e-15:
                    continue
                a = accel[j]
                disc = (a * duration) ** 2 - 4.0 * a * h[j]
                v = (a * duration - math.sqrt(max(disc, 0.0))) / 2.0
                v_peak[j] = v
                t_acc[j] = min(v / a, duration / 2.0)
        return MotionProfile(start=start, goal=goal, duration=duration,
                             v_peak=v_peak, t_acc=t_acc, accel=accel)

    def sample(self, t):
        if t <= 0.0:
            return self.start.copy()
        if t >= self.duration:
            return self.goal.copy()
        q = np.empty(6)
        for j in range(6):
            h = abs(self.goal[j] - self.start[j])
            if h < 1e-15:
                q[j] = self.goal[j]
                continue
            s = 1.0 if self.goal[j] >= self.start[j] else -1.0
            a = self.accel[j]
            ta = self.t_acc[j]
            v = self.v_peak[j]
            if t < ta:
                d = 0.5 * a * t * t
            elif t < self.duration - ta:
                d = 0.5 * a * ta * ta + v * (t - ta)
            else:
                tr = self.duration - t
                d = h - 0.5 * a * tr * tr
            q[j] = self.start[j] + s * min(d, h)
        return q

    def velocity(self, t):
        if t < 0.0 or t > self.duration:
            return np.zeros(6)
        vel = np.empty(6)
        for j in range(6):
            h = abs(self.goal[j] - self.start[j])
            if h < 1e-15:
                vel[j] = 0.0
                continue
            s = 1.0 if self.goal[j] >= self.start[j] else -1.0
            a = self.accel[j]
            ta = self.t_acc[j]
            if t < ta:
                vel[j] = s * a * t
            elif t < self.duration - ta:
                vel[j] = s * self.v_peak[j]
            else:
                vel[j] = s * a * (self.duration - t)
        return vel


def plan_to_pose(current, goal, limits, dh):
    """Joint profile from the current configuration to a Cartesian goal."""
    q_goal = inverse_kinematics(dh, goal, seed=current, limits=limits)
    return MotionProfile.plan(np.asarray(current, dtype=float), q_goal, limits)


def safety_check(command, hand, cfg, dh):
    """Clamp a command to the safety envelope.

    TCP speed is capped (reduced near the hand) by scaling the joint delta;
    a command whose TCP would leave the workspace box is shrunk back toward
    the previous configuration. Raises SafetyStop when the previous TCP is
    already outside the box. Idempotent: a returned command passes unchanged.
    """
    hand = np.asarray(hand, dtype=float)
    tcp_prev = tcp_position(dh, command.q_prev)
    box_lo = cfg.workspace_min
    box_hi = cfg.workspace_max
    if np.any(tcp_prev < box_lo) or np.any(tcp_prev > box_hi):
        raise SafetyStop("TCP already outside the workspace box")

    q = command.q
    changed = False
    # speed cap: rescale until the current near/far limit is satisfied;
    # scaling moves the TCP, which can flip the near-hand classification,
    # hence the fixed-point loop
    for _ in range(8):
        tcp_new = tcp_position(dh, q)
        speed = float(np.linalg.norm(tcp_new - tcp_prev)) / command.dt
        near = min(float(np.linalg.norm(tcp_new - hand)),
                   float(np.linalg.norm(tcp_prev - hand))) < cfg.near_distance
        limit = cfg.max_tcp_speed_near if near else cfg.max_tcp_speed
        if speed <= limit * (1.0 + SPEED_TOL):
            break
        q = command.q_prev + (q - command.q_prev) * (limit / speed)
        changed = True
    else:
        q = command.q_prev.copy()
        changed = True

    tcp_new = tcp_position(dh, q)
    if np.any(tcp_new < box_lo) or np.any(tcp_new > box_hi):
        scale = 1.0
        for _ in range(40):
            scale *= 0.5
            q_try = command.q_prev + (q - command.q_prev) * scale
            tcp_try = tcp_position(dh, q_try)
            if np.all(tcp_try >= box_lo) and np.all(tcp_try <= box_hi):
                q = q_try
                break
        else:
            q = command.q_prev.copy()
        changed = True

    if not changed:
        return command
    return JointCommand(q=q, q_prev=command.q_prev, dt=command.dt)


@dataclass(frozen=True)
class ControllerState:
    mode: Mode
    q_cmd: np.ndarray
    linkage_cmd: LinkageState
    target: contact.ContactTarget = None
    profile: MotionProfile = None
    profile_t: float = 0.0
    active_finger: int = -1
    in_contact: bool = False
    prev_tips: np.ndarray = None
    prev_tips_t: float = -math.inf
    tip_velocities: np.ndarray = None
    last_error: str = None


class EncounterController:
    """Single-writer control loop; static configuration lives here, the
    evolving state is passed through tick() explicitly."""

    def __init__(self, cfg, dh, limits=None, linkage_geom=None, mesh=None):
        self.cfg = cfg
        self.dh = dh
        self.limits = limits if limits is not None else JointLimits()
        self.geom = linkage_geom if linkage_geom is not None else LinkageGeometry()
        self.mesh = mesh
        try:
            self.retract_q = inverse_kinematics(
                dh, cfg.retract_pose, seed=cfg.home_q, limits=self.limits)
        except IK_ERRORS as exc:
            raise ConfigError(f"retract pose unreachable: {exc}")
        self.home_center = np.array([0.0, cfg.display_home_y, 0.0])
        self.home_linkage = linkage_ik(self.geom, self.home_center)

    def initial_state(self):
        return ControllerState(mode=Mode.IDLE, q_cmd=self.retract_q.copy(),
                               linkage_cmd=self.home_linkage)

    # -- helpers ---------------------------------------------------------

    def _fingertip_velocity(self, state, frame):
        """Finite difference over the last two distinct frames; the control
        loop may see the same tracker frame more than once, in which case the
        previous estimate is reused."""
        if state.prev_tips is None or not frame.valid:
            return np.zeros((5, 3))
        if frame.timestamp <= state.prev_tips_t:
            return (state.tip_velocities if state.tip_velocities is not None
                    else np.zeros((5, 3)))
        dt = frame.timestamp - state.prev_tips_t
        return (frame.fingertips - state.prev_tips) / dt

    def target_pose(self, target):
        """Tool pose presenting the display at a contact target: TCP at the
        point, tool z along the outward surface normal."""
        return pose_from_z_axis(target.point, target.normal)

    def _linkage_for_target(self, target):
        """Fit the display to the local surface shape at the target."""
        point, tri, _ = self.mesh.closest_point(target.point)
        try:
            patch = local_patch(self.mesh, point, tri,
                                self.cfg.patch_sample_radius)
        except (InvalidTriangle, ValueError):
            return self.home_linkage
        if patch.flat:
            canonical = SurfacePatch.flat_patch(self.home_center,
                                                np.array([0.0, 0.0, 1.0]))
        else:
            canonical = SurfacePatch.spherical(self.home_center,
                                               np.array([0.0, 0.0, 1.0]),
                                               patch.curvature_radius)
        st, _, _ = fit_shape(canonical, self.geom)
        return st

    def _plan(self, state, target, note=None):
        """Plan toward a contact target; fall back to retract on IK failure."""
        pose = self.target_pose(target)
        try:
            profile = plan_to_pose(state.q_cmd, pose, self.limits, self.dh)
        except IK_ERRORS as exc:
            return self._start_retract(state, error=f"IKFailure: {exc}")
        return replace(state, mode=Mode.APPROACHING, target=target,
                       profile=profile, profile_t=0.0,
                       linkage_cmd=self._linkage_for_target(target),
                       last_error=note)

    def _start_retract(self, state, error=None):
        profile = MotionProfile.plan(state.q_cmd, self.retract_q, self.limits)
        return replace(state, mode=Mode.RETRACTING, profile=profile,
                       profile_t=0.0, target=None,
                       linkage_cmd=self.home_linkage,
                       last_error=error if error else state.last_error)

    # -- main loop -------------------------------------------------------

    def tick(self, state, frame, dt):
        """One control step: returns (state, JointCommand, LinkageState)."""
        nominal = 1.0 / self.cfg.tick_rate
        if not 0.5 * nominal <= dt <= 1.5 * nominal:
            raise ValueError(f"dt {dt} outside 50% of the nominal tick")

        velocities = self._fingertip_velocity(state, frame)
        finger_dist = None
        if state.active_finger >= 0 and frame.valid:
            _, _, finger_dist = self.mesh.closest_point(
                frame.fingertips[state.active_finger])

        if state.mode is Mode.IDLE:
            state = self._tick_idle(state, frame, velocities)
        elif state.mode is Mode.APPROACHING:
            state = self._tick_approaching(state, frame, velocities,
                                           finger_dist, dt)
        elif state.mode is Mode.HOLDING:
            state = self._tick_holding(state, frame, finger_dist, dt)
        else:
            state = self._tick_retracting(state, dt)

        q_next = state.q_cmd if state.profile is None else \
            state.profile.sample(state.profile_t)
        if state.mode is Mode.HOLDING:
            q_next = self._holding_step(state, frame, dt)

        # per-tick joint delta never exceeds the velocity limit
        max_step = self.limits.max_velocity * dt
        q_next = state.q_cmd + np.clip(q_next - state.q_cmd,
                                       -max_step, max_step)

        hand = frame.fingertips[state.active_finger] if state.active_finger >= 0 \
            else frame.palm
        command = JointCommand(q=q_next, q_prev=state.q_cmd, dt=dt)
        try:
            command = safety_check(command, hand, self.cfg, self.dh)
        except SafetyStop as exc:
            command = JointCommand(q=state.q_cmd.copy(), q_prev=state.q_cmd,
                                   dt=dt)
            if state.mode is not Mode.RETRACTING:
                state = self._start_retract(state, error=f"SafetyStop: {exc}")

        if frame.valid and frame.timestamp > state.prev_tips_t:
            state = replace(state, prev_tips=frame.fingertips.copy(),
                            prev_tips_t=frame.timestamp,
                            tip_velocities=velocities)
        state = replace(state, q_cmd=command.q)
        return state, command, state.linkage_cmd

    def _tick_idle(self, state, frame, velocities):
        if not frame.valid:
            return state
        det = contact.detect_approach(frame, self.mesh, self.cfg.d_approach)
        if det is None:
            return state
        idx, _ = det
        target = contact.predict_contact(frame.fingertips[idx],
                                         velocities[idx], self.mesh,
                                         v_min=self.cfg.v_min,
                                         fingertip_index=idx)
        state = replace(state, active_finger=idx, in_contact=False)
        return self._plan(state, target)

    def _tick_approaching(self, state, frame, velocities, finger_dist, dt):
        if not frame.valid or finger_dist is None:
            return replace(state, profile_t=state.profile_t + dt)
        if finger_dist >= self.cfg.d_approach:
            return self._start_retract(state)

        idx = state.active_finger
        new_target = contact.predict_contact(frame.fingertips[idx],
                                             velocities[idx], self.mesh,
                                             v_min=self.cfg.v_min,
                                             fingertip_index=idx)
        if (np.linalg.norm(new_target.point - state.target.point)
                > self.cfg.replan_threshold):
            state = self._plan(state, new_target)
            if state.mode is not Mode.APPROACHING:
                return state

        state = replace(state, profile_t=state.profile_t + dt)
        if not state.in_contact and finger_dist < self.cfg.d_on:
            state = replace(state, in_contact=True)
        q_now = state.profile.sample(state.profile_t)
        pose_err = float(np.linalg.norm(tcp_position(self.dh, q_now)
                                        - state.target.point))
        if pose_err < self.cfg.arrive_tolerance and state.in_contact:
            state = replace(state, mode=Mode.HOLDING, profile=None,
                            profile_t=0.0)
        return state

    def _tick_holding(self, state, frame, finger_dist, dt):
        if not frame.valid or finger_dist is None:
            return state
        if state.in_contact and finger_dist > self.cfg.d_off:
            state = replace(state, in_contact=False)
            return self._start_retract(state)
        if finger_dist >= self.cfg.d_approach:
            return self._start_retract(state)
        # follow the fingertip's surface projection
        point, tri, _ = self.mesh.closest_point(
            frame.fingertips[state.active_finger])
        normal = self.mesh.interpolated_normal(point, tri)
        target = contact.ContactTarget(point=point, normal=normal,
                                       eta=math.inf,
                                       fingertip_index=state.active_finger)
        return replace(state, target=target)

    def _tick_retracting(self, state, dt):
        # transition one tick after the profile end so the goal itself gets
        # commanded before the hold
        if state.profile is None or state.profile_t >= state.profile.duration:
            return replace(state, mode=Mode.IDLE, profile=None, profile_t=0.0,
                           target=None, active_finger=-1, in_contact=False)
        return replace(state, profile_t=state.profile_t + dt)

    def _holding_step(self, state, frame, dt):
        """One resolved-rate step of the contact servo."""
        goal_pose = self.target_pose(state.target)
        current = forward_kinematics(self.dh, state.q_cmd)
        e_p = goal_pose.pos - current.pos
        # align tool z with the surface normal
        z_cur = current.rotation_matrix()[:, 2]
        e_r = np.cross(z_cur, state.target.normal) * HOLD_ROT_GAIN
        e = np.concatenate([e_p, e_r])
        J = jacobian(self.dh, state.q_cmd)
        lam2 = 1e-4
        dq = J.T @ np.linalg.solve(J @ J.T + lam2 * np.eye(6), e)
        return state.q_cmd + dq
