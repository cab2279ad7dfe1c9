"""Shape-display end-effector kinematics: planar five-bar plus flank DOF.

Display frame convention: x is lateral (along the line of the three contact
points), y is elevation in the linkage plane, z is the membrane normal
toward the user. The two actuated base joints sit at (±w_b/2, 0); each drives
a proximal link of length l_a whose elbow connects through a distal link of
length l_b to the center contact point. The third DOF displaces both flank
contact points symmetrically along -z by s_flank, so positive s_flank forms
a convex dome with its apex at the center.

Branch choices are fixed for determinism: the center point is the circle
intersection on the +y side of the elbow-elbow line, and each elbow takes
the outward solution for its side.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, OutOfWorkspace

ELBOW_DET_MIN = 1e-9


@dataclass(frozen=True)
class LinkageGeometry:
    """Link lengths and contact offsets (m)."""

    l_a: float = 0.1
    l_b: float = 0.1
    w_b: float = 0.08
    w_f: float = 0.03
    s_flank_max: float = 0.02

    def __post_init__(self):
        for name in ("l_a", "l_b", "w_b", "w_f", "s_flank_max"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not self.l_a + self.l_b > self.w_b / 2.0:
            raise ValueError("workspace is empty: l_a + l_b <= w_b/2")

    @staticmethod
    def from_dict(d):
        return LinkageGeometry(**d)

    def base_joints(self):
        return (np.array([-self.w_b / 2.0, 0.0]),
                np.array([+self.w_b / 2.0, 0.0]))


@dataclass(frozen=True)
class LinkageState:
    """Actuated coordinates: base angles (rad) and flank displacement (m)."""

    theta_left: float
    theta_right: float
    s_flank: float = 0.0

    def as_array(self):
        return np.array([self.theta_left, self.theta_right, self.s_flank])

    @staticmethod
    def from_array(v):
        return LinkageState(float(v[0]), float(v[1]), float(v[2]))


@dataclass(frozen=True)
class ContactTriple:
    """The three contact points in the display frame (m)."""

    p_left: np.ndarray
    p_center: np.ndarray
    p_right: np.ndarray


def _elbows(geom, state):
    b_left, b_right = geom.base_joints()
    e_left = b_left + geom.l_a * np.array([math.cos(state.theta_left),
                                           math.sin(state.theta_left)])
    e_right = b_right + geom.l_a * np.array([math.cos(state.theta_right),
                                             math.sin(state.theta_right)])
    return e_left, e_right


def linkage_fk(geom, state):
    """Contact triple for a linkage state.

    Raises DegenerateConfiguration when the distal-link circles do not
    intersect (links folded too far apart or coincident elbows).
    """
    e_left, e_right = _elbows(geom, state)
    delta = e_right - e_left
    d = float(np.linalg.norm(delta))
    if d < 1e-12:
        raise DegenerateConfiguration("elbows coincide")
    half = d / 2.0
    h2 = geom.l_b * geom.l_b - half * half
    if h2 <= ELBOW_DET_MIN:
        raise DegenerateConfiguration(
            f"distal circles do not intersect (elbow gap {d:.4f} m)")
    h = math.sqrt(h2)
    mid = (e_left + e_right) / 2.0
    u = delta / d
    # +y-side branch: the intersection left of the e_left -> e_right line
    center2 = mid + h * np.array([-u[1], u[0]])
    p_center = np.array([center2[0], center2[1], 0.0])
    flank = np.array([0.0, 0.0, -state.s_flank])
    p_left = p_center + np.array([-geom.w_f, 0.0, 0.0]) + flank
    p_right = p_center + np.array([+geom.w_f, 0.0, 0.0]) + flank
    return ContactTriple(p_left=p_left, p_center=p_center, p_right=p_right)


def _side_angle(base, target2, l_a, l_b, outward_sign):
    delta = target2 - base
    D = float(np.linalg.norm(delta))
    if D < 1e-12 or D > l_a + l_b or D < abs(l_a - l_b):
        raise OutOfWorkspace(
            f"target at {D:.4f} m from base joint is outside [|l_a-l_b|, l_a+l_b]")
    along = (l_a * l_a - l_b * l_b + D * D) / (2.0 * D)
    h2 = l_a * l_a - along * along
    if h2 < 0.0:
        h2 = 0.0
    h = math.sqrt(h2)
    u = delta / D
    perp = np.array([-u[1], u[0]])
    elbow = base + along * u + outward_sign * h * perp
    return math.atan2(elbow[1] - base[1], elbow[0] - base[0])


def linkage_ik(geom, target_center):
    """Base angles placing the center contact point at target_center.

    Accepts a 2-vector in the linkage plane or a 3-vector whose (x, y) is
    used. Returns a LinkageState with s_flank = 0. The usable workspace is
    the elbow-out working mode: targets whose elbow-out solution is not
    reproduced by the fixed forward-kinematics branch raise OutOfWorkspace,
    exactly like targets beyond link reach.
    """
    t = np.asarray(target_center, dtype=float)
    t2 = t[:2]
    b_left, b_right = geom.base_joints()
    theta_left = _side_angle(b_left, t2, geom.l_a, geom.l_b, +1.0)
    theta_right = _side_angle(b_right, t2, geom.l_a, geom.l_b, -1.0)
    state = LinkageState(theta_left=theta_left, theta_right=theta_right,
                         s_flank=0.0)
    try:
        triple = linkage_fk(geom, state)
    except DegenerateConfiguration:
        raise OutOfWorkspace("target outside the elbow-out working mode")
    if np.linalg.norm(triple.p_center[:2] - t2) > 1e-9:
        raise OutOfWorkspace("target outside the elbow-out working mode")
    return state


def required_flank_drop(curvature_radius, w_f):
    """Sagitta of a circle of given radius across the half-chord w_f."""
    if curvature_radius <= w_f:
        return None
    return curvature_radius - math.sqrt(curvature_radius * curvature_radius
                                        - w_f * w_f)


def fit_shape(patch, geom):
    """Pose the display to render a surface patch.

    The patch must already be expressed in the display frame (point in the
    linkage plane z=0, normal +z). Returns (state, triple, clamped): clamped
    is True when the required flank drop exceeds the actuation range and was
    clamped to ±s_flank_max.
    """
    state0 = linkage_ik(geom, patch.point)
    clamped = False
    if patch.flat:
        s = 0.0
    else:
        s = required_flank_drop(patch.curvature_radius, geom.w_f)
        if s is None or s > geom.s_flank_max:
            s = geom.s_flank_max
            clamped = True
    state = LinkageState(theta_left=state0.theta_left,
                         theta_right=state0.theta_right, s_flank=s)
    return state, linkage_fk(geom, state), clamped


def membrane_error(triple, patch, samples=201):
    """Max deviation between the membrane curve and the patch circle.

    The membrane is modeled as the quadratic through the three contact
    points; the reference is the osculating circle of radius
    patch.curvature_radius tangent at the center point (a straight line for
    flat patches). Sampled across the flank span.
    """
    w = float(np.linalg.norm((triple.p_right - triple.p_left)[:2])) / 2.0
    if w < 1e-12:
        w = abs(triple.p_right[0] - triple.p_left[0]) / 2.0
    drop = float(triple.p_center[2] - 0.5 * (triple.p_left[2] + triple.p_right[2]))
    xs = np.linspace(-w, w, samples)
    quad = -drop * (xs / w) ** 2
    if patch.flat:
        circ = np.zeros_like(xs)
    else:
        R = patch.curvature_radius
        span = min(w, R * (1.0 - 1e-12))
        xs = np.linspace(-span, span, samples)
        quad = -drop * (xs / w) ** 2
        circ = -(R - np.sqrt(R * R - xs * xs))
    return float(np.max(np.abs(quad - circ)))
