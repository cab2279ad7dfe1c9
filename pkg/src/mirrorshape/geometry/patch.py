"""Local surface patches: interpolated normal plus a 1D curvature estimate.

The curvature probe walks a handful of tangent directions, projects short
tangent steps back onto the mesh, and fits a circle through the samples in
the (tangent, normal) plane. The direction with the smallest fitted radius
wins; if every direction is straight the patch is flat.
"""
import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidTriangle
from .core import normalized

FLAT_RADIUS_LIMIT = 100.0     # fitted radii beyond this are treated as flat
N_PROBE_DIRECTIONS = 8
SAMPLE_OFFSETS = (-1.0, -0.5, 0.0, 0.5, 1.0)
ON_TRIANGLE_TOL = 1e-9


@dataclass(frozen=True)
class SurfacePatch:
    """Contact-point neighborhood: position, outward normal, and the radius
    of the osculating circle along `tangent` (flat=True means straight)."""

    point: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature_radius: float
    flat: bool

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        t = np.asarray(self.tangent, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9 or abs(np.linalg.norm(t) - 1.0) > 1e-9:
            raise ValueError("normal and tangent must be unit vectors")
        if abs(float(n @ t)) > 1e-9:
            raise ValueError("normal and tangent must be orthogonal")
        if not self.flat and not self.curvature_radius > 0.0:
            raise ValueError("curved patch needs curvature_radius > 0")
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "tangent", t)

    @staticmethod
    def flat_patch(point, normal, tangent=None):
        n = normalized(np.asarray(normal, dtype=float))
        if tangent is None:
            tangent = _tangent_basis(n)[0]
        return SurfacePatch(point=np.asarray(point, dtype=float), normal=n,
                            tangent=tangent, curvature_radius=math.inf, flat=True)

    @staticmethod
    def spherical(point, normal, radius, tangent=None):
        n = normalized(np.asarray(normal, dtype=float))
        if tangent is None:
            tangent = _tangent_basis(n)[0]
        return SurfacePatch(point=np.asarray(point, dtype=float), normal=n,
                            tangent=tangent, curvature_radius=float(radius),
                            flat=False)


def _tangent_basis(normal):
    seed = np.array([1.0, 0.0, 0.0])
    if abs(normal @ seed) > 0.9:
        seed = np.array([0.0, 1.0, 0.0])
    e1 = normalized(seed - (seed @ normal) * normal)
    e2 = np.cross(normal, e1)
    return e1, e2


def _fit_circle_radius(u, w):
    """Kåsa algebraic circle fit in local (u, w) coordinates.

    Returns the fitted radius, or inf when the samples are straight or the
    fit degenerates.
    """
    span = float(np.max(np.abs(u)))
    if float(np.max(np.abs(w))) < 1e-12 + 1e-9 * span:
        return math.inf
    A = np.column_stack([2.0 * u, 2.0 * w, np.ones_like(u)])
    b = u * u + w * w
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    cu, cw, c = sol
    r2 = c + cu * cu + cw * cw
    if r2 <= 0.0:
        return math.inf
    return float(np.sqrt(r2))


def local_patch(mesh, point, triangle, sample_radius):
    """Fit a SurfacePatch at a surface point of the mesh.

    `point` must lie on the given triangle (within tolerance); sampling uses
    closest-point projections of tangent steps up to `sample_radius`.
    """
    if sample_radius <= 0.0:
        raise ValueError("sample_radius must be positive")
    point = np.asarray(point, dtype=float)
    if triangle < 0 or triangle >= mesh.n_triangles:
        raise InvalidTriangle(f"triangle index {triangle} out of range")
    a, b, c = mesh.vertices[mesh.triangles[triangle]]
    from .kernels import tri_closest_point
    px, py, pz = tri_closest_point(a, b, c, point)
    if np.linalg.norm(point - np.array([px, py, pz])) > ON_TRIANGLE_TOL:
        raise InvalidTriangle("point does not lie on the given triangle")

    normal = mesh.interpolated_normal(point, triangle)
    e1, e2 = _tangent_basis(normal)

    best_radius = math.inf
    best_dir = e1
    for k in range(N_PROBE_DIRECTIONS):
        ang = math.pi * k / N_PROBE_DIRECTIONS
        d = math.cos(ang) * e1 + math.sin(ang) * e2
        u = np.empty(len(SAMPLE_OFFSETS))
        w = np.empty(len(SAMPLE_OFFSETS))
        for i, s in enumerate(SAMPLE_OFFSETS):
            probe = point + (s * sample_radius) * d
            sp, _, _ = mesh.closest_point(probe)
            rel = sp - point
            u[i] = rel @ d
            w[i] = rel @ normal
        r = _fit_circle_radius(u, w)
        if r < best_radius:
            best_radius = r
            best_dir = d

    if best_radius > FLAT_RADIUS_LIMIT:
        return SurfacePatch(point=point, normal=normal, tangent=e1,
                            curvature_radius=math.inf, flat=True)
    return SurfacePatch(point=point, normal=normal, tangent=best_dir,
                        curvature_radius=best_radius, flat=False)
