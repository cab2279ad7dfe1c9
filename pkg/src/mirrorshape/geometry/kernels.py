"""Numba kernels for triangle-mesh proximity and ray queries.

The BVH is stored as flat arrays (bounds, child indices, leaf ranges plus a
triangle permutation) so traversal can run inside nopython loops at control
rates. Ties between triangles are broken by the lower original triangle
index, which makes the BVH result identical to an exhaustive scan that uses
the same per-triangle routine.
"""
import numpy as np
from numba import njit

STACK_DEPTH = 128


@njit(cache=True)
def tri_closest_point(a, b, c, q):
    """Closest point to q on triangle (a, b, c).

    Region-by-region case analysis over the triangle's Voronoi regions
    (vertices, edges, interior).
    """
    ab0 = b[0] - a[0]; ab1 = b[1] - a[1]; ab2 = b[2] - a[2]
    ac0 = c[0] - a[0]; ac1 = c[1] - a[1]; ac2 = c[2] - a[2]
    ap0 = q[0] - a[0]; ap1 = q[1] - a[1]; ap2 = q[2] - a[2]

    d1 = ab0 * ap0 + ab1 * ap1 + ab2 * ap2
    d2 = ac0 * ap0 + ac1 * ap1 + ac2 * ap2
    if d1 <= 0.0 and d2 <= 0.0:
        return a[0], a[1], a[2]

    bp0 = q[0] - b[0]; bp1 = q[1] - b[1]; bp2 = q[2] - b[2]
    d3 = ab0 * bp0 + ab1 * bp1 + ab2 * bp2
    d4 = ac0 * bp0 + ac1 * bp1 + ac2 * bp2
    if d3 >= 0.0 and d4 <= d3:
        return b[0], b[1], b[2]

    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return a[0] + v * ab0, a[1] + v * ab1, a[2] + v * ab2

    cp0 = q[0] - c[0]; cp1 = q[1] - c[1]; cp2 = q[2] - c[2]
    d5 = ab0 * cp0 + ab1 * cp1 + ab2 * cp2
    d6 = ac0 * cp0 + ac1 * cp1 + ac2 * cp2
    if d6 >= 0.0 and d5 <= d6:
        return c[0], c[1], c[2]

    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return a[0] + w * ac0, a[1] + w * ac1, a[2] + w * ac2

    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return (b[0] + w * (c[0] - b[0]),
                b[1] + w * (c[1] - b[1]),
                b[2] + w * (c[2] - b[2]))

    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return (a[0] + ab0 * v + ac0 * w,
            a[1] + ab1 * v + ac1 * w,
            a[2] + ab2 * v + ac2 * w)


@njit(cache=True)
def tri_closest_point_d2(vertices, triangles, tri_idx, q):
    """Closest point on triangle `tri_idx` plus its squared distance to q."""
    ia = triangles[tri_idx, 0]
    ib = triangles[tri_idx, 1]
    ic = triangles[tri_idx, 2]
    px, py, pz = tri_closest_point(vertices[ia], vertices[ib], vertices[ic], q)
    dx = px - q[0]; dy = py - q[1]; dz = pz - q[2]
    return px, py, pz, dx * dx + dy * dy + dz * dz


@njit(cache=True)
def ray_triangle_t(a, b, c, origin, direction):
    """Möller–Trumbore ray/triangle parameter; -1.0 on miss. Two-sided."""
    e10 = b[0] - a[0]; e11 = b[1] - a[1]; e12 = b[2] - a[2]
    e20 = c[0] - a[0]; e21 = c[1] - a[1]; e22 = c[2] - a[2]
    # h = direction x e2
    h0 = direction[1] * e22 - direction[2] * e21
    h1 = direction[2] * e20 - direction[0] * e22
    h2 = direction[0] * e21 - direction[1] * e20
    det = e10 * h0 + e11 * h1 + e12 * h2
    if det > -1e-14 and det < 1e-14:
        return -1.0
    inv = 1.0 / det
    s0 = origin[0] - a[0]; s1 = origin[1] - a[1]; s2 = origin[2] - a[2]
    u = inv * (s0 * h0 + s1 * h1 + s2 * h2)
    if u < 0.0 or u > 1.0:
        return -1.0
    # qv = s x e1
    q0 = s1 * e12 - s2 * e11
    q1 = s2 * e10 - s0 * e12
    q2 = s0 * e11 - s1 * e10
    v = inv * (direction[0] * q0 + direction[1] * q1 + direction[2] * q2)
    if v < 0.0 or u + v > 1.0:
        return -1.0
    t = inv * (e20 * q0 + e21 * q1 + e22 * q2)
    if t < 0.0:
        return -1.0
    return t


@njit(cache=True)
def ray_triangle_t_indexed(vertices, triangles, tri_idx, origin, direction):
    ia = triangles[tri_idx, 0]
    ib = triangles[tri_idx, 1]
    ic = triangles[tri_idx, 2]
    return ray_triangle_t(vertices[ia], vertices[ib], vertices[ic],
                          origin, direction)


@njit(cache=True)
def _aabb_d2(bmin, bmax, q):
    d2 = 0.0
    for k in range(3):
        v = q[k]
        if v < bmin[k]:
            e = bmin[k] - v
            d2 += e * e
        elif v > bmax[k]:
            e = v - bmax[k]
            d2 += e * e
    return d2


@njit(cache=True)
def bvh_closest_point(vertices, triangles, node_min, node_max,
                      node_left, node_right, node_start, node_count,
                      order, q):
    """Globally closest surface point. Returns (px, py, pz, d2, tri_idx)."""
    best_d2 = np.inf
    best_idx = -1
    bx = 0.0; by = 0.0; bz = 0.0
    stack = np.empty(STACK_DEPTH, dtype=np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if _aabb_d2(node_min[node], node_max[node], q) > best_d2:
            continue
        left = node_left[node]
        if left < 0:
            start = node_start[node]
            for i in range(start, start + node_count[node]):
                tri = order[i]
                px, py, pz, d2 = tri_closest_point_d2(vertices, triangles, tri, q)
                if d2 < best_d2 or (d2 == best_d2 and tri < best_idx):
                    best_d2 = d2
                    best_idx = tri
                    bx = px; by = py; bz = pz
        else:
            right = node_right[node]
            dl = _aabb_d2(node_min[left], node_max[left], q)
            dr = _aabb_d2(node_min[right], node_max[right], q)
            # push farther child first so the nearer one is explored first
            if dl <= dr:
                if dr <= best_d2:
                    stack[top] = right
                    top += 1
                stack[top] = left
                top += 1
            else:
                if dl <= best_d2:
                    stack[top] = left
                    top += 1
                stack[top] = right
                top += 1
    return bx, by, bz, best_d2, best_idx


@njit(cache=True)
def _ray_aabb_tnear(bmin, bmax, origin, direction):
    """Entry parameter of a ray into an AABB, or inf when it misses."""
    t0 = 0.0
    t1 = np.inf
    for k in range(3):
        d = direction[k]
        if d > 1e-300 or d < -1e-300:
            inv = 1.0 / d
            tn = (bmin[k] - origin[k]) * inv
            tf = (bmax[k] - origin[k]) * inv
            if tn > tf:
                tn, tf = tf, tn
            if tn > t0:
                t0 = tn
            if tf < t1:
                t1 = tf
        else:
            if origin[k] < bmin[k] or origin[k] > bmax[k]:
                return np.inf
    if t0 > t1:
        return np.inf
    return t0


@njit(cache=True)
def bvh_raycast(vertices, triangles, node_min, node_max,
                node_left, node_right, node_start, node_count,
                order, origin, direction):
    """First hit along the ray. Returns (t, tri_idx); t = -1.0 on miss."""
    best_t = np.inf
    best_idx = -1
    stack = np.empty(STACK_DEPTH, dtype=np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if _ray_aabb_tnear(node_min[node], node_max[node], origin, direction) > best_t:
            continue
        left = node_left[node]
        if left < 0:
            start = node_start[node]
            for i in range(start, start + node_count[node]):
                tri = order[i]
                t = ray_triangle_t_indexed(vertices, triangles, tri,
                                           origin, direction)
                if t >= 0.0 and (t < best_t or (t == best_t and tri < best_idx)):
                    best_t = t
                    best_idx = tri
        else:
            right = node_right[node]
            tl = _ray_aabb_tnear(node_min[left], node_max[left], origin, direction)
            tr = _ray_aabb_tnear(node_min[right], node_max[right], origin, direction)
            if tl <= tr:
                if tr <= best_t:
                    stack[top] = right
                    top += 1
                if tl <= best_t:
                    stack[top] = left
                    top += 1
            else:
                if tl <= best_t:
                    stack[top] = left
                    top += 1
                if tr <= best_t:
                    stack[top] = right
                    top += 1
    if best_idx < 0:
        return -1.0, -1
    return best_t, best_idx
