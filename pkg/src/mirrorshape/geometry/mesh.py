"""Triangle meshes with a median-split AABB BVH and an OBJ loader.

Meshes are immutable after construction; all queries are read-only and
safe to call concurrently.
"""
import numpy as np

from ..errors import EmptyMesh, InvalidTriangle, MeshLoadError
from . import kernels

MIN_TRIANGLE_AREA = 1e-12
BVH_LEAF_SIZE = 4


class TriMesh:
    """Vertices (N,3 m), triangles (M,3 indices), derived vertex normals."""

    def __init__(self, vertices, triangles):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ValueError("vertices must be (N, 3)")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise ValueError("triangles must be (M, 3)")
        if len(triangles) == 0:
            raise EmptyMesh("mesh has no triangles")
        if not np.all(np.isfinite(vertices)):
            raise ValueError("vertices must be finite")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise ValueError("triangle index out of range")

        corners = vertices[triangles]
        cross = np.cross(corners[:, 1] - corners[:, 0],
                         corners[:, 2] - corners[:, 0])
        areas2 = np.linalg.norm(cross, axis=1)
        if np.any(areas2 * 0.5 <= MIN_TRIANGLE_AREA):
            bad = int(np.argmin(areas2))
            raise ValueError(f"degenerate triangle {bad} (area <= {MIN_TRIANGLE_AREA})")

        self.vertices = vertices
        self.triangles = triangles
        self.face_normals = cross / areas2[:, None]
        # area-weighted vertex normals: the unnormalized cross product already
        # carries twice the face area
        vn = np.zeros_like(vertices)
        np.add.at(vn, triangles[:, 0], cross)
        np.add.at(vn, triangles[:, 1], cross)
        np.add.at(vn, triangles[:, 2], cross)
        norms = np.linalg.norm(vn, axis=1)
        norms[norms < 1e-30] = 1.0
        self.vertex_normals = vn / norms[:, None]
        self._build_bvh()

    def _build_bvh(self):
        corners = self.vertices[self.triangles]
        tri_min = corners.min(axis=1)
        tri_max = corners.max(axis=1)
        centroids = corners.mean(axis=1)

        order = np.arange(len(self.triangles), dtype=np.int64)
        node_min, node_max = [], []
        node_left, node_right = [], []
        node_start, node_count = [], []

        # (lo, hi, slot) ranges over `order`; slot is the node index to fill
        stack = [(0, len(order), 0)]
        node_min.append(None); node_max.append(None)
        node_left.append(-1); node_right.append(-1)
        node_start.append(0); node_count.append(0)
        while stack:
            lo, hi, slot = stack.pop()
            idx = order[lo:hi]
            bmin = tri_min[idx].min(axis=0)
            bmax = tri_max[idx].max(axis=0)
            node_min[slot] = bmin
            node_max[slot] = bmax
            if hi - lo <= BVH_LEAF_SIZE:
                node_left[slot] = -1
                node_right[slot] = -1
                node_start[slot] = lo
                node_count[slot] = hi - lo
                continue
            cen = centroids[idx]
            axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
            local = np.argsort(cen[:, axis], kind="stable")
            order[lo:hi] = idx[local]
            mid = lo + (hi - lo) // 2
            left = len(node_left)
            right = left + 1
            for lst, fill in ((node_min, None), (node_max, None),
                              (node_left, -1), (node_right, -1),
                              (node_start, 0), (node_count, 0)):
                lst.extend([fill, fill])
            node_left[slot] = left
            node_right[slot] = right
            stack.append((lo, mid, left))
            stack.append((mid, hi, right))

        self._order = order
        self._node_min = np.ascontiguousarray(np.stack(node_min))
        self._node_max = np.ascontiguousarray(np.stack(node_max))
        self._node_left = np.array(node_left, dtype=np.int64)
        self._node_right = np.array(node_right, dtype=np.int64)
        self._node_start = np.array(node_start, dtype=np.int64)
        self._node_count = np.array(node_count, dtype=np.int64)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def closest_point(self, q):
        """Globally closest surface point: (point (3,), triangle index, distance)."""
        q = np.asarray(q, dtype=np.float64)
        px, py, pz, d2, idx = kernels.bvh_closest_point(
            self.vertices, self.triangles,
            self._node_min, self._node_max,
            self._node_left, self._node_right,
            self._node_start, self._node_count,
            self._order, q)
        return np.array([px, py, pz]), int(idx), float(np.sqrt(d2))

    def ray_cast(self, origin, direction):
        """First intersection along a unit-direction ray, or None on a miss.

        Returns (point (3,), triangle index, t) with point = origin + t*direction.
        """
        origin = np.asarray(origin, dtype=np.float64)
        direction = np.asarray(direction, dtype=np.float64)
        if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")
        t, idx = kernels.bvh_raycast(
            self.vertices, self.triangles,
            self._node_min, self._node_max,
            self._node_left, self._node_right,
            self._node_start, self._node_count,
            self._order, origin, direction)
        if idx < 0:
            return None
        return origin + t * direction, int(idx), float(t)

    def barycentric(self, point, tri_idx):
        """Barycentric coordinates of a point assumed on triangle tri_idx."""
        if tri_idx < 0 or tri_idx >= len(self.triangles):
            raise InvalidTriangle(f"triangle index {tri_idx} out of range")
        a, b, c = self.vertices[self.triangles[tri_idx]]
        v0 = b - a
        v1 = c - a
        v2 = np.asarray(point, dtype=float) - a
        d00 = v0 @ v0
        d01 = v0 @ v1
        d11 = v1 @ v1
        d20 = v2 @ v0
        d21 = v2 @ v1
        denom = d00 * d11 - d01 * d01
        v = (d11 * d20 - d01 * d21) / denom
        w = (d00 * d21 - d01 * d20) / denom
        return np.array([1.0 - v - w, v, w])

    def interpolated_normal(self, point, tri_idx):
        """Barycentric blend of the triangle's vertex normals, unit length."""
        bary = self.barycentric(point, tri_idx)
        ns = self.vertex_normals[self.triangles[tri_idx]]
        n = bary @ ns
        ln = np.linalg.norm(n)
        if ln < 1e-12:
            return self.face_normals[tri_idx].copy()
        return n / ln


def closest_point(mesh, q):
    return mesh.closest_point(q)


def ray_cast(mesh, origin, direction):
    return mesh.ray_cast(origin, direction)


def _parse_face_vertex(token):
    head = token.split("/")[0]
    return int(head)


def load_obj(path):
    """Load the `v`/`f` subset of Wavefront OBJ into a TriMesh.

    Faces must be triangles with 1-based indices; other record types are
    ignored. Malformed v/f records abort with a line-numbered error.
    """
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            tokens = raw.split()
            if not tokens or tokens[0] not in ("v", "f"):
                continue
            if tokens[0] == "v":
                if len(tokens) < 4:
                    raise MeshLoadError(line_number, "vertex needs 3 coordinates")
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError:
                    raise MeshLoadError(line_number, "non-numeric vertex coordinate")
            else:
                if len(tokens) != 4:
                    raise MeshLoadError(line_number,
                                        "faces must be triangulated (3 vertices)")
                try:
                    idx = [_parse_face_vertex(t) for t in tokens[1:4]]
                except ValueError:
                    raise MeshLoadError(line_number, "non-integer face index")
                if any(i <= 0 for i in idx):
                    raise MeshLoadError(line_number, "face indices must be >= 1")
                faces.append((line_number, idx))
    n = len(vertices)
    triangles = []
    for line_number, idx in faces:
        if any(i > n for i in idx):
            raise MeshLoadError(line_number, f"face index beyond {n} vertices")
        triangles.append([i - 1 for i in idx])
    if not triangles:
        raise EmptyMesh(f"{path}: no faces found")
    return TriMesh(np.array(vertices), np.array(triangles))
