"""Procedural test/scenario meshes: planes, boxes, icospheres, tubes."""
import numpy as np

from .mesh import TriMesh


def plane(size=1.0, z=0.0, center=(0.0, 0.0)):
    """Square plane in z = const, normal +z, two triangles."""
    hx = size / 2.0
    cx, cy = center
    verts = np.array([
        [cx - hx, cy - hx, z],
        [cx + hx, cy - hx, z],
        [cx + hx, cy + hx, z],
        [cx - hx, cy + hx, z],
    ])
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    return TriMesh(verts, tris)


_BOX_FACES = (
    # (axis, sign): quad corner order chosen so the normal points outward.
    # +z first: closest-point ties along top edges then resolve to the top
    # face (lower triangle index wins), keeping contact normals upright.
    (2, +1), (2, -1), (0, +1), (0, -1), (1, +1), (1, -1),
)


def box(center=(0.0, 0.0, 0.0), size=(1.0, 1.0, 1.0), shared_vertices=False):
    """Axis-aligned box. With shared_vertices=False each face gets its own
    vertices, so interpolated normals stay face-crisp (no smoothing across
    edges)."""
    c = np.asarray(center, dtype=float)
    h = np.asarray(size, dtype=float) / 2.0
    if shared_vertices:
        signs = np.array([[sx, sy, sz] for sx in (-1, 1)
                          for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
        verts = c + signs * h
        # index by (sx, sy, sz) bit pattern: x*4 + y*2 + z with -1→0, +1→1
        quads = [
            (4, 6, 7, 5),   # +x
            (0, 1, 3, 2),   # -x
            (2, 3, 7, 6),   # +y
            (0, 4, 5, 1),   # -y
            (1, 5, 7, 3),   # +z
            (0, 2, 6, 4),   # -z
        ]
        tris = []
        for a, b, cc, d in quads:
            tris.append([a, b, cc])
            tris.append([a, cc, d])
        return TriMesh(verts, np.array(tris))

    verts = []
    tris = []
    for axis, sign in _BOX_FACES:
        u = (axis + 1) % 3
        v = (axis + 2) % 3
        corners = []
        for su, sv in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
            p = c.copy()
            p[axis] += sign * h[axis]
            p[u] += su * h[u]
            p[v] += sv * h[v]
            corners.append(p)
        base = len(verts)
        verts.extend(corners)
        if sign > 0:
            tris.append([base, base + 1, base + 2])
            tris.append([base, base + 2, base + 3])
        else:
            tris.append([base, base + 2, base + 1])
            tris.append([base, base + 3, base + 2])
    return TriMesh(np.array(verts), np.array(tris))


def platform(length, width=0.1, height=0.1, center_xy=(0.0, 0.0), top_z=None):
    """Box platform with its long side along x; top face at top_z (default:
    height). Face-split vertices keep top normals exactly (0,0,1)."""
    if top_z is None:
        top_z = height
    cz = top_z - height / 2.0
    return box(center=(center_xy[0], center_xy[1], cz),
               size=(length, width, height))


def icosphere(radius=1.0, subdivisions=2, center=(0.0, 0.0, 0.0)):
    """Icosahedron subdivided `subdivisions` times, projected to the sphere."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts[0])
    tris = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                m /= np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(m)
            return cache[key]

        new_tris = []
        for a, b, c in tris:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_tris.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        tris = new_tris
    verts = np.array(verts) * radius + np.asarray(center, dtype=float)
    return TriMesh(verts, np.array(tris))


def tube(radius=0.2, length=0.4, segments=48, axial_cuts=8,
         center=(0.0, 0.0, 0.0)):
    """Open cylinder shell with its axis along x (no end caps)."""
    c = np.asarray(center, dtype=float)
    xs = np.linspace(-length / 2.0, length / 2.0, axial_cuts + 1)
    angs = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    verts = []
    for x in xs:
        for a in angs:
            verts.append([x, radius * np.cos(a), radius * np.sin(a)])
    verts = np.array(verts) + c
    tris = []
    for i in range(axial_cuts):
        for j in range(segments):
            j2 = (j + 1) % segments
            v00 = i * segments + j
            v01 = i * segments + j2
            v10 = (i + 1) * segments + j
            v11 = (i + 1) * segments + j2
            tris.append([v00, v01, v11])
            tris.append([v00, v11, v10])
    return TriMesh(verts, np.array(tris))
