"""Procedural meshes used as fixtures, demos and benchmark inputs."""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh

# outward-facing quads of an axis-aligned box, corner bits (x, y, z)
_BOX_QUADS = [
    (0b000, 0b010, 0b110, 0b100),  # -z
    (0b001, 0b101, 0b111, 0b011),  # +z
    (0b000, 0b100, 0b101, 0b001),  # -y
    (0b010, 0b011, 0b111, 0b110),  # +y
    (0b000, 0b001, 0b011, 0b010),  # -x
    (0b100, 0b110, 0b111, 0b101),  # +x
]


def box(lo=(-0.5, -0.5, -0.5), hi=(0.5, 0.5, 0.5), name="box") -> TriangleMesh:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    verts = np.array([[hi[0] if i & 4 else lo[0], hi[1] if i & 2 else lo[1],
                       hi[2] if i & 1 else lo[2]] for i in range(8)])
    tris = []
    for a, b, c, d in _BOX_QUADS:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(verts, tris, name=name)


def cube(size: float = 1.0) -> TriangleMesh:
    h = size / 2
    return box((-h, -h, -h), (h, h, h), name="cube")


def square(size: float = 1.0, z: float = 0.0, name="square") -> TriangleMesh:
    """Two triangles in the plane ``z``, normal +z."""
    h = size / 2
    verts = [(-h, -h, z), (h, -h, z), (h, h, z), (-h, h, z)]
    return TriangleMesh(verts, [(0, 1, 2), (0, 2, 3)], name=name)


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriangleMesh:
    t = (1.0 + 5 ** 0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriangleMesh(np.array(verts) * radius, faces, name=f"icosphere{subdivisions}")


def _grid_surface(points: np.ndarray, wrap_u: bool, wrap_v: bool):
    """Triangulate an (nu, nv, 3) parametric grid; returns vertices, triangles."""
    nu, nv, _ = points.shape
    idx = np.arange(nu * nv).reshape(nu, nv)
    tris = []
    for i in range(nu if wrap_u else nu - 1):
        for j in range(nv if wrap_v else nv - 1):
            a, b = idx[i, j], idx[(i + 1) % nu, j]
            c, d = idx[(i + 1) % nu, (j + 1) % nv], idx[i, (j + 1) % nv]
            tris += [(a, b, c), (a, c, d)]
    return points.reshape(-1, 3), tris


def torus(major: float = 1.0, minor: float = 0.35, n_major: int = 48, n_minor: int = 24,
          axis: str = "z") -> TriangleMesh:
    u = np.linspace(0, 2 * np.pi, n_major, endpoint=False)
    v = np.linspace(0, 2 * np.pi, n_minor, endpoint=False)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    r = major + minor * np.cos(vv)
    pts = np.stack([r * np.cos(uu), r * np.sin(uu), minor * np.sin(vv)], axis=-1)
    if axis == "x":
        pts = pts[..., [2, 0, 1]]
    elif axis == "y":
        pts = pts[..., [0, 2, 1]]
    verts, tris = _grid_surface(pts, True, True)
    return TriangleMesh(verts, tris, name="torus")


def cylinder(radius: float = 0.5, height: float = 1.0, segments: int = 32,
             capped: bool = True, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    a = np.linspace(0, 2 * np.pi, segments, endpoint=False)
    ring = np.column_stack((radius * np.cos(a), radius * np.sin(a)))
    h = height / 2
    verts = [(x, y, -h) for x, y in ring] + [(x, y, h) for x, y in ring]
    tris = []
    n = segments
    for i in range(n):
        j = (i + 1) % n
        tris += [(i, j, n + j), (i, n + j, n + i)]
    if capped:
        verts += [(0, 0, -h), (0, 0, h)]
        bot, top = 2 * n, 2 * n + 1
        for i in range(n):
            j = (i + 1) % n
            tris += [(bot, j, i), (top, n + i, n + j)]
    verts = np.array(verts, dtype=np.float64) + np.asarray(center, dtype=np.float64)
    return TriangleMesh(verts, tris, name="cylinder")


def tube(outer: float = 0.5, inner: float = 0.4, height: float = 1.0,
         segments: int = 32) -> TriangleMesh:
    """Open-ended thick-walled pipe (a cup without a bottom)."""
    a = np.linspace(0, 2 * np.pi, segments, endpoint=False)
    h = height / 2
    n = segments
    verts = []
    for r, z in ((outer, -h), (outer, h), (inner, -h), (inner, h)):
        verts += [(r * np.cos(t), r * np.sin(t), z) for t in a]
    ob, ot, ib, it = 0, n, 2 * n, 3 * n
    tris = []
    for i in range(n):
        j = (i + 1) % n
        tris += [(ob + i, ob + j, ot + j), (ob + i, ot + j, ot + i)]   # outer wall
        tris += [(ib + i, it + j, ib + j), (ib + i, it + i, it + j)]   # inner wall
        tris += [(ot + i, ot + j, it + j), (ot + i, it + j, it + i)]   # top rim
        tris += [(ob + i, ib + j, ob + j), (ob + i, ib + i, ib + j)]   # bottom rim
    return TriangleMesh(np.array(verts), tris, name="tube")


def combine(*meshes: TriangleMesh, name: str = "combined") -> TriangleMesh:
    """Concatenate meshes into one triangle soup (overlaps are kept)."""
    verts, tris, albedo, offset = [], [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        albedo.append(m.vertex_albedo())
        offset += len(m.vertices)
    any_albedo = any(m.albedo is not None for m in meshes)
    return TriangleMesh(np.vstack(verts), np.vstack(tris),
                        np.concatenate(albedo) if any_albedo else None, name=name)


def with_albedo(mesh: TriangleMesh, albedo) -> TriangleMesh:
    albedo = np.broadcast_to(np.asarray(albedo, dtype=np.float64), (len(mesh.vertices),))
    return TriangleMesh(mesh.vertices, mesh.triangles, albedo, mesh.name)


def star_prism(points: int = 5, outer: float = 1.0, inner: float = 0.45,
               height: float = 0.4) -> TriangleMesh:
    ang = np.arange(2 * points) * np.pi / points
    rad = np.where(np.arange(2 * points) % 2 == 0, outer, inner)
    ring = np.column_stack((rad * np.cos(ang), rad * np.sin(ang)))
    n = len(ring)
    h = height / 2
    verts = [(x, y, -h) for x, y in ring] + [(x, y, h) for x, y in ring] + [(0, 0, -h), (0, 0, h)]
    tris = []
    for i in range(n):
        j = (i + 1) % n
        tris += [(i, j, n + j), (i, n + j, n + i), (2 * n, j, i), (2 * n + 1, n + i, n + j)]
    return TriangleMesh(np.array(verts, dtype=np.float64), tris, name="star")


def nonconvex_fixtures() -> dict[str, TriangleMesh]:
    """A fixed library of non-convex test objects (un-normalized)."""
    b = box
    out = {
        "torus": torus(),
        "l_bracket": combine(b((0, 0, 0), (2, 0.5, 0.5)), b((0, 0, 0.5), (0.5, 0.5, 2)), name="l_bracket"),
        "u_channel": combine(b((0, 0, 0), (2, 1, 0.2)), b((0, 0, 0.2), (2, 0.2, 1)),
                             b((0, 0.8, 0.2), (2, 1, 1)), name="u_channel"),
        "table": combine(b((-1, -0.6, 0.8), (1, 0.6, 0.9)),
                         *[b((x, y, 0), (x + 0.1, y + 0.1, 0.8))
                           for x in (-0.95, 0.85) for y in (-0.55, 0.45)], name="table"),
        "chair": combine(b((0, 0, 0.5), (1, 1, 0.6)), b((0, 0.9, 0.6), (1, 1, 1.6)),
                         *[b((x, y, 0), (x + 0.1, y + 0.1, 0.5)) for x in (0, 0.9) for y in (0, 0.9)],
                         name="chair"),
        "cross": combine(b((-1, -0.2, -0.2), (1, 0.2, 0.2)), b((-0.2, -1, -0.2), (0.2, 1, 0.2)),
                         b((-0.2, -0.2, -1), (0.2, 0.2, 1)), name="cross"),
        "stairs": combine(*[b((0, 0, 0), (1, 1.0 - 0.25 * k, 0.25 * (k + 1))) for k in range(4)],
                          name="stairs"),
        "star": star_prism(),
        "tube": tube(),
        "dumbbell": combine(icosphere(2, 0.5).transformed(translate=(-1, 0, 0)),
                            icosphere(2, 0.5).transformed(translate=(1, 0, 0)),
                            cylinder(0.12, 2.0, 16).transformed(matrix=[[0, 0, 1], [0, 1, 0], [-1, 0, 0]]),
                            name="dumbbell"),
        "t_beam": combine(b((-1, -0.15, 0.7), (1, 0.15, 1)), b((-0.15, -0.15, -1), (0.15, 0.15, 0.7)),
                          name="t_beam"),
        "arch": combine(b((-1, -0.3, 0), (-0.6, 0.3, 1.2)), b((0.6, -0.3, 0), (1, 0.3, 1.2)),
                        b((-1, -0.3, 1.2), (1, 0.3, 1.5)), name="arch"),
    }
    for key, mesh in out.items():
        object.__setattr__(mesh, "name", key)
    return out
