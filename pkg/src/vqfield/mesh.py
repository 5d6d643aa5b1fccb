"""Triangle mesh loading, sanitization and normalization."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

DEGENERATE_AREA = 1e-12
EXACT_SPHERE_MAX_VERTICES = 100_000


class MeshParseError(ValueError):
    """Raised when a mesh file cannot be parsed."""


class EmptyMeshError(ValueError):
    """Raised when no valid triangle survives sanitization."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def face_properties(vertices: np.ndarray, triangles: np.ndarray):
    """Per-face unit normals and areas from the stored winding order.

    Raises ValueError if any triangle is degenerate.
    """
    v0 = vertices[triangles[:, 0]]
    cross = np.cross(vertices[triangles[:, 1]] - v0, vertices[triangles[:, 2]] - v0)
    norm = np.linalg.norm(cross, axis=1)
    bad = np.flatnonzero(norm * 0.5 <= DEGENERATE_AREA)
    if bad.size:
        raise ValueError(f"degenerate triangle at face {int(bad[0])}")
    return cross / norm[:, None], 0.5 * norm


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Immutable triangle soup with per-face normals and areas.

    ``albedo`` is per-vertex grayscale in [0, 1]; ``None`` means 1.0 everywhere.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    albedo: np.ndarray | None = None
    name: str = "mesh"
    face_normals: np.ndarray = field(init=False, repr=False)
    face_areas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(triangles) == 0:
            raise EmptyMeshError("mesh has no triangles")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise ValueError("triangle index out of range")
        albedo = self.albedo
        if albedo is not None:
            albedo = np.clip(np.asarray(albedo, dtype=np.float64).reshape(-1), 0.0, 1.0)
            if albedo.shape != (len(vertices),):
                raise ValueError("albedo must have one value per vertex")
        normals, areas = face_properties(vertices, triangles)
        object.__setattr__(self, "vertices", _readonly(vertices))
        object.__setattr__(self, "triangles", _readonly(triangles))
        object.__setattr__(self, "albedo", None if albedo is None else _readonly(albedo))
        object.__setattr__(self, "face_normals", _readonly(normals))
        object.__setattr__(self, "face_areas", _readonly(areas))

    @property
    def n_faces(self) -> int:
        return len(self.triangles)

    @property
    def total_area(self) -> float:
        return float(self.face_areas.sum())

    def vertex_albedo(self) -> np.ndarray:
        if self.albedo is None:
            return np.ones(len(self.vertices))
        return self.albedo

    def corners(self) -> np.ndarray:
        """(F, 3, 3) array of triangle corner positions."""
        return self.vertices[self.triangles]

    def transformed(self, matrix=None, translate=None, scale: float = 1.0) -> TriangleMesh:
        """Apply ``scale * (matrix @ v) + translate`` to every vertex."""
        v = self.vertices
        if matrix is not None:
            v = v @ np.asarray(matrix, dtype=np.float64).T
        v = v * scale
        if translate is not None:
            v = v + np.asarray(translate, dtype=np.float64)
        return TriangleMesh(v, self.triangles, self.albedo, self.name)


def sanitize(vertices, faces, albedo=None, name: str = "mesh") -> TriangleMesh:
    """Triangulate quads by fan and drop zero-area triangles.

    ``faces`` is a sequence of index tuples of length 3 or 4.
    """
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    tris = []
    for face in faces:
        if len(face) == 3:
            tris.append(tuple(face))
        elif len(face) == 4:
            a, b, c, d = face
            tris.append((a, b, c))
            tris.append((a, c, d))
        else:
            raise MeshParseError(f"unsupported polygon with {len(face)} vertices")
    tris = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    if len(tris) and (tris.min() < 0 or tris.max() >= len(vertices)):
        raise MeshParseError("face index out of range")
    if len(tris):
        v0 = vertices[tris[:, 0]]
        cross = np.cross(vertices[tris[:, 1]] - v0, vertices[tris[:, 2]] - v0)
        tris = tris[0.5 * np.linalg.norm(cross, axis=1) > DEGENERATE_AREA]
    if len(tris) == 0:
        raise EmptyMeshError(f"{name}: no valid triangles after sanitization")
    return TriangleMesh(vertices, tris, albedo, name)


def _parse_obj(path: str):
    vertices, colors, faces = [], [], []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            tokens = line.split()
            if not tokens:
                continue
            tag = tokens[0]
            if tag == "v":
                try:
                    vals = [float(x) for x in tokens[1:]]
                except ValueError as exc:
                    raise MeshParseError(f"{path}:{lineno}: bad vertex line") from exc
                if len(vals) < 3:
                    raise MeshParseError(f"{path}:{lineno}: vertex needs 3 coordinates")
                vertices.append(vals[:3])
                colors.append(vals[3:6] if len(vals) >= 6 else None)
            elif tag == "f":
                idx = []
                for tok in tokens[1:]:
                    head = tok.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise MeshParseError(f"{path}:{lineno}: malformed face line") from exc
                    # OBJ is 1-based; negative indices count back from the latest vertex
                    i = i - 1 if i > 0 else len(vertices) + i
                    if i < 0 or i >= len(vertices) or head == "0":
                        raise MeshParseError(f"{path}:{lineno}: face index {head} out of range")
                    idx.append(i)
                if len(idx) < 3:
                    raise MeshParseError(f"{path}:{lineno}: malformed face line")
                if len(idx) > 4:
                    raise MeshParseError(f"{path}:{lineno}: polygons beyond quads are not supported")
                faces.append(idx)
    albedo = None
    if vertices and any(c is not None for c in colors):
        rgb = np.array([c if c is not None else (1.0, 1.0, 1.0) for c in colors])
        if rgb.max() > 1.0:
            rgb = rgb / 255.0
        albedo = rgb @ np.array([0.299, 0.587, 0.114])
    return np.array(vertices, dtype=np.float64).reshape(-1, 3), faces, albedo


def _parse_stl(path: str):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) >= 84:
        (count,) = struct.unpack_from("<I", data, 80)
        if len(data) == 84 + 50 * count:
            rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
            corners = np.frombuffer(data, dtype=rec, count=count, offset=84)["v"]
            return corners.astype(np.float64)
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MeshParseError(f"{path}: not a valid binary or ASCII STL") from exc
    if not text.lstrip().lower().startswith("solid"):
        raise MeshParseError(f"{path}: not a valid binary or ASCII STL")
    pts = []
    for lineno, line in enumerate(text.splitlines(), 1):
        tokens = line.split()
        if tokens and tokens[0] == "vertex":
            try:
                pts.append([float(x) for x in tokens[1:4]])
            except ValueError as exc:
                raise MeshParseError(f"{path}:{lineno}: bad vertex line") from exc
    if len(pts) % 3:
        raise MeshParseError(f"{path}: vertex count is not a multiple of 3")
    return np.array(pts, dtype=np.float64).reshape(-1, 3, 3)


def load_mesh(path) -> TriangleMesh:
    """Load an OBJ or STL file as an un-normalized, sanitized mesh."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"mesh file not found: {path}")
    name = os.path.splitext(os.path.basename(path))[0]
    ext = os.path.splitext(path)[1].lower()
    if ext == ".obj":
        vertices, faces, albedo = _parse_obj(path)
        return sanitize(vertices, faces, albedo, name)
    if ext == ".stl":
        corners = _parse_stl(path)
        if len(corners) == 0:
            raise EmptyMeshError(f"{path}: no triangles")
        vertices, inverse = np.unique(corners.reshape(-1, 3), axis=0, return_inverse=True)
        faces = inverse.reshape(-1, 3).tolist()
        return sanitize(vertices, faces, None, name)
    raise MeshParseError(f"{path}: unsupported mesh format {ext!r}")


def save_obj(mesh: TriangleMesh, path) -> None:
    with open(path, "w") as fh:
        for i, (x, y, z) in enumerate(mesh.vertices.tolist()):
            if mesh.albedo is None:
                fh.write(f"v {x!r} {y!r} {z!r}\n")
            else:
                a = float(mesh.albedo[i])
                fh.write(f"v {x!r} {y!r} {z!r} {a!r} {a!r} {a!r}\n")
        for t in mesh.triangles + 1:
            fh.write(f"f {t[0]} {t[1]} {t[2]}\n")


# -- bounding spheres -------------------------------------------------------


def _widest_pair_sphere(pts: np.ndarray):
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    i, j = np.unravel_index(np.argmax(d), d.shape)
    c = 0.5 * (pts[i] + pts[j])
    return c, 0.5 * float(d[i, j])


def _circumsphere(pts: np.ndarray):
    """Smallest sphere with all of ``pts`` (1 to 4 points) on its boundary."""
    a = pts[0]
    if len(pts) == 1:
        return a.copy(), 0.0
    if len(pts) == 2:
        return _widest_pair_sphere(pts)
    rel = pts[1:] - a
    if len(pts) == 3:
        # centre restricted to the plane of the three points
        gram = rel @ rel.T
        rhs = 0.5 * np.diag(gram)
    else:
        gram = rel
        rhs = 0.5 * np.einsum("ij,ij->i", rel, rel)
    if abs(np.linalg.det(gram)) < 1e-24 * float(np.abs(gram).max()) ** len(gram):
        return _widest_pair_sphere(pts)
    coef = np.linalg.solve(gram, rhs)
    c = a + (coef @ rel if len(pts) == 3 else coef)
    return c, float(np.linalg.norm(a - c))


def _sphere_with_boundary(points: np.ndarray, boundary: list, tol: float):
    """Exact minimal sphere of ``points`` with ``boundary`` forced onto its surface.

    Iterative form of Welzl's algorithm; recursion depth is at most four.
    """
    if boundary:
        c, r = _circumsphere(np.array(boundary))
        if len(boundary) == 4:
            return c, r
        start = 0
    else:
        if len(points) == 0:
            return np.zeros(3), 0.0
        c, r = points[0].copy(), 0.0
        start = 1
    while start < len(points):
        dist = np.linalg.norm(points[start:] - c, axis=1)
        outside = np.flatnonzero(dist > r + tol)
        if outside.size == 0:
            break
        i = start + int(outside[0])
        c, r = _sphere_with_boundary(points[:i], boundary + [points[i]], tol)
        start = i + 1
    return c, r


def minimal_bounding_sphere(points: np.ndarray):
    """Exact minimal enclosing sphere (centre, radius)."""
    pts = np.unique(np.asarray(points, dtype=np.float64).reshape(-1, 3), axis=0)
    rng = np.random.default_rng(0)
    pts = pts[rng.permutation(len(pts))]
    scale = float(np.abs(pts).max()) or 1.0
    c, r = _sphere_with_boundary(pts, [], 1e-12 * scale)
    r = float(np.linalg.norm(pts - c, axis=1).max())
    return c, r


def ritter_bounding_sphere(points: np.ndarray):
    """Ritter's approximate bounding sphere (centre, radius)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    p = pts[0]
    q = pts[np.argmax(np.linalg.norm(pts - p, axis=1))]
    s = pts[np.argmax(np.linalg.norm(pts - q, axis=1))]
    c = 0.5 * (q + s)
    r = 0.5 * float(np.linalg.norm(s - q))
    for x in pts:
        d = float(np.linalg.norm(x - c))
        if d > r:
            r_new = 0.5 * (r + d)
            c = c + (d - r_new) / d * (x - c)
            r = r_new
    return c, float(np.linalg.norm(pts - c, axis=1).max())


def bounding_sphere(points: np.ndarray):
    if len(points) <= EXACT_SPHERE_MAX_VERTICES:
        return minimal_bounding_sphere(points)
    return ritter_bounding_sphere(points)


def normalize(mesh: TriangleMesh) -> TriangleMesh:
    """Center the bounding sphere at the origin and scale its radius to 1."""
    used = mesh.vertices[np.unique(mesh.triangles)]
    center, radius = bounding_sphere(used)
    if radius <= 0:
        raise EmptyMeshError(f"{mesh.name}: zero-extent mesh")
    return mesh.transformed(translate=-center / radius, scale=1.0 / radius)
