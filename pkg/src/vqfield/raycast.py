"""BVH ray casting and sample-based per-face visibility."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .mesh import TriangleMesh

RAY_EPS = 1e-6
OCCLUSION_OFFSET = 1e-4
# faces seen exactly edge-on have zero projected area; this margin keeps
# rounding from turning such grazing faces front-facing
FRONT_EPS = 1e-9
LEAF_SIZE = 4
DEFAULT_SAMPLES_PER_FACE = 10
_GOLDEN = 0.6180339887498949


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_max: float = np.inf

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ValueError("ray direction must be a unit vector")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class Hit:
    face_index: int
    t: float
    barycentric: tuple[float, float]


@dataclass(frozen=True)
class VisibilityReport:
    visible_fraction: np.ndarray
    fully_visible: np.ndarray
    samples_per_face: int


@dataclass(frozen=True, eq=False)
class AccelStructure:
    """Flattened median-split BVH over a mesh's triangles.

    ``nodes`` rows hold the padded box (lo, hi); ``links`` rows hold
    (left, right, start, count). Leaves own the slice ``[start, start + count)``
    of the leaf-ordered ``tris`` rows (v0, v1 - v0, v2 - v0); interior nodes
    have ``count == 0``. ``face`` maps a ``tris`` row back to the mesh face.
    """

    nodes: np.ndarray
    links: np.ndarray
    tris: np.ndarray
    face: np.ndarray
    backend: str

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def lo(self) -> np.ndarray:
        return self.nodes[:, :3]

    @property
    def hi(self) -> np.ndarray:
        return self.nodes[:, 3:]

    @property
    def left(self) -> np.ndarray:
        return self.links[:, 0]

    @property
    def right(self) -> np.ndarray:
        return self.links[:, 1]

    @property
    def start(self) -> np.ndarray:
        return self.links[:, 2]

    @property
    def count(self) -> np.ndarray:
        return self.links[:, 3]

    def depth(self) -> int:
        depth, stack = 0, [(0, 1)]
        while stack:
            node, d = stack.pop()
            depth = max(depth, d)
            left, right, _, count = self.links[node]
            if count == 0:
                stack.append((int(left), d + 1))
                stack.append((int(right), d + 1))
        return depth

    @property
    def kernels(self):
        return _backend.load(self.backend)

    def closest_hits(self, origins, dirs, t_max=None):
        """Vectorized nearest hits: (face, t, u, v); face is -1 on a miss."""
        origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
        dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
        t_max = _tmax_array(t_max, len(origins))
        return self.kernels.closest_hit(origins, dirs, t_max, self.nodes, self.links,
                                        self.tris, self.face)

    def any_hits(self, origins, dirs, t_max=None):
        """Vectorized occlusion query: True where a segment is blocked."""
        origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
        dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
        t_max = _tmax_array(t_max, len(origins))
        return self.kernels.any_hit(origins, dirs, t_max, self.nodes, self.links, self.tris)


def _tmax_array(t_max, n):
    if t_max is None:
        return np.full(n, np.inf)
    return np.ascontiguousarray(np.broadcast_to(np.asarray(t_max, dtype=np.float64), (n,)))


def build_accel(mesh: TriangleMesh, backend: str | None = None) -> AccelStructure:
    """Median split over the longest centroid axis, leaves of at most 4 triangles."""
    corners = mesh.corners()
    tri_lo = corners.min(axis=1)
    tri_hi = corners.max(axis=1)
    centroids = corners.mean(axis=1)
    order = np.arange(mesh.n_faces)

    lo, hi, left, right, start, count = [], [], [], [], [], []

    def new_node():
        for lst in (lo, hi):
            lst.append(None)
        for lst in (left, right, start, count):
            lst.append(0)
        return len(lo) - 1

    stack = [(new_node(), 0, mesh.n_faces)]
    while stack:
        node, s, e = stack.pop()
        idx = order[s:e]
        lo[node] = tri_lo[idx].min(axis=0)
        hi[node] = tri_hi[idx].max(axis=0)
        if e - s <= LEAF_SIZE:
            start[node], count[node] = s, e - s
            continue
        c = centroids[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        order[s:e] = idx[np.argsort(c[:, axis], kind="stable")]
        mid = s + (e - s) // 2
        a, b = new_node(), new_node()
        left[node], right[node] = a, b
        stack.append((b, mid, e))
        stack.append((a, s, mid))

    # widen boxes so rounding in the slab test never culls a true hit
    pad = 1e-9 * (1.0 + float(np.abs(corners).max()))
    nodes = np.hstack((np.array(lo) - pad, np.array(hi) + pad))
    links = np.column_stack((left, right, start, count))
    c = corners[order]
    tris = np.hstack((c[:, 0], c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]))
    return AccelStructure(
        nodes=np.ascontiguousarray(nodes, dtype=np.float64),
        links=np.ascontiguousarray(links, dtype=np.int64),
        tris=np.ascontiguousarray(tris, dtype=np.float64),
        face=np.ascontiguousarray(order, dtype=np.int64),
        backend=backend or _backend.NAME,
    )


def intersect(accel: AccelStructure, ray: Ray) -> Hit | None:
    face, t, u, v = accel.closest_hits(ray.origin[None], ray.direction[None], ray.t_max)
    if face[0] < 0:
        return None
    return Hit(int(face[0]), float(t[0]), (float(u[0]), float(v[0])))


def sample_pattern(samples_per_face: int) -> np.ndarray:
    """Barycentric weights (n, 3) shared by every face.

    Stratified in the radial coordinate, golden-ratio sequence in the angular
    one, warped to the triangle with the square-root map (area uniform).
    """
    if samples_per_face < 1:
        raise ValueError("samples_per_face must be >= 1")
    k = np.arange(samples_per_face)
    r1 = (k + 0.5) / samples_per_face
    r2 = np.mod(0.5 + k * _GOLDEN, 1.0)
    s = np.sqrt(r1)
    return np.column_stack((1.0 - s, s * (1.0 - r2), s * r2))


@dataclass(frozen=True, eq=False)
class SurfaceSamples:
    """View-independent sample geometry, reused across every camera."""

    points: np.ndarray  # (F, n, 3) sample points on each face
    origins: np.ndarray  # (F, n, 3) points pushed off the surface along the normal
    offsets: np.ndarray  # (F, n) sample . normal, for the front-facing test
    samples_per_face: int


def surface_samples(mesh: TriangleMesh,
                    samples_per_face: int = DEFAULT_SAMPLES_PER_FACE) -> SurfaceSamples:
    w = sample_pattern(samples_per_face)
    c = mesh.corners()
    pts = (w[None, :, 0, None] * c[:, None, 0] + w[None, :, 1, None] * c[:, None, 1]
           + w[None, :, 2, None] * c[:, None, 2])
    n = mesh.face_normals[:, None, :]
    offsets = (pts * n).sum(axis=2)
    return SurfaceSamples(pts, pts + OCCLUSION_OFFSET * n, offsets, samples_per_face)


def face_visibility(accel: AccelStructure, mesh: TriangleMesh, camera,
                    samples_per_face: int = DEFAULT_SAMPLES_PER_FACE,
                    samples: SurfaceSamples | None = None) -> VisibilityReport:
    """Fraction of each face's sample points that see the camera centre.

    A sample is visible when its face is front-facing toward the camera
    (``normal . (camera - p) > FRONT_EPS``) and the segment from the
    normal-offset sample to the camera is unobstructed. Back-facing and
    edge-on samples count as occluded. Pass ``samples`` to reuse the
    sample geometry across cameras.
    """
    if samples is None:
        samples = surface_samples(mesh, samples_per_face)
    elif samples.samples_per_face != samples_per_face:
        raise ValueError("samples were built for a different samples_per_face")
    cam = np.asarray(camera.position, dtype=np.float64)
    front = (mesh.face_normals @ cam)[:, None] - samples.offsets > FRONT_EPS
    origins = samples.origins[front]
    vec = cam - origins
    dist = np.sqrt((vec * vec).sum(axis=1))
    blocked = accel.any_hits(origins, vec / dist[:, None], dist)
    visible = front.copy()
    visible[front] = ~blocked
    fraction = visible.sum(axis=1) / samples_per_face
    return VisibilityReport(fraction, fraction == 1.0, samples_per_face)
