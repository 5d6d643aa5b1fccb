"""Viewpoint quality fields for triangle meshes.

Mesh loading and normalization, BVH ray casting, per-view quality metrics,
field assembly and comparison, and reachable-aware viewpoint optimization.
"""

from ._backend import NAME as BACKEND
from .mesh import TriangleMesh, load_mesh, normalize
from .metrics import MetricParams, QualityVector
from .optimizer import combined_score, next_viewpoint, run_trajectory
from .raycast import build_accel, face_visibility, intersect
from .render import render_grayscale
from .viewsphere import ViewpointGrid, camera_pose, make_grid
from .vqf import VQF, compare_vqf, compute_vqf, load_vqf, save_vqf

__all__ = [
    "BACKEND", "TriangleMesh", "load_mesh", "normalize", "MetricParams", "QualityVector",
    "combined_score", "next_viewpoint", "run_trajectory", "build_accel", "face_visibility",
    "intersect", "render_grayscale", "ViewpointGrid", "camera_pose", "make_grid", "VQF",
    "compare_vqf", "compute_vqf", "load_vqf", "save_vqf",
]
__version__ = "0.1.0"
