"""Per-viewpoint quality metrics: occlusion ratio, normal entropy, visual entropy."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .mesh import TriangleMesh
from .raycast import SurfaceSamples, VisibilityReport, face_visibility
from .render import GrayImage, Mask, render_grayscale
from .viewsphere import CameraPose

# angles/values within this of a bin edge are assigned to the upper bin,
# so rounding noise cannot flip a value that sits exactly on an edge
BIN_EPS = 1e-9
# normals this close to the pole have no meaningful azimuth; pin it to 0
POLE_EPS = 1e-9


@dataclass(frozen=True)
class MetricParams:
    normal_bins_polar: int = 8
    normal_bins_azimuth: int = 32
    gray_bins: int = 256
    samples_per_face: int = 10
    image_size: int = 256
    area_weighted: bool = False

    def __post_init__(self):
        for name in ("normal_bins_polar", "normal_bins_azimuth", "gray_bins",
                     "samples_per_face", "image_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def n_all(self) -> int:
        return self.normal_bins_polar * self.normal_bins_azimuth

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> MetricParams:
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class QualityVector:
    occlusion_ratio: float
    normal_entropy: float
    visual_entropy: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.occlusion_ratio, self.normal_entropy, self.visual_entropy)


def shannon_entropy(counts: np.ndarray) -> float:
    """Entropy in bits of a histogram given as (possibly weighted) counts."""
    counts = np.asarray(counts, dtype=np.float64).ravel()
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(max(0.0, -(p * np.log2(p)).sum()))


def self_occlusion_ratio(report: VisibilityReport, mesh: TriangleMesh) -> float:
    """Area-weighted occluded fraction of the surface."""
    areas = mesh.face_areas
    ratio = float(np.dot(areas, 1.0 - report.visible_fraction) / areas.sum())
    return min(1.0, max(0.0, ratio))


def normal_frame_angles(normals: np.ndarray, camera: CameraPose):
    """Polar and azimuth angles of ``normals`` in the camera-centred frame.

    The pole points from the object centre (origin) to the camera; azimuth is
    measured from the camera's right vector. Normals within ``POLE_EPS`` of
    the pole get azimuth 0.
    """
    pole = np.asarray(camera.position, dtype=np.float64)
    pole = pole / np.linalg.norm(pole)
    ref = camera.right - np.dot(camera.right, pole) * pole
    ref = ref / np.linalg.norm(ref)
    other = np.cross(pole, ref)
    z = normals @ pole
    polar = np.arccos(np.clip(z, -1.0, 1.0))
    x, y = normals @ ref, normals @ other
    azimuth = np.where(np.hypot(x, y) < POLE_EPS, 0.0, np.arctan2(y, x))
    return polar, azimuth


def normal_histogram(report: VisibilityReport, mesh: TriangleMesh, camera: CameraPose,
                     params: MetricParams = MetricParams()) -> np.ndarray:
    """(polar bins, azimuth bins) histogram of fully visible face normals."""
    n_pol, n_az = params.normal_bins_polar, params.normal_bins_azimuth
    hist = np.zeros((n_pol, n_az))
    faces = np.flatnonzero(report.fully_visible)
    if faces.size == 0:
        return hist
    polar, azimuth = normal_frame_angles(mesh.face_normals[faces], camera)
    keep = polar <= math.pi / 2 + BIN_EPS
    polar, azimuth, faces = polar[keep], azimuth[keep], faces[keep]
    pi_bin = np.minimum(np.floor(polar / (math.pi / 2) * n_pol + BIN_EPS), n_pol - 1).astype(int)
    az_bin = np.mod(np.floor((azimuth + math.pi) / (2 * math.pi) * n_az + BIN_EPS), n_az).astype(int)
    weights = mesh.face_areas[faces] if params.area_weighted else np.ones(len(faces))
    np.add.at(hist, (pi_bin, az_bin), weights)
    return hist


def normal_entropy(report: VisibilityReport, mesh: TriangleMesh, camera: CameraPose,
                   params: MetricParams = MetricParams()) -> float:
    """Occupancy-scaled entropy of visible normals; 0 when nothing is fully visible."""
    hist = normal_histogram(report, mesh, camera, params)
    occupied = int(np.count_nonzero(hist))
    if occupied == 0:
        return 0.0
    return occupied / params.n_all * shannon_entropy(hist)


def gray_histogram(image: GrayImage, mask: Mask, bins: int = 256) -> np.ndarray:
    if image.pixels.shape != mask.bits.shape:
        raise ValueError("image and mask dimensions differ")
    g = np.clip(image.pixels[mask.bits], 0.0, 1.0)
    idx = np.minimum(np.floor(g * bins + BIN_EPS), bins - 1).astype(int)
    return np.bincount(idx, minlength=bins)


def visual_entropy(image: GrayImage, mask: Mask, params: MetricParams = MetricParams()) -> float:
    """Entropy in bits of the gray histogram over masked pixels; 0 for an empty mask."""
    return shannon_entropy(gray_histogram(image, mask, params.gray_bins))


def evaluate_view(accel, mesh: TriangleMesh, camera: CameraPose,
                  params: MetricParams = MetricParams(),
                  samples: SurfaceSamples | None = None) -> QualityVector:
    """All three metrics for one camera pose."""
    report = face_visibility(accel, mesh, camera, params.samples_per_face, samples)
    image, mask = render_grayscale(accel, mesh, camera, params.image_size, params.image_size)
    return QualityVector(
        self_occlusion_ratio(report, mesh),
        normal_entropy(report, mesh, camera, params),
        visual_entropy(image, mask, params),
    )
