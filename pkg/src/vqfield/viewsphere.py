"""Discretized spherical camera space: viewpoints, poses and reachability."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_N_AZ = 12
DEFAULT_N_POL = 11
DEFAULT_RADIUS = 2.5
DEFAULT_FOV_DEG = 45.0
# slack for boundary comparisons on computed angles
ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class Viewpoint:
    index: int
    azimuth_index: int
    polar_index: int
    azimuth: float
    polar: float
    radius: float

    @property
    def position(self) -> np.ndarray:
        return spherical_to_cartesian(self.polar, self.azimuth, self.radius)

    @property
    def unit(self) -> np.ndarray:
        return spherical_to_cartesian(self.polar, self.azimuth, 1.0)


@dataclass(frozen=True)
class CameraPose:
    position: np.ndarray
    forward: np.ndarray
    up: np.ndarray
    right: np.ndarray
    vertical_fov: float = math.radians(DEFAULT_FOV_DEG)


def _chord_angle(chord):
    # exact zero on identical points, well conditioned for small angles
    return 2.0 * np.arcsin(np.clip(0.5 * np.asarray(chord), 0.0, 1.0))


def spherical_to_cartesian(polar, azimuth, radius=1.0) -> np.ndarray:
    s = np.sin(polar)
    return radius * np.stack([s * np.cos(azimuth), s * np.sin(azimuth), np.cos(polar)], axis=-1)


@dataclass(frozen=True)
class ViewpointGrid:
    """``n_az`` azimuths times ``n_pol`` polar rings, poles excluded.

    Linear index = polar_index * n_az + azimuth_index.
    """

    n_az: int = DEFAULT_N_AZ
    n_pol: int = DEFAULT_N_POL
    radius: float = DEFAULT_RADIUS
    fov_deg: float = DEFAULT_FOV_DEG

    def __post_init__(self):
        if self.n_az < 2 or self.n_pol < 1:
            raise ValueError(f"invalid grid dimensions {self.n_az}x{self.n_pol}")
        if not self.radius > 1.0:
            raise ValueError("grid radius must exceed the unit bounding sphere")
        if not 0.0 < self.fov_deg < 180.0:
            raise ValueError("vertical field of view must be in (0, pi)")

    def __len__(self) -> int:
        return self.n_az * self.n_pol

    @property
    def vertical_fov(self) -> float:
        return math.radians(self.fov_deg)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_pol, self.n_az)

    def index(self, azimuth_index: int, polar_index: int) -> int:
        return polar_index * self.n_az + azimuth_index

    def azimuth_of(self, k: int) -> float:
        return 2.0 * math.pi * k / self.n_az

    def polar_of(self, j: int) -> float:
        return math.pi * (j + 1) / (self.n_pol + 1)

    def viewpoint(self, index: int) -> Viewpoint:
        if not 0 <= index < len(self):
            raise IndexError(f"viewpoint {index} out of range for {len(self)} views")
        j, k = divmod(index, self.n_az)
        return Viewpoint(index, k, j, self.azimuth_of(k), self.polar_of(j), self.radius)

    @property
    def viewpoints(self) -> list[Viewpoint]:
        return [self.viewpoint(i) for i in range(len(self))]

    @cached_property
    def angles(self) -> tuple[np.ndarray, np.ndarray]:
        """(polar, azimuth) per linear index."""
        j, k = np.divmod(np.arange(len(self)), self.n_az)
        return math.pi * (j + 1) / (self.n_pol + 1), 2.0 * math.pi * k / self.n_az

    @cached_property
    def units(self) -> np.ndarray:
        polar, azimuth = self.angles
        return spherical_to_cartesian(polar, azimuth, 1.0)

    @property
    def positions(self) -> np.ndarray:
        return self.units * self.radius

    @cached_property
    def distances(self) -> np.ndarray:
        """Pairwise geodesic (great-circle) distances in radians."""
        u = self.units
        return _chord_angle(np.linalg.norm(u[:, None, :] - u[None, :, :], axis=-1))

    def to_dict(self) -> dict:
        return {"N_az": self.n_az, "N_pol": self.n_pol, "radius": self.radius,
                "fov": self.fov_deg}

    @classmethod
    def from_dict(cls, d: dict) -> ViewpointGrid:
        return cls(int(d["N_az"]), int(d["N_pol"]), float(d["radius"]),
                   float(d.get("fov", DEFAULT_FOV_DEG)))


def make_grid(n_az: int = DEFAULT_N_AZ, n_pol: int = DEFAULT_N_POL,
              radius: float = DEFAULT_RADIUS, fov_deg: float = DEFAULT_FOV_DEG) -> ViewpointGrid:
    return ViewpointGrid(n_az, n_pol, radius, fov_deg)


def look_at(position, vertical_fov: float = math.radians(DEFAULT_FOV_DEG)) -> CameraPose:
    """Pose at ``position`` looking at the origin with world +z as the up hint."""
    position = np.asarray(position, dtype=np.float64)
    dist = np.linalg.norm(position)
    if dist == 0:
        raise ValueError("camera cannot sit at the origin")
    forward = -position / dist
    up = np.array([0.0, 0.0, 1.0]) - forward[2] * forward
    n = np.linalg.norm(up)
    if n < 1e-9:
        raise ValueError("camera on the z axis has no defined up vector")
    up = up / n
    right = np.cross(forward, up)
    return CameraPose(position, forward, up, right, vertical_fov)


def camera_pose(grid: ViewpointGrid, index: int) -> CameraPose:
    return look_at(grid.viewpoint(index).position, grid.vertical_fov)


def geodesic_distance(a: Viewpoint, b: Viewpoint) -> float:
    return float(_chord_angle(np.linalg.norm(a.unit - b.unit)))


def reachable_set(grid: ViewpointGrid, current: int, step_radius: float) -> frozenset[int]:
    """Viewpoints within ``step_radius`` of ``current``, excluding it.

    Falls back to ``{current}`` when nothing else is in reach.
    """
    if step_radius < 0:
        raise ValueError("step_radius must be non-negative")
    d = grid.distances[current]
    ids = np.flatnonzero(d <= step_radius + ANGLE_TOL)
    out = frozenset(int(i) for i in ids if i != current)
    return out or frozenset({current})
