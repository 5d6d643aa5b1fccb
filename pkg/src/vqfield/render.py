"""Headless ray-traced grayscale renders with object masks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import TriangleMesh
from .raycast import AccelStructure
from .viewsphere import CameraPose

MIN_SIZE = 16


@dataclass(frozen=True, eq=False)
class GrayImage:
    pixels: np.ndarray  # (height, width), values in [0, 1]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class Mask:
    bits: np.ndarray  # (height, width) bool, True on object pixels

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


def primary_rays(camera: CameraPose, width: int, height: int) -> np.ndarray:
    """Unit ray directions (height*width, 3), row-major from the top-left pixel."""
    half = math.tan(camera.vertical_fov / 2.0)
    aspect = width / height
    xs = ((np.arange(width) + 0.5) / width * 2.0 - 1.0) * half * aspect
    ys = (1.0 - (np.arange(height) + 0.5) / height * 2.0) * half
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    dirs = (camera.forward[None, None, :] + xx[..., None] * camera.right
            + yy[..., None] * camera.up)
    dirs = dirs.reshape(-1, 3)
    return dirs / np.linalg.norm(dirs, axis=1)[:, None]


def render_grayscale(accel: AccelStructure, mesh: TriangleMesh, camera: CameraPose,
                     width: int = 256, height: int = 256) -> tuple[GrayImage, Mask]:
    """One ray per pixel, headlight Lambertian shading on flat face normals."""
    if width < MIN_SIZE or height < MIN_SIZE:
        raise ValueError(f"render size must be at least {MIN_SIZE}x{MIN_SIZE}")
    dirs = primary_rays(camera, width, height)
    origins = np.broadcast_to(camera.position, dirs.shape)
    face, _, u, v = accel.closest_hits(origins, dirs)
    hit = face >= 0
    pixels = np.zeros(len(dirs))
    if hit.any():
        f = face[hit]
        # |n . w| orients the face normal toward the camera
        cos = np.abs(np.einsum("ij,ij->i", mesh.face_normals[f], dirs[hit]))
        tri = mesh.triangles[f]
        alb = mesh.vertex_albedo()
        uh, vh = u[hit], v[hit]
        albedo = (1.0 - uh - vh) * alb[tri[:, 0]] + uh * alb[tri[:, 1]] + vh * alb[tri[:, 2]]
        pixels[hit] = np.clip(albedo * cos, 0.0, 1.0)
    return (GrayImage(pixels.reshape(height, width)),
            Mask(hit.reshape(height, width)))


def to_uint8(values: np.ndarray) -> np.ndarray:
    return np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pgm(path, values: np.ndarray) -> None:
    """Binary 8-bit PGM. Bool arrays map to {0, 255}; floats are read as [0, 1]."""
    data = np.where(values, 255, 0).astype(np.uint8) if values.dtype == bool else to_uint8(values)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end])
        pos = end
    if tokens[0] != b"P5" or int(tokens[3]) != 255:
        raise ValueError(f"{path}: only 8-bit binary PGM is supported")
    w, h = int(tokens[1]), int(tokens[2])
    return np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8).reshape(h, w)


def write_png(path, values: np.ndarray) -> None:
    from PIL import Image

    data = np.where(values, 255, 0).astype(np.uint8) if values.dtype == bool else to_uint8(values)
    Image.fromarray(data).save(path)


def write_image(path, values: np.ndarray) -> None:
    """Dispatch on extension: .png via Pillow, anything else as PGM."""
    if str(path).lower().endswith(".png"):
        write_png(path, values)
    else:
        write_pgm(path, values)
