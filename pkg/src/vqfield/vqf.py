"""Viewpoint quality fields: assembly, JSON storage, comparison losses, heatmaps."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mesh import TriangleMesh
from .metrics import MetricParams, QualityVector, evaluate_view
from .raycast import build_accel, surface_samples
from .render import GrayImage
from .viewsphere import ViewpointGrid, camera_pose

SCHEMA_VERSION = 1
CHANNELS = ("occlusion_ratio", "normal_entropy", "visual_entropy")
HEATMAP_CHANNELS = ("occlusion", "normal_entropy", "visual_entropy", "combined")
DEFAULT_LAMBDAS = (0.3, 0.4, 0.3)
DEFAULT_SILOG_LAMBDA = 0.85
SILOG_EPS = 1e-6
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


class VQFFormatError(ValueError):
    """Raised for malformed, mismatched or non-finite VQF files."""


@dataclass(eq=False)
class VQF:
    """Quality vectors for every grid viewpoint.

    ``values`` has shape (N_pol, N_az, 3) with channels ordered as ``CHANNELS``.
    """

    grid: ViewpointGrid
    params: MetricParams
    mesh_id: str
    values: np.ndarray
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (*self.grid.shape, 3):
            raise VQFFormatError(
                f"values shape {self.values.shape} does not match grid {(*self.grid.shape, 3)}")

    def flat(self) -> np.ndarray:
        """(N, 3) values in linear viewpoint order."""
        return self.values.reshape(-1, 3)

    def quality(self, index: int) -> QualityVector:
        return QualityVector(*map(float, self.flat()[index]))

    def channel(self, name: str) -> np.ndarray:
        return self.values[..., CHANNELS.index(name)]

    def normalized(self) -> np.ndarray:
        """Values with entropies divided by their theoretical maxima."""
        scale = np.array([1.0, math.log2(self.params.n_all) if self.params.n_all > 1 else 1.0,
                          math.log2(self.params.gray_bins) if self.params.gray_bins > 1 else 1.0])
        return self.values / scale

    def check_ranges(self, tol: float = 1e-9) -> None:
        flat = self.flat()
        limits = [(0.0, 1.0), (0.0, math.log2(self.params.n_all)),
                  (0.0, math.log2(self.params.gray_bins))]
        for c, (lo, hi) in enumerate(limits):
            bad = np.flatnonzero((flat[:, c] < lo - tol) | (flat[:, c] > hi + tol))
            if bad.size:
                raise VQFFormatError(
                    f"viewpoint {int(bad[0])}: {CHANNELS[c]} = {flat[bad[0], c]} outside [{lo}, {hi}]")

    def __eq__(self, other):
        if not isinstance(other, VQF):
            return NotImplemented
        return (self.grid == other.grid and self.params == other.params
                and self.mesh_id == other.mesh_id and np.array_equal(self.values, other.values))


def compute_vqf(mesh: TriangleMesh, grid: ViewpointGrid = ViewpointGrid(),
                params: MetricParams = MetricParams(), workers: int = 1,
                accel=None, config: dict | None = None) -> VQF:
    """Evaluate all three metrics at every viewpoint of ``grid``.

    ``mesh`` is expected to be normalized. Viewpoints are independent, so with
    ``workers > 1`` they run on a thread pool; results are placed by index and
    do not depend on scheduling.
    """
    accel = accel if accel is not None else build_accel(mesh)
    samples = surface_samples(mesh, params.samples_per_face)

    def one(i):
        return evaluate_view(accel, mesh, camera_pose(grid, i), params, samples).as_tuple()

    n = len(grid)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, range(n)))
    else:
        rows = [one(i) for i in range(n)]
    values = np.array(rows, dtype=np.float64).reshape(*grid.shape, 3)
    return VQF(grid, params, mesh.name, values, dict(config or {}))


# -- storage ---------------------------------------------------------------


def vqf_to_dict(vqf: VQF) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "mesh_id": vqf.mesh_id,
        "grid": vqf.grid.to_dict(),
        "params": vqf.params.to_dict(),
        "channels": list(CHANNELS),
        "index_order": "polar_index * N_az + azimuth_index",
        "loss_conventions": {"silog_log_base": "e", "dssim": "global",
                             "normalization": "entropies divided by log2(bin count)"},
        "config": vqf.config,
        "values": vqf.flat().tolist(),
    }


def save_vqf(vqf: VQF, path) -> None:
    """Write a ``.vqf.json`` file; floats keep their exact float64 repr."""
    text = json.dumps(vqf_to_dict(vqf), indent=1, allow_nan=False)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def vqf_from_dict(doc: dict, strict: bool = True, source: str = "<vqf>") -> VQF:
    try:
        version = doc["schema_version"]
        if version != SCHEMA_VERSION:
            raise VQFFormatError(f"{source}: schema version {version} != {SCHEMA_VERSION}")
        if list(doc.get("channels", CHANNELS)) != list(CHANNELS):
            raise VQFFormatError(f"{source}: unexpected channel list {doc['channels']}")
        grid = ViewpointGrid.from_dict(doc["grid"])
        params = MetricParams.from_dict(doc.get("params", {}))
        raw = doc["values"]
    except (KeyError, TypeError) as exc:
        raise VQFFormatError(f"{source}: missing or malformed field {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, VQFFormatError):
            raise
        raise VQFFormatError(f"{source}: {exc}") from exc
    if not isinstance(raw, list) or len(raw) != len(grid):
        got = len(raw) if isinstance(raw, list) else type(raw).__name__
        raise VQFFormatError(f"{source}: expected {len(grid)} viewpoint entries, got {got}")
    for i, entry in enumerate(raw):
        if not isinstance(entry, list) or len(entry) != 3:
            raise VQFFormatError(f"{source}: viewpoint {i} must hold 3 values")
        try:
            row = [float(x) for x in entry]
        except (TypeError, ValueError) as exc:
            raise VQFFormatError(f"{source}: viewpoint {i} has a non-numeric value") from exc
        if not all(math.isfinite(x) for x in row):
            raise VQFFormatError(f"{source}: viewpoint {i} has a NaN or infinite value")
    values = np.array(raw, dtype=np.float64).reshape(*grid.shape, 3)
    vqf = VQF(grid, params, str(doc.get("mesh_id", "")), values, doc.get("config", {}))
    if strict:
        try:
            vqf.check_ranges()
        except VQFFormatError as exc:
            raise VQFFormatError(f"{source}: {exc}") from None
    return vqf


def load_vqf(path, strict: bool = True) -> VQF:
    """Read a ``.vqf.json`` file.

    ``strict`` also checks each channel against its theoretical range; turn it
    off for externally predicted fields.
    """
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise VQFFormatError(f"{path}: invalid JSON ({exc})") from exc
    return vqf_from_dict(doc, strict=strict, source=path)


# -- comparison ------------------------------------------------------------


@dataclass(frozen=True)
class LossReport:
    l1: float
    dssim: float
    silog: float
    total: float
    lambdas: tuple[float, float, float]
    silog_lambda: float

    def to_dict(self) -> dict:
        return {"l1": self.l1, "dssim": self.dssim, "silog": self.silog, "total": self.total,
                "lambdas": list(self.lambdas), "silog_lambda": self.silog_lambda}


def l1_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    return float(np.mean(np.abs(np.asarray(pred) - np.asarray(truth))))


def global_ssim(x: np.ndarray, y: np.ndarray, c1: float = SSIM_C1, c2: float = SSIM_C2) -> float:
    """SSIM from whole-array statistics (no sliding window)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    mx, my = x.mean(), y.mean()
    vx = ((x - mx) ** 2).mean()
    vy = ((y - my) ** 2).mean()
    cov = ((x - mx) * (y - my)).mean()
    return float((2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))


def dssim(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean over trailing-axis channels of (1 - SSIM) / 2."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.ndim == 1:
        pred, truth = pred[:, None], truth[:, None]
    pred = pred.reshape(-1, pred.shape[-1])
    truth = truth.reshape(-1, truth.shape[-1])
    return float(np.mean([(1.0 - global_ssim(pred[:, c], truth[:, c])) / 2.0
                          for c in range(pred.shape[1])]))


def silog(pred: np.ndarray, truth: np.ndarray, lam: float = DEFAULT_SILOG_LAMBDA,
          eps: float = SILOG_EPS) -> float:
    """Scale-invariant log error (natural log) averaged over trailing-axis channels."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.ndim == 1:
        pred, truth = pred[:, None], truth[:, None]
    pred = pred.reshape(-1, pred.shape[-1])
    truth = truth.reshape(-1, truth.shape[-1])
    d = np.log(np.maximum(pred, eps)) - np.log(np.maximum(truth, eps))
    per_channel = np.mean(d * d, axis=0) - lam * np.mean(d, axis=0) ** 2
    return float(np.mean(per_channel))


def compare_vqf(pred: VQF, truth: VQF, lambdas=DEFAULT_LAMBDAS,
                silog_lambda: float = DEFAULT_SILOG_LAMBDA) -> LossReport:
    """Weighted L1 + DSSIM + SILog between a predicted and a reference field."""
    if pred.grid != truth.grid:
        raise VQFFormatError(f"grid mismatch: {pred.grid.to_dict()} vs {truth.grid.to_dict()}")
    if pred.params != truth.params:
        raise VQFFormatError("metric parameter mismatch between fields")
    p = pred.normalized().reshape(-1, 3)
    t = truth.normalized().reshape(-1, 3)
    l1 = l1_loss(p, t)
    ds = dssim(p, t)
    si = silog(p, t, silog_lambda)
    lam1, lam2, lam3 = (float(x) for x in lambdas)
    return LossReport(l1, ds, si, lam1 * l1 + lam2 * ds + lam3 * si,
                      (lam1, lam2, lam3), float(silog_lambda))


# -- heatmaps --------------------------------------------------------------


def minmax(a: np.ndarray) -> np.ndarray:
    """Scale to [0, 1]; a constant array maps to 0.5 everywhere."""
    a = np.asarray(a, dtype=np.float64)
    lo, hi = a.min(), a.max()
    if hi - lo <= 0:
        return np.full(a.shape, 0.5)
    return (a - lo) / (hi - lo)


def channel_heatmap(vqf: VQF, channel: str, weights=None) -> GrayImage:
    """(N_pol, N_az) min-max normalized image of one channel.

    ``occlusion`` is shown as visible ratio (1 - occlusion ratio);
    ``combined`` renders the optimizer's score field.
    """
    if channel not in HEATMAP_CHANNELS:
        raise ValueError(f"unknown channel {channel!r}; choose from {HEATMAP_CHANNELS}")
    if channel == "combined":
        from .optimizer import DEFAULT_WEIGHTS, combined_score

        data = combined_score(vqf, weights or DEFAULT_WEIGHTS).scores
    elif channel == "occlusion":
        data = 1.0 - vqf.channel("occlusion_ratio")
    else:
        data = vqf.channel(channel)
    return GrayImage(minmax(data))
