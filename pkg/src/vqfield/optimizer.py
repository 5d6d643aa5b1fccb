"""Reachable-aware progressive viewpoint optimization over a quality field."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .viewsphere import ViewpointGrid, reachable_set
from .vqf import VQF, load_vqf, minmax

DEFAULT_WEIGHTS = (1 / 3, 1 / 3, 1 / 3)
DEFAULT_STEP_RADIUS_DEG = 40.0
DEFAULT_ALPHA = 0.5
DEFAULT_SPHERE_RADIUS = 5.0


class ProviderError(RuntimeError):
    """A VQF provider could not supply the field for a step."""


@dataclass(frozen=True, eq=False)
class ScoreField:
    grid: ViewpointGrid
    scores: np.ndarray  # (N_pol, N_az)

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.shape != self.grid.shape:
            raise ValueError(f"score shape {scores.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", scores)

    def flat(self) -> np.ndarray:
        return self.scores.reshape(-1)

    def argmax(self) -> int:
        """Best viewpoint; ties go to the smallest linear index."""
        return int(np.argmax(self.flat()))


def combined_score(vqf: VQF, weights=DEFAULT_WEIGHTS) -> ScoreField:
    """Weighted sum of min-max normalized visible ratio and both entropies."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (3,) or np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be three non-negative numbers, not all zero")
    channels = (1.0 - vqf.channel("occlusion_ratio"),
                vqf.channel("normal_entropy"),
                vqf.channel("visual_entropy"))
    scores = sum(wi * minmax(ch) for wi, ch in zip(w, channels))
    return ScoreField(vqf.grid, scores)


def next_viewpoint(field: ScoreField, current: int, reachable) -> int:
    """One step of reachable-aware optimization.

    Go to the global argmax if reachable, else to the reachable viewpoint
    geodesically nearest to it (ties: higher score, then smaller index). Stay
    put when that move would not get strictly closer to the argmax.
    """
    reachable = sorted(reachable)
    if not reachable:
        raise ValueError("reachable set is empty")
    goal = field.argmax()
    if goal == current:
        return current
    if goal in reachable:
        return goal
    dist = field.grid.distances[goal]
    scores = field.flat()
    best = min(reachable, key=lambda i: (dist[i], -scores[i], i))
    if dist[best] < dist[current]:
        return best
    return current


@dataclass
class Trajectory:
    steps: list[tuple[int, float]]
    start: int
    converged: bool
    grid: ViewpointGrid
    metadata: dict = field(default_factory=dict)

    @property
    def viewpoints(self) -> list[int]:
        return [v for v, _ in self.steps]

    @property
    def scores(self) -> list[float]:
        return [s for _, s in self.steps]

    @property
    def final(self) -> int:
        return self.steps[-1][0]

    def to_dict(self) -> dict:
        rows = []
        for k, (v, s) in enumerate(self.steps):
            vp = self.grid.viewpoint(v)
            rows.append({"step": k, "viewpoint_index": v,
                         "azimuth_deg": math.degrees(vp.azimuth),
                         "polar_deg": math.degrees(vp.polar), "score": s})
        return {"start": self.start, "converged": self.converged,
                "grid": self.grid.to_dict(), "metadata": self.metadata, "steps": rows}

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


# providers take (step, current viewpoint) and return the field to plan on
VQFProvider = Callable[[int, int], VQF]


class StaticProvider:
    """Returns the same field at every step (ground-truth oracle mode)."""

    def __init__(self, vqf: VQF):
        self.vqf = vqf

    def __call__(self, step: int, current: int) -> VQF:
        return self.vqf


class FileSequenceProvider:
    """Returns the step-indexed field from a list of ``.vqf.json`` files."""

    def __init__(self, paths):
        self.paths = [os.fspath(p) for p in paths]

    @classmethod
    def from_dir(cls, directory) -> FileSequenceProvider:
        names = sorted(n for n in os.listdir(directory) if n.endswith(".json"))
        return cls([os.path.join(directory, n) for n in names])

    def __len__(self) -> int:
        return len(self.paths)

    def __call__(self, step: int, current: int) -> VQF:
        if step >= len(self.paths):
            raise ProviderError(f"no VQF estimate for step {step} ({len(self.paths)} files)")
        path = self.paths[step]
        if not os.path.exists(path):
            raise ProviderError(f"VQF estimate for step {step} missing: {path}")
        return load_vqf(path, strict=False)


def run_trajectory(provider: VQFProvider, start: int, step_radius: float = math.radians(DEFAULT_STEP_RADIUS_DEG),
                   max_steps: int = 132, weights=DEFAULT_WEIGHTS) -> Trajectory:
    """Iterate ``next_viewpoint`` from ``start`` until it stays put or ``max_steps`` moves.

    ``steps`` starts with the start viewpoint; each entry carries the score of
    that viewpoint in the field used to select it.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    current = start
    steps: list[tuple[int, float]] = []
    grid = None
    converged = False
    for k in range(max_steps):
        vqf = provider(k, current)
        if grid is None:
            grid = vqf.grid
        elif vqf.grid != grid:
            raise ProviderError(f"step {k}: grid changed mid-trajectory")
        field = combined_score(vqf, weights)
        if k == 0:
            steps.append((current, float(field.flat()[current])))
        nxt = next_viewpoint(field, current, reachable_set(grid, current, step_radius))
        if nxt == current:
            converged = True
            break
        steps.append((nxt, float(field.flat()[nxt])))
        current = nxt
    meta = {"step_radius_deg": math.degrees(step_radius), "max_steps": max_steps,
            "weights": [float(w) for w in weights]}
    return Trajectory(steps, start, converged, grid, meta)


def distance_weighted_score(field: ScoreField, agent_position, alpha: float = DEFAULT_ALPHA,
                            sphere_radius: float = DEFAULT_SPHERE_RADIUS) -> ScoreField:
    """Penalize each viewpoint by its distance to the agent.

    Viewpoints are placed on a sphere of ``sphere_radius`` around the object;
    the penalty is ``alpha`` times distance over the sphere diameter.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if not sphere_radius > 0:
        raise ValueError("sphere_radius must be positive")
    if alpha == 0:
        return field
    pos = field.grid.units * sphere_radius
    d = np.linalg.norm(pos - np.asarray(agent_position, dtype=np.float64), axis=1)
    return ScoreField(field.grid, field.scores - alpha * (d / (2 * sphere_radius)).reshape(field.grid.shape))


def run_waypoints(provider: VQFProvider, agent_position, alpha: float = DEFAULT_ALPHA,
                  sphere_radius: float = DEFAULT_SPHERE_RADIUS, max_steps: int = 132,
                  weights=DEFAULT_WEIGHTS) -> Trajectory:
    """Distance-weighted waypoint sequence: fly to the best weighted viewpoint, repeat.

    Stops when the best waypoint is the one the agent already occupies.
    """
    agent = np.asarray(agent_position, dtype=np.float64)
    steps: list[tuple[int, float]] = []
    converged = False
    grid = None
    current = -1
    for k in range(max_steps):
        vqf = provider(k, current)
        grid = vqf.grid
        weighted = distance_weighted_score(combined_score(vqf, weights), agent, alpha, sphere_radius)
        nxt = weighted.argmax()
        if nxt == current:
            converged = True
            break
        steps.append((nxt, float(weighted.flat()[nxt])))
        current = nxt
        agent = grid.units[nxt] * sphere_radius
    meta = {"agent_position": [float(x) for x in np.asarray(agent_position, dtype=np.float64)],
            "alpha": alpha, "sphere_radius": sphere_radius, "max_steps": max_steps,
            "weights": [float(w) for w in weights]}
    return Trajectory(steps, steps[0][0], converged, grid, meta)
