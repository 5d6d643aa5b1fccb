"""Command-line entry point: ``vqfield <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import _backend
from .mesh import EmptyMeshError, MeshParseError, load_mesh, normalize
from .metrics import MetricParams
from .optimizer import (DEFAULT_ALPHA, DEFAULT_SPHERE_RADIUS, DEFAULT_STEP_RADIUS_DEG,
                        DEFAULT_WEIGHTS, FileSequenceProvider, ProviderError, StaticProvider,
                        run_trajectory, run_waypoints)
from .raycast import build_accel
from .render import render_grayscale, write_image
from .viewsphere import ViewpointGrid, camera_pose
from .vqf import (DEFAULT_LAMBDAS, DEFAULT_SILOG_LAMBDA, HEATMAP_CHANNELS, VQFFormatError,
                  channel_heatmap, compare_vqf, compute_vqf, load_vqf, save_vqf)

log = logging.getLogger("vqfield")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3
MESH_EXTENSIONS = (".obj", ".stl")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    grid: ViewpointGrid
    params: MetricParams
    weights: tuple[float, float, float]
    step_radius_deg: float
    max_steps: int | None
    alpha: float
    sphere_radius: float
    threads: int
    seed: int
    backend: str

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "params": self.params.to_dict(),
                "weights": list(self.weights), "step_radius_deg": self.step_radius_deg,
                "max_steps": self.max_steps, "alpha": self.alpha,
                "sphere_radius": self.sphere_radius, "seed": self.seed}


def _floats(text: str, n: int, flag: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.replace("x", ",").split(","))
    except ValueError:
        raise ConfigError(f"{flag}: expected {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise ConfigError(f"{flag}: expected {n} values, got {len(vals)}")
    return vals


def _config(args) -> RunConfig:
    """Validate every shared flag before any work starts."""
    try:
        grid = ViewpointGrid(args.grid_az, args.grid_pol, args.radius, args.fov_deg)
    except ValueError as exc:
        raise ConfigError(f"--grid-az/--grid-pol/--radius/--fov-deg: {exc}") from None
    nb = _floats(args.normal_bins, 2, "--normal-bins")
    if any(b != int(b) or b < 1 for b in nb):
        raise ConfigError("--normal-bins: bin counts must be positive integers")
    if args.res < 16:
        raise ConfigError("--res: must be at least 16")
    if args.samples_per_face < 1:
        raise ConfigError("--samples-per-face: must be >= 1")
    if args.gray_bins < 1:
        raise ConfigError("--gray-bins: must be >= 1")
    params = MetricParams(int(nb[0]), int(nb[1]), args.gray_bins, args.samples_per_face,
                          args.res, args.area_weighted)
    weights = _floats(args.weights, 3, "--weights") if args.weights else DEFAULT_WEIGHTS
    if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
        raise ConfigError("--weights: must be non-negative and not all zero")
    if args.step_radius_deg < 0:
        raise ConfigError("--step-radius-deg: must be >= 0")
    if args.max_steps is not None and args.max_steps < 1:
        raise ConfigError("--max-steps: must be >= 1")
    if args.alpha < 0:
        raise ConfigError("--alpha: must be >= 0")
    if args.sphere_radius <= 0:
        raise ConfigError("--sphere-radius: must be positive")
    if args.threads < 1:
        raise ConfigError("--threads: must be >= 1")
    backend = _backend.NAME if args.backend == "auto" else args.backend
    if backend not in _backend.available():
        raise ConfigError(f"--backend: {backend!r} is not available")
    return RunConfig(grid, params, tuple(weights), args.step_radius_deg, args.max_steps,
                     args.alpha, args.sphere_radius, args.threads, args.seed, backend)


def _load_normalized(path):
    return normalize(load_mesh(path))


def _compute(path, cfg: RunConfig):
    mesh = _load_normalized(path)
    accel = build_accel(mesh, cfg.backend)
    config = {**cfg.to_dict(), "mesh": os.path.basename(os.fspath(path))}
    return mesh, accel, compute_vqf(mesh, cfg.grid, cfg.params, cfg.threads, accel, config)


def _emit_views(mesh, accel, cfg: RunConfig, out_dir, fmt: str):
    os.makedirs(out_dir, exist_ok=True)
    size = cfg.params.image_size
    for i in range(len(cfg.grid)):
        image, mask = render_grayscale(accel, mesh, camera_pose(cfg.grid, i), size, size)
        write_image(os.path.join(out_dir, f"view_{i:03d}.{fmt}"), image.pixels)
        write_image(os.path.join(out_dir, f"mask_{i:03d}.pgm"), mask.bits)


def cmd_compute(args) -> int:
    cfg = _config(args)
    out = args.output or _default_vqf_name(args.mesh)
    _, _, vqf = _compute(args.mesh, cfg)
    save_vqf(vqf, out)
    log.info("wrote %s (%d viewpoints)", out, len(cfg.grid))
    return EXIT_OK


def _default_vqf_name(mesh_path) -> str:
    return os.path.splitext(os.path.basename(mesh_path))[0] + ".vqf.json"


def cmd_batch(args) -> int:
    cfg = _config(args)
    if not os.path.isdir(args.mesh_dir):
        raise FileNotFoundError(f"mesh directory not found: {args.mesh_dir}")
    os.makedirs(args.out_dir, exist_ok=True)
    names = sorted(n for n in os.listdir(args.mesh_dir) if n.lower().endswith(MESH_EXTENSIONS))
    ok, failed = 0, []
    for name in names:
        path = os.path.join(args.mesh_dir, name)
        try:
            mesh, accel, vqf = _compute(path, cfg)
            stem = os.path.splitext(name)[0]
            save_vqf(vqf, os.path.join(args.out_dir, stem + ".vqf.json"))
            if args.emit_views:
                _emit_views(mesh, accel, cfg, os.path.join(args.out_dir, stem), args.image_format)
            ok += 1
        except (OSError, ValueError) as exc:
            log.error("failed: %s: %s", path, exc)
            failed.append(name)
    print(f"{ok} ok, {len(failed)} failed" + (f": {', '.join(failed)}" if failed else ""))
    return EXIT_OK if not failed else EXIT_IO


def cmd_render(args) -> int:
    cfg = _config(args)
    if not 0 <= args.view < len(cfg.grid):
        raise ConfigError(f"--view: must be in [0, {len(cfg.grid)})")
    mesh = _load_normalized(args.mesh)
    accel = build_accel(mesh, cfg.backend)
    size = cfg.params.image_size
    image, mask = render_grayscale(accel, mesh, camera_pose(cfg.grid, args.view), size, size)
    write_image(args.output, image.pixels)
    if args.mask:
        write_image(args.mask, mask.bits)
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _config(args)
    sources = [s for s in (args.mesh, args.vqf, args.vqf_dir) if s]
    if len(sources) != 1:
        raise ConfigError("exactly one of --mesh, --vqf, --vqf-dir is required")
    if args.mesh:
        _, _, vqf = _compute(args.mesh, cfg)
        provider, n_fields = StaticProvider(vqf), None
    elif args.vqf:
        vqf = load_vqf(args.vqf, strict=False)
        provider, n_fields = StaticProvider(vqf), None
    else:
        if not os.path.isdir(args.vqf_dir):
            raise FileNotFoundError(f"VQF directory not found: {args.vqf_dir}")
        provider = FileSequenceProvider.from_dir(args.vqf_dir)
        n_fields = len(provider)
        if n_fields == 0:
            raise FileNotFoundError(f"no .json files in {args.vqf_dir}")
    grid = provider(0, 0).grid
    max_steps = cfg.max_steps or n_fields or len(grid)

    if args.agent_pos is not None:
        agent = _floats(args.agent_pos, 3, "--agent-pos")
        traj = run_waypoints(provider, agent, cfg.alpha, cfg.sphere_radius, max_steps, cfg.weights)
    else:
        if args.start == "random":
            start = int(np.random.default_rng(cfg.seed).integers(len(grid)))
        else:
            try:
                start = int(args.start)
            except ValueError:
                raise ConfigError(f"--start: expected an index or 'random', got {args.start!r}") from None
        if not 0 <= start < len(grid):
            raise ConfigError(f"--start: must be in [0, {len(grid)})")
        traj = run_trajectory(provider, start, math.radians(cfg.step_radius_deg),
                              max_steps, cfg.weights)
    traj.metadata["config"] = cfg.to_dict()
    if args.output:
        traj.save(args.output)
    print(f"{'step':>4} {'view':>5} {'az_deg':>7} {'pol_deg':>7} {'score':>9}")
    for row in traj.to_dict()["steps"]:
        print(f"{row['step']:>4} {row['viewpoint_index']:>5} {row['azimuth_deg']:>7.1f} "
              f"{row['polar_deg']:>7.1f} {row['score']:>9.5f}")
    print(f"converged: {traj.converged}")
    if args.emit_views:
        if not args.mesh:
            raise ConfigError("--emit-views needs --mesh")
        mesh = _load_normalized(args.mesh)
        accel = build_accel(mesh, cfg.backend)
        os.makedirs(args.emit_views, exist_ok=True)
        size = cfg.params.image_size
        for k, v in enumerate(traj.viewpoints):
            image, _ = render_grayscale(accel, mesh, camera_pose(grid, v), size, size)
            write_image(os.path.join(args.emit_views, f"step_{k:02d}_view_{v:03d}.png"), image.pixels)
    return EXIT_OK


def cmd_compare(args) -> int:
    lambdas = _floats(args.lambdas, 3, "--lambdas")
    pred = load_vqf(args.pred, strict=False)
    truth = load_vqf(args.truth, strict=False)
    if pred.grid != truth.grid or pred.params != truth.params:
        raise ConfigError(
            f"shape mismatch: pred grid {pred.grid.shape} {pred.grid.to_dict()} vs "
            f"truth grid {truth.grid.shape} {truth.grid.to_dict()}")
    report = compare_vqf(pred, truth, lambdas, args.silog_lambda)
    print(json.dumps(report.to_dict(), indent=1))
    return EXIT_OK


def cmd_heatmap(args) -> int:
    weights = _floats(args.weights, 3, "--weights") if args.weights else None
    vqf = load_vqf(args.vqf, strict=False)
    image = channel_heatmap(vqf, args.channel, weights)
    pixels = image.pixels
    if args.scale > 1:
        pixels = np.kron(pixels, np.ones((args.scale, args.scale)))
    write_image(args.output, pixels)
    return EXIT_OK


def _shared_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("shared options")
    g.add_argument("--grid-az", type=int, default=12)
    g.add_argument("--grid-pol", type=int, default=11)
    g.add_argument("--radius", type=float, default=2.5)
    g.add_argument("--fov-deg", type=float, default=45.0)
    g.add_argument("--res", type=int, default=256)
    g.add_argument("--samples-per-face", type=int, default=10)
    g.add_argument("--normal-bins", default="8x32", help="polar x azimuth bins")
    g.add_argument("--gray-bins", type=int, default=256)
    g.add_argument("--area-weighted", action="store_true", help="area-weight the normal histogram")
    g.add_argument("--weights", default=None, help="score weights w1,w2,w3 (default 1/3 each)")
    g.add_argument("--step-radius-deg", type=float, default=DEFAULT_STEP_RADIUS_DEG)
    g.add_argument("--max-steps", type=int, default=None)
    g.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    g.add_argument("--sphere-radius", type=float, default=DEFAULT_SPHERE_RADIUS)
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--backend", choices=("auto", "compiled", "python"), default="auto")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    shared = _shared_flags()
    parser = argparse.ArgumentParser(prog="vqfield", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", parents=[shared], help="compute a VQF for one mesh")
    p.add_argument("mesh")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("batch", parents=[shared], help="compute VQFs for a directory of meshes")
    p.add_argument("mesh_dir")
    p.add_argument("out_dir")
    p.add_argument("--emit-views", action="store_true", help="also write per-view image and mask")
    p.add_argument("--image-format", choices=("pgm", "png"), default="pgm")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("render", parents=[shared], help="render one grid view")
    p.add_argument("mesh")
    p.add_argument("--view", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mask")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("optimize", parents=[shared], help="simulate viewpoint optimization")
    p.add_argument("--mesh")
    p.add_argument("--vqf")
    p.add_argument("--vqf-dir", help="directory of per-step VQF estimates, consumed in name order")
    p.add_argument("--start", default="0", help="viewpoint index or 'random'")
    p.add_argument("--agent-pos", help="x,y,z; switches to distance-weighted waypoints")
    p.add_argument("-o", "--output")
    p.add_argument("--emit-views", metavar="DIR")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("compare", help="loss between a predicted and a reference VQF")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--lambdas", default=",".join(str(x) for x in DEFAULT_LAMBDAS))
    p.add_argument("--silog-lambda", type=float, default=DEFAULT_SILOG_LAMBDA)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("heatmap", help="export one VQF channel as an image")
    p.add_argument("vqf")
    p.add_argument("--channel", choices=HEATMAP_CHANNELS, default="combined")
    p.add_argument("--weights", default=None)
    p.add_argument("--scale", type=int, default=1, help="pixel upscaling factor")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_heatmap)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (FileNotFoundError, MeshParseError, EmptyMeshError, VQFFormatError,
            ProviderError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except Exception as exc:  # invariant violations surface here
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
