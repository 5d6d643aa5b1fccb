"""Compare the compiled and pure-Python ray kernels.

Times closest-hit and any-hit queries plus one full visibility + render view
on a 20k-triangle torus, and checks that both backends return identical
results. Run with ``python3 benchmarks/bench_backends.py [--rays N]``.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from vqfield import _backend, shapes
from vqfield.mesh import normalize
from vqfield.metrics import MetricParams, evaluate_view
from vqfield.raycast import build_accel, surface_samples
from vqfield.viewsphere import camera_pose, make_grid


def _best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rays", type=int, default=50_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    mesh = normalize(shapes.torus(n_major=200, n_minor=50))
    rng = np.random.default_rng(args.seed)
    origins = rng.normal(size=(args.rays, 3))
    origins *= 2.5 / np.linalg.norm(origins, axis=1)[:, None]
    targets = rng.uniform(-0.5, 0.5, size=(args.rays, 3))
    dirs = targets - origins
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    cam = camera_pose(make_grid(), 40)
    samples = surface_samples(mesh, 10)

    backends = _backend.available()
    print(f"{mesh.n_faces} triangles, {args.rays} rays, backends: {', '.join(backends)}")
    print(f"{'backend':<10}{'closest us/ray':>16}{'any us/ray':>14}{'view ms':>10}")
    results = {}
    for name in backends:
        accel = build_accel(mesh, backend=name)
        # the python backend is slow; one view is enough to show the gap
        reps = args.repeat if name == "compiled" else 1
        tc, hits = _best_of(lambda: accel.closest_hits(origins, dirs), reps)
        ta, anys = _best_of(lambda: accel.any_hits(origins, dirs, np.full(args.rays, np.inf)), reps)
        tv, q = _best_of(lambda: evaluate_view(accel, mesh, cam, MetricParams(), samples), reps)
        results[name] = (hits, anys, q.as_tuple())
        print(f"{name:<10}{tc / args.rays * 1e6:>16.3f}{ta / args.rays * 1e6:>14.3f}{tv * 1e3:>10.1f}")

    if len(results) == 2:
        (h1, a1, q1), (h2, a2, q2) = results.values()
        same = all(np.array_equal(x, y) for x, y in zip(h1, h2)) and np.array_equal(a1, a2) and q1 == q2
        print(f"identical results: {same}")
        return 0 if same else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
