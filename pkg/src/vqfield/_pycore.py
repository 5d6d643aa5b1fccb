"""Pure numpy BVH traversal, the fallback for the compiled ``_core`` kernels.

Rays are traversed breadth first as (ray, node) pair frontiers. The
triangle test repeats the compiled kernel's arithmetic in the same order,
so hits agree bit for bit between the two backends.
"""

import numpy as np

DET_EPS = 1e-12
RAY_EPS = 1e-6
CHUNK = 4096


def _box_hit(o, d, lo, hi, tmax):
    t_enter = np.zeros(len(o))
    t_exit = tmax.copy()
    ok = np.ones(len(o), dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for a in range(3):
            da = d[:, a]
            flat = da == 0.0
            ok &= ~(flat & ((o[:, a] < lo[:, a]) | (o[:, a] > hi[:, a])))
            t0 = (lo[:, a] - o[:, a]) / da
            t1 = (hi[:, a] - o[:, a]) / da
            near = np.where(flat, -np.inf, np.minimum(t0, t1))
            far = np.where(flat, np.inf, np.maximum(t0, t1))
            t_enter = np.maximum(t_enter, near)
            t_exit = np.minimum(t_exit, far)
    ok &= t_enter <= t_exit
    return ok, t_enter


def _tri_hit(o, d, v0, e1, e2, tmax):
    """Vectorized Moller-Trumbore; returns (hit, t, u, v)."""
    # parallel rays give inf/nan lanes; the det test already rejects them
    with np.errstate(all="ignore"):
        return _tri_hit_raw(o, d, v0, e1, e2, tmax)


def _tri_hit_raw(o, d, v0, e1, e2, tmax):
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
    e1x, e1y, e1z = e1[:, 0], e1[:, 1], e1[:, 2]
    e2x, e2y, e2z = e2[:, 0], e2[:, 1], e2[:, 2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    hit = ~((det < DET_EPS) & (det > -DET_EPS))
    inv = 1.0 / det
    sx = o[:, 0] - v0[:, 0]
    sy = o[:, 1] - v0[:, 1]
    sz = o[:, 2] - v0[:, 2]
    u = (sx * px + sy * py + sz * pz) * inv
    hit &= (u >= 0.0) & (u <= 1.0)
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    hit &= (v >= 0.0) & (u + v <= 1.0)
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    hit &= (t > RAY_EPS) & (t <= tmax)
    return hit, t, u, v


def _expand_leaves(rays, nodes, start, count):
    reps = count[nodes]
    r = np.repeat(rays, reps)
    offsets = np.arange(len(r)) - np.repeat(np.cumsum(reps) - reps, reps)
    k = np.repeat(start[nodes], reps) + offsets
    return r, k


def _unpack(nodes, links, tris):
    return (nodes[:, :3], nodes[:, 3:], links[:, 0], links[:, 1], links[:, 2], links[:, 3],
            tris[:, 0:3], tris[:, 3:6], tris[:, 6:9])


def closest_hit(origins, dirs, tmax, nodes, links, tris, face):
    """Nearest hit per ray: (face, t, u, v); face -1 marks a miss.

    Ties in t go to the smaller face id.
    """
    lo, hi, left, right, start, count, v0, e1, e2 = _unpack(nodes, links, tris)
    n = len(origins)
    out_face = np.full(n, -1, dtype=np.int64)
    out_t = np.full(n, np.inf)
    out_u = np.zeros(n)
    out_v = np.zeros(n)
    best_t = np.array(tmax, dtype=np.float64, copy=True)
    for c0 in range(0, n, CHUNK):
        rays = np.arange(c0, min(n, c0 + CHUNK))
        nodes = np.zeros(len(rays), dtype=np.int64)
        while rays.size:
            ok, _ = _box_hit(origins[rays], dirs[rays], lo[nodes], hi[nodes], best_t[rays])
            rays, nodes = rays[ok], nodes[ok]
            leaf = count[nodes] > 0
            r, k = _expand_leaves(rays[leaf], nodes[leaf], start, count)
            if r.size:
                hit, t, u, v = _tri_hit(origins[r], dirs[r], v0[k], e1[k], e2[k], tmax[r])
                r, t, u, v, f = r[hit], t[hit], u[hit], v[hit], face[k[hit]]
                if r.size:
                    order = np.lexsort((f, t, r))
                    r, t, u, v, f = r[order], t[order], u[order], v[order], f[order]
                    first = np.ones(len(r), dtype=bool)
                    first[1:] = r[1:] != r[:-1]
                    r, t, u, v, f = r[first], t[first], u[first], v[first], f[first]
                    bf, bt = out_face[r], best_t[r]
                    better = (bf < 0) | (t < bt) | ((t == bt) & (f < bf))
                    r = r[better]
                    best_t[r] = t[better]
                    out_face[r] = f[better]
                    out_t[r] = t[better]
                    out_u[r] = u[better]
                    out_v[r] = v[better]
            inner = ~leaf
            rays = np.repeat(rays[inner], 2)
            nodes = np.column_stack((left[nodes[inner]], right[nodes[inner]])).ravel()
    return out_face, out_t, out_u, out_v


def any_hit(origins, dirs, tmax, nodes, links, tris):
    """True where the ray segment (RAY_EPS, tmax] intersects any triangle."""
    lo, hi, left, right, start, count, v0, e1, e2 = _unpack(nodes, links, tris)
    n = len(origins)
    out = np.zeros(n, dtype=bool)
    for c0 in range(0, n, CHUNK):
        rays = np.arange(c0, min(n, c0 + CHUNK))
        nodes = np.zeros(len(rays), dtype=np.int64)
        while rays.size:
            ok, _ = _box_hit(origins[rays], dirs[rays], lo[nodes], hi[nodes], tmax[rays])
            ok &= ~out[rays]
            rays, nodes = rays[ok], nodes[ok]
            leaf = count[nodes] > 0
            r, k = _expand_leaves(rays[leaf], nodes[leaf], start, count)
            if r.size:
                hit, _, _, _ = _tri_hit(origins[r], dirs[r], v0[k], e1[k], e2[k], tmax[r])
                out[r[hit]] = True
            inner = ~leaf & ~out[rays]
            rays = np.repeat(rays[inner], 2)
            nodes = np.column_stack((left[nodes[inner]], right[nodes[inner]])).ravel()
    return out
