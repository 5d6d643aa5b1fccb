# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled BVH traversal kernels.

The triangle test mirrors ``_pycore`` operation for operation so both
backends return bit-identical hits. Box tests only prune (boxes are padded at
build time), so their arithmetic is free to differ.

Layout: ``nodes`` rows are (lo_x, lo_y, lo_z, hi_x, hi_y, hi_z); ``links`` rows
are (left, right, start, count); ``tris`` rows are (v0, v1 - v0, v2 - v0).
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF STACK_SIZE = 128

cdef double DET_EPS = 1e-12
cdef double RAY_EPS = 1e-6


cdef inline bint _tri_hit(double ox, double oy, double oz,
                          double dx, double dy, double dz,
                          const double* tr, double tmax,
                          double* t_out, double* u_out, double* v_out) noexcept nogil:
    cdef double e1x = tr[3], e1y = tr[4], e1z = tr[5]
    cdef double e2x = tr[6], e2y = tr[7], e2z = tr[8]
    cdef double px = dy * e2z - dz * e2y
    cdef double py = dz * e2x - dx * e2z
    cdef double pz = dx * e2y - dy * e2x
    cdef double det = e1x * px + e1y * py + e1z * pz
    if det < DET_EPS and det > -DET_EPS:
        return False
    cdef double inv = 1.0 / det
    cdef double sx = ox - tr[0], sy = oy - tr[1], sz = oz - tr[2]
    cdef double u = (sx * px + sy * py + sz * pz) * inv
    if u < 0.0 or u > 1.0:
        return False
    cdef double qx = sy * e1z - sz * e1y
    cdef double qy = sz * e1x - sx * e1z
    cdef double qz = sx * e1y - sy * e1x
    cdef double v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return False
    cdef double t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t <= RAY_EPS or t > tmax:
        return False
    t_out[0] = t
    u_out[0] = u
    v_out[0] = v
    return True


cdef inline bint _slab(double o, double inv, bint flat, double lo, double hi,
                       double* t_enter, double* t_exit) noexcept nogil:
    cdef double t0, t1
    if flat:
        return lo <= o <= hi
    t0 = (lo - o) * inv
    t1 = (hi - o) * inv
    if t0 > t1:
        t0, t1 = t1, t0
    if t0 > t_enter[0]:
        t_enter[0] = t0
    if t1 < t_exit[0]:
        t_exit[0] = t1
    return t_enter[0] <= t_exit[0]


cdef inline bint _box_hit(double ox, double oy, double oz,
                          double ix, double iy, double iz,
                          bint fx, bint fy, bint fz,
                          const double* nd, double tmax, double* tnear) noexcept nogil:
    cdef double t_enter = 0.0, t_exit = tmax
    if not _slab(ox, ix, fx, nd[0], nd[3], &t_enter, &t_exit):
        return False
    if not _slab(oy, iy, fy, nd[1], nd[4], &t_enter, &t_exit):
        return False
    if not _slab(oz, iz, fz, nd[2], nd[5], &t_enter, &t_exit):
        return False
    tnear[0] = t_enter
    return True


def closest_hit(const double[:, ::1] origins, const double[:, ::1] dirs,
                const double[::1] tmax, const double[:, ::1] nodes,
                const cnp.int64_t[:, ::1] links, const double[:, ::1] tris,
                const cnp.int64_t[::1] face):
    """Nearest hit per ray: (face, t, u, v); face -1 marks a miss.

    Ties in t go to the smaller face id.
    """
    cdef Py_ssize_t n = origins.shape[0]
    out_face = np.full(n, -1, dtype=np.int64)
    out_t = np.full(n, np.inf)
    out_u = np.zeros(n)
    out_v = np.zeros(n)
    cdef cnp.int64_t[::1] f_view = out_face
    cdef double[::1] t_view = out_t
    cdef double[::1] u_view = out_u
    cdef double[::1] v_view = out_v
    cdef Py_ssize_t stack[STACK_SIZE]
    cdef double stack_t[STACK_SIZE]
    cdef Py_ssize_t i, sp, node, k, a, b, k_end
    cdef double ox, oy, oz, dx, dy, dz, ix, iy, iz, best_t, t, u, v, ta, tb, tm
    cdef bint fx, fy, fz, hit_a, hit_b
    cdef cnp.int64_t best_f, fk
    cdef const cnp.int64_t* ln
    if n == 0:
        return out_face, out_t, out_u, out_v
    with nogil:
        for i in range(n):
            ox = origins[i, 0]; oy = origins[i, 1]; oz = origins[i, 2]
            dx = dirs[i, 0]; dy = dirs[i, 1]; dz = dirs[i, 2]
            fx = dx == 0.0; fy = dy == 0.0; fz = dz == 0.0
            ix = 0.0 if fx else 1.0 / dx
            iy = 0.0 if fy else 1.0 / dy
            iz = 0.0 if fz else 1.0 / dz
            tm = tmax[i]
            best_t = tm
            best_f = -1
            sp = 0
            if _box_hit(ox, oy, oz, ix, iy, iz, fx, fy, fz, &nodes[0, 0], best_t, &ta):
                stack[0] = 0
                stack_t[0] = ta
                sp = 1
            while sp > 0:
                sp -= 1
                if stack_t[sp] > best_t:
                    continue
                node = stack[sp]
                ln = &links[node, 0]
                if ln[3] > 0:
                    k_end = ln[2] + ln[3]
                    for k in range(ln[2], k_end):
                        if _tri_hit(ox, oy, oz, dx, dy, dz, &tris[k, 0], tm, &t, &u, &v):
                            fk = face[k]
                            if best_f < 0 or t < best_t or (t == best_t and fk < best_f):
                                best_t = t
                                best_f = fk
                                t_view[i] = t
                                u_view[i] = u
                                v_view[i] = v
                    continue
                a = ln[0]
                b = ln[1]
                hit_a = _box_hit(ox, oy, oz, ix, iy, iz, fx, fy, fz, &nodes[a, 0], best_t, &ta)
                hit_b = _box_hit(ox, oy, oz, ix, iy, iz, fx, fy, fz, &nodes[b, 0], best_t, &tb)
                if hit_a and hit_b:
                    # farther child first so the nearer one pops next
                    if tb < ta:
                        stack[sp] = a; stack_t[sp] = ta
                        stack[sp + 1] = b; stack_t[sp + 1] = tb
                    else:
                        stack[sp] = b; stack_t[sp] = tb
                        stack[sp + 1] = a; stack_t[sp + 1] = ta
                    sp += 2
                elif hit_a:
                    stack[sp] = a; stack_t[sp] = ta
                    sp += 1
                elif hit_b:
                    stack[sp] = b; stack_t[sp] = tb
                    sp += 1
            f_view[i] = best_f
    return out_face, out_t, out_u, out_v


def any_hit(const double[:, ::1] origins, const double[:, ::1] dirs,
            const double[::1] tmax, const double[:, ::1] nodes,
            const cnp.int64_t[:, ::1] links, const double[:, ::1] tris):
    """True where the ray segment (RAY_EPS, tmax] intersects any triangle."""
    cdef Py_ssize_t n = origins.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] hit_view = out
    cdef Py_ssize_t stack[STACK_SIZE]
    cdef Py_ssize_t i, sp, node, k, a, b, k_end
    cdef double ox, oy, oz, dx, dy, dz, ix, iy, iz, tm, t, u, v, ta, tb
    cdef bint fx, fy, fz, hit_a, hit_b, found
    cdef const cnp.int64_t* ln
    if n == 0:
        return out.view(np.bool_)
    with nogil:
        for i in range(n):
            ox = origins[i, 0]; oy = origins[i, 1]; oz = origins[i, 2]
            dx = dirs[i, 0]; dy = dirs[i, 1]; dz = dirs[i, 2]
            fx = dx == 0.0; fy = dy == 0.0; fz = dz == 0.0
            ix = 0.0 if fx else 1.0 / dx
            iy = 0.0 if fy else 1.0 / dy
            iz = 0.0 if fz else 1.0 / dz
            tm = tmax[i]
            found = False
            sp = 0
            if _box_hit(ox, oy, oz, ix, iy, iz, fx, fy, fz, &nodes[0, 0], tm, &ta):
                stack[0] = 0
                sp = 1
            while sp > 0 and not found:
                sp -= 1
                node = stack[sp]
                ln = &links[node, 0]
                if ln[3] > 0:
                    k_end = ln[2] + ln[3]
                    for k in range(ln[2], k_end):
                        if _tri_hit(ox, oy, oz, dx, dy, dz, &tris[k, 0], tm, &t, &u, &v):
                            found = True
                            break
                    continue
                a = ln[0]
                b = ln[1]
                hit_a = _box_hit(ox, oy, oz, ix, iy, iz, fx, fy, fz, &nodes[a, 0], tm, &ta)
                hit_b = _box_hit(ox, oy, oz, ix, iy, iz, fx, fy, fz, &nodes[b, 0], tm, &tb)
                if hit_a and hit_b:
                    if tb < ta:
                        stack[sp] = a
                        stack[sp + 1] = b
                    else:
                        stack[sp] = b
                        stack[sp + 1] = a
                    sp += 2
                elif hit_a:
                    stack[sp] = a
                    sp += 1
                elif hit_b:
                    stack[sp] = b
                    sp += 1
            hit_view[i] = found
    return out.view(np.bool_)
