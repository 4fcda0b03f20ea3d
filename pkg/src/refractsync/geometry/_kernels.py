"""Compiled ray-query kernels.

A mesh is handed to kernels as a flat tuple (see ``MeshPack``)::

    (bmin, bmax, left, first, count, prims, v0, e1, e2, fnorm, tris, vnorm)

``bmin``/``bmax``/``left``/``first``/``count`` describe BVH nodes; internal
nodes have ``count == 0`` and children ``left`` and ``left + 1``. ``prims``
maps leaf ranges to original triangle indices. ``vnorm`` has zero rows when
the mesh carries no vertex normals (flat shading).
"""

import math

import numpy as np
from numba import njit

INF = np.inf
BARY_EPS = 1e-12
TIE_REL = 1e-10
TIE_ABS = 1e-14
TIE_SLOTS = 16
STACK_SIZE = 128
LEAF_SIZE = 4
N_BINS = 16


@njit(cache=True, inline="always")
def tie_bound(t):
    return t + TIE_REL * abs(t) + TIE_ABS


@njit(cache=True, inline="always")
def ray_triangle(v0, e1, e2, tri, ox, oy, oz, dx, dy, dz):
    """Moller-Trumbore with closed barycentric bounds. Returns (t, u, v); t=inf on miss."""
    e1x, e1y, e1z = e1[tri, 0], e1[tri, 1], e1[tri, 2]
    e2x, e2y, e2z = e2[tri, 0], e2[tri, 1], e2[tri, 2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if det == 0.0:
        return INF, 0.0, 0.0
    inv = 1.0 / det
    tx = ox - v0[tri, 0]
    ty = oy - v0[tri, 1]
    tz = oz - v0[tri, 2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -BARY_EPS or u > 1.0 + BARY_EPS:
        return INF, 0.0, 0.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
        return INF, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    return t, u, v


@njit(cache=True, inline="always")
def _inv(d):
    if d == 0.0:
        return 1e300
    return 1.0 / d


@njit(cache=True, inline="always")
def ray_box(bmin, bmax, node, ox, oy, oz, ix, iy, iz, tmin, tmax):
    """Slab test; returns entry distance or inf."""
    t0 = (bmin[node, 0] - ox) * ix
    t1 = (bmax[node, 0] - ox) * ix
    lo = min(t0, t1)
    hi = max(t0, t1)
    t0 = (bmin[node, 1] - oy) * iy
    t1 = (bmax[node, 1] - oy) * iy
    lo = max(lo, min(t0, t1))
    hi = min(hi, max(t0, t1))
    t0 = (bmin[node, 2] - oz) * iz
    t1 = (bmax[node, 2] - oz) * iz
    lo = max(lo, min(t0, t1))
    hi = min(hi, max(t0, t1))
    lo = max(lo, tmin)
    # widen slightly so that boxes of axis-flat geometry are not culled by rounding
    hi = min(hi, tmax) * (1.0 + 1e-12) + 1e-12
    if lo > hi:
        return INF
    return lo


@njit(cache=True)
def bvh_nearest(mesh, ox, oy, oz, dx, dy, dz, tmin, tmax):
    """Nearest hit with t in (tmin, tmax). Returns (t, tri, u, v); tri=-1 on miss.

    Hits within a relative 1e-10 window of the nearest distance are ties;
    the lowest triangle index wins.
    """
    bmin, bmax, left, first, count, prims, v0, e1, e2 = (
        mesh[0], mesh[1], mesh[2], mesh[3], mesh[4], mesh[5], mesh[6], mesh[7], mesh[8])
    if prims.shape[0] == 0:
        return INF, -1, 0.0, 0.0
    ix, iy, iz = _inv(dx), _inv(dy), _inv(dz)
    stack = np.empty(STACK_SIZE, np.int64)
    ct = np.empty(TIE_SLOTS)
    ci = np.empty(TIE_SLOTS, np.int64)
    cu = np.empty(TIE_SLOTS)
    cv = np.empty(TIE_SLOTS)
    nc = 0
    tbest = INF
    bound = tmax
    sp = 0
    if ray_box(bmin, bmax, 0, ox, oy, oz, ix, iy, iz, tmin, bound) < INF:
        stack[0] = 0
        sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        n = count[node]
        if n > 0:
            f = first[node]
            for k in range(f, f + n):
                tri = prims[k]
                t, u, v = ray_triangle(v0, e1, e2, tri, ox, oy, oz, dx, dy, dz)
                if t <= tmin or t >= tmax or t > bound:
                    continue
                if t < tbest:
                    tbest = t
                    bound = min(tmax, tie_bound(t))
                    keep = 0
                    for s in range(nc):
                        if ct[s] <= bound:
                            ct[keep] = ct[s]
                            ci[keep] = ci[s]
                            cu[keep] = cu[s]
                            cv[keep] = cv[s]
                            keep += 1
                    nc = keep
                if nc < TIE_SLOTS:
                    slot = nc
                    nc += 1
                else:
                    slot = 0
                    for s in range(1, nc):
                        if ct[s] > ct[slot]:
                            slot = s
                ct[slot] = t
                ci[slot] = tri
                cu[slot] = u
                cv[slot] = v
        else:
            a = left[node]
            b = a + 1
            ta = ray_box(bmin, bmax, a, ox, oy, oz, ix, iy, iz, tmin, bound)
            tb = ray_box(bmin, bmax, b, ox, oy, oz, ix, iy, iz, tmin, bound)
            if ta <= tb:
                if tb < INF:
                    stack[sp] = b
                    sp += 1
                if ta < INF:
                    stack[sp] = a
                    sp += 1
            else:
                if ta < INF:
                    stack[sp] = a
                    sp += 1
                if tb < INF:
                    stack[sp] = b
                    sp += 1
    if nc == 0:
        return INF, -1, 0.0, 0.0
    best = 0
    for s in range(1, nc):
        if ci[s] < ci[best]:
            best = s
    return ct[best], ci[best], cu[best], cv[best]


@njit(cache=True)
def bvh_any(mesh, ox, oy, oz, dx, dy, dz, tmin, tmax):
    """True when any triangle is hit with t in (tmin, tmax)."""
    bmin, bmax, left, first, count, prims, v0, e1, e2 = (
        mesh[0], mesh[1], mesh[2], mesh[3], mesh[4], mesh[5], mesh[6], mesh[7], mesh[8])
    if prims.shape[0] == 0:
        return False
    ix, iy, iz = _inv(dx), _inv(dy), _inv(dz)
    stack = np.empty(STACK_SIZE, np.int64)
    sp = 0
    if ray_box(bmin, bmax, 0, ox, oy, oz, ix, iy, iz, tmin, tmax) < INF:
        stack[0] = 0
        sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        n = count[node]
        if n > 0:
            f = first[node]
            for k in range(f, f + n):
                t, u, v = ray_triangle(v0, e1, e2, prims[k], ox, oy, oz, dx, dy, dz)
                if t > tmin and t < tmax:
                    return True
        else:
            a = left[node]
            if ray_box(bmin, bmax, a, ox, oy, oz, ix, iy, iz, tmin, tmax) < INF:
                stack[sp] = a
                sp += 1
            if ray_box(bmin, bmax, a + 1, ox, oy, oz, ix, iy, iz, tmin, tmax) < INF:
                stack[sp] = a + 1
                sp += 1
    return False


@njit(cache=True)
def brute_nearest(mesh, ox, oy, oz, dx, dy, dz, tmin, tmax):
    """All-triangle scan with the same tie rule as ``bvh_nearest``."""
    v0, e1, e2 = mesh[6], mesh[7], mesh[8]
    m = v0.shape[0]
    tbest = INF
    for tri in range(m):
        t, u, v = ray_triangle(v0, e1, e2, tri, ox, oy, oz, dx, dy, dz)
        if t > tmin and t < tmax and t < tbest:
            tbest = t
    if tbest == INF:
        return INF, -1, 0.0, 0.0
    bound = min(tmax, tie_bound(tbest))
    for tri in range(m):
        t, u, v = ray_triangle(v0, e1, e2, tri, ox, oy, oz, dx, dy, dz)
        if t > tmin and t < tmax and t <= bound:
            return t, tri, u, v
    return INF, -1, 0.0, 0.0


@njit(cache=True)
def mesh_normal(mesh, tri, u, v, dx, dy, dz):
    """Shading normal oriented against (dx, dy, dz), plus a front-face flag.

    Front face means the ray arrived on the side the winding normal points to.
    """
    fn, tris, vn = mesh[9], mesh[10], mesh[11]
    gx, gy, gz = fn[tri, 0], fn[tri, 1], fn[tri, 2]
    front = gx * dx + gy * dy + gz * dz < 0.0
    if vn.shape[0] > 0:
        a, b, c = tris[tri, 0], tris[tri, 1], tris[tri, 2]
        w = 1.0 - u - v
        nx = w * vn[a, 0] + u * vn[b, 0] + v * vn[c, 0]
        ny = w * vn[a, 1] + u * vn[b, 1] + v * vn[c, 1]
        nz = w * vn[a, 2] + u * vn[b, 2] + v * vn[c, 2]
        ln = math.sqrt(nx * nx + ny * ny + nz * nz)
        if ln > 0.0:
            nx /= ln
            ny /= ln
            nz /= ln
        else:
            nx, ny, nz = gx, gy, gz
    else:
        nx, ny, nz = gx, gy, gz
    if not front:
        nx, ny, nz = -nx, -ny, -nz
        gx, gy, gz = -gx, -gy, -gz
    # interpolated normals can tilt past the ray near silhouettes
    if nx * dx + ny * dy + nz * dz >= 0.0:
        nx, ny, nz = gx, gy, gz
    return nx, ny, nz, front


@njit(cache=True)
def sphere_hit(sph, ox, oy, oz, dx, dy, dz, tmin, tmax):
    cx = ox - sph[0]
    cy = oy - sph[1]
    cz = oz - sph[2]
    b = cx * dx + cy * dy + cz * dz
    c = cx * cx + cy * cy + cz * cz - sph[3] * sph[3]
    disc = b * b - c
    if disc < 0.0:
        return INF
    s = math.sqrt(disc)
    # stable roots of t^2 + 2bt + c = 0
    q = -b - s if b >= 0.0 else -b + s
    if q == 0.0:
        t1, t2 = 0.0, 0.0
    else:
        r1 = q
        r2 = c / q
        t1 = min(r1, r2)
        t2 = max(r1, r2)
    if t1 > tmin and t1 < tmax:
        return t1
    if t2 > tmin and t2 < tmax:
        return t2
    return INF


@njit(cache=True)
def sphere_normal(sph, px, py, pz, dx, dy, dz):
    nx = (px - sph[0]) / sph[3]
    ny = (py - sph[1]) / sph[3]
    nz = (pz - sph[2]) / sph[3]
    ln = math.sqrt(nx * nx + ny * ny + nz * nz)
    nx /= ln
    ny /= ln
    nz /= ln
    front = nx * dx + ny * dy + nz * dz < 0.0
    if not front:
        nx, ny, nz = -nx, -ny, -nz
    return nx, ny, nz, front


@njit(cache=True)
def object_hit(kind, sph, mesh, ox, oy, oz, dx, dy, dz, tmin, tmax):
    """Nearest hit on the transparent object: (t, tri, nx, ny, nz, front)."""
    if kind == 1:
        t = sphere_hit(sph, ox, oy, oz, dx, dy, dz, tmin, tmax)
        if t == INF:
            return INF, -1, 0.0, 0.0, 0.0, False
        nx, ny, nz, front = sphere_normal(sph, ox + t * dx, oy + t * dy, oz + t * dz, dx, dy, dz)
        return t, 0, nx, ny, nz, front
    if kind == 0:
        t, tri, u, v = bvh_nearest(mesh, ox, oy, oz, dx, dy, dz, tmin, tmax)
        if tri < 0:
            return INF, -1, 0.0, 0.0, 0.0, False
        nx, ny, nz, front = mesh_normal(mesh, tri, u, v, dx, dy, dz)
        return t, tri, nx, ny, nz, front
    return INF, -1, 0.0, 0.0, 0.0, False


@njit(cache=True)
def box_exit(lo, hi, ox, oy, oz, dx, dy, dz):
    """Exit distance of a ray starting inside an axis-aligned box."""
    t = INF
    if dx > 0.0:
        t = min(t, (hi[0] - ox) / dx)
    elif dx < 0.0:
        t = min(t, (lo[0] - ox) / dx)
    if dy > 0.0:
        t = min(t, (hi[1] - oy) / dy)
    elif dy < 0.0:
        t = min(t, (lo[1] - oy) / dy)
    if dz > 0.0:
        t = min(t, (hi[2] - oz) / dz)
    elif dz < 0.0:
        t = min(t, (lo[2] - oz) / dz)
    return t


@njit(cache=True)
def build_bvh(tri_lo, tri_hi, centroid):
    """Binned-SAH BVH over triangle bounds. Returns node arrays and prim order."""
    m = centroid.shape[0]
    maxn = max(1, 2 * m - 1)
    bmin = np.empty((maxn, 3))
    bmax = np.empty((maxn, 3))
    left = np.full(maxn, -1, np.int64)
    first = np.zeros(maxn, np.int64)
    count = np.zeros(maxn, np.int64)
    prims = np.arange(m)
    st_node = np.empty(maxn, np.int64)
    st_lo = np.empty(maxn, np.int64)
    st_hi = np.empty(maxn, np.int64)
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = m
    sp = 1
    nnodes = 1
    bin_n = np.empty(N_BINS, np.int64)
    bin_lo = np.empty((N_BINS, 3))
    bin_hi = np.empty((N_BINS, 3))
    right_area = np.empty(N_BINS)
    right_n = np.empty(N_BINS, np.int64)
    c_lo = np.empty(3)
    c_hi = np.empty(3)
    rl = np.empty(3)
    rh = np.empty(3)
    ll = np.empty(3)
    lh = np.empty(3)
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        s = st_lo[sp]
        e = st_hi[sp]
        lo0, lo1, lo2 = INF, INF, INF
        hi0, hi1, hi2 = -INF, -INF, -INF
        c_lo[:] = INF
        c_hi[:] = -INF
        for k in range(s, e):
            p = prims[k]
            lo0 = min(lo0, tri_lo[p, 0])
            lo1 = min(lo1, tri_lo[p, 1])
            lo2 = min(lo2, tri_lo[p, 2])
            hi0 = max(hi0, tri_hi[p, 0])
            hi1 = max(hi1, tri_hi[p, 1])
            hi2 = max(hi2, tri_hi[p, 2])
            for a in range(3):
                c = centroid[p, a]
                if c < c_lo[a]:
                    c_lo[a] = c
                if c > c_hi[a]:
                    c_hi[a] = c
        bmin[node, 0], bmin[node, 1], bmin[node, 2] = lo0, lo1, lo2
        bmax[node, 0], bmax[node, 1], bmax[node, 2] = hi0, hi1, hi2
        n = e - s
        if n <= LEAF_SIZE:
            first[node] = s
            count[node] = n
            continue
        axis = 0
        ext = c_hi[0] - c_lo[0]
        for a in range(1, 3):
            if c_hi[a] - c_lo[a] > ext:
                ext = c_hi[a] - c_lo[a]
                axis = a
        mid = s + n // 2
        if ext > 0.0:
            scale = N_BINS / ext
            bin_n[:] = 0
            bin_lo[:] = INF
            bin_hi[:] = -INF
            for k in range(s, e):
                p = prims[k]
                b = int((centroid[p, axis] - c_lo[axis]) * scale)
                if b >= N_BINS:
                    b = N_BINS - 1
                bin_n[b] += 1
                for a in range(3):
                    if tri_lo[p, a] < bin_lo[b, a]:
                        bin_lo[b, a] = tri_lo[p, a]
                    if tri_hi[p, a] > bin_hi[b, a]:
                        bin_hi[b, a] = tri_hi[p, a]
            # sweep from the right
            rl[:] = INF
            rh[:] = -INF
            rn = 0
            for b in range(N_BINS - 1, 0, -1):
                rn += bin_n[b]
                for a in range(3):
                    rl[a] = min(rl[a], bin_lo[b, a])
                    rh[a] = max(rh[a], bin_hi[b, a])
                right_n[b] = rn
                if rn > 0:
                    ex, ey, ez = rh[0] - rl[0], rh[1] - rl[1], rh[2] - rl[2]
                    right_area[b] = ex * ey + ey * ez + ez * ex
                else:
                    right_area[b] = 0.0
            ll[:] = INF
            lh[:] = -INF
            ln = 0
            best_cost = INF
            best_b = -1
            for b in range(N_BINS - 1):
                ln += bin_n[b]
                for a in range(3):
                    ll[a] = min(ll[a], bin_lo[b, a])
                    lh[a] = max(lh[a], bin_hi[b, a])
                if ln == 0 or right_n[b + 1] == 0:
                    continue
                ex, ey, ez = lh[0] - ll[0], lh[1] - ll[1], lh[2] - ll[2]
                cost = (ex * ey + ey * ez + ez * ex) * ln + right_area[b + 1] * right_n[b + 1]
                if cost < best_cost:
                    best_cost = cost
                    best_b = b
            if best_b >= 0:
                i = s
                j = e - 1
                while i <= j:
                    b = int((centroid[prims[i], axis] - c_lo[axis]) * scale)
                    if b >= N_BINS:
                        b = N_BINS - 1
                    if b <= best_b:
                        i += 1
                    else:
                        tmp = prims[i]
                        prims[i] = prims[j]
                        prims[j] = tmp
                        j -= 1
                if i > s and i < e:
                    mid = i
        a_node = nnodes
        nnodes += 2
        left[node] = a_node
        count[node] = 0
        st_node[sp] = a_node + 1
        st_lo[sp] = mid
        st_hi[sp] = e
        sp += 1
        st_node[sp] = a_node
        st_lo[sp] = s
        st_hi[sp] = mid
        sp += 1
    return bmin[:nnodes].copy(), bmax[:nnodes].copy(), left[:nnodes].copy(), \
        first[:nnodes].copy(), count[:nnodes].copy(), prims
