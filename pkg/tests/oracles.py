"""Independent reference implementations used as test oracles.

Nothing here imports the package's kernels: rays are intersected against
every triangle with plain numpy, refraction uses the vector form of Snell's
law written out separately, and projections are re-derived from the camera
matrices.
"""

from __future__ import annotations

import math

import numpy as np


# ---- geometry -------------------------------------------------------------

def all_triangle_hits(o, d, v0, v1, v2, tmin):
    """Distances and barycentrics of ray o + t d against every triangle (inf when missed)."""
    e1 = v1 - v0
    e2 = v2 - v0
    p = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) > 1e-300
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = o - v0
    u = np.einsum("ij,ij->i", s, p) * inv
    q = np.cross(s, e1)
    v = (q @ d) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    hit = ok & (u >= -1e-12) & (v >= -1e-12) & (u + v <= 1 + 1e-12) & (t > tmin)
    return np.where(hit, t, np.inf), u, v


def nearest_batch(origins, dirs, vertices, triangles, chunk=256):
    """Nearest (t, triangle) for many rays against every triangle; lowest index wins near-ties."""
    v0, v1, v2 = (np.asarray(vertices, float)[np.asarray(triangles)[:, k]] for k in range(3))
    e1 = v1 - v0
    e2 = v2 - v0
    t_out = np.full(len(origins), np.inf)
    k_out = np.full(len(origins), -1)
    for s in range(0, len(origins), chunk):
        o = origins[s:s + chunk, None, :]
        d = dirs[s:s + chunk, None, :]
        p = np.cross(d, e2)
        det = np.sum(e1 * p, axis=-1)
        ok = np.abs(det) > 1e-300
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        sv = o - v0
        u = np.sum(sv * p, axis=-1) * inv
        q = np.cross(sv, e1)
        v = np.sum(q * d, axis=-1) * inv
        t = np.sum(e2 * q, axis=-1) * inv
        hit = ok & (u >= -1e-12) & (v >= -1e-12) & (u + v <= 1 + 1e-12) & (t > 0)
        t = np.where(hit, t, np.inf)
        tmin = t.min(axis=1)
        tie = t <= (tmin + 1e-10 * np.abs(tmin) + 1e-14)[:, None]
        k = np.argmax(tie, axis=1)
        t_out[s:s + chunk] = np.where(np.isfinite(tmin), t[np.arange(len(k)), k], np.inf)
        k = np.where(np.isfinite(tmin), k, -1)
        k_out[s:s + chunk] = k
    return t_out, k_out


class NaiveMesh:
    def __init__(self, vertices, triangles, normals=None):
        self.v = np.asarray(vertices, float)
        self.t = np.asarray(triangles, int)
        self.n = None if normals is None else np.asarray(normals, float)
        self.v0, self.v1, self.v2 = (self.v[self.t[:, k]] for k in range(3))
        fn = np.cross(self.v1 - self.v0, self.v2 - self.v0)
        self.fn = fn / np.linalg.norm(fn, axis=1, keepdims=True)

    def nearest(self, o, d, tmin, tmax=np.inf):
        """(t, normal facing against d, entering flag) or None."""
        if len(self.t) == 0:
            return None
        t, u, v = all_triangle_hits(o, d, self.v0, self.v1, self.v2, tmin)
        k = int(np.argmin(t))
        if not t[k] < tmax:
            return None
        # lowest index among near-ties
        tie = np.flatnonzero(t <= t[k] + 1e-10 * abs(t[k]) + 1e-14)
        k = int(tie.min())
        g = self.fn[k]
        entering = g @ d < 0
        if self.n is not None:
            a, b, c = self.t[k]
            n = (1 - u[k] - v[k]) * self.n[a] + u[k] * self.n[b] + v[k] * self.n[c]
            n = n / np.linalg.norm(n)
        else:
            n = g
        # orient by the geometric side; fall back to the face normal when the
        # interpolated one ends up facing along the ray
        sign = 1.0 if entering else -1.0
        n = sign * n
        if n @ d >= 0:
            n = sign * g
        return t[k], n, entering


class NaiveSphere:
    def __init__(self, center, radius):
        self.c = np.asarray(center, float)
        self.r = float(radius)

    def nearest(self, o, d, tmin, tmax=np.inf):
        oc = o - self.c
        b = oc @ d
        disc = b * b - (oc @ oc - self.r ** 2)
        if disc < 0:
            return None
        sq = math.sqrt(disc)
        for t in (-b - sq, -b + sq):
            if tmin < t < tmax:
                p = o + t * d
                n = (p - self.c) / self.r
                entering = n @ d < 0
                return t, (n if entering else -n), entering
        return None


def snell(d, n, eta):
    """Refract unit d at unit n (n against d) with eta = n_in / n_out; None on TIR."""
    cos_i = -(d @ n)
    sin2_t = eta * eta * (1.0 - cos_i * cos_i)
    if sin2_t > 1.0:
        return None
    cos_t = math.sqrt(1.0 - sin2_t)
    out = eta * d + (eta * cos_i - cos_t) * n
    return out / np.linalg.norm(out)


def fresnel_avg(d, n, n1, n2):
    cos_i = -(d @ n)
    sin_t = n1 / n2 * math.sqrt(max(0.0, 1 - cos_i ** 2))
    if sin_t >= 1:
        return 1.0
    cos_t = math.sqrt(1 - sin_t ** 2)
    rs = ((n1 * cos_i - n2 * cos_t) / (n1 * cos_i + n2 * cos_t)) ** 2
    rp = ((n2 * cos_i - n1 * cos_t) / (n2 * cos_i + n1 * cos_t)) ** 2
    return 0.5 * (rs + rp)


def slab_exit(lo, hi, o, d):
    ts = []
    for a in range(3):
        if d[a] > 0:
            ts.append((hi[a] - o[a]) / d[a])
        elif d[a] < 0:
            ts.append((lo[a] - o[a]) / d[a])
    return min(ts)


def naive_trace(obj, bg, nu, o, d, eps, box, max_events=8):
    """Returns (kind, end point, events, first normal); kind in background/box/absorbed/escaped."""
    first_n = None
    events = 0
    while True:
        ho = obj.nearest(o, d, eps)
        hb = bg.nearest(o, d, eps) if bg is not None else None
        if hb is not None and (ho is None or hb[0] <= ho[0]):
            return "background", o + hb[0] * d, events, first_n
        if ho is None:
            if box is None:
                return "escaped", d, events, first_n
            return "box", o + slab_exit(box[0], box[1], o, d) * d, events, first_n
        if events >= max_events:
            return "absorbed", None, events, first_n
        t, n, entering = ho
        if first_n is None:
            first_n = n
        eta = 1.0 / nu if entering else nu
        r = snell(d, n, eta)
        if r is None:
            r = d - 2 * (d @ n) * n
        o = o + t * d
        d = r
        events += 1


def project(cam, x):
    """Pixel coordinates and depth of world point(s) x from the camera's 4x4 pose."""
    R = cam.pose[:3, :3]
    c = cam.pose[:3, 3]
    pc = (np.asarray(x) - c) @ R
    z = pc[..., 2]
    return np.stack([cam.fx * pc[..., 0] / z + cam.cx, cam.fy * pc[..., 1] / z + cam.cy], -1), z


def pixel_dir(cam, x, y):
    v = np.array([(x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0])
    w = cam.pose[:3, :3] @ v
    return w / np.linalg.norm(w)


def equirect_uv(d, w, h):
    d = d / np.linalg.norm(d)
    lon = math.atan2(d[0], -d[2])
    lat = math.asin(max(-1.0, min(1.0, d[1])))
    u = (lon / (2 * math.pi) + 0.5) * w
    if u >= w:
        u -= w
    return u, (0.5 - lat / math.pi) * h


def equirect_dir(u, v, w, h):
    lon = (u / w - 0.5) * 2 * math.pi
    lat = (0.5 - v / h) * math.pi
    return np.array([math.sin(lon) * math.cos(lat), math.sin(lat), -math.cos(lon) * math.cos(lat)])


def naive_warps(cam, pano_center, pw, ph, obj, bg, nu, eps, box, vis_tol=1e-3):
    """Brute-force evaluation of all perspective and panorama fields."""
    h, w = cam.height, cam.width
    out = {k: (np.zeros((h, w, 2)), np.zeros((h, w), bool)) for k in ("self", "refr", "refl")}
    fres = np.zeros((h, w))
    c = cam.pose[:3, 3]
    for i in range(h):
        for j in range(w):
            d = pixel_dir(cam, j, i)
            kind, end, events, n1 = naive_trace(obj, bg, nu, c, d, eps, box)
            on = events > 0 or kind == "absorbed"
            if not on:
                out["self"][0][i, j] = (j, i)
                out["self"][1][i, j] = True
            elif kind == "background":
                xy, z = project(cam, end)
                out["self"][0][i, j] = xy
                out["self"][1][i, j] = z > 0 and 0 <= xy[0] <= w - 1 and 0 <= xy[1] <= h - 1
            if kind in ("background", "box"):
                out["refr"][0][i, j] = equirect_uv(end - pano_center, pw, ph)
                out["refr"][1][i, j] = True
            if on:
                r = d - 2 * (d @ n1) * n1
                out["refl"][0][i, j] = equirect_uv(r, pw, ph)
                out["refl"][1][i, j] = True
                fres[i, j] = fresnel_avg(d, n1, 1.0, nu)
    pxy = np.zeros((ph, pw, 2))
    pm = np.zeros((ph, pw), bool)
    for i in range(ph):
        for j in range(pw):
            d = equirect_dir(j, i, pw, ph)
            hb = bg.nearest(pano_center, d, eps) if bg is not None else None
            if hb is not None:
                x = pano_center + hb[0] * d
                xy, z = project(cam, x)
                ok = z > 0 and 0 <= xy[0] <= w - 1 and 0 <= xy[1] <= h - 1
                if ok:
                    dist = np.linalg.norm(x - c)
                    u = (x - c) / dist
                    reach = dist * (1 - vis_tol)
                    ok = bg.nearest(c, u, eps, reach) is None and obj.nearest(c, u, eps, reach) is None
            else:
                xy, z = project(cam, c + d)
                ok = z > 0 and 0 <= xy[0] <= w - 1 and 0 <= xy[1] <= h - 1
                if ok:
                    ok = bg.nearest(c, d, eps) is None and obj.nearest(c, d, eps) is None
            pxy[i, j] = xy if z > 0 else 0.0
            pm[i, j] = ok
    return out, fres, (pxy, pm)


# ---- sphere optics ----------------------------------------------------------

def sphere_deviation(b, nu):
    """Deviation of a ray with impact parameter b (radius 1) after two refractions."""
    theta_i = math.asin(b)
    theta_t = math.asin(b / nu)
    return 2.0 * (theta_i - theta_t)


# ---- images -----------------------------------------------------------------

def bilinear_reference(img, x, y):
    """Weighted sum of the four neighbours, straight from the definition."""
    x0 = int(math.floor(x))
    y0 = int(math.floor(y))
    out = 0.0
    for yy, wy in ((y0, 1 - (y - y0)), (y0 + 1, y - y0)):
        for xx, wx in ((x0, 1 - (x - x0)), (x0 + 1, x - x0)):
            if wx * wy == 0:
                continue
            out = out + wx * wy * img[yy, xx]
    return out


def gaussian_pyramid_reference(img, levels):
    """Burt-Adelson REDUCE with explicit reflect-101 padding and loops."""
    k = np.array([1, 4, 6, 4, 1]) / 16.0
    out = [img]
    cur = img
    for _ in range(levels - 1):
        h, w = cur.shape
        pad = np.pad(cur, 2, mode="reflect")
        blurred = np.zeros_like(cur)
        for i in range(h):
            for j in range(w):
                blurred[i, j] = k @ pad[i:i + 5, j:j + 5] @ k
        cur = blurred[::2, ::2]
        out.append(cur)
    return out


def srgb_encode(x):
    if x <= 0.0031308:
        return 12.92 * x
    return 1.055 * x ** (1 / 2.4) - 0.055


def phi_reference(values, masks, lam):
    """Per-pixel, per-channel evaluation of the blend formula with explicit loops."""
    n = len(values)
    h, w, c = values[0].shape
    out = np.zeros((h, w, c))
    for i in range(h):
        for j in range(w):
            for ch in range(c):
                ms = [float(masks[k][i, j]) for k in range(n)]
                vs = [values[k][i, j, ch] for k in range(n)]
                sm = sum(ms)
                if sm == 0:
                    out[i, j, ch] = np.nan
                    continue
                mean = sum(m * v for m, v in zip(ms, vs)) / sm
                den = sum(m * abs(v) for m, v in zip(ms, vs))
                wv = sum(m * abs(v) * v for m, v in zip(ms, vs)) / den if den > 0 else mean
                out[i, j, ch] = (1 - lam) * mean + lam * wv
    return out


def psnr_reference(a, b):
    mse = np.mean((a - b) ** 2)
    return 10 * math.log10(1 / mse)
