"""Single-threaded software rasterizer for baked manifold meshes (numba).

Each surface is rasterized into its own fragment layer with a depth test;
afterwards every pixel sorts its layers by depth and composites them front
to back. Texture lookups are perspective-correct and bilinear, with the same
miss rule as the ray renderer (outside the map means zero occupancy).
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, error_model="numpy")
def raster_layer(sx, sy, inv_z, u_z, v_z, faces, tex, near, depth, rgba, layer):
    """Rasterize one textured mesh into slot ``layer`` of the fragment buffers.

    ``depth`` is ``(N, H, W)`` with ``inf`` for empty slots and ``rgba``
    ``(N, H, W, 4)``. Vertex attributes are screen
    position ``(sx, sy)`` in pixels (pixel centres at integers), ``1/z`` and
    ``u/z``, ``v/z`` for perspective-correct interpolation. Triangles reaching
    in front of the near plane are dropped.
    """
    h, w = depth.shape[1], depth.shape[2]
    th, tw = tex.shape[0], tex.shape[1]
    umax = tw - 1.0
    vmax = th - 1.0
    for f in range(faces.shape[0]):
        a, b, c = faces[f, 0], faces[f, 1], faces[f, 2]
        if inv_z[a] <= 0.0 or inv_z[b] <= 0.0 or inv_z[c] <= 0.0:
            continue
        if 1.0 / inv_z[a] < near or 1.0 / inv_z[b] < near or 1.0 / inv_z[c] < near:
            continue
        ax, ay, bx, by, cx, cy = sx[a], sy[a], sx[b], sy[b], sx[c], sy[c]
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if abs(area) < 1e-12:
            continue
        x0 = max(int(np.ceil(min(ax, bx, cx))), 0)
        x1 = min(int(np.floor(max(ax, bx, cx))), w - 1)
        y0 = max(int(np.ceil(min(ay, by, cy))), 0)
        y1 = min(int(np.floor(max(ay, by, cy))), h - 1)
        if x0 > x1 or y0 > y1:
            continue
        k = 1.0 / area
        # barycentrics are affine in the pixel position: w = e + ex*px + ey*py
        e0x, e0y = (by - cy) * k, (cx - bx) * k
        e0 = (bx * cy - by * cx) * k
        e1x, e1y = (cy - ay) * k, (ax - cx) * k
        e1 = (cx * ay - cy * ax) * k
        za, zb, zc = inv_z[a], inv_z[b], inv_z[c]
        ua, ub, uc = u_z[a], u_z[b], u_z[c]
        va, vb, vc = v_z[a], v_z[b], v_z[c]
        for py in range(y0, y1 + 1):
            # span of columns where all three barycentrics are >= 0
            lo = float(x0)
            hi = float(x1)
            for ex, ec in ((e0x, e0 + e0y * py), (e1x, e1 + e1y * py),
                           (-e0x - e1x, 1.0 - e0 - e1 - (e0y + e1y) * py)):
                if ex > 0.0:
                    lo = max(lo, -ec / ex)
                elif ex < 0.0:
                    hi = min(hi, -ec / ex)
                elif ec < 0.0:
                    hi = -1.0
            if lo > hi:
                continue
            # widen by one pixel against rounding; the exact test follows
            p0 = max(int(np.ceil(lo)) - 1, x0)
            p1 = min(int(np.floor(hi)) + 1, x1)
            for px in range(p0, p1 + 1):
                w0 = e0 + e0x * px + e0y * py
                w1 = e1 + e1x * px + e1y * py
                w2 = 1.0 - w0 - w1
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                z = 1.0 / (w0 * za + w1 * zb + w2 * zc)
                if z >= depth[layer, py, px]:
                    continue
                u = (w0 * ua + w1 * ub + w2 * uc) * z
                v = (w0 * va + w1 * vb + w2 * vc) * z
                depth[layer, py, px] = z
                if not (u >= 0.0 and u <= umax and v >= 0.0 and v <= vmax):
                    # outside the map: a miss, like the ray renderer
                    for ch in range(4):
                        rgba[layer, py, px, ch] = 0.0
                    continue
                u0 = min(int(u), tw - 2) if tw > 1 else 0
                v0 = min(int(v), th - 2) if th > 1 else 0
                u1 = min(u0 + 1, tw - 1)
                v1 = min(v0 + 1, th - 1)
                fu = u - u0
                fv = v - v0
                w00 = (1.0 - fu) * (1.0 - fv)
                w01 = fu * (1.0 - fv)
                w10 = (1.0 - fu) * fv
                w11 = fu * fv
                for ch in range(4):
                    rgba[layer, py, px, ch] = (tex[v0, u0, ch] * w00 + tex[v0, u1, ch] * w01
                                               + tex[v1, u0, ch] * w10 + tex[v1, u1, ch] * w11)
                al = rgba[layer, py, px, 3]
                rgba[layer, py, px, 3] = min(max(al, 0.0), 1.0)


@njit(cache=True, error_model="numpy")
def composite_layers(depth, rgba, hint, out):
    """Depth-sort the layers of every pixel and composite front to back.

    ``hint`` lists the layers in roughly front-to-back order. Rows are
    processed one at a time, visiting the layers in hint order; a pixel
    whose fragments arrive in depth order is composited on the fly, the
    rest are sorted and composited afterwards.
    """
    n, h, w = depth.shape
    trans = np.empty(w)
    last = np.empty(w)
    acc = np.empty((w, 3))
    ordered = np.empty(w, dtype=np.bool_)
    order = np.empty(n, dtype=np.int64)
    keys = np.empty(n)
    for py in range(h):
        trans[:] = 1.0
        last[:] = -np.inf
        acc[:] = 0.0
        ordered[:] = True
        for q in range(n):
            i = hint[q]
            for px in range(w):
                d = depth[i, py, px]
                if d == np.inf or not ordered[px]:
                    continue
                if d < last[px]:
                    ordered[px] = False
                    continue
                last[px] = d
                a = rgba[i, py, px, 3]
                if a == 0.0:
                    continue
                wgt = trans[px] * a
                acc[px, 0] += wgt * rgba[i, py, px, 0]
                acc[px, 1] += wgt * rgba[i, py, px, 1]
                acc[px, 2] += wgt * rgba[i, py, px, 2]
                trans[px] *= 1.0 - a
        for px in range(w):
            if ordered[px]:
                out[py, px, 0] = acc[px, 0]
                out[py, px, 1] = acc[px, 1]
                out[py, px, 2] = acc[px, 2]
                continue
            m = 0
            for q in range(n):
                i = hint[q]
                d = depth[i, py, px]
                if d < np.inf:
                    # ties keep hint order
                    j = m
                    while j > 0 and keys[j - 1] > d:
                        keys[j] = keys[j - 1]
                        order[j] = order[j - 1]
                        j -= 1
                    keys[j] = d
                    order[j] = i
                    m += 1
            t = 1.0
            r = 0.0
            g = 0.0
            b = 0.0
            for k in range(m):
                i = order[k]
                a = rgba[i, py, px, 3]
                if a == 0.0:
                    continue
                wgt = t * a
                r += wgt * rgba[i, py, px, 0]
                g += wgt * rgba[i, py, px, 1]
                b += wgt * rgba[i, py, px, 2]
                t *= 1.0 - a
            out[py, px, 0] = r
            out[py, px, 1] = g
            out[py, px, 2] = b
