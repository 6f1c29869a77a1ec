"""Ray-manifold rendering of super-resolved radiance maps.

Each view ray is intersected with every surface; each hit is projected onto
its surface's map with the same placement used for gridding, sampled
bilinearly and composited front to back by occupancy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .geometry import SurfaceSet, intersect_rays
from .gridding import MapStack, project_to_map  # noqa: F401  (re-exported)
from .radiance import generate_radiance

RAY_CHUNK = 1 << 15


# ---------------------------------------------------------------------------
# compositing


def transmittance(alphas):
    """``T_i = prod_{j<i} (1 - alpha_j)`` along the last axis."""
    a = np.asarray(alphas, dtype=np.float64)
    one_minus = 1.0 - a
    t = np.ones_like(a)
    if a.shape[-1] > 1:
        t[..., 1:] = np.cumprod(one_minus[..., :-1], axis=-1)
    return t


def composite(colors, alphas):
    """Front-to-back alpha compositing of sorted samples.

    ``colors`` has shape ``(..., K, C)`` and ``alphas`` ``(..., K)``.
    Returns ``(color, weights, transmittances)`` where
    ``weights = T * alpha`` and ``color = sum(weights * colors)``.
    """
    c = np.asarray(colors, dtype=np.float64)
    a = np.asarray(alphas, dtype=np.float64)
    if c.shape[:-1] != a.shape:
        raise ValueError(f"colors {c.shape} and alphas {a.shape} disagree")
    t = transmittance(a)
    w = t * a
    return np.einsum("...k,...kc->...c", w, c), w, t


def composite_gradients(colors, alphas):
    """Analytic partials of :func:`composite`'s color.

    Returns ``(d_color, d_alpha)``: ``d_color[..., i]`` is the (channel
    independent) derivative with respect to ``c_i`` and ``d_alpha[..., i, :]``
    the per-channel derivative with respect to ``alpha_i``.

    With ``R_i`` the composite of samples ``i..K-1`` alone,
    ``dC/dalpha_i = T_i (c_i - R_{i+1})``. Everything is products and sums,
    so ``alpha_i = 1`` needs no special case.
    """
    c = np.asarray(colors, dtype=np.float64)
    a = np.asarray(alphas, dtype=np.float64)
    t = transmittance(a)
    k = a.shape[-1]
    tail = np.zeros(c.shape[:-2] + (k + 1, c.shape[-1]))
    for i in range(k - 1, -1, -1):
        ai = a[..., i, None]
        tail[..., i, :] = ai * c[..., i, :] + (1.0 - ai) * tail[..., i + 1, :]
    d_alpha = t[..., None] * (c - tail[..., 1:, :])
    return t * a, d_alpha


# ---------------------------------------------------------------------------
# map lookup


def sample_map_bilinear(grid, uv):
    """Bilinear lookup of ``grid`` ``(H, W, C)`` at ``uv`` = (column, row).

    Returns ``(values, inside)``. Coordinates outside ``[0, W-1] x [0, H-1]``
    (or NaN) are misses: ``inside`` is False and all channels are zero.
    """
    g = np.asarray(grid)
    h, w = g.shape[:2]
    uv = np.asarray(uv, dtype=np.float64)
    u, v = uv[..., 0], uv[..., 1]
    with np.errstate(invalid="ignore"):
        inside = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    us = np.where(inside, u, 0.0)
    vs = np.where(inside, v, 0.0)
    # clamp the base index so the right/bottom edges use the last cell
    u0 = np.minimum(np.floor(us).astype(np.int64), max(w - 2, 0))
    v0 = np.minimum(np.floor(vs).astype(np.int64), max(h - 2, 0))
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = (us - u0)[..., None]
    fv = (vs - v0)[..., None]
    top = g[v0, u0] * (1.0 - fu) + g[v0, u1] * fu
    bot = g[v1, u0] * (1.0 - fu) + g[v1, u1] * fu
    out = top * (1.0 - fv) + bot * fv
    return np.where(inside[..., None], out, 0.0), inside


# ---------------------------------------------------------------------------
# ray rendering


@dataclass
class DepthMap:
    """Expected projected depth ``sum T_i alpha_i z_i`` per pixel.

    ``coverage`` is ``sum T_i alpha_i``; pixels whose rays hit nothing have
    depth 0 and coverage 0.
    """

    depth: np.ndarray  # (H, W)
    coverage: np.ndarray  # (H, W)


def _shade_hits(hits, surfaces: SurfaceSet, maps: MapStack):
    """Colors ``(R, K, 3)`` and occupancies ``(R, K)`` at each hit."""
    r, k = hits.t.shape
    rgb = np.zeros((r, k, 3))
    alpha = np.zeros((r, k))
    for i in range(surfaces.n_surfaces):
        sel = hits.surface == i
        if not sel.any():
            continue
        uv = project_to_map(hits.points[sel], maps.meta(i))
        vals, _ = sample_map_bilinear(maps.maps[i, ..., :4], uv)
        rgb[sel] = vals[:, :3]
        alpha[sel] = vals[:, 3]
    return rgb, np.clip(alpha, 0.0, 1.0)


def _check_stack(surfaces: SurfaceSet, maps: MapStack):
    if maps.n_surfaces != surfaces.n_surfaces:
        raise ValueError(f"{maps.n_surfaces} maps for {surfaces.n_surfaces} surfaces")


def render_rays(origins, dirs, surfaces: SurfaceSet, maps: MapStack, t_near=0.0, t_far=6.0,
                forward=None, chunk=RAY_CHUNK):
    """Composite ``(R, 3)`` rays; returns ``(rgb, coverage, depth)``.

    ``depth`` is the expected distance along ``forward`` (the camera axis)
    when given, else along each ray.
    """
    _check_stack(surfaces, maps)
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    n = len(origins)
    rgb = np.zeros((n, 3))
    cov = np.zeros(n)
    depth = np.zeros(n)
    for s in range(0, n, chunk):
        o, d = origins[s:s + chunk], dirs[s:s + chunk]
        hits = intersect_rays(o, d, surfaces, t_near, t_far)
        col, alpha = _shade_hits(hits, surfaces, maps)
        c, w, _ = composite(col, alpha)
        z = np.where(hits.valid, hits.t, 0.0)
        if forward is not None:
            z = z * (d @ np.asarray(forward, dtype=np.float64))[:, None]
        rgb[s:s + chunk] = c
        cov[s:s + chunk] = w.sum(axis=1)
        depth[s:s + chunk] = (w * z).sum(axis=1)
    return rgb, cov, depth


def render_image(camera: Camera, surfaces: SurfaceSet, maps: MapStack, chunk=RAY_CHUNK):
    """``(H, W, 3)`` image in ``[0, 1]``; pixels are independent of each other."""
    o, d = camera.rays()
    rgb, _, _ = render_rays(o, d, surfaces, maps, camera.near, camera.far, chunk=chunk)
    return np.clip(rgb, 0.0, 1.0).reshape(camera.height, camera.width, 3)


def render_depth(camera: Camera, surfaces: SurfaceSet, maps: MapStack, chunk=RAY_CHUNK) -> DepthMap:
    o, d = camera.rays()
    _, cov, depth = render_rays(o, d, surfaces, maps, camera.near, camera.far,
                                forward=camera.basis()[2], chunk=chunk)
    shape = (camera.height, camera.width)
    return DepthMap(depth.reshape(shape), cov.reshape(shape))


def render_direct(camera: Camera, surfaces: SurfaceSet, latent, params, chunk=RAY_CHUNK):
    """Render by querying the radiance network at every hit (no maps).

    Slow reference path used for previews and for checking the gridded maps.
    """
    o, d = camera.rays()
    n = len(o)
    out = np.zeros((n, 3))
    for s in range(0, n, chunk):
        oc, dc = o[s:s + chunk], d[s:s + chunk]
        hits = intersect_rays(oc, dc, surfaces, camera.near, camera.far)
        valid = hits.valid
        col = np.zeros(hits.t.shape + (3,))
        alpha = np.zeros(hits.t.shape)
        if valid.any():
            ray_idx = np.nonzero(valid)[0]
            rad = generate_radiance(latent, hits.points[valid], dc[ray_idx], params)
            col[valid] = rad.color
            alpha[valid] = rad.occupancy
        out[s:s + chunk] = composite(col, alpha)[0]
    return np.clip(out, 0.0, 1.0).reshape(camera.height, camera.width, 3)


# ---------------------------------------------------------------------------
# epipolar line images


def build_epi(images, row, col_range=None):
    """Stack row ``row`` (columns ``col_range = (start, stop)``) of each image.

    Output row ``k`` comes from ``images[k]``.
    """
    imgs = [np.asarray(im) for im in images]
    if len(imgs) < 2:
        raise ValueError("an EPI needs at least two images")
    h, w = imgs[0].shape[:2]
    if any(im.shape != imgs[0].shape for im in imgs):
        raise ValueError("all images must share one shape")
    if not 0 <= row < h:
        raise IndexError(f"row {row} outside image of height {h}")
    c0, c1 = (0, w) if col_range is None else (int(col_range[0]), int(col_range[1]))
    if not 0 <= c0 < c1 <= w:
        raise IndexError(f"column range ({c0}, {c1}) outside image of width {w}")
    return np.stack([im[row, c0:c1] for im in imgs])
