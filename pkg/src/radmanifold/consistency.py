"""Multiview consistency checks: plane homographies, reprojection, EPI traces."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .camera import Camera
from .geometry import DEFAULT_CENTER, ScalarField, SurfaceSet
from .gridding import LINEAR, MapStack


def plane_scene(texture, plane_z, half_width):
    """A single opaque plane ``z = plane_z`` carrying ``texture`` (H, W, 4).

    The map spans ``[-half_width, half_width]^2`` with the linear warp.
    """
    tex = np.asarray(texture, dtype=np.float64)
    if tex.ndim != 3 or tex.shape[-1] != 4:
        raise ValueError("texture must be (H, W, 4)")
    surfaces = SurfaceSet(ScalarField("analytic", DEFAULT_CENTER, float(plane_z)), ())
    return surfaces, MapStack(tex[None], (half_width,), (True,), (LINEAR,))


def stripe_texture(size, half_width, centers, sigma, depth=0.6):
    """Smoothly shaded texture with dark vertical Gaussian stripes at world ``x = centers``."""
    xs = np.linspace(-half_width, half_width, size)
    x, y = np.meshgrid(xs, xs)
    dark = np.zeros_like(x)
    for c in centers:
        dark += np.exp(-0.5 * ((x - c) / sigma) ** 2)
    shade = 1.0 - depth * np.clip(dark, 0.0, 1.0)
    r = (0.6 + 0.15 * np.sin(3.0 * x) * np.cos(2.0 * y)) * shade
    g = (0.55 + 0.1 * np.cos(4.0 * y)) * shade
    b = 0.5 * shade + 0.1
    return np.stack([r, g, b, np.ones_like(x)], axis=-1)


def plane_projection(camera: Camera, plane_z):
    """3x3 matrix taking plane coordinates ``(x, y, 1)`` on ``z = plane_z`` to pixels."""
    rot, t = camera.extrinsics()
    g = np.column_stack([rot[:, 0], rot[:, 1], rot[:, 2] * plane_z + t])
    return camera.intrinsics() @ g


def plane_homography(cam_from: Camera, cam_to: Camera, plane_z):
    """Homography mapping pixels ``(col, row, 1)`` of ``cam_from`` to ``cam_to``
    for points on the plane ``z = plane_z``."""
    return plane_projection(cam_to, plane_z) @ np.linalg.inv(plane_projection(cam_from, plane_z))


def apply_homography(hmat, cols, rows):
    p = hmat @ np.stack([np.ravel(cols), np.ravel(rows), np.ones(np.size(cols))])
    return (p[0] / p[2]).reshape(np.shape(cols)), (p[1] / p[2]).reshape(np.shape(rows))


def warp_by_homography(image, hmat, out_shape=None):
    """Resample ``image`` so that output pixel ``q`` shows ``image[H q]``.

    Returns ``(warped, valid)``; ``valid`` marks pixels whose source lies
    inside ``image``. Bilinear interpolation.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = out_shape or img.shape[:2]
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    sc, sr = apply_homography(hmat, cols, rows)
    valid = (sc >= 0) & (sc <= img.shape[1] - 1) & (sr >= 0) & (sr <= img.shape[0] - 1)
    chans = img[..., None] if img.ndim == 2 else img
    out = np.stack([ndimage.map_coordinates(chans[..., c], [sr, sc], order=1, mode="nearest")
                    for c in range(chans.shape[-1])], axis=-1)
    return (out[..., 0] if img.ndim == 2 else out), valid


def line_fit_r2(x, y):
    """Coefficient of determination of the least-squares line through ``(x, y)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    ss_res = np.sum((y - a @ coef) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return 1.0 if ss_tot == 0 else float(1.0 - ss_res / ss_tot)


def dip_centroid(profile, guess, radius):
    """Sub-pixel centre of a dark feature near ``guess`` in a 1D profile.

    Darkness is measured against the brightest sample of the window, and
    the centroid of that darkness is returned.
    """
    p = np.asarray(profile, dtype=np.float64)
    lo = max(int(np.floor(guess - radius)), 0)
    hi = min(int(np.ceil(guess + radius)) + 1, len(p))
    seg = p[lo:hi]
    weight = seg.max() - seg
    if weight.sum() <= 0:
        return float("nan")
    return float(np.sum(weight * np.arange(lo, hi)) / weight.sum())
