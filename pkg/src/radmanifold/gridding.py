"""Manifold gridding: orthographic flattening of surfaces onto 2D maps."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import DomainError
from .geometry import Ray, SurfaceSet, front_hits
from .radiance import generate_radiance

LINEAR = "linear"
BGTRANS = "bgtrans"
WARPS = (LINEAR, BGTRANS)

FG_HALF_WIDTH = 1.0
BG_HALF_WIDTH = 3.0
GRID_ORIGIN_Z = 1.0
# negative near bound: the largest spheres bulge above the z = 1 origin plane
GRID_T_NEAR = -2.0
GRID_T_FAR = 6.0
SAMPLE_DIR = np.array([0.0, 0.0, -1.0])

_POLE = 0.5 + np.pi / 2


@dataclass
class MapStack:
    """Per-surface 2D grids, channels ``[r, g, b, occupancy, features...]``.

    Row ``i`` of a map holds ``y = linspace(-l, l, H)[i]`` and column ``j``
    holds ``x = linspace(-l, l, W)[j]`` (before any warp).
    """

    maps: np.ndarray  # (N, H, W, C)
    half_widths: Tuple[float, ...]
    is_background: Tuple[bool, ...]
    warps: Tuple[str, ...]
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.maps.shape[0]
        self.half_widths = tuple(float(v) for v in self.half_widths)
        self.is_background = tuple(bool(v) for v in self.is_background)
        self.warps = tuple(self.warps)
        if self.maps.ndim != 4:
            raise ValueError(f"maps must be 4D (N, H, W, C), got shape {self.maps.shape}")
        if not (len(self.half_widths) == len(self.is_background) == len(self.warps) == n):
            raise ValueError("per-surface metadata length must match the number of maps")
        if any(w not in WARPS for w in self.warps):
            raise ValueError(f"unknown warp in {self.warps}")
        if self.maps.shape[-1] < 4:
            raise ValueError("maps need at least the 4 radiance channels")

    @property
    def n_surfaces(self):
        return self.maps.shape[0]

    @property
    def height(self):
        return self.maps.shape[1]

    @property
    def width(self):
        return self.maps.shape[2]

    @property
    def n_channels(self):
        return self.maps.shape[3]

    def meta(self, i):
        return SurfaceMeta(self.half_widths[i], self.is_background[i], self.warps[i],
                           self.height, self.width)

    def with_maps(self, maps):
        return MapStack(maps, self.half_widths, self.is_background, self.warps, dict(self.extra))

    def radiance_only(self):
        return self.with_maps(self.maps[..., :4])


@dataclass(frozen=True)
class SurfaceMeta:
    half_width: float
    is_background: bool
    warp: str
    height: int
    width: int


def default_meta(surfaces: SurfaceSet, fg_half_width=FG_HALF_WIDTH, bg_half_width=BG_HALF_WIDTH):
    """Half widths, background flags and warps for each surface of ``surfaces``."""
    n = surfaces.n_surfaces
    bg = surfaces.background_index
    # a lone sphere (no plane) is treated as foreground
    has_bg = surfaces.has_plane or surfaces.field.mode == "mlp"
    flags = tuple(has_bg and i == bg for i in range(n))
    half = tuple(bg_half_width if f else fg_half_width for f in flags)
    warps = tuple(BGTRANS if f else LINEAR for f in flags)
    return half, flags, warps


# ---------------------------------------------------------------------------
# background warp


def bg_transform(x):
    """Piecewise tangent warp that stretches the outer range of [-1, 1].

    Linear ``2x`` on ``[-0.5, 0.5]`` and ``2 tan(x -+ 0.5) +- 1`` outside;
    odd and strictly increasing.
    """
    arr = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(arr) >= _POLE):
        raise DomainError(f"bg_transform undefined for |x| >= 0.5 + pi/2 (got {x})")
    a = np.abs(arr)
    mag = np.where(a <= 0.5, 2.0 * a, 2.0 * np.tan(a - 0.5) + 1.0)
    out = np.copysign(mag, arr)
    return float(out) if np.ndim(x) == 0 else out


def bg_transform_inverse(y):
    arr = np.asarray(y, dtype=np.float64)
    a = np.abs(arr)
    mag = np.where(a <= 1.0, 0.5 * a, np.arctan((a - 1.0) / 2.0) + 0.5)
    out = np.copysign(mag, arr)
    return float(out) if np.ndim(y) == 0 else out


# ---------------------------------------------------------------------------
# rays and coordinates


def _axis_coords(n, half_width, warp):
    if warp == BGTRANS:
        return bg_transform(np.linspace(-1.0, 1.0, n)) * half_width
    return np.linspace(-half_width, half_width, n)


def grid_ray_arrays(height, width, half_width, warp=LINEAR):
    """Origins and directions of the ``height * width`` gridding rays (row-major)."""
    if height < 1 or width < 1:
        raise ValueError("grid dimensions must be positive")
    if not half_width > 0:
        raise ValueError("half_width must be positive")
    if warp not in WARPS:
        raise ValueError(f"unknown warp {warp!r}")
    xs = _axis_coords(width, half_width, warp)
    ys = _axis_coords(height, half_width, warp)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    origins = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, GRID_ORIGIN_Z)], axis=1)
    dirs = np.broadcast_to(SAMPLE_DIR, origins.shape).copy()
    return origins, dirs


def grid_rays(height, width, half_width, warp=LINEAR, t_near=GRID_T_NEAR, t_far=GRID_T_FAR):
    origins, dirs = grid_ray_arrays(height, width, half_width, warp)
    return [Ray(o, d, t_near, t_far) for o, d in zip(origins, dirs)]


def _axis_to_index(c, n, half_width, warp):
    s = c / half_width
    if warp == BGTRANS:
        s = bg_transform_inverse(s)
    if n == 1:
        # degenerate linspace holds only the lower endpoint
        return np.where(np.abs(s + 1.0) < 1e-9, 0.0, np.nan)
    return (s + 1.0) * 0.5 * (n - 1)


def project_to_map(points, meta: SurfaceMeta):
    """Continuous ``(u, v)`` = (column, row) map coordinates of world points.

    Points outside the map's extent get coordinates outside
    ``[0, W-1] x [0, H-1]``, which samplers treat as misses.
    """
    p = np.asarray(points, dtype=np.float64)
    u = _axis_to_index(p[..., 0], meta.width, meta.half_width, meta.warp)
    v = _axis_to_index(p[..., 1], meta.height, meta.half_width, meta.warp)
    return np.stack([u, v], axis=-1)


# ---------------------------------------------------------------------------
# gridding


def grid_manifolds(latent, surfaces: SurfaceSet, params, lr_size=(64, 64), with_features=True,
                   fg_half_width=FG_HALF_WIDTH, bg_half_width=BG_HALF_WIDTH, dtype=np.float32):
    """Sample radiance (and features) of each surface on its orthographic grid.

    Returns an ``(N, H, W, 4 [+ d_f])`` :class:`MapStack`; grid rays that miss
    a surface leave zeros in every channel of that cell.
    """
    h, w = lr_size
    half, flags, warps = default_meta(surfaces, fg_half_width, bg_half_width)
    n = surfaces.n_surfaces
    d_f = int(params["siren.feature.0.weight"].shape[0]) if with_features else 0
    maps = np.zeros((n, h, w, 4 + d_f), dtype=np.float64)
    for i in range(n):
        origins, dirs = grid_ray_arrays(h, w, half[i], warps[i])
        t, pts = front_hits(origins, dirs, surfaces.subset(i), GRID_T_NEAR, GRID_T_FAR)
        hit = np.isfinite(t[:, 0])
        if not hit.any():
            continue
        rad = generate_radiance(latent, pts[hit, 0], SAMPLE_DIR, params, with_features=with_features)
        flat = maps[i].reshape(h * w, -1)
        flat[hit] = rad.channels()
    return MapStack(maps.astype(dtype), half, flags, warps)
