"""Scalar-field manifolds and ray/manifold intersection.

Surfaces are iso-surfaces of a scalar field. Two field kinds are supported:

* ``analytic``: distance to a fixed center, whose level sets are concentric
  spheres, plus an axis-aligned background plane ``z = plane_z``.
* ``mlp``: a small softplus MLP ``R^3 -> R`` read from :class:`NetParams`;
  every surface (the background included) is a level set of it.

Surface ``i`` is addressed by index; with an analytic field the spheres come
first in level order and the plane (if any) is the last surface.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .errors import MissingWeightsError

DEFAULT_CENTER = (0.0, 0.0, -1.5)
DEFAULT_PLANE_Z = -1.0
DEFAULT_T_NEAR = 0.1
DEFAULT_T_FAR = 6.0

# root finding in MLP mode
MLP_RAY_SAMPLES = 64
SECANT_MAX_ITERS = 20
SECANT_TOL = 1e-5

TANGENT_EPS = 1e-10
R_MIN, R_MAX = 0.5, 2.6


@dataclass(frozen=True)
class ScalarField:
    mode: str = "analytic"
    center: tuple = DEFAULT_CENTER
    plane_z: Optional[float] = DEFAULT_PLANE_Z
    widths: tuple = (64, 64, 64)
    prefix: str = "manifold"

    def __post_init__(self):
        if self.mode not in ("analytic", "mlp"):
            raise ValueError(f"unknown scalar field mode {self.mode!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))


@dataclass(frozen=True)
class SurfaceSet:
    """N manifold surfaces.

    With an analytic field ``levels`` holds the sphere radii and the
    background plane is appended as an extra surface, so
    ``n_surfaces == len(levels) + 1`` (or ``len(levels)`` when
    ``field.plane_z`` is None). With an MLP field each level is one surface.
    """

    field: ScalarField
    levels: tuple
    params: Optional[object] = dc_field(default=None, compare=False, repr=False)

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        object.__setattr__(self, "levels", levels)
        if self.n_surfaces < 1:
            raise ValueError("a SurfaceSet needs at least one surface")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly increasing")
        if self.field.mode == "analytic" and levels and levels[0] <= 0:
            raise ValueError("sphere radii must be positive")

    @property
    def has_plane(self) -> bool:
        return self.field.mode == "analytic" and self.field.plane_z is not None

    @property
    def n_surfaces(self) -> int:
        return len(self.levels) + int(self.has_plane)

    @property
    def background_index(self) -> int:
        return self.n_surfaces - 1

    def subset(self, index: int) -> "SurfaceSet":
        """The single surface ``index`` as its own SurfaceSet."""
        if not 0 <= index < self.n_surfaces:
            raise IndexError(index)
        f = self.field
        if f.mode == "analytic":
            if self.has_plane and index == self.background_index:
                return SurfaceSet(f, (), self.params)
            return SurfaceSet(
                ScalarField("analytic", f.center, None), (self.levels[index],), self.params
            )
        return SurfaceSet(f, (self.levels[index],), self.params)


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_near: float = DEFAULT_T_NEAR
    t_far: float = DEFAULT_T_FAR

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ValueError("ray direction must be unit length")
        if not self.t_near < self.t_far:
            raise ValueError("t_near must be smaller than t_far")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class Intersection:
    point: np.ndarray
    surface_index: int
    t: float


@dataclass
class Hits:
    """Padded per-ray intersections, sorted by ``t`` along the last axis.

    Empty slots carry ``t = inf`` and ``surface = -1``.
    """

    t: np.ndarray  # (R, K)
    surface: np.ndarray  # (R, K) int
    points: np.ndarray  # (R, K, 3)

    @property
    def valid(self):
        return self.surface >= 0


# ---------------------------------------------------------------------------
# field evaluation


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def mlp_field_names(prefix: str, widths: Sequence[int]):
    n_layers = len(widths) + 1
    return [(f"{prefix}.layers.{i}.weight", f"{prefix}.layers.{i}.bias") for i in range(n_layers)]


def _eval_mlp(points, field: ScalarField, params):
    if params is None:
        raise MissingWeightsError(f"scalar field '{field.prefix}' needs network parameters")
    h = points
    names = mlp_field_names(field.prefix, field.widths)
    for i, (wn, bn) in enumerate(names):
        try:
            w = params[wn]
            b = params[bn]
        except KeyError as exc:
            raise MissingWeightsError(f"missing tensor {exc.args[0]!r}") from None
        h = h @ np.asarray(w, dtype=np.float64).T + np.asarray(b, dtype=np.float64)
        if i < len(names) - 1:
            h = _softplus(h)
    return h[..., 0]


def eval_scalar_field(points, field: ScalarField, params=None):
    """Evaluate the scalar field at ``points`` (shape ``(..., 3)``)."""
    p = np.asarray(points, dtype=np.float64)
    if field.mode == "analytic":
        return np.linalg.norm(p - np.asarray(field.center), axis=-1)
    return _eval_mlp(p, field, params)


# ---------------------------------------------------------------------------
# intersection


def _pack(ts, surf, origins, dirs):
    order = np.argsort(ts, axis=1, kind="stable")
    ts = np.take_along_axis(ts, order, axis=1)
    surf = np.take_along_axis(surf, order, axis=1)
    surf = np.where(np.isfinite(ts), surf, -1)
    # drop columns that are empty for every ray
    keep = np.any(surf >= 0, axis=0)
    if not keep.all():
        last = int(np.nonzero(keep)[0].max()) + 1 if keep.any() else 0
        ts, surf = ts[:, :last], surf[:, :last]
    safe_t = np.where(np.isfinite(ts), ts, 0.0)
    points = origins[:, None, :] + safe_t[..., None] * dirs[:, None, :]
    return Hits(ts, surf, points)


def _intersect_analytic(origins, dirs, t_near, t_far, surfaces: SurfaceSet):
    f = surfaces.field
    radii = np.asarray(surfaces.levels, dtype=np.float64)
    oc = origins - np.asarray(f.center)
    b = np.einsum("ij,ij->i", dirs, oc)[:, None]
    c = np.einsum("ij,ij->i", oc, oc)[:, None] - radii[None, :] ** 2
    # dirs are unit so the quadratic's leading coefficient is 1
    disc = b * b - c
    tangent = np.abs(disc) < TANGENT_EPS
    root = np.sqrt(np.where(disc > 0, disc, 0.0))
    t0 = -b - root
    t1 = np.where(tangent, np.inf, -b + root)
    hit = disc > -TANGENT_EPS
    t0 = np.where(hit, t0, np.inf)
    t1 = np.where(hit, t1, np.inf)
    cols = [t0, t1]
    idx = np.arange(len(radii))
    surf_cols = [np.broadcast_to(idx, t0.shape), np.broadcast_to(idx, t1.shape)]
    if surfaces.has_plane:
        dz = dirs[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            tp = np.where(np.abs(dz) > 1e-12, (f.plane_z - origins[:, 2]) / dz, np.inf)
        cols.append(tp[:, None])
        surf_cols.append(np.full((len(origins), 1), surfaces.background_index))
    ts = np.concatenate(cols, axis=1)
    surf = np.concatenate(surf_cols, axis=1).astype(np.int64)
    ts = np.where((ts >= t_near) & (ts <= t_far), ts, np.inf)
    return ts, surf


def _intersect_mlp(origins, dirs, t_near, t_far, surfaces: SurfaceSet, n_samples):
    f = surfaces.field
    params = surfaces.params
    levels = np.asarray(surfaces.levels, dtype=np.float64)
    n_rays = len(origins)
    ts_grid = np.linspace(t_near, t_far, n_samples)
    pts = origins[:, None, :] + ts_grid[None, :, None] * dirs[:, None, :]
    vals = eval_scalar_field(pts, f, params)  # (R, S)
    s = vals[:, :, None] - levels[None, None, :]  # (R, S, L)
    neg = s < 0
    crossing = neg[:, :-1, :] != neg[:, 1:, :]  # (R, S-1, L)
    ray_i, seg_i, lev_i = np.nonzero(crossing)
    if len(ray_i) == 0:
        return np.full((n_rays, 1), np.inf), np.full((n_rays, 1), -1, dtype=np.int64)

    a = ts_grid[seg_i].copy()
    b = ts_grid[seg_i + 1].copy()
    fa = s[ray_i, seg_i, lev_i].copy()
    fb = s[ray_i, seg_i + 1, lev_i].copy()
    o = origins[ray_i]
    d = dirs[ray_i]
    lv = levels[lev_i]
    root = np.where(fa == 0, a, b)
    done = (fa == 0) | (fb == 0)
    side = np.zeros(len(a), dtype=np.int8)
    for _ in range(SECANT_MAX_ITERS):
        active = ~done
        if not active.any():
            break
        denom = fb - fa
        tm = np.where(denom != 0, b - fb * (b - a) / np.where(denom != 0, denom, 1.0), 0.5 * (a + b))
        fm = eval_scalar_field(o + tm[:, None] * d, f, params) - lv
        root = np.where(active, tm, root)
        conv = np.abs(fm) < SECANT_TOL
        done = done | conv
        # Illinois-style false position keeps the root bracketed
        left = (np.sign(fm) == np.sign(fa)) & active & ~conv
        right = active & ~conv & ~left
        a = np.where(left, tm, a)
        fa = np.where(left, fm, fa)
        fb = np.where(left & (side == -1), fb * 0.5, fb)
        b = np.where(right, tm, b)
        fb = np.where(right, fm, fb)
        fa = np.where(right & (side == 1), fa * 0.5, fa)
        side = np.where(left, -1, np.where(right, 1, side)).astype(np.int8)

    counts = np.bincount(ray_i, minlength=n_rays)
    k = int(counts.max())
    ts = np.full((n_rays, k), np.inf)
    surf = np.full((n_rays, k), -1, dtype=np.int64)
    order = np.argsort(ray_i, kind="stable")
    slot = np.arange(len(ray_i)) - np.repeat(np.cumsum(counts) - counts, counts)
    ts[ray_i[order], slot] = root[order]
    surf[ray_i[order], slot] = lev_i[order]
    return ts, surf


def intersect_rays(origins, dirs, surfaces: SurfaceSet, t_near=DEFAULT_T_NEAR,
                   t_far=DEFAULT_T_FAR, n_samples=MLP_RAY_SAMPLES) -> Hits:
    """Vectorised intersection of ``R`` rays with every surface.

    ``origins`` and ``dirs`` have shape ``(R, 3)``; directions must be unit.
    ``n_samples`` only affects MLP fields.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    if surfaces.field.mode == "analytic":
        ts, surf = _intersect_analytic(origins, dirs, t_near, t_far, surfaces)
    else:
        ts, surf = _intersect_mlp(origins, dirs, t_near, t_far, surfaces, n_samples)
    return _pack(ts, surf, origins, dirs)


def intersect_ray(ray: Ray, surfaces: SurfaceSet, n_samples=MLP_RAY_SAMPLES):
    """All crossings of ``ray`` with ``surfaces`` as a t-sorted list."""
    hits = intersect_rays(ray.origin[None], ray.direction[None], surfaces,
                          ray.t_near, ray.t_far, n_samples)
    out = []
    for t, s, p in zip(hits.t[0], hits.surface[0], hits.points[0]):
        if s >= 0:
            out.append(Intersection(point=p.copy(), surface_index=int(s), t=float(t)))
    return out


def front_hits(origins, dirs, surfaces: SurfaceSet, t_near=DEFAULT_T_NEAR, t_far=DEFAULT_T_FAR):
    """Front-most hit of each ray on each surface separately.

    Returns ``(t, points)`` of shapes ``(R, N)`` and ``(R, N, 3)``; misses
    have ``t = inf`` and NaN points.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    hits = intersect_rays(origins, dirs, surfaces, t_near, t_far)
    n = surfaces.n_surfaces
    t_front = np.full((len(origins), n), np.inf)
    # hits are sorted, so walking slots from the back leaves the smallest t
    for k in range(hits.t.shape[1] - 1, -1, -1):
        s = hits.surface[:, k]
        ok = s >= 0
        t_front[np.nonzero(ok)[0], s[ok]] = hits.t[ok, k]
    pts = origins[:, None, :] + np.where(np.isfinite(t_front), t_front, np.nan)[..., None] * dirs[:, None, :]
    return t_front, pts


def sphere_radii(n_spheres: int, r_min=R_MIN, r_max=R_MAX):
    return np.linspace(r_min, r_max, n_spheres)


def init_default_surfaces(n_surfaces: int = 24, r_min=R_MIN, r_max=R_MAX) -> SurfaceSet:
    """Concentric spheres around (0, 0, -1.5) plus the background plane z = -1."""
    if n_surfaces < 2:
        raise ValueError("need at least one sphere and the background plane (n_surfaces >= 2)")
    radii = sphere_radii(n_surfaces - 1, r_min, r_max)
    return SurfaceSet(ScalarField("analytic", DEFAULT_CENTER, DEFAULT_PLANE_Z), tuple(radii))
