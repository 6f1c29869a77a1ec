"""Proxy shapes by multiview depth fusion, and baked meshes for fast viewing."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from .camera import Camera
from .geometry import SurfaceSet, intersect_rays
from .gridding import GRID_T_FAR, GRID_T_NEAR, MapStack, grid_ray_arrays
from .raster import composite_layers, raster_layer
from .render import DepthMap

FUSION_SHARPNESS = 10.0
FUSION_VIEWS = 15
GRID_RES = 128
GRID_BBOX = ((-1.0, -1.0, -2.5), (1.0, 1.0, -0.5))
BAKE_LATTICE = 64
MIN_TRIANGLE_AREA = 1e-12
HINT_SAMPLES = 16
# a pixel with less accumulated opacity than this saw no surface
EMPTY_COVERAGE = 0.5


@dataclass
class OccupancyGrid:
    """Values on the nodes of a regular grid spanning ``bbox`` (inclusive)."""

    values: np.ndarray  # (X, Y, Z), indexed by x, y, z
    bbox_min: tuple
    bbox_max: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 3 or min(self.values.shape) < 2:
            raise ValueError("occupancy grid needs at least 2 nodes per axis")
        self.bbox_min = tuple(float(v) for v in self.bbox_min)
        self.bbox_max = tuple(float(v) for v in self.bbox_max)
        if any(lo >= hi for lo, hi in zip(self.bbox_min, self.bbox_max)):
            raise ValueError("bbox_min must be below bbox_max on every axis")

    @property
    def spacing(self):
        return tuple((hi - lo) / (n - 1) for lo, hi, n in zip(self.bbox_min, self.bbox_max, self.values.shape))

    def node_coords(self):
        axes = [np.linspace(lo, hi, n) for lo, hi, n in zip(self.bbox_min, self.bbox_max, self.values.shape)]
        return np.meshgrid(*axes, indexing="ij")


@dataclass
class Mesh:
    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray  # (F, 3) int
    uv: np.ndarray = None  # (V, 2) texture pixel coords (column, row)
    surface_index: np.ndarray = None  # (V,) int

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ValueError("face index out of range")

    @property
    def n_faces(self):
        return len(self.faces)

    def triangle_areas(self):
        v = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)


@dataclass
class TexturedMesh:
    mesh: Mesh
    texture: np.ndarray  # (H, W, 4) RGB + occupancy
    name: str = "surface"
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# depth fusion


def fusion_cameras(n_views=FUSION_VIEWS, yaw_range=0.4, **kwargs):
    yaws = np.linspace(-yaw_range, yaw_range, n_views)
    return [Camera(yaw=float(y), **kwargs) for y in yaws]


def fuse_occupancy(views, resolution=GRID_RES, bbox=GRID_BBOX, sharpness=FUSION_SHARPNESS):
    """Average per-view soft occupancies ``sigmoid(k (z - d))`` on a grid.

    ``views`` is a sequence of ``(DepthMap, Camera)``. ``z`` is a node's
    depth along the camera axis and ``d`` the depth at the nearest pixel.
    Nodes outside a view's frustum are left out of that view's average;
    pixels that saw no surface count as free space. Nodes seen by no view
    get 0.5.
    """
    views = list(views)
    if not views:
        raise ValueError("depth fusion needs at least one view")
    res = (resolution,) * 3 if np.isscalar(resolution) else tuple(resolution)
    lo, hi = bbox
    grid = OccupancyGrid(np.zeros(res), lo, hi)
    pts = np.stack([c.ravel() for c in grid.node_coords()], axis=1)
    total = np.zeros(len(pts))
    count = np.zeros(len(pts))
    for dmap, cam in views:
        depth = np.asarray(dmap.depth if isinstance(dmap, DepthMap) else dmap, dtype=np.float64)
        cover = dmap.coverage if isinstance(dmap, DepthMap) else np.ones_like(depth)
        if depth.shape != (cam.height, cam.width):
            raise ValueError(f"depth map {depth.shape} does not match camera {cam.resolution}")
        col, row, z = cam.project(pts)
        with np.errstate(invalid="ignore"):
            ci = np.rint(col)
            ri = np.rint(row)
            usable = (z > cam.near) & (ci >= 0) & (ci < cam.width) & (ri >= 0) & (ri < cam.height)
        ci = ci[usable].astype(np.int64)
        ri = ri[usable].astype(np.int64)
        d = depth[ri, ci]
        seen = cover[ri, ci] >= EMPTY_COVERAGE
        x = sharpness * (z[usable] - d)
        occ = np.where(seen, 0.5 * (np.tanh(0.5 * x) + 1.0), 0.0)
        total[usable] += occ
        count[usable] += 1.0
    vals = np.where(count > 0, total / np.maximum(count, 1.0), 0.5)
    grid.values = vals.reshape(res)
    return grid


def marching_cubes(grid: OccupancyGrid, level=0.5) -> Mesh:
    """Isosurface of ``grid`` at ``level`` in world coordinates.

    A level outside the open value range gives an empty mesh.
    """
    v = np.asarray(grid.values, dtype=np.float64)
    if not (v.min() < level < v.max()):
        return Mesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    verts, faces, _, _ = measure.marching_cubes(v, level=level, spacing=grid.spacing,
                                                method="lorensen", allow_degenerate=False)
    verts = verts + np.asarray(grid.bbox_min)
    mesh = Mesh(verts, faces)
    keep = mesh.triangle_areas() > MIN_TRIANGLE_AREA
    return Mesh(verts, faces[keep])


# ---------------------------------------------------------------------------
# baking and cached rendering


def lattice_faces(n_rows, n_cols, valid=None):
    """Two triangles per lattice cell; drops triangles with a missing vertex."""
    idx = np.arange(n_rows * n_cols).reshape(n_rows, n_cols)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, :-1].ravel()
    d = idx[1:, 1:].ravel()
    faces = np.concatenate([np.stack([a, c, b], 1), np.stack([b, c, d], 1)])
    if valid is not None:
        faces = faces[np.all(np.asarray(valid).ravel()[faces], axis=1)]
    return faces


def bake_textured_mesh(surfaces: SurfaceSet, maps: MapStack, lattice=BAKE_LATTICE, all_sheets=False):
    """Tessellate each surface on a ``lattice x lattice`` gridding lattice.

    Vertices are where the gridding rays cross the surface, uv the matching
    position in the surface's map, and the texture is that map (RGB +
    occupancy). One mesh per surface holds the first crossing of each
    gridding ray. A ray can cross a surface again (the far side of a
    sphere) and the ray renderer looks that crossing up in the same map;
    ``all_sheets=True`` bakes every crossing order as an extra mesh, which
    matters when the front layers are translucent and costs a layer each.
    """
    if maps.n_surfaces != surfaces.n_surfaces:
        raise ValueError(f"{maps.n_surfaces} maps for {surfaces.n_surfaces} surfaces")
    out = []
    th, tw = maps.height, maps.width
    jj, ii = np.meshgrid(np.arange(lattice), np.arange(lattice))
    uv = np.stack([jj.ravel() * (tw - 1) / (lattice - 1), ii.ravel() * (th - 1) / (lattice - 1)], axis=1)
    for i in range(surfaces.n_surfaces):
        meta = maps.meta(i)
        origins, dirs = grid_ray_arrays(lattice, lattice, meta.half_width, meta.warp)
        hits = intersect_rays(origins, dirs, surfaces.subset(i), GRID_T_NEAR, GRID_T_FAR)
        tex = np.ascontiguousarray(maps.maps[i, ..., :4], dtype=np.float64)
        n_sheets = hits.t.shape[1] if all_sheets else min(hits.t.shape[1], 1)
        if n_sheets == 0:
            # surface missed by every gridding ray: keep an empty placeholder
            out.append(TexturedMesh(Mesh(np.zeros((0, 3)), np.zeros((0, 3))), tex, name=f"surface_{i:02d}",
                                    extra={"surface": i, "sheet": 0}))
        for sheet in range(n_sheets):
            valid = hits.valid[:, sheet]
            verts = np.where(valid[:, None], hits.points[:, sheet], 0.0)
            mesh = Mesh(verts, lattice_faces(lattice, lattice, valid), uv.copy(),
                        np.full(len(verts), i, dtype=np.int64))
            mesh.faces = mesh.faces[mesh.triangle_areas() > MIN_TRIANGLE_AREA]
            name = f"surface_{i:02d}" if sheet == 0 else f"surface_{i:02d}_sheet{sheet}"
            out.append(TexturedMesh(mesh, tex, name=name, extra={"surface": i, "sheet": sheet}))
    return out


class CachedRenderer:
    """Rasterizes a fixed list of baked meshes from arbitrary cameras.

    Fragment buffers are kept between frames of the same size.
    """

    def __init__(self, meshes):
        self.meshes = list(meshes)
        self._depth = None
        self._rgba = None

    def _buffers(self, h, w):
        shape = (len(self.meshes), h, w)
        if self._depth is None or self._depth.shape != shape:
            self._depth = np.empty(shape, dtype=np.float32)
            self._rgba = np.empty(shape + (4,), dtype=np.float32)
        self._depth.fill(np.inf)
        return self._depth, self._rgba

    def render(self, camera: Camera):
        h, w = camera.height, camera.width
        out = np.zeros((h, w, 3))
        if not self.meshes:
            return out
        depth, rgba = self._buffers(h, w)
        for k, tm in enumerate(self.meshes):
            m = tm.mesh
            if not m.n_faces:
                continue
            col, row, z = camera.project(m.vertices)
            with np.errstate(divide="ignore"):
                inv_z = np.where(z > 0, 1.0 / z, -1.0)
            raster_layer(col, row, inv_z, m.uv[:, 0] * inv_z, m.uv[:, 1] * inv_z,
                         m.faces, tm.texture, float(camera.near), depth, rgba, k)
        composite_layers(depth, rgba, layer_order_hint(depth), out)
        return np.clip(out, 0.0, 1.0)


def layer_order_hint(depth, samples=HINT_SAMPLES):
    """Global front-to-back layer order that holds at as many pixels as possible.

    On a coarse pixel grid each layer scores the fraction of the other
    layers it lies in front of (where both are present); higher scores
    come first. Only a hint: per-pixel sorting stays exact.
    """
    n, h, w = depth.shape
    sy = np.linspace(0, h - 1, min(samples, h)).astype(np.int64)
    sx = np.linspace(0, w - 1, min(samples, w)).astype(np.int64)
    d = depth[:, sy][:, :, sx].reshape(n, -1).astype(np.float64)
    present = np.isfinite(d)
    both = present[:, None, :] & present[None, :, :]
    front = (d[:, None, :] < d[None, :, :]) & both
    score = front.sum(axis=2) / np.maximum(both.sum(axis=2), 1)
    return np.argsort(-score.sum(axis=1), kind="stable")


def render_cached(meshes, camera: Camera):
    """Rasterize baked meshes; an empty list renders black."""
    return CachedRenderer(meshes).render(camera)
