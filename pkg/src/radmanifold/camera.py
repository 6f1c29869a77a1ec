"""Orbit pinhole camera."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_LOOK_AT = (0.0, 0.0, -1.5)
DEFAULT_RADIUS = 2.7
DEFAULT_FOV = 12.0


@dataclass(frozen=True)
class Camera:
    """Camera on a sphere of ``orbit_radius`` around ``look_at``.

    ``yaw`` rotates about the world y axis, ``pitch`` lifts the camera
    towards +y and ``roll`` spins the image about the viewing axis; all in
    radians. ``fov_deg`` is the vertical field of view. Pixel ``(row, col)``
    is sampled through its centre; row 0 is the top of the image.
    """

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    orbit_radius: float = DEFAULT_RADIUS
    look_at: tuple = DEFAULT_LOOK_AT
    fov_deg: float = DEFAULT_FOV
    resolution: tuple = (256, 256)
    near: float = 0.0
    far: float = 6.0

    def __post_init__(self):
        if not 0.0 < self.fov_deg < 120.0:
            raise ValueError("fov_deg must lie in (0, 120)")
        h, w = self.resolution
        if h < 1 or w < 1:
            raise ValueError("resolution must be positive")
        if not self.orbit_radius > 0:
            raise ValueError("orbit_radius must be positive")
        object.__setattr__(self, "look_at", tuple(float(v) for v in self.look_at))
        object.__setattr__(self, "resolution", (int(h), int(w)))

    @property
    def height(self):
        return self.resolution[0]

    @property
    def width(self):
        return self.resolution[1]

    @property
    def position(self):
        cp = np.cos(self.pitch)
        offset = np.array([cp * np.sin(self.yaw), np.sin(self.pitch), cp * np.cos(self.yaw)])
        return np.asarray(self.look_at) + self.orbit_radius * offset

    def basis(self):
        """``(right, up, forward)`` unit vectors in world space."""
        fwd = np.asarray(self.look_at) - self.position
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, [0.0, 1.0, 0.0])
        right /= np.linalg.norm(right)
        up = np.cross(right, fwd)
        c, s = np.cos(self.roll), np.sin(self.roll)
        return c * right + s * up, -s * right + c * up, fwd

    @property
    def focal(self):
        """Focal length in pixels."""
        return 0.5 * self.height / np.tan(np.radians(self.fov_deg) / 2)

    def intrinsics(self):
        f = self.focal
        return np.array([[f, 0.0, self.width / 2 - 0.5], [0.0, f, self.height / 2 - 0.5], [0.0, 0.0, 1.0]])

    def extrinsics(self):
        """World-to-camera ``(R, t)`` in the (right, down, forward) frame."""
        right, up, fwd = self.basis()
        rot = np.stack([right, -up, fwd])
        return rot, -rot @ self.position

    def ray_dirs(self, rows=None, cols=None):
        """Unit ray directions for pixel centres; full image if not given."""
        if rows is None:
            rows, cols = np.meshgrid(np.arange(self.height), np.arange(self.width), indexing="ij")
        rows = np.asarray(rows, dtype=np.float64).ravel()
        cols = np.asarray(cols, dtype=np.float64).ravel()
        f = self.focal
        x = (cols - (self.width / 2 - 0.5)) / f
        y = ((self.height / 2 - 0.5) - rows) / f
        right, up, fwd = self.basis()
        d = fwd[None, :] + x[:, None] * right[None, :] + y[:, None] * up[None, :]
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    def rays(self):
        d = self.ray_dirs()
        return np.broadcast_to(self.position, d.shape).copy(), d

    def project(self, points):
        """World points -> ``(col, row, depth)`` with depth along the view axis."""
        p = np.asarray(points, dtype=np.float64)
        right, up, fwd = self.basis()
        rel = p - self.position
        z = rel @ fwd
        with np.errstate(divide="ignore", invalid="ignore"):
            col = (rel @ right) / z * self.focal + (self.width / 2 - 0.5)
            row = (self.height / 2 - 0.5) - (rel @ up) / z * self.focal
        return col, row, z

    def depth_of(self, points):
        return (np.asarray(points) - self.position) @ self.basis()[2]


def orbit_cameras(n, yaw_range=0.4, **kwargs):
    """``n`` cameras with yaw evenly spaced over ``[-yaw_range, yaw_range]``."""
    yaws = np.linspace(-yaw_range, yaw_range, n) if n > 1 else np.zeros(1)
    return [Camera(yaw=float(y), **kwargs) for y in yaws]
