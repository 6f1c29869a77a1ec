"""Binary containers, images, meshes and run manifests.

All binary formats are little-endian with a four-byte magic:

* ``GRMH`` weights: version, count, then per tensor name length, UTF-8
  name, dtype tag (0 = float32), rank, dims and the row-major payload.
* ``GRMM`` map stacks: version, N, H, W, C, per-surface metadata, payload.
* ``GRMD`` depth maps: H, W, version (16-byte header), depth then coverage.
* ``GRMO`` occupancy grids: version, dims, float32 bbox, payload.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct

import numpy as np
from PIL import Image

from .errors import (BadMagicError, DuplicateNameError, TruncatedFileError, UnknownDtypeError,
                     UnsupportedVersionError, WeightFileError)
from .export import OccupancyGrid
from .gridding import WARPS, MapStack
from .params import NetParams
from .render import DepthMap

WEIGHTS_MAGIC = b"GRMH"
MAPS_MAGIC = b"GRMM"
DEPTH_MAGIC = b"GRMD"
GRID_MAGIC = b"GRMO"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 0
MANIFEST_NAME = "manifest.json"


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise TruncatedFileError(f"file ends at byte {len(self.data)}, needed {self.pos + n}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def f32_array(self, count):
        return np.frombuffer(self.take(4 * count), dtype="<f4").astype(np.float32)


def _check_magic(r: _Reader, magic):
    got = r.take(4)
    if got != magic:
        raise BadMagicError(f"expected magic {magic!r}, found {got!r}")


def _check_version(version):
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"format version {version} is not supported")


def _read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def _write_bytes(path, blob):
    with open(path, "wb") as fh:
        fh.write(blob)


# ---------------------------------------------------------------------------
# weights


def encode_weights(params) -> bytes:
    items = list(params.items())
    parts = [WEIGHTS_MAGIC, struct.pack("<II", FORMAT_VERSION, len(items))]
    for name, arr in items:
        raw = name.encode("utf-8")
        a = np.asarray(arr, dtype="<f4")  # tobytes() is row-major; keeps rank 0
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<II", DTYPE_FLOAT32, a.ndim))
        parts.append(struct.pack(f"<{a.ndim}I", *a.shape))
        parts.append(a.tobytes())
    return b"".join(parts)


def decode_weights(blob: bytes) -> NetParams:
    r = _Reader(blob)
    _check_magic(r, WEIGHTS_MAGIC)
    _check_version(r.u32())
    count = r.u32()
    tensors = {}
    for _ in range(count):
        name = r.take(r.u32()).decode("utf-8")
        dtype = r.u32()
        if dtype != DTYPE_FLOAT32:
            raise UnknownDtypeError(f"tensor {name!r} has unknown dtype tag {dtype}")
        rank = r.u32()
        dims = tuple(r.u32() for _ in range(rank))
        if name in tensors:
            raise DuplicateNameError(f"tensor name {name!r} appears twice")
        tensors[name] = r.f32_array(int(np.prod(dims, dtype=np.int64))).reshape(dims)
    if r.pos != len(blob):
        raise WeightFileError(f"{len(blob) - r.pos} trailing bytes after the last tensor")
    return NetParams(tensors)


def save_weights(params, path):
    _write_bytes(path, encode_weights(params))


def load_weights(path) -> NetParams:
    return decode_weights(_read_bytes(path))


# ---------------------------------------------------------------------------
# map stacks


def encode_maps(stack: MapStack) -> bytes:
    n, h, w, c = stack.maps.shape
    parts = [MAPS_MAGIC, struct.pack("<IIIII", FORMAT_VERSION, n, h, w, c)]
    for i in range(n):
        parts.append(struct.pack("<dII", stack.half_widths[i], int(stack.is_background[i]),
                                 WARPS.index(stack.warps[i])))
    parts.append(np.ascontiguousarray(stack.maps, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_maps(blob: bytes) -> MapStack:
    r = _Reader(blob)
    _check_magic(r, MAPS_MAGIC)
    _check_version(r.u32())
    n, h, w, c = (r.u32() for _ in range(4))
    half, bg, warps = [], [], []
    for _ in range(n):
        hw, flag, warp = struct.unpack("<dII", r.take(16))
        if warp >= len(WARPS):
            raise WeightFileError(f"unknown warp id {warp}")
        half.append(hw)
        bg.append(bool(flag))
        warps.append(WARPS[warp])
    maps = r.f32_array(n * h * w * c).reshape(n, h, w, c)
    return MapStack(maps, tuple(half), tuple(bg), tuple(warps))


def save_maps(stack, path):
    _write_bytes(path, encode_maps(stack))


def load_maps(path) -> MapStack:
    return decode_maps(_read_bytes(path))


# ---------------------------------------------------------------------------
# depth maps and occupancy grids


def save_depth(dmap: DepthMap, path):
    h, w = dmap.depth.shape
    blob = DEPTH_MAGIC + struct.pack("<III", h, w, FORMAT_VERSION)
    blob += np.ascontiguousarray(dmap.depth, dtype="<f4").tobytes()
    blob += np.ascontiguousarray(dmap.coverage, dtype="<f4").tobytes()
    _write_bytes(path, blob)


def load_depth(path) -> DepthMap:
    r = _Reader(_read_bytes(path))
    _check_magic(r, DEPTH_MAGIC)
    h, w = r.u32(), r.u32()
    _check_version(r.u32())
    depth = r.f32_array(h * w).reshape(h, w)
    return DepthMap(depth, r.f32_array(h * w).reshape(h, w))


def save_grid(grid: OccupancyGrid, path):
    x, y, z = grid.values.shape
    blob = GRID_MAGIC + struct.pack("<IIII", FORMAT_VERSION, x, y, z)
    blob += struct.pack("<6f", *grid.bbox_min, *grid.bbox_max)
    blob += np.ascontiguousarray(grid.values, dtype="<f4").tobytes()
    _write_bytes(path, blob)


def load_grid(path) -> OccupancyGrid:
    r = _Reader(_read_bytes(path))
    _check_magic(r, GRID_MAGIC)
    _check_version(r.u32())
    dims = tuple(r.u32() for _ in range(3))
    box = struct.unpack("<6f", r.take(24))
    vals = r.f32_array(int(np.prod(dims))).reshape(dims)
    return OccupancyGrid(vals, box[:3], box[3:])


# ---------------------------------------------------------------------------
# images and meshes


def to_uint8(img):
    """Quantise ``[0, 1]`` floats to 8 bits, rounding to nearest."""
    return np.rint(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(img, path):
    Image.fromarray(to_uint8(img)).save(path, format="PNG")


def load_png(path):
    with Image.open(path) as im:
        return np.asarray(im, dtype=np.float64) / 255.0


def save_obj(meshes, path):
    """Write textured meshes as one OBJ with an MTL and a PNG per surface.

    Returns every file written.
    """
    base, _ = os.path.splitext(path)
    folder = os.path.dirname(path) or "."
    mtl_path = base + ".mtl"
    written = [path, mtl_path]
    obj = [f"mtllib {os.path.basename(mtl_path)}\n"]
    mtl = []
    offset = 1
    for tm in meshes:
        m = tm.mesh
        th, tw = tm.texture.shape[:2]
        png = f"{os.path.basename(base)}_{tm.name}.png"
        save_png(tm.texture, os.path.join(folder, png))
        written.append(os.path.join(folder, png))
        mtl.append(f"newmtl {tm.name}\nKd 1 1 1\nmap_Kd {png}\nmap_d -imfchan m {png}\n\n")
        obj.append(f"o {tm.name}\nusemtl {tm.name}\n")
        obj.extend(f"v {x:.7g} {y:.7g} {z:.7g}\n" for x, y, z in m.vertices)
        if m.uv is not None:
            su = 1.0 / max(tw - 1, 1)
            sv = 1.0 / max(th - 1, 1)
            obj.extend(f"vt {u * su:.7g} {1.0 - v * sv:.7g}\n" for u, v in m.uv)
            obj.extend(f"f {a + offset}/{a + offset} {b + offset}/{b + offset} {c + offset}/{c + offset}\n"
                       for a, b, c in m.faces)
        else:
            obj.extend(f"f {a + offset} {b + offset} {c + offset}\n" for a, b, c in m.faces)
        offset += len(m.vertices)
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(obj)
    with open(mtl_path, "w", encoding="utf-8") as fh:
        fh.writelines(mtl)
    return written


def save_plain_obj(mesh, path):
    """Untextured mesh (e.g. a marching-cubes proxy shape)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"v {x:.7g} {y:.7g} {z:.7g}\n" for x, y, z in mesh.vertices)
        fh.writelines(f"f {a + 1} {b + 1} {c + 1}\n" for a, b, c in mesh.faces)
    return [path]


def load_obj_vertices(path):
    with open(path, encoding="utf-8") as fh:
        return np.array([[float(v) for v in ln.split()[1:4]] for ln in fh if ln.startswith("v ")])


# ---------------------------------------------------------------------------
# manifest


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir, outputs, config_sha256, command, extra=None):
    """Record ``outputs`` (with hashes) in ``out_dir/manifest.json``.

    Entries left by earlier commands in the same directory are kept unless
    the file was rewritten or has disappeared. Each entry names the command
    and config hash that produced it. No timestamps, so reruns give
    identical manifests.
    """
    path = os.path.join(out_dir, MANIFEST_NAME)
    entries = {}
    if os.path.exists(path):
        try:
            with open(path, encoding="utf-8") as fh:
                old = json.load(fh)
            for e in old.get("outputs", []):
                if os.path.exists(os.path.join(out_dir, e["path"])):
                    entries[e["path"]] = e
        except (ValueError, KeyError, TypeError, AttributeError):
            entries = {}  # unreadable manifest: start over
    for p in sorted(set(map(os.path.abspath, outputs))):
        rel = os.path.relpath(p, out_dir)
        entry = {"path": rel, "sha256": file_sha256(p), "bytes": os.path.getsize(p),
                 "command": command, "config_sha256": config_sha256}
        if extra:
            entry.update(extra)
        entries[rel] = entry
    doc = {"format": FORMAT_VERSION, "outputs": [entries[k] for k in sorted(entries)]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
