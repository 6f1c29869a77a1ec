"""Scene configuration: a small TOML document with strict validation.

Example::

    seed = 7

    [surfaces]
    count = 24
    r_min = 0.5
    r_max = 2.6

    [camera]
    radius = 2.7
    fov_deg = 12.0

    [maps]
    lr_size = 64

    [model]
    sr_factor = 16
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError


@dataclass
class SurfacesConfig:
    count: int = 24
    kind: str = "analytic"
    r_min: float = 0.5
    r_max: float = 2.6
    mlp_widths: list = field(default_factory=lambda: [64, 64, 64])


@dataclass
class CameraConfig:
    radius: float = 2.7
    fov_deg: float = 12.0
    look_at: list = field(default_factory=lambda: [0.0, 0.0, -1.5])
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    near: float = 0.0
    far: float = 6.0


@dataclass
class MapsConfig:
    lr_size: int = 64
    fg_half_width: float = 1.0
    bg_half_width: float = 3.0


@dataclass
class ModelConfig:
    d_z: int = 256
    d_f: int = 32
    trunk_depth: int = 8
    trunk_width: int = 256
    sr_factor: int = 16


@dataclass
class RenderConfig:
    size: int = 256
    frames: int = 30
    yaw_range: float = 0.4


@dataclass
class SceneConfig:
    seed: int = 0
    surfaces: SurfacesConfig = field(default_factory=SurfacesConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    maps: MapsConfig = field(default_factory=MapsConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    render: RenderConfig = field(default_factory=RenderConfig)

    def to_dict(self):
        return asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def validate(self):
        s, c, m, mo, r = self.surfaces, self.camera, self.maps, self.model, self.render
        checks = [
            (s.count >= 2, "surfaces.count", "must be >= 2"),
            (s.kind in ("analytic", "mlp"), "surfaces.kind", "must be 'analytic' or 'mlp'"),
            (0 < s.r_min < s.r_max, "surfaces.r_min", "need 0 < r_min < r_max"),
            (all(int(w) > 0 for w in s.mlp_widths), "surfaces.mlp_widths", "widths must be positive"),
            (c.radius > 0, "camera.radius", "must be positive"),
            (0 < c.fov_deg < 120, "camera.fov_deg", "must lie in (0, 120)"),
            (len(c.look_at) == 3, "camera.look_at", "must have 3 entries"),
            (c.near < c.far, "camera.near", "must be smaller than camera.far"),
            (m.lr_size >= 1, "maps.lr_size", "must be positive"),
            (m.fg_half_width > 0, "maps.fg_half_width", "must be positive"),
            (m.bg_half_width > 0, "maps.bg_half_width", "must be positive"),
            (mo.d_z >= 1, "model.d_z", "must be positive"),
            (mo.d_f >= 1, "model.d_f", "must be positive"),
            (mo.trunk_depth >= 2, "model.trunk_depth", "must be >= 2"),
            (mo.trunk_width >= 1, "model.trunk_width", "must be positive"),
            (mo.sr_factor in (2, 4, 8, 16), "model.sr_factor", "must be one of 2, 4, 8, 16"),
            (r.size >= 1, "render.size", "must be positive"),
            (r.frames >= 1, "render.frames", "must be positive"),
        ]
        for ok, name, msg in checks:
            if not ok:
                raise ConfigError(msg, field=name)
        return self


_SECTIONS = {
    "surfaces": SurfacesConfig,
    "camera": CameraConfig,
    "maps": MapsConfig,
    "model": ModelConfig,
    "render": RenderConfig,
}


def _find_line(text, section, key):
    """Best-effort 1-based line of ``key`` (inside ``[section]`` if given)."""
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        m = re.fullmatch(r"\[\s*([A-Za-z0-9_.-]+)\s*\]", line)
        if m:
            current = m.group(1)
            if section is not None and key is None and current == section:
                return no
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*=", line):
            return no
    return None


def _coerce(value, default, name, text, section, key):
    line = _find_line(text, section, key)
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"expected {type(default).__name__}, got {type(value).__name__}",
                          line=line, field=name)
    return value


def parse_config(text: str) -> SceneConfig:
    """Parse and validate a TOML scene description."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", line=int(m.group(1)) if m else None) from None
    cfg = SceneConfig()
    for key, value in doc.items():
        if key == "seed":
            cfg.seed = _coerce(value, 0, "seed", text, None, "seed")
            continue
        if key not in _SECTIONS:
            raise ConfigError("unknown key", line=_find_line(text, None, key) or _find_line(text, key, None),
                              field=key)
        if not isinstance(value, dict):
            raise ConfigError("expected a table", line=_find_line(text, None, key), field=key)
        section = getattr(cfg, key)
        known = {f.name for f in fields(section)}
        for sub, v in value.items():
            name = f"{key}.{sub}"
            if sub not in known:
                raise ConfigError("unknown key", line=_find_line(text, key, sub), field=name)
            setattr(section, sub, _coerce(v, getattr(section, sub), name, text, key, sub))
    return cfg.validate()


def load_config(path=None) -> SceneConfig:
    if path is None:
        return SceneConfig().validate()
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
