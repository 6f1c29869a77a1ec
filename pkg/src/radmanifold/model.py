"""Procedural stand-in models: seeded weights for every network.

Nothing here is trained. Weights follow the usual initialisations (SIREN
uniform for the sine trunk, scaled He-uniform for convolutions) so the
forward passes produce bounded, structured outputs that exercise every code
path.
"""
from __future__ import annotations

import numpy as np

from .config import SceneConfig
from .geometry import DEFAULT_CENTER, ScalarField, SurfaceSet, mlp_field_names, sphere_radii
from .params import NetParams
from .superres import N_DENSE, N_DENSE_CONVS, STYLE_DIM, STYLE_HIDDEN, net_shape

FILM_HIDDEN = 3
SIREN_W0 = 30.0
RRDB_INIT_SCALE = 0.1

SURFACE_KEYS = ("surfaces.mode", "surfaces.levels", "surfaces.center", "surfaces.plane_z",
                "surfaces.mlp_widths")


def _uniform(rng, bound, shape):
    return rng.uniform(-bound, bound, size=shape)


def _linear(rng, fan_in, fan_out, bound=None):
    bound = np.sqrt(1.0 / fan_in) if bound is None else bound
    return _uniform(rng, bound, (fan_out, fan_in)), _uniform(rng, np.sqrt(1.0 / fan_in), (fan_out,))


def _conv(rng, cin, cout, scale=1.0, k=3):
    fan_in = cin * k * k
    w = _uniform(rng, np.sqrt(6.0 / fan_in), (cout, cin, k, k)) * scale
    return w, np.zeros(cout)


def radiance_tensors(rng, cfg: SceneConfig):
    mo = cfg.model
    t = {}
    width, depth = mo.trunk_width, mo.trunk_depth
    for i in range(FILM_HIDDEN):
        fan_in = mo.d_z if i == 0 else 256
        t[f"film_map.layers.{i}.weight"], t[f"film_map.layers.{i}.bias"] = _linear(
            rng, fan_in, 256, bound=np.sqrt(6.0 / fan_in))
    n_film = depth + 1
    w, _ = _linear(rng, 256, 2 * n_film * width, bound=0.25 * np.sqrt(6.0 / 256))
    t["film_map.out.weight"] = w
    # frequency biases centred on the SIREN w0, phases on zero
    t["film_map.out.bias"] = np.concatenate([
        SIREN_W0 + rng.normal(0.0, 1.0, n_film * width),
        rng.normal(0.0, 0.5, n_film * width),
    ])
    for i in range(depth):
        if i == 0:
            t["siren.layers.0.weight"], t["siren.layers.0.bias"] = _linear(rng, 3, width, bound=1.0 / 3.0)
        else:
            bound = np.sqrt(6.0 / width) / SIREN_W0
            t[f"siren.layers.{i}.weight"], t[f"siren.layers.{i}.bias"] = _linear(rng, width, width, bound)
    t["siren.alpha_out.weight"], t["siren.alpha_out.bias"] = _linear(rng, width, 1)
    bound = np.sqrt(6.0 / (width + 3)) / SIREN_W0
    t["siren.color_film.weight"], t["siren.color_film.bias"] = _linear(rng, width + 3, width, bound)
    t["siren.color_out.weight"], t["siren.color_out.bias"] = _linear(rng, width, 3)
    for k, _ in enumerate(range(1, depth, 2)):
        t[f"siren.feature.{k}.weight"], t[f"siren.feature.{k}.bias"] = _linear(rng, width, mo.d_f)
    return t


def sr_tensors(rng, cfg: SceneConfig):
    mo = cfg.model
    t = {}
    for i in range(STYLE_HIDDEN):
        fan_in = mo.d_z if i == 0 else STYLE_DIM
        t[f"style.layers.{i}.weight"], t[f"style.layers.{i}.bias"] = _linear(
            rng, fan_in, STYLE_DIM, bound=np.sqrt(6.0 / fan_in))
    for net, bg in (("sr_fg", False), ("sr_bg", True)):
        shape = net_shape(4 + mo.d_f, mo.sr_factor, background=bg)
        t[f"{net}.conv_first.weight"], t[f"{net}.conv_first.bias"] = _conv(rng, shape.in_channels, shape.width)
        for b in range(shape.n_rrdb):
            for r in range(N_DENSE):
                for c in range(N_DENSE_CONVS):
                    out = shape.width if c == N_DENSE_CONVS - 1 else shape.growth
                    pre = f"{net}.rrdb.{b}.rdb.{r}.conv.{c}"
                    t[pre + ".weight"], t[pre + ".bias"] = _conv(
                        rng, shape.width + c * shape.growth, out, RRDB_INIT_SCALE)
        t[f"{net}.trunk_conv.weight"], t[f"{net}.trunk_conv.bias"] = _conv(
            rng, shape.width, shape.width, RRDB_INIT_SCALE)
        for name, cin, cout in shape.modulated_layers():
            t[f"{net}.{name}.weight"], t[f"{net}.{name}.bias"] = _conv(rng, cin, cout)
            t[f"{net}.{name}.style.weight"] = _uniform(rng, 0.1 / np.sqrt(STYLE_DIM), (cin, STYLE_DIM))
            t[f"{net}.{name}.style.bias"] = np.ones(cin)
    return t


def manifold_tensors(rng, widths, prefix="manifold"):
    t = {}
    dims = [3] + list(widths) + [1]
    for (wn, bn), fi, fo in zip(mlp_field_names(prefix, widths), dims[:-1], dims[1:]):
        t[wn], t[bn] = _linear(rng, fi, fo, bound=np.sqrt(3.0 / fi))
    return t


def surface_tensors(surfaces: SurfaceSet):
    f = surfaces.field
    return {
        "surfaces.mode": np.array(0.0 if f.mode == "analytic" else 1.0),
        "surfaces.levels": np.asarray(surfaces.levels, dtype=np.float64),
        "surfaces.center": np.asarray(f.center, dtype=np.float64),
        "surfaces.plane_z": np.array([] if f.plane_z is None else [f.plane_z], dtype=np.float64),
        "surfaces.mlp_widths": np.asarray(f.widths, dtype=np.float64),
    }


def surfaces_from_params(params) -> SurfaceSet:
    """Rebuild the SurfaceSet stored alongside the weights."""
    mode = "analytic" if float(params["surfaces.mode"]) == 0.0 else "mlp"
    plane = params["surfaces.plane_z"]
    field = ScalarField(
        mode,
        tuple(float(v) for v in params["surfaces.center"]),
        float(plane[0]) if plane.size else None,
        tuple(int(v) for v in params["surfaces.mlp_widths"]),
    )
    levels = tuple(float(v) for v in params["surfaces.levels"])
    return SurfaceSet(field, levels, params if mode == "mlp" else None)


def build_surfaces(cfg: SceneConfig) -> SurfaceSet:
    s = cfg.surfaces
    if s.kind == "analytic":
        radii = sphere_radii(s.count - 1, s.r_min, s.r_max)
        return SurfaceSet(ScalarField("analytic", DEFAULT_CENTER, -1.0), tuple(radii))
    # MLP field: levels spread over the field's range near the scene centre
    return SurfaceSet(ScalarField("mlp", widths=tuple(s.mlp_widths), plane_z=None),
                      tuple(np.linspace(-1.0, 1.0, s.count)))


def gen_latent(seed: int, d_z: int = 256):
    return np.random.default_rng([seed, 1]).standard_normal(d_z)


def gen_test_model(seed: int, cfg: SceneConfig = None) -> NetParams:
    """Seeded random weights for all networks plus the scene's surfaces.

    The same seed and config always give bitwise-identical parameters.
    """
    cfg = SceneConfig() if cfg is None else cfg
    rng = np.random.default_rng(seed)
    tensors = {}
    tensors.update(radiance_tensors(rng, cfg))
    tensors.update(sr_tensors(rng, cfg))
    if cfg.surfaces.kind == "mlp":
        tensors.update(manifold_tensors(rng, cfg.surfaces.mlp_widths))
    tensors.update(surface_tensors(build_surfaces(cfg)))
    tensors["scene.latent"] = gen_latent(seed, cfg.model.d_z)
    return NetParams(tensors)
