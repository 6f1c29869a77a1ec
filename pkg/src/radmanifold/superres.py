"""Style-modulated super-resolution CNN applied to flattened manifold maps.

Two networks share one style mapping MLP: ``sr_fg`` (width 64) runs on the
foreground maps with shared weights, ``sr_bg`` (half the channels) on the
background map. Per network::

    conv_first -> 8 x RRDB -> trunk_conv (+ skip)
    -> [modulated conv -> pixel shuffle x2 -> leaky] per upsampling stage
    -> modulated hr_conv -> leaky -> modulated proj (4 ch) -> sigmoid
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelFormatError
from .gridding import MapStack
from .layers import conv2d, leaky_relu, modulate_weights, pixel_shuffle_hwc, sigmoid
from .params import require

N_RRDB = 8
N_DENSE = 3
N_DENSE_CONVS = 5
RES_SCALE = 0.2
FG_WIDTH = 64
FG_GROWTH = 32
FG_UP_SCHEDULE = (64, 64, 32, 16)
FG_HR_CHANNELS = 16
STYLE_DIM = 256
STYLE_HIDDEN = 3
SUPPORTED_FACTORS = (2, 4, 8, 16)
NETS = ("sr_fg", "sr_bg")


@dataclass(frozen=True)
class NetShape:
    """Channel plan of one SR network."""

    in_channels: int
    width: int
    growth: int
    up_channels: tuple
    hr_channels: int
    n_rrdb: int = N_RRDB

    @property
    def factor(self):
        return 2 ** len(self.up_channels)

    def modulated_layers(self):
        """``(name, in_ch, out_ch)`` of every modulated conv, in order."""
        layers, prev = [], self.width
        for s, ch in enumerate(self.up_channels):
            layers.append((f"up.{s}.conv", prev, ch * 4))
            prev = ch
        layers.append(("hr_conv", prev, self.hr_channels))
        layers.append(("proj", self.hr_channels, 4))
        return layers


def net_shape(in_channels, factor, background=False):
    if factor not in SUPPORTED_FACTORS:
        raise ValueError(f"unsupported SR factor {factor}; choose one of {SUPPORTED_FACTORS}")
    n_up = int(np.log2(factor))
    div = 2 if background else 1
    return NetShape(
        in_channels=in_channels,
        width=FG_WIDTH // div,
        growth=FG_GROWTH // div,
        up_channels=tuple(c // div for c in FG_UP_SCHEDULE[:n_up]),
        hr_channels=FG_HR_CHANNELS // div,
    )


def infer_net_shape(params, net) -> NetShape:
    w_first = require(params, f"{net}.conv_first.weight")
    width, in_ch = int(w_first.shape[0]), int(w_first.shape[1])
    growth = int(require(params, f"{net}.rrdb.0.rdb.0.conv.0.weight").shape[0])
    n_rrdb = params.count_indexed(net + r"\.rrdb\.(\d+)\.rdb\.0\.conv\.0\.weight")
    n_up = params.count_indexed(net + r"\.up\.(\d+)\.conv\.weight")
    ups = tuple(int(params[f"{net}.up.{s}.conv.weight"].shape[0]) // 4 for s in range(n_up))
    hr = int(require(params, f"{net}.hr_conv.weight").shape[0])
    return NetShape(in_ch, width, growth, ups, hr, n_rrdb)


def validate_net(params, net):
    """Check every tensor of ``net`` against the channel plan; return the plan."""
    shape = infer_net_shape(params, net)
    k = 3
    params.expect_shape(f"{net}.conv_first.weight", (shape.width, shape.in_channels, k, k))
    params.expect_shape(f"{net}.conv_first.bias", (shape.width,))
    for b in range(shape.n_rrdb):
        for r in range(N_DENSE):
            for c in range(N_DENSE_CONVS):
                out = shape.width if c == N_DENSE_CONVS - 1 else shape.growth
                cin = shape.width + c * shape.growth
                pre = f"{net}.rrdb.{b}.rdb.{r}.conv.{c}"
                params.expect_shape(pre + ".weight", (out, cin, k, k))
                params.expect_shape(pre + ".bias", (out,))
    params.expect_shape(f"{net}.trunk_conv.weight", (shape.width, shape.width, k, k))
    for name, cin, cout in shape.modulated_layers():
        params.expect_shape(f"{net}.{name}.weight", (cout, cin, k, k))
        params.expect_shape(f"{net}.{name}.bias", (cout,))
        params.expect_shape(f"{net}.{name}.style.weight", (cin, STYLE_DIM))
        params.expect_shape(f"{net}.{name}.style.bias", (cin,))
    return shape


# ---------------------------------------------------------------------------
# style


def map_style(latent, params):
    """Per-layer channel scales ``{"<net>.<layer>": s}`` for every modulated conv."""
    z = np.asarray(latent, dtype=np.float64).reshape(-1)
    w0 = require(params, "style.layers.0.weight")
    if w0.shape[1] != z.size:
        raise ModelFormatError(f"latent has {z.size} entries, style MLP expects {w0.shape[1]}")
    h = z
    for i in range(STYLE_HIDDEN):
        w = np.asarray(require(params, f"style.layers.{i}.weight"), dtype=np.float64)
        b = np.asarray(require(params, f"style.layers.{i}.bias"), dtype=np.float64)
        h = leaky_relu(h @ w.T + b)
    styles = {}
    for net in NETS:
        if f"{net}.conv_first.weight" not in params:
            continue
        for name, _, _ in infer_net_shape(params, net).modulated_layers():
            a = np.asarray(params[f"{net}.{name}.style.weight"], dtype=np.float64)
            c = np.asarray(params[f"{net}.{name}.style.bias"], dtype=np.float64)
            styles[f"{net}.{name}"] = h @ a.T + c
    return styles


# ---------------------------------------------------------------------------
# blocks


def _conv(x, params, prefix, dtype):
    return conv2d(x, params[prefix + ".weight"].astype(dtype, copy=False),
                  params[prefix + ".bias"].astype(dtype, copy=False))


def dense_block(x, params, prefix, dtype=np.float32):
    feats = [x]
    out = None
    for c in range(N_DENSE_CONVS):
        inp = feats[0] if c == 0 else np.concatenate(feats, axis=-1)
        out = _conv(inp, params, f"{prefix}.conv.{c}", dtype)
        if c < N_DENSE_CONVS - 1:
            out = leaky_relu(out)
            feats.append(out)
    return x + np.dtype(dtype).type(RES_SCALE) * out


def rrdb_forward(x, params, prefix, dtype=np.float32):
    """One residual-in-residual dense block on ``(B, H, W, C)`` features.

    Three dense blocks run in sequence; their total change to ``x`` is
    scaled by the residual factor and added back, so zero weights give the
    identity.
    """
    x = np.asarray(x, dtype=dtype)
    w = params[f"{prefix}.rdb.0.conv.0.weight"]
    if x.shape[-1] != w.shape[1]:
        raise ValueError(f"RRDB expects {w.shape[1]} channels, got {x.shape[-1]}")
    y = x
    for r in range(N_DENSE):
        y = dense_block(y, params, f"{prefix}.rdb.{r}", dtype)
    return x + np.dtype(dtype).type(RES_SCALE) * (y - x)


def modulated_conv(x, params, prefix, style, dtype=np.float32):
    w = modulate_weights(params[prefix + ".weight"], style).astype(dtype)
    return conv2d(x, w, params[prefix + ".bias"].astype(dtype, copy=False))


def run_features(x, params, net, shape: NetShape, dtype=np.float32):
    """Low-resolution half of a network: conv_first, RRDB trunk and skip."""
    fea = _conv(x, params, f"{net}.conv_first", dtype)
    y = fea
    for b in range(shape.n_rrdb):
        y = rrdb_forward(y, params, f"{net}.rrdb.{b}", dtype)
    return fea + _conv(y, params, f"{net}.trunk_conv", dtype)


def run_upsampler(fea, params, net, shape: NetShape, styles, dtype=np.float32):
    """High-resolution half: modulated sub-pixel stages and the RGBA head."""
    y = fea
    for s in range(len(shape.up_channels)):
        name = f"up.{s}.conv"
        y = modulated_conv(y, params, f"{net}.{name}", styles[f"{net}.{name}"], dtype)
        y = leaky_relu(pixel_shuffle_hwc(y, 2))
    y = leaky_relu(modulated_conv(y, params, f"{net}.hr_conv", styles[f"{net}.hr_conv"], dtype))
    y = modulated_conv(y, params, f"{net}.proj", styles[f"{net}.proj"], dtype)
    return sigmoid(y)


def superresolve(latent, lr: MapStack, params, factor=16, dtype=np.float32, batch=1):
    """Upsample every map of ``lr`` by ``factor`` into RGBA maps.

    Foreground maps go through ``sr_fg`` with shared weights, the background
    map through ``sr_bg``. ``batch`` is the number of maps upsampled at once
    (bounded for memory; results do not depend on it).
    """
    if factor not in SUPPORTED_FACTORS:
        raise ValueError(f"unsupported SR factor {factor}; choose one of {SUPPORTED_FACTORS}")
    styles = map_style(latent, params)
    n, h, w, c = lr.maps.shape
    out = np.empty((n, h * factor, w * factor, 4), dtype=dtype)
    for net, wanted in (("sr_fg", False), ("sr_bg", True)):
        idx = [i for i in range(n) if lr.is_background[i] == wanted]
        if not idx:
            continue
        shape = validate_net(params, net)
        if shape.factor != factor:
            raise ValueError(f"{net} was built for x{shape.factor}, requested x{factor}")
        if c != shape.in_channels:
            raise ValueError(f"{net} expects {shape.in_channels} input channels, maps have {c}")
        fea = run_features(lr.maps[idx].astype(dtype), params, net, shape, dtype)
        for s in range(0, len(idx), batch):
            sel = idx[s:s + batch]
            out[sel] = run_upsampler(fea[s:s + batch], params, net, shape, styles, dtype)
    return lr.with_maps(out)
