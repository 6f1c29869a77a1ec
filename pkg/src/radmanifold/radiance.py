"""Latent-conditioned FiLM-SIREN radiance generator.

Architecture (tensor names in brackets)::

    z --[film_map.layers.0..2]--> 256 (leaky 0.2) --[film_map.out]--> (gamma, beta) x n_film
    x --[siren.layers.0..7]--> h_l = sin(gamma_l * (W_l h + b_l) + beta_l)
    h_8 --[siren.alpha_out]--> sigmoid -> occupancy
    [h_8, d] --[siren.color_film]--> sine FiLM --[siren.color_out]--> sigmoid -> rgb
    h_{1,3,5,7} --[siren.feature.0..3]--> summed -> d_f features
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ModelFormatError
from .params import require

LEAKY_SLOPE = 0.2
FEATURE_TAP_STRIDE = 2
POINT_CHUNK = 8192


@dataclass
class RadianceBatch:
    """Radiance at P query points."""

    color: np.ndarray  # (P, 3) in [0, 1]
    occupancy: np.ndarray  # (P,) in [0, 1]
    feature: Optional[np.ndarray] = None  # (P, d_f)

    def __len__(self):
        return len(self.occupancy)

    def channels(self):
        """Stacked ``[r, g, b, occupancy, features...]`` of shape (P, C)."""
        parts = [self.color, self.occupancy[:, None]]
        if self.feature is not None:
            parts.append(self.feature)
        return np.concatenate(parts, axis=1)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def leaky_relu(x, slope=LEAKY_SLOPE):
    return np.where(x >= 0, x, slope * x)


def _w(params, name):
    return np.asarray(require(params, name), dtype=np.float64)


def _affine(params, prefix, x):
    return x @ _w(params, prefix + ".weight").T + _w(params, prefix + ".bias")


def trunk_depth(params) -> int:
    return params.count_indexed(r"siren\.layers\.(\d+)\.weight")


def feature_taps(params):
    """Trunk layer indices whose activations feed the feature projection."""
    n_feat = params.count_indexed(r"siren\.feature\.(\d+)\.weight")
    taps = list(range(FEATURE_TAP_STRIDE - 1, trunk_depth(params), FEATURE_TAP_STRIDE))
    if n_feat != len(taps):
        raise ModelFormatError(f"expected {len(taps)} feature projections, found {n_feat}")
    return taps


def map_film_conditioning(latent, params):
    """Per-layer ``(frequency, phase)`` vectors for every FiLM layer.

    The last pair belongs to the colour branch; the preceding ones to the
    trunk layers in order.
    """
    z = np.asarray(latent, dtype=np.float64).reshape(-1)
    w0 = require(params, "film_map.layers.0.weight")
    if w0.shape[1] != z.size:
        raise ModelFormatError(f"latent has {z.size} entries, mapping expects {w0.shape[1]}")
    h = z
    n_hidden = params.count_indexed(r"film_map\.layers\.(\d+)\.weight")
    for i in range(n_hidden):
        h = leaky_relu(_affine(params, f"film_map.layers.{i}", h))
    raw = _affine(params, "film_map.out", h)
    widths = [int(params[f"siren.layers.{i}.weight"].shape[0]) for i in range(trunk_depth(params))]
    widths.append(int(params["siren.color_film.weight"].shape[0]))
    if raw.size != 2 * sum(widths):
        raise ModelFormatError(f"film_map.out produces {raw.size} values, need {2 * sum(widths)}")
    freqs, phases = raw[: raw.size // 2], raw[raw.size // 2:]
    out, start = [], 0
    for w in widths:
        out.append((freqs[start:start + w], phases[start:start + w]))
        start += w
    return out


def _check_architecture(params):
    depth = trunk_depth(params)
    if depth == 0:
        raise ModelFormatError("radiance generator has no trunk layers")
    prev = 3
    for i in range(depth):
        w = params[f"siren.layers.{i}.weight"]
        if w.ndim != 2 or w.shape[1] != prev:
            raise ModelFormatError(f"siren.layers.{i}.weight has shape {w.shape}, input width should be {prev}")
        params.expect_shape(f"siren.layers.{i}.bias", (w.shape[0],))
        prev = w.shape[0]
    params.expect_shape("siren.alpha_out.weight", (1, prev))
    cw = params["siren.color_film.weight"]
    if cw.shape[1] != prev + 3:
        raise ModelFormatError(f"siren.color_film.weight expects input {prev + 3}, has {cw.shape[1]}")
    params.expect_shape("siren.color_out.weight", (3, cw.shape[0]))


def _forward_chunk(x, view, film, params, with_features, taps):
    h = x
    feats = None
    for i, (gamma, beta) in enumerate(film[:-1]):
        h = np.sin(gamma * _affine(params, f"siren.layers.{i}", h) + beta)
        if with_features and i in taps:
            f = _affine(params, f"siren.feature.{taps.index(i)}", h)
            feats = f if feats is None else feats + f
    occupancy = sigmoid(_affine(params, "siren.alpha_out", h)[:, 0])
    gamma, beta = film[-1]
    hc = np.concatenate([h, view], axis=1)
    hc = np.sin(gamma * _affine(params, "siren.color_film", hc) + beta)
    color = sigmoid(_affine(params, "siren.color_out", hc))
    return color, occupancy, feats


def generate_radiance(latent, points, view_dir, params, with_features=False, chunk=POINT_CHUNK):
    """Colour, occupancy and (optionally) features at ``points``.

    ``view_dir`` is a single unit vector or one per point. Evaluation is
    chunked over points; chunking does not change per-point results.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    view = np.asarray(view_dir, dtype=np.float64)
    view = np.broadcast_to(view.reshape(-1, 3), (len(pts), 3)) if view.size == 3 else view.reshape(-1, 3)
    _check_architecture(params)
    film = map_film_conditioning(latent, params)
    taps = feature_taps(params) if with_features else []
    colors, occs, feats = [], [], []
    for s in range(0, len(pts), chunk):
        c, a, f = _forward_chunk(pts[s:s + chunk], view[s:s + chunk], film, params, with_features, taps)
        colors.append(c)
        occs.append(a)
        if with_features:
            feats.append(f)
    if not len(pts):
        d_f = params["siren.feature.0.weight"].shape[0] if with_features else 0
        return RadianceBatch(np.zeros((0, 3)), np.zeros(0), np.zeros((0, d_f)) if with_features else None)
    return RadianceBatch(
        np.concatenate(colors),
        np.concatenate(occs),
        np.concatenate(feats) if with_features else None,
    )
