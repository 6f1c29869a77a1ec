"""Convolution building blocks for the map super-resolution networks.

Feature grids inside the networks are channels-last ``(B, H, W, C)``; conv
weights keep the ``(out, in, k, k)`` layout of the weight file.
"""
from __future__ import annotations

import numpy as np

DEMOD_EPS = 1e-8
LEAKY_SLOPE = 0.2
# accumulator band: about 512k elements, never fewer than 4096 rows
CONV_BAND_ELEMS = 1 << 19
CONV_MIN_BAND = 4096


def leaky_relu(x, slope=LEAKY_SLOPE):
    x = np.asarray(x)
    # max(x, a*x) equals the leaky branch for 0 <= a <= 1
    return np.maximum(x, x * x.dtype.type(slope))


def sigmoid(x):
    # tanh form is overflow-free and keeps the input dtype
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def conv2d(x, weight, bias=None):
    """Stride-1 cross-correlation with zero 'same' padding.

    ``x`` is ``(B, H, W, I)``, ``weight`` ``(O, I, k, k)`` with odd ``k``.
    The padded image is flattened row-major; every kernel tap then reads a
    contiguous slice of it, so the k*k matrix products need no patch
    copies. Outputs land on the padded width and the pad columns are
    dropped at the end. Work is split into bands that keep the accumulator
    cache-sized.
    """
    x = np.asarray(x)
    weight = np.asarray(weight)
    o, i, k, k2 = weight.shape
    if k != k2 or k % 2 == 0:
        raise ValueError(f"kernel must be square and odd, got {weight.shape}")
    if x.ndim != 4 or x.shape[-1] != i:
        raise ValueError(f"input {x.shape} does not match weight expecting {i} channels")
    b, h, w, _ = x.shape
    dtype = np.result_type(x.dtype, weight.dtype)
    p = k // 2
    wp = w + 2 * p
    # one spare bottom row keeps the last tap's slice in bounds
    xp = np.zeros((b, h + 2 * p + 1, wp, i), dtype=dtype)
    xp[:, p:p + h, p:p + w] = x
    flat = xp.reshape(b, -1, i)
    wt = np.ascontiguousarray(weight.astype(dtype, copy=False).transpose(2, 3, 1, 0))  # (k, k, I, O)
    n = h * wp
    full = np.empty((b, n, o), dtype=dtype)
    step = min(n, max(CONV_MIN_BAND, CONV_BAND_ELEMS // o))
    tmp = np.empty((step, o), dtype=dtype)
    for bi in range(b):
        for c0 in range(0, n, step):
            c1 = min(n, c0 + step)
            acc = full[bi, c0:c1]
            t = tmp[:c1 - c0]
            np.matmul(flat[bi, c0:c1], wt[0, 0], out=acc)
            for dy in range(k):
                for dx in range(k):
                    if dy == 0 and dx == 0:
                        continue
                    s = dy * wp + dx
                    np.matmul(flat[bi, s + c0:s + c1], wt[dy, dx], out=t)
                    acc += t
    out = np.ascontiguousarray(full.reshape(b, h, wp, o)[:, :, :w])
    if bias is not None:
        out += np.asarray(bias, dtype=dtype)
    return out


def modulate_weights(weight, style, eps=DEMOD_EPS):
    """Scale input channels by ``style`` then normalise each output filter.

    ``w'[j, i, k] = s[i] * w[j, i, k]`` and
    ``w''[j] = w'[j] / sqrt(sum_{i,k} w'[j]^2 + eps)``.
    """
    w = np.asarray(weight, dtype=np.float64)
    s = np.asarray(style, dtype=np.float64).reshape(-1)
    if s.size != w.shape[1]:
        raise ValueError(f"style has {s.size} entries but layer has {w.shape[1]} input channels")
    wp = w * s.reshape((1, -1) + (1,) * (w.ndim - 2))
    norm = np.sqrt(np.sum(wp * wp, axis=tuple(range(1, w.ndim)), keepdims=True) + eps)
    return wp / norm


def pixel_shuffle(x, r):
    """Depth-to-space on channel-first grids ``(..., C*r*r, H, W) -> (..., C, rH, rW)``.

    ``out[c, r*y + dy, r*x + dx] = in[c*r*r + dy*r + dx, y, x]``.
    """
    x = np.asarray(x)
    if r < 1:
        raise ValueError("upscale factor must be >= 1")
    *lead, ch, h, w = x.shape
    if ch % (r * r):
        raise ValueError(f"{ch} channels not divisible by r^2 = {r * r}")
    c = ch // (r * r)
    y = x.reshape(*lead, c, r, r, h, w)
    n = len(lead)
    perm = list(range(n)) + [n, n + 3, n + 1, n + 4, n + 2]
    return y.transpose(perm).reshape(*lead, c, h * r, w * r)


def pixel_shuffle_hwc(x, r):
    """Channels-last variant of :func:`pixel_shuffle` on ``(B, H, W, C*r*r)``."""
    b, h, w, ch = x.shape
    if ch % (r * r):
        raise ValueError(f"{ch} channels not divisible by r^2 = {r * r}")
    c = ch // (r * r)
    y = x.reshape(b, h, w, c, r, r)
    return y.transpose(0, 1, 4, 2, 5, 3).reshape(b, h * r, w * r, c)
