"""Training-loss forward values and image metrics.

Discriminators are out of scope; the adversarial terms consume scores that
some external critic produced.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

R1_WEIGHT = 10.0
CUBIC_A = -0.5
PSNR_CAP = 99.0
SSIM_SIZE = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def softplus(x):
    """``log(1 + exp(x))`` without overflow."""
    x = np.asarray(x, dtype=np.float64)
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return float(out) if out.ndim == 0 else out


@dataclass
class ScorePack:
    fake_scores: np.ndarray
    real_scores: np.ndarray
    real_grad_sqnorms: np.ndarray = None
    r1_weight: float = R1_WEIGHT

    def __post_init__(self):
        self.fake_scores = np.atleast_1d(np.asarray(self.fake_scores, dtype=np.float64))
        self.real_scores = np.atleast_1d(np.asarray(self.real_scores, dtype=np.float64))
        if self.real_grad_sqnorms is None:
            self.real_grad_sqnorms = np.zeros_like(self.real_scores)
        self.real_grad_sqnorms = np.atleast_1d(np.asarray(self.real_grad_sqnorms, dtype=np.float64))
        if self.real_grad_sqnorms.shape != self.real_scores.shape:
            raise ValueError("need one gradient norm per real score")
        if self.r1_weight < 0:
            raise ValueError("r1_weight must be non-negative")
        if not (self.fake_scores.size and self.real_scores.size):
            raise ValueError("score lists must be non-empty")


@dataclass
class PosePack:
    """Predicted poses and their targets, ``(n, 3)`` each, in radians."""

    predicted: np.ndarray
    target: np.ndarray = field(default=None)

    def __post_init__(self):
        self.predicted = np.asarray(self.predicted, dtype=np.float64).reshape(-1, 3)
        self.target = np.asarray(self.target, dtype=np.float64).reshape(-1, 3)
        if self.predicted.shape != self.target.shape:
            raise ValueError("predicted and target poses must pair up")


def adversarial_loss(scores: ScorePack) -> float:
    """Non-saturating loss with an R1 penalty on the real branch."""
    fake = np.mean(softplus(scores.fake_scores))
    real = np.mean(softplus(-scores.real_scores) + scores.r1_weight * scores.real_grad_sqnorms)
    return float(fake + real)


def pose_loss(*packs: PosePack) -> float:
    """Mean squared distance between predicted and target poses over all packs."""
    if not packs:
        raise ValueError("need at least one pose pack")
    d = np.concatenate([p.predicted - p.target for p in packs])
    if not len(d):
        raise ValueError("pose packs are empty")
    return float(np.mean(np.sum(d * d, axis=1)))


def patch_adversarial_loss(fake_patch_scores, real_patch_scores) -> float:
    fake = np.asarray(fake_patch_scores, dtype=np.float64)
    real = np.asarray(real_patch_scores, dtype=np.float64)
    return float(np.mean(softplus(fake)) + np.mean(softplus(-real)))


# ---------------------------------------------------------------------------
# bicubic resampling


def cubic_kernel(x, a=CUBIC_A):
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def _fold(idx, n):
    """Odd reflection about the end samples as ``[(index, coef), ...]``."""
    if 0 <= idx < n:
        return [(idx, 1.0)]
    if n == 1:
        return [(0, 1.0)]
    if idx < 0:
        # x[-k] = 2 x[0] - x[k]
        return [(0, 2.0)] + [(j, -c) for j, c in _fold(-idx, n)]
    last = n - 1
    return [(last, 2.0)] + [(j, -c) for j, c in _fold(2 * last - idx, n)]


@lru_cache(maxsize=64)
def downsample_matrix(n_in, factor, a=CUBIC_A):
    """``(n_in // factor, n_in)`` matrix of the antialiased cubic reduction.

    Output ``i`` is centred on input coordinate ``(i + 0.5) f - 0.5``; the
    kernel is stretched by ``f``; out-of-range taps are folded back by odd
    reflection, which keeps constants and linear ramps exact up to the ends.
    """
    if factor < 1 or n_in % factor:
        raise ValueError(f"length {n_in} is not divisible by factor {factor}")
    n_out = n_in // factor
    m = np.zeros((n_out, n_in))
    if factor == 1:
        np.fill_diagonal(m, 1.0)
        return m
    for i in range(n_out):
        centre = (i + 0.5) * factor - 0.5
        lo = int(np.floor(centre - 2 * factor))
        taps = np.arange(lo, int(np.ceil(centre + 2 * factor)) + 1)
        w = cubic_kernel((taps - centre) / factor, a)
        w /= w.sum()
        for t, wt in zip(taps, w):
            if wt == 0.0:
                continue
            for j, c in _fold(int(t), n_in):
                m[i, j] += c * wt
    m.setflags(write=False)
    return m


@lru_cache(maxsize=64)
def _banded(n_in, factor):
    """Sparse rows of :func:`downsample_matrix` as (anchor, taps, weights)."""
    m = downsample_matrix(n_in, factor)
    n_out = m.shape[0]
    anchor = np.clip(np.round((np.arange(n_out) + 0.5) * factor - 0.5), 0, n_in - 1).astype(np.intp)
    cols = [np.flatnonzero(row) for row in m]
    k = max(len(c) for c in cols)
    taps = np.repeat(anchor[:, None], k, axis=1)
    w = np.zeros((n_out, k))
    for i, c in enumerate(cols):
        taps[i, :len(c)] = c
        w[i, :len(c)] = m[i, c]
    return anchor, taps, w


def _reduce_axis(x, axis, factor):
    x = np.moveaxis(x, axis, 0)
    anchor, taps, w = _banded(x.shape[0], factor)
    base = x[anchor]
    # filter offsets from an anchor sample so constants come out bit-exact
    acc = np.zeros_like(base)
    shape = (-1,) + (1,) * (x.ndim - 1)
    for k in range(taps.shape[1]):
        acc += w[:, k].reshape(shape) * (x[taps[:, k]] - base)
    return np.moveaxis(base + acc, 0, axis)


def bicubic_downsample(x, factor: int):
    """Shrink the two spatial axes of ``(..., H, W, C)`` by ``factor``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 3:
        raise ValueError("expected (..., H, W, C)")
    factor = int(factor)
    if factor == 1:
        return x.copy()
    for n in x.shape[-3:-1]:
        if n % factor:
            raise ValueError(f"length {n} is not divisible by factor {factor}")
    y = _reduce_axis(x, x.ndim - 3, factor)
    return _reduce_axis(y, x.ndim - 2, factor)


def _maps_array(m):
    arr = getattr(m, "maps", m)
    return np.asarray(arr, dtype=np.float64)[..., :4]


def consistency_loss(hr_image, lr_image, hr_maps, lr_maps, factor, weights=(1.0, 1.0)):
    """Image term plus map term, each a mean squared Γ residual.

    ``Γ`` is :func:`bicubic_downsample`; maps may be MapStacks or arrays and
    only their radiance channels enter.
    """
    img = np.mean((bicubic_downsample(hr_image, factor) - np.asarray(lr_image, dtype=np.float64)) ** 2)
    maps = np.mean((bicubic_downsample(_maps_array(hr_maps), factor) - _maps_array(lr_maps)) ** 2)
    return float(weights[0] * img + weights[1] * maps)


# ---------------------------------------------------------------------------
# metrics


def psnr(a, b, peak=1.0):
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(peak * peak / mse)))


def _gauss_window(size=SSIM_SIZE, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def _filter_valid(x, g):
    r = len(g) // 2
    y = ndimage.correlate1d(x, g, axis=0, mode="constant")
    y = ndimage.correlate1d(y, g, axis=1, mode="constant")
    return y[r:-r, r:-r]


def ssim(a, b, peak=1.0):
    """Mean SSIM over channels with an 11x11 Gaussian window (sigma 1.5)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("images must share one shape")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if min(a.shape[:2]) < SSIM_SIZE:
        raise ValueError(f"images must be at least {SSIM_SIZE} pixels on each side")
    g = _gauss_window()
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    vals = []
    for ch in range(a.shape[2]):
        x, y = a[..., ch], b[..., ch]
        mx, my = _filter_valid(x, g), _filter_valid(y, g)
        sxx = _filter_valid(x * x, g) - mx * mx
        syy = _filter_valid(y * y, g) - my * my
        sxy = _filter_valid(x * y, g) - mx * my
        num = (2 * mx * my + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))
