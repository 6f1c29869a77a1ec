import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radmanifold.gridding import LINEAR, BGTRANS, MapStack
from radmanifold.layers import conv2d, modulate_weights, pixel_shuffle, pixel_shuffle_hwc
from radmanifold.superres import (map_style, net_shape, rrdb_forward, superresolve, validate_net)


def naive_conv(x, w, b=None):
    bsz, h, wd, ci = x.shape
    o, _, k, _ = w.shape
    p = k // 2
    xp = np.zeros((bsz, h + 2 * p, wd + 2 * p, ci))
    xp[:, p:p + h, p:p + wd] = x
    out = np.zeros((bsz, h, wd, o))
    for n in range(bsz):
        for oc in range(o):
            for yy in range(h):
                for xx in range(wd):
                    out[n, yy, xx, oc] = np.sum(xp[n, yy:yy + k, xx:xx + k, :] * w[oc].transpose(1, 2, 0))
    if b is not None:
        out += b
    return out


def test_conv_matches_naive(rng):
    for _ in range(5):
        ci, co, k = rng.integers(1, 6), rng.integers(1, 6), int(rng.choice([1, 3, 5]))
        x = rng.normal(size=(2, 7, 9, ci))
        w = rng.normal(size=(co, ci, k, k))
        b = rng.normal(size=co)
        np.testing.assert_allclose(conv2d(x, w, b), naive_conv(x, w, b), rtol=1e-12, atol=1e-12)


def test_conv_rejects_bad_shapes(rng):
    with pytest.raises(ValueError):
        conv2d(rng.normal(size=(1, 4, 4, 3)), rng.normal(size=(2, 2, 3, 3)))
    with pytest.raises(ValueError):
        conv2d(rng.normal(size=(1, 4, 4, 2)), rng.normal(size=(2, 2, 2, 2)))


def test_modulation_hand_example():
    w = np.array([3.0, 4.0]).reshape(1, 2, 1, 1)
    out = modulate_weights(w, np.array([2.0, 2.0]))
    np.testing.assert_allclose(out.ravel(), [0.6, 0.8], atol=1e-6)


def test_modulation_unit_weights_fixed_point(rng):
    w = rng.normal(size=(4, 3, 3, 3))
    w /= np.sqrt(np.sum(w * w, axis=(1, 2, 3), keepdims=True))
    np.testing.assert_allclose(modulate_weights(w, np.ones(3)), w, rtol=1e-6)


@settings(max_examples=50, deadline=None)
@given(c=st.floats(1e-2, 1e2), seed=st.integers(0, 10_000))
def test_modulation_style_scale_invariance(c, seed):
    r = np.random.default_rng(seed)
    w = r.normal(size=(3, 4, 3, 3))
    s = r.uniform(0.5, 2.0, 4)
    a = modulate_weights(w, s)
    b = modulate_weights(w, c * s)
    assert np.max(np.abs(a - b) / np.abs(a).max()) < 1e-5


def test_pixel_shuffle_examples():
    x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(4, 1, 1)
    np.testing.assert_array_equal(pixel_shuffle(x, 2)[0], [[1, 2], [3, 4]])
    y = np.arange(16 * 64.0).reshape(16, 8, 8)
    assert pixel_shuffle(y, 2).shape == (4, 16, 16)
    np.testing.assert_array_equal(pixel_shuffle(y, 1), y)


@settings(max_examples=50, deadline=None)
@given(c=st.integers(1, 4), r=st.integers(1, 3), h=st.integers(1, 5), w=st.integers(1, 5))
def test_pixel_shuffle_index_oracle(c, r, h, w):
    x = np.arange(c * r * r * h * w, dtype=np.float64).reshape(c * r * r, h, w)
    out = pixel_shuffle(x, r)
    for ch in range(c):
        for i in range(r):
            for j in range(r):
                np.testing.assert_array_equal(out[ch, i::r, j::r], x[ch * r * r + i * r + j])
    assert sorted(out.ravel()) == sorted(x.ravel())
    hwc = pixel_shuffle_hwc(x.transpose(1, 2, 0)[None], r)[0]
    np.testing.assert_array_equal(hwc, out.transpose(1, 2, 0))


def zero_rrdb(params, prefix):
    return params.updated({k: np.zeros_like(v) for k, v in params.items() if k.startswith(prefix)})


def test_rrdb_zero_weights_is_identity(tiny_model, rng):
    p = zero_rrdb(tiny_model, "sr_fg.rrdb.0.")
    x = rng.normal(size=(1, 5, 6, 64)).astype(np.float32)
    np.testing.assert_array_equal(rrdb_forward(x, p, "sr_fg.rrdb.0"), x)


def test_rrdb_shape_and_determinism(tiny_model, rng):
    x = rng.normal(size=(2, 4, 4, 64)).astype(np.float32)
    a = rrdb_forward(x, tiny_model, "sr_fg.rrdb.1")
    assert a.shape == x.shape
    assert np.array_equal(a, rrdb_forward(x, tiny_model, "sr_fg.rrdb.1"))
    with pytest.raises(ValueError):
        rrdb_forward(x[..., :32], tiny_model, "sr_fg.rrdb.1")


def test_map_style(tiny_model, rng):
    z = rng.normal(size=16)
    a = map_style(z, tiny_model)
    assert set(a) >= {"sr_fg.up.0.conv", "sr_fg.hr_conv", "sr_fg.proj", "sr_bg.proj"}
    b = map_style(z, tiny_model)
    assert all(np.array_equal(a[k], b[k]) for k in a)
    c = map_style(rng.normal(size=16), tiny_model)
    assert not np.allclose(a["sr_fg.proj"], c["sr_fg.proj"])
    zeroed = tiny_model.updated({"sr_fg.proj.style.weight": np.zeros_like(tiny_model["sr_fg.proj.style.weight"])})
    np.testing.assert_array_equal(map_style(z, zeroed)["sr_fg.proj"], zeroed["sr_fg.proj.style.bias"])


def test_net_shapes():
    fg = net_shape(36, 16)
    assert fg.up_channels == (64, 64, 32, 16) and fg.width == 64 and fg.growth == 32
    bg = net_shape(36, 16, background=True)
    assert bg.up_channels == (32, 32, 16, 8) and bg.width == 32
    assert net_shape(36, 4).up_channels == (64, 64)
    with pytest.raises(ValueError):
        net_shape(36, 3)


def lr_stack(rng, n=3, size=6, channels=12):
    maps = rng.uniform(0, 1, (n, size, size, channels)).astype(np.float32)
    bg = tuple(i == n - 1 for i in range(n))
    return MapStack(maps, (1.0,) * (n - 1) + (3.0,), bg, tuple(BGTRANS if b else LINEAR for b in bg))


def test_superresolve_shape_and_range(tiny_model, rng):
    validate_net(tiny_model, "sr_fg")
    lr = lr_stack(rng)
    hr = superresolve(tiny_model["scene.latent"], lr, tiny_model, 2)
    assert hr.maps.shape == (3, 12, 12, 4)
    assert hr.maps.min() >= 0 and hr.maps.max() <= 1
    assert hr.is_background == lr.is_background
    again = superresolve(tiny_model["scene.latent"], lr, tiny_model, 2, batch=3)
    assert np.array_equal(hr.maps, again.maps)


def test_superresolve_permutes_with_foreground_maps(tiny_model, rng):
    lr = lr_stack(rng, n=4)
    z = tiny_model["scene.latent"]
    hr = superresolve(z, lr, tiny_model, 2).maps
    perm = [2, 0, 1, 3]
    hr_p = superresolve(z, lr.with_maps(lr.maps[perm]), tiny_model, 2).maps
    np.testing.assert_allclose(hr_p, hr[perm], atol=1e-6)


def test_superresolve_rejects_wrong_factor(tiny_model, rng):
    with pytest.raises(ValueError):
        superresolve(tiny_model["scene.latent"], lr_stack(rng), tiny_model, 4)
    with pytest.raises(ValueError):
        superresolve(tiny_model["scene.latent"], lr_stack(rng, channels=5), tiny_model, 2)
