import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from radmanifold.camera import Camera, orbit_cameras
from radmanifold.consistency import plane_homography, plane_scene, warp_by_homography
from radmanifold.geometry import ScalarField, SurfaceSet, front_hits
from radmanifold.gridding import GRID_T_NEAR, LINEAR, MapStack, grid_manifolds, grid_ray_arrays
from radmanifold.radiance import generate_radiance
from radmanifold.render import (build_epi, composite, composite_gradients, render_depth, render_image,
                                render_rays, sample_map_bilinear, transmittance)


# ---------------------------------------------------------------------------
# compositing


def test_composite_hand_example():
    c, w, t = composite([[1, 1, 1], [0, 0, 0]], [0.5, 1.0])
    np.testing.assert_allclose(c, [0.5, 0.5, 0.5])
    np.testing.assert_allclose(w, [0.5, 0.5])
    np.testing.assert_allclose(t, [1.0, 0.5])


def test_composite_trivial_cases():
    c, _, _ = composite([[0.2, 0.4, 0.6]], [1.0])
    np.testing.assert_allclose(c, [0.2, 0.4, 0.6])
    c, w, _ = composite(np.ones((3, 3)), np.zeros(3))
    assert np.all(c == 0) and np.all(w == 0)


def test_gradient_examples():
    d_c, d_a = composite_gradients([[0.3, 0.5, 0.7]], [0.4])
    np.testing.assert_allclose(d_c, [0.4])
    np.testing.assert_allclose(d_a[0], [0.3, 0.5, 0.7])
    c1, c2 = np.array([0.9, 0.1, 0.4]), np.array([0.2, 0.6, 0.3])
    _, d_a = composite_gradients([c1, c2], [0.5, 1.0])
    np.testing.assert_allclose(d_a[0], c1 - c2, atol=1e-15)


def fd_gradients(colors, alphas, h=1e-4):
    g = np.zeros(colors.shape)
    for i in range(len(alphas)):
        up, dn = alphas.copy(), alphas.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (composite(colors, up)[0] - composite(colors, dn)[0]) / (2 * h)
    return g


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.integers(1, 8))
def test_gradient_matches_finite_differences(seed, k):
    r = np.random.default_rng(seed)
    colors = r.uniform(0, 1, (k, 3))
    alphas = r.uniform(0.01, 0.99, k)
    d_c, d_a = composite_gradients(colors, alphas)
    np.testing.assert_allclose(d_a, fd_gradients(colors, alphas), rtol=1e-5, atol=1e-9)
    np.testing.assert_allclose(d_c, composite(colors, alphas)[1])


def test_gradient_with_opaque_sample_in_the_middle(rng):
    colors = rng.uniform(0, 1, (4, 3))
    alphas = np.array([0.3, 1.0, 0.5, 0.7])
    _, d_a = composite_gradients(colors, alphas)
    assert np.all(np.isfinite(d_a))
    # samples behind an opaque one are invisible, but the opaque one still
    # trades off against what lies behind it
    assert np.all(d_a[2:] == 0)
    behind = 0.5 * colors[2] + 0.5 * 0.7 * colors[3]
    np.testing.assert_allclose(d_a[1], 0.7 * (colors[1] - behind))
    np.testing.assert_allclose(d_a, fd_gradients(colors, alphas), rtol=1e-5, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 16), elements=st.floats(0, 1)))
def test_weights_bounded(alphas):
    _, w, t = composite(np.ones((len(alphas), 1)), alphas)
    assert w.sum() <= 1 + 1e-12
    assert np.all(np.diff(t) <= 1e-15)
    a = alphas.copy()
    a[-1] = 1.0
    assert abs(composite(np.ones((len(a), 1)), a)[1].sum() - 1.0) < 1e-12


def test_transmittance_batched(rng):
    a = rng.uniform(0, 1, (5, 7))
    t = transmittance(a)
    for row in range(5):
        np.testing.assert_allclose(t[row], [np.prod(1 - a[row, :i]) for i in range(7)])


# ---------------------------------------------------------------------------
# bilinear lookup


def test_bilinear_examples(rng):
    g = rng.uniform(0, 1, (5, 6, 2))
    v, inside = sample_map_bilinear(g, [[2.0, 3.0]])
    np.testing.assert_array_equal(v[0], g[3, 2])
    v, _ = sample_map_bilinear(g, [[2.5, 3.5]])
    np.testing.assert_allclose(v[0], g[3:5, 2:4].mean(axis=(0, 1)))
    v, inside = sample_map_bilinear(g, [[-0.1, 1.0], [5.01, 1.0], [np.nan, 1.0]])
    assert not inside.any() and np.all(v == 0)


@settings(max_examples=100, deadline=None)
@given(u=st.floats(0, 9), v=st.floats(0, 6))
def test_bilinear_reproduces_bilinear_functions(u, v):
    jj, ii = np.meshgrid(np.arange(10.0), np.arange(7.0))
    g = np.stack([jj + ii, 2 * jj - 0.5 * ii + 0.25 * jj * ii], axis=-1)
    val, inside = sample_map_bilinear(g, [[u, v]])
    assert inside[0]
    np.testing.assert_allclose(val[0], [u + v, 2 * u - 0.5 * v + 0.25 * u * v], atol=1e-12)


# ---------------------------------------------------------------------------
# camera


def test_camera_geometry():
    cam = Camera()
    np.testing.assert_allclose(cam.position, [0, 0, 1.2])
    right, up, fwd = cam.basis()
    np.testing.assert_allclose(fwd, [0, 0, -1], atol=1e-15)
    np.testing.assert_allclose(right, [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(up, [0, 1, 0], atol=1e-15)
    col, row, z = cam.project(np.array([[0.0, 0.0, -1.5]]))
    np.testing.assert_allclose([col[0], row[0], z[0]], [127.5, 127.5, 2.7])
    # a point above the axis lands in the upper half of the image
    _, row_up, _ = cam.project(np.array([[0.0, 0.1, -1.5]]))
    assert row_up[0] < 127.5
    with pytest.raises(ValueError):
        Camera(fov_deg=0)
    with pytest.raises(ValueError):
        Camera(resolution=(0, 4))


@settings(max_examples=50, deadline=None)
@given(yaw=st.floats(-1, 1), pitch=st.floats(-0.5, 0.5), roll=st.floats(-1, 1))
def test_rays_reproject_to_their_pixels(yaw, pitch, roll):
    cam = Camera(yaw=yaw, pitch=pitch, roll=roll, resolution=(6, 9))
    o, d = cam.rays()
    col, row, z = cam.project(o + 2.0 * d)
    rr, cc = np.meshgrid(np.arange(6), np.arange(9), indexing="ij")
    np.testing.assert_allclose(col, cc.ravel(), atol=1e-9)
    np.testing.assert_allclose(row, rr.ravel(), atol=1e-9)
    assert np.all(z > 0)


def test_orbit_cameras_span_range():
    cams = orbit_cameras(5, 0.4)
    np.testing.assert_allclose([c.yaw for c in cams], np.linspace(-0.4, 0.4, 5))


# ---------------------------------------------------------------------------
# images and depth


def constant_plane(color, size=8, half=3.0):
    maps = np.zeros((1, size, size, 4))
    maps[..., :3] = color
    maps[..., 3] = 1.0
    return plane_scene(maps[0], -1.0, half)


def test_constant_plane_renders_uniform_color():
    s, m = constant_plane([0.2, 0.5, 0.9])
    img = render_image(Camera(resolution=(16, 16)), s, m)
    np.testing.assert_allclose(img, np.broadcast_to([0.2, 0.5, 0.9], img.shape), atol=1e-12)


def test_checkerboard_front_view_matches_texture_lookup():
    size, half = 65, 0.3
    jj, ii = np.meshgrid(np.arange(size), np.arange(size))
    check = (((jj // 8) + (ii // 8)) % 2).astype(np.float64)
    tex = np.stack([check, 1 - check, 0.5 * np.ones_like(check), np.ones_like(check)], axis=-1)
    s, m = plane_scene(tex, -1.0, half)
    cam = Camera(resolution=(64, 64))
    img = render_image(cam, s, m)
    # oracle: intersect each pixel ray with z = -1, look up the texture directly
    o, d = cam.rays()
    t = (-1.0 - o[:, 2]) / d[:, 2]
    p = o + t[:, None] * d
    uv = (p[:, :2] / half + 1) * 0.5 * (size - 1)
    ref, _ = sample_map_bilinear(tex, uv)
    np.testing.assert_allclose(img.reshape(-1, 3), ref[:, :3], atol=1e-2)


def test_depth_examples():
    s, m = constant_plane([1, 1, 1])
    cam = Camera(resolution=(9, 9))
    dm = render_depth(cam, s, m)
    _, _, z = cam.project(np.array([[0.0, 0.0, -1.0]]))
    np.testing.assert_allclose(dm.depth, z[0], rtol=1e-12)
    np.testing.assert_allclose(dm.coverage, 1.0)
    # half-transparent sphere in front of an opaque plane: d = 0.5 z1 + 0.5 z2
    sphere = SurfaceSet(ScalarField("analytic", (0, 0, -1.5), -2.0), (0.75,))
    maps = np.zeros((2, 8, 8, 4))
    maps[0, ..., 3] = 0.5
    maps[1, ..., 3] = 1.0
    ms = MapStack(maps, (1.0, 3.0), (False, True), (LINEAR, LINEAR))
    o = np.array([[0.0, 0.0, 1.0]])
    d = np.array([[0.0, 0.0, -1.0]])
    _, cov, depth = render_rays(o, d, sphere, ms, 0.0, 6.0, forward=[0, 0, -1])
    np.testing.assert_allclose(depth, 0.5 * 1.75 + 0.5 * 3.0)
    np.testing.assert_allclose(cov, 1.0)
    ms0 = ms.with_maps(np.zeros_like(maps))
    _, cov, depth = render_rays(o, d, sphere, ms0, 0.0, 6.0, forward=[0, 0, -1])
    assert depth[0] == 0.0 and cov[0] == 0.0


def test_render_is_chunk_independent(tiny_model):
    s = SurfaceSet(ScalarField("analytic", (0, 0, -1.5), -1.0), (0.5, 1.0))
    stack = grid_manifolds(tiny_model["scene.latent"], s, tiny_model, (8, 8)).radiance_only()
    cam = Camera(resolution=(12, 12), fov_deg=40)
    a = render_image(cam, s, stack, chunk=7)
    b = render_image(cam, s, stack)
    assert np.array_equal(a, b)


def test_orthographic_grid_view_reproduces_network(tiny_model):
    # rendering along the gridding rays hits the map nodes exactly
    s = SurfaceSet(ScalarField("analytic", (0, 0, -1.5), -1.2), ())
    z = tiny_model["scene.latent"]
    stack = grid_manifolds(z, s, tiny_model, (16, 16), with_features=False)
    o, d = grid_ray_arrays(16, 16, stack.half_widths[0], stack.warps[0])
    rgb, _, _ = render_rays(o, d, s, stack, GRID_T_NEAR, 6.0)
    _, pts = front_hits(o, d, s, GRID_T_NEAR, 6.0)
    rad = generate_radiance(z, pts[:, 0], [0, 0, -1], tiny_model)
    np.testing.assert_allclose(rgb, rad.color * rad.occupancy[:, None], atol=1e-3)


def test_surface_count_mismatch_raises():
    s, m = constant_plane([1, 1, 1])
    two = SurfaceSet(ScalarField("analytic", (0, 0, -1.5), -1.0), (1.0,))
    with pytest.raises(ValueError):
        render_image(Camera(resolution=(4, 4)), two, m)


def test_homography_two_views():
    z0, half = -1.3, 0.4
    jj, ii = np.meshgrid(np.linspace(0, 1, 257), np.linspace(0, 1, 257))
    tex = np.stack([0.5 + 0.3 * np.sin(6 * jj) * np.cos(5 * ii), 0.4 + 0.2 * ii, 0.3 + 0.2 * jj,
                    np.ones_like(jj)], axis=-1)
    s, m = plane_scene(tex, z0, half)
    a, b = Camera(yaw=-0.2, resolution=(96, 96)), Camera(yaw=0.2, resolution=(96, 96))
    img_a, img_b = render_image(a, s, m), render_image(b, s, m)
    warped, valid = warp_by_homography(img_b, plane_homography(a, b, z0))
    assert valid.mean() > 0.3
    assert np.abs(warped - img_a)[valid].mean() < 2e-2


# ---------------------------------------------------------------------------
# EPI


def test_epi_shapes_and_errors(rng):
    imgs = [rng.uniform(0, 1, (40, 256, 3)) for _ in range(30)]
    assert build_epi(imgs, 10).shape == (30, 256, 3)
    same = build_epi([imgs[0]] * 5, 3, (10, 50))
    assert np.all(same == same[0])
    with pytest.raises(IndexError):
        build_epi(imgs, 40)
    with pytest.raises(IndexError):
        build_epi(imgs, 0, (10, 300))
    with pytest.raises(ValueError):
        build_epi(imgs[:1], 0)
