import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radmanifold.errors import DomainError
from radmanifold.geometry import ScalarField, SurfaceSet, init_default_surfaces
from radmanifold.gridding import (BGTRANS, LINEAR, MapStack, SurfaceMeta, bg_transform, bg_transform_inverse,
                                  grid_manifolds, grid_ray_arrays, grid_rays, project_to_map)
from radmanifold.render import sample_map_bilinear


def test_bg_transform_values():
    assert bg_transform(0.0) == 0.0
    assert bg_transform(0.5) == pytest.approx(1.0, abs=1e-15)
    assert bg_transform(1.0) == pytest.approx(2 * np.tan(0.5) + 1, abs=1e-12)
    with pytest.raises(DomainError):
        bg_transform(0.5 + np.pi / 2)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1.5, 1.5))
def test_bg_transform_odd_monotone_invertible(x):
    assert bg_transform(-x) == -bg_transform(x)
    assert bg_transform(x + 1e-3) > bg_transform(x)
    assert bg_transform_inverse(bg_transform(x)) == pytest.approx(x, abs=1e-12)


def test_grid_rays_extent():
    o, d = grid_ray_arrays(64, 64, 1.25)
    assert o[:, 0].min() == -1.25 and o[:, 0].max() == 1.25
    assert np.all(d == [0, 0, -1])
    assert np.all(o[:, 2] == 1.0)
    (single,) = grid_rays(1, 1, 2.0)
    assert single.origin[0] == -2.0
    ob, _ = grid_ray_arrays(5, 5, 3.0, BGTRANS)
    assert ob[12, 0] == 0.0
    assert ob[:, 0].max() == pytest.approx(3.0 * bg_transform(1.0))


def test_project_to_map_inverts_grid_rays():
    for warp, half in ((LINEAR, 1.0), (BGTRANS, 3.0)):
        o, _ = grid_ray_arrays(9, 13, half, warp)
        uv = project_to_map(o, SurfaceMeta(half, warp == BGTRANS, warp, 9, 13))
        jj, ii = np.meshgrid(np.arange(13), np.arange(9))
        np.testing.assert_allclose(uv[:, 0], jj.ravel(), atol=1e-9)
        np.testing.assert_allclose(uv[:, 1], ii.ravel(), atol=1e-9)


def test_project_to_map_landmarks():
    meta = SurfaceMeta(1.0, False, LINEAR, 64, 64)
    np.testing.assert_allclose(project_to_map([0, 0, -1], meta), [31.5, 31.5])
    assert project_to_map([1.0, 0, 0], meta)[0] == pytest.approx(63)


def test_grid_shape_and_misses(tiny_model):
    s = init_default_surfaces(4)
    stack = grid_manifolds(tiny_model["scene.latent"], s, tiny_model, (8, 8))
    assert stack.maps.shape == (4, 8, 8, 4 + 8)
    assert stack.is_background == (False, False, False, True)
    assert stack.warps[-1] == BGTRANS and stack.half_widths[-1] == 3.0
    # smallest sphere (r = 0.5) misses the corner rays at |x| = |y| = 1
    corner = stack.maps[0, 0, 0]
    assert np.all(corner == 0)
    assert stack.maps[0, 4, 4, 3] > 0


def test_constant_network_gives_constant_maps(tiny_model):
    zero = {k: np.zeros_like(v) for k, v in tiny_model.items()
            if k.startswith(("siren.color_out", "siren.alpha_out")) and k.endswith("weight")}
    p = tiny_model.updated(zero)
    s = SurfaceSet(ScalarField("analytic", (0, 0, -1.5), None), (2.0,))
    m = grid_manifolds(p["scene.latent"], s, p, (6, 6), with_features=False).maps[0]
    first = m[0, 0]
    assert np.all(m == first)


def test_identity_map_round_trip(rng):
    # a map storing its own (x, y) returns a point's coordinates after projection
    n, half = 33, 1.0
    o, _ = grid_ray_arrays(n, n, half)
    grid = o[:, :2].reshape(n, n, 2)
    meta = SurfaceMeta(half, False, LINEAR, n, n)
    theta = rng.uniform(0, 2 * np.pi, 100)
    phi = rng.uniform(0, 0.9, 100)
    pts = np.column_stack([np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), -1.5 + np.cos(phi)])
    vals, inside = sample_map_bilinear(grid, project_to_map(pts, meta))
    assert inside.all()
    np.testing.assert_allclose(vals, pts[:, :2], atol=2 * half / (n - 1))


def test_map_stack_validation():
    with pytest.raises(ValueError):
        MapStack(np.zeros((2, 4, 4, 4)), (1.0,), (False,), (LINEAR,))
    with pytest.raises(ValueError):
        MapStack(np.zeros((1, 4, 4, 3)), (1.0,), (False,), (LINEAR,))
    with pytest.raises(ValueError):
        MapStack(np.zeros((1, 4, 4, 4)), (1.0,), (False,), ("cubic",))
