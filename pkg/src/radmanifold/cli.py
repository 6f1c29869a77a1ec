"""Command line front end: ``radmanifold <subcommand> [options]``.

Every subcommand accepts ``--config`` (TOML scene description) and
``--seed``; anything that writes files also writes ``manifest.json`` in its
output directory. Exit status is 0 on success, 2 on usage errors and 1 on
runtime failures. ``RADMANIFOLD_THREADS`` caps the BLAS thread pool.
"""
from __future__ import annotations

import argparse
import glob
import json
import os
import sys
import time

import numpy as np

from .camera import Camera
from .config import load_config
from .errors import RadManifoldError
from .export import bake_textured_mesh, fuse_occupancy, fusion_cameras, marching_cubes, CachedRenderer
from .gridding import grid_manifolds
from .io import (load_maps, load_png, load_weights, save_depth, save_grid, save_maps, save_obj,
                 save_plain_obj, save_png, save_weights, write_manifest)
from .losses import consistency_loss, psnr, ssim
from .model import gen_test_model, surfaces_from_params
from .render import build_epi, render_depth, render_direct, render_image
from .superres import superresolve

THREADS_ENV = "RADMANIFOLD_THREADS"


class _Run:
    """Shared state of one subcommand invocation."""

    def __init__(self, args):
        self.args = args
        self.cfg = load_config(args.config)
        if args.seed is not None:
            self.cfg.seed = args.seed
        self.out = args.out
        self.written = []

    def path(self, name):
        os.makedirs(self.out, exist_ok=True)
        p = os.path.join(self.out, name)
        self.written.append(p)
        return p

    def camera(self, size=None, **overrides):
        c = self.cfg.camera
        size = size or self.cfg.render.size
        kw = dict(yaw=c.yaw, pitch=c.pitch, roll=c.roll, orbit_radius=c.radius, look_at=tuple(c.look_at),
                  fov_deg=c.fov_deg, resolution=(size, size), near=c.near, far=c.far)
        kw.update(overrides)
        return Camera(**kw)

    def finish(self, extra=None):
        if self.written:
            write_manifest(self.out, self.written, self.cfg.digest(), self.args.command, extra)


def _model(run):
    params = load_weights(run.args.model)
    return params, surfaces_from_params(params), params["scene.latent"]


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_scene(run):
    params = gen_test_model(run.cfg.seed, run.cfg)
    save_weights(params, run.path("model.grmh"))
    print(f"wrote {len(params)} tensors ({params.n_scalars} scalars)")


def cmd_grid(run):
    params, surfaces, latent = _model(run)
    size = run.args.lr_size or run.cfg.maps.lr_size
    stack = grid_manifolds(latent, surfaces, params, (size, size),
                           fg_half_width=run.cfg.maps.fg_half_width, bg_half_width=run.cfg.maps.bg_half_width)
    save_maps(stack, run.path("maps_lr.grmm"))
    print(f"maps {stack.maps.shape}")


def cmd_superres(run):
    params, _, latent = _model(run)
    lr = load_maps(run.args.maps)
    factor = run.args.factor or run.cfg.model.sr_factor
    hr = superresolve(latent, lr, params, factor)
    save_maps(hr, run.path("maps_hr.grmm"))
    print(f"maps {hr.maps.shape}")


def _render_one(run, params, surfaces, latent, maps, cam):
    if maps is None:
        return render_direct(cam, surfaces, latent, params)
    return render_image(cam, surfaces, maps)


def cmd_render(run):
    params, surfaces, latent = _model(run)
    maps = load_maps(run.args.maps).radiance_only() if run.args.maps else None
    a = run.args
    over = {k: v for k, v in (("yaw", a.yaw), ("pitch", a.pitch), ("roll", a.roll)) if v is not None}
    cam = run.camera(a.size, **over)
    img = _render_one(run, params, surfaces, latent, maps, cam)
    save_png(img, run.path(a.name))
    if a.depth:
        if maps is None:
            raise RadManifoldError("--depth needs --maps")
        save_depth(render_depth(cam, surfaces, maps), run.path(os.path.splitext(a.name)[0] + "_depth.grmd"))
    print(f"image {img.shape}")


def cmd_orbit(run):
    params, surfaces, latent = _model(run)
    maps = load_maps(run.args.maps).radiance_only() if run.args.maps else None
    a = run.args
    frames = a.frames or run.cfg.render.frames
    yaw_range = run.cfg.render.yaw_range if a.yaw_range is None else a.yaw_range
    yaws = np.linspace(-yaw_range, yaw_range, frames) if frames > 1 else np.zeros(1)
    width = max(3, len(str(frames - 1)))
    images = []
    for k, yaw in enumerate(yaws):
        img = _render_one(run, params, surfaces, latent, maps, run.camera(a.size, yaw=float(yaw)))
        save_png(img, run.path(f"frame_{k:0{width}d}.png"))
        images.append(img)
    if a.epi_row is not None:
        cols = None if a.epi_cols is None else tuple(a.epi_cols)
        save_png(build_epi(images, a.epi_row, cols), run.path("epi.png"))
    print(f"{frames} frames")


def cmd_extract_mesh(run):
    params, surfaces, _ = _model(run)
    maps = load_maps(run.args.maps).radiance_only()
    a = run.args
    c = run.cfg.camera
    cams = fusion_cameras(a.views, run.cfg.render.yaw_range, orbit_radius=c.radius, look_at=tuple(c.look_at),
                          fov_deg=c.fov_deg, resolution=(a.depth_size, a.depth_size), near=c.near, far=c.far)
    views = [(render_depth(cam, surfaces, maps), cam) for cam in cams]
    grid = fuse_occupancy(views, resolution=a.resolution)
    save_grid(grid, run.path("occupancy.grmo"))
    mesh = marching_cubes(grid, a.level)
    save_plain_obj(mesh, run.path("proxy.obj"))
    if a.textured:
        for p in save_obj(bake_textured_mesh(surfaces, maps, a.lattice), run.path("baked.obj")):
            run.written.append(p)
    print(f"proxy mesh: {len(mesh.vertices)} vertices, {mesh.n_faces} faces")


def cmd_epi(run):
    a = run.args
    files = sorted(f for pattern in a.images for f in glob.glob(pattern))
    if len(files) < 2:
        raise RadManifoldError("need at least two images for an EPI")
    images = [load_png(f)[..., :3] for f in files]
    cols = None if a.cols is None else tuple(a.cols)
    save_png(build_epi(images, a.row, cols), run.path(a.name))
    print(f"EPI from {len(files)} images")


def cmd_eval(run):
    a = run.args
    report = {}
    if a.image_a and a.image_b:
        x = load_png(a.image_a)[..., :3]
        y = load_png(a.image_b)[..., :3]
        report["psnr_db"] = psnr(x, y)
        report["ssim"] = ssim(x, y)
    if a.hr_maps and a.lr_maps:
        hr, lr = load_maps(a.hr_maps), load_maps(a.lr_maps)
        factor = hr.height // lr.height
        img_hr = load_png(a.hr_image)[..., :3] if a.hr_image else np.zeros((hr.height, hr.width, 3))
        img_lr = load_png(a.lr_image)[..., :3] if a.lr_image else np.zeros((lr.height, lr.width, 3))
        report["consistency_loss"] = consistency_loss(img_hr, img_lr, hr, lr, factor)
    if not report:
        raise RadManifoldError("nothing to evaluate: pass --a/--b images and/or --hr-maps/--lr-maps")
    for k in sorted(report):
        print(f"{k}={report[k]:.6g}")
    with open(run.path("eval.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)


def cmd_bench(run):
    _, surfaces, _ = _model(run)
    maps = load_maps(run.args.maps).radiance_only()
    a = run.args
    renderer = CachedRenderer(bake_textured_mesh(surfaces, maps, a.lattice))
    cam = run.camera(a.size)
    renderer.render(cam)  # compile and warm caches
    t0 = time.perf_counter()
    for k in range(a.frames):
        renderer.render(run.camera(a.size, yaw=float(0.4 * np.sin(k))))
    fps = a.frames / (time.perf_counter() - t0)
    print(f"fps={fps:.2f} size={a.size} surfaces={len(renderer.meshes)}")
    if run.out:
        with open(run.path("bench.json"), "w", encoding="utf-8") as fh:
            json.dump({"fps": fps, "size": a.size, "frames": a.frames, "surfaces": len(renderer.meshes)}, fh,
                      indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML scene configuration")
    common.add_argument("--seed", type=int, help="seed for every random choice (overrides the config)")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")

    p = argparse.ArgumentParser(prog="radmanifold", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_, model=True, maps=None):
        s = sub.add_parser(name, parents=[common], help=help_, description=help_)
        s.set_defaults(func=fn)
        if model:
            s.add_argument("--model", required=True, help="weight file from gen-scene")
        if maps is not None:
            s.add_argument("--maps", required=maps, help="map stack file")
        return s

    add("gen-scene", cmd_gen_scene, "generate seeded stand-in weights and scene surfaces", model=False)
    s = add("grid", cmd_grid, "sample low-resolution radiance and feature maps on every surface")
    s.add_argument("--lr-size", type=int, help="map side length (default from config)")
    s = add("superres", cmd_superres, "super-resolve a map stack", maps=True)
    s.add_argument("--factor", type=int, choices=(2, 4, 8, 16), help="upsampling factor")
    s = add("render", cmd_render, "render one view (direct network queries without --maps)", maps=False)
    s.add_argument("--size", type=int, help="image side length")
    s.add_argument("--yaw", type=float)
    s.add_argument("--pitch", type=float)
    s.add_argument("--roll", type=float)
    s.add_argument("--name", default="render.png", help="output PNG name")
    s.add_argument("--depth", action="store_true", help="also write the depth map")
    s = add("orbit", cmd_orbit, "render a yaw sweep, optionally with its EPI", maps=False)
    s.add_argument("--size", type=int)
    s.add_argument("--frames", type=int, help="number of frames")
    s.add_argument("--yaw-range", type=float, help="sweep covers [-r, r] radians")
    s.add_argument("--epi-row", type=int, help="also build an EPI from this image row")
    s.add_argument("--epi-cols", type=int, nargs=2, metavar=("START", "STOP"))
    s = add("extract-mesh", cmd_extract_mesh, "fuse depth maps and extract a proxy mesh", maps=True)
    s.add_argument("--views", type=int, default=15)
    s.add_argument("--depth-size", type=int, default=128, help="depth map side length")
    s.add_argument("--resolution", type=int, default=128, help="occupancy grid nodes per axis")
    s.add_argument("--level", type=float, default=0.5)
    s.add_argument("--textured", action="store_true", help="also export the baked textured meshes")
    s.add_argument("--lattice", type=int, default=64)
    s = add("epi", cmd_epi, "stack one image row across frames", model=False)
    s.add_argument("--images", nargs="+", required=True, help="image files or glob patterns (sorted)")
    s.add_argument("--row", type=int, required=True)
    s.add_argument("--cols", type=int, nargs=2, metavar=("START", "STOP"))
    s.add_argument("--name", default="epi.png")
    s = add("eval", cmd_eval, "image metrics and the low/high resolution consistency loss", model=False)
    s.add_argument("--a", dest="image_a")
    s.add_argument("--b", dest="image_b")
    s.add_argument("--hr-maps")
    s.add_argument("--lr-maps")
    s.add_argument("--hr-image")
    s.add_argument("--lr-image")
    s = add("bench", cmd_bench, "measure cached-renderer frames per second", maps=True)
    s.add_argument("--size", type=int, default=256)
    s.add_argument("--frames", type=int, default=30)
    s.add_argument("--lattice", type=int, default=64)
    return p


def _apply_threads():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(value))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _apply_threads()
        run = _Run(args)
        args.func(run)
        run.finish()
    except (RadManifoldError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
