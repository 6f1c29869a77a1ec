import json
import os

import numpy as np
import pytest

from radmanifold.cli import main
from radmanifold.io import load_maps, load_png

TINY = """\
seed = 5

[surfaces]
count = 4
mlp_widths = [16, 16]

[model]
d_z = 16
d_f = 8
trunk_depth = 4
trunk_width = 32
sr_factor = 2

[maps]
lr_size = 8

[render]
size = 24
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "scene.toml").write_text(TINY)
    cfg = str(d / "scene.toml")
    assert main(["gen-scene", "--config", cfg, "--out", str(d)]) == 0
    assert main(["grid", "--config", cfg, "--model", str(d / "model.grmh"), "--out", str(d)]) == 0
    assert main(["superres", "--config", cfg, "--model", str(d / "model.grmh"),
                 "--maps", str(d / "maps_lr.grmm"), "--out", str(d)]) == 0
    return d


def args(d, command, *rest):
    return [command, "--config", str(d / "scene.toml"), "--model", str(d / "model.grmh"), *rest]


def test_pipeline_outputs(workdir):
    assert load_maps(workdir / "maps_lr.grmm").maps.shape == (4, 8, 8, 12)
    assert load_maps(workdir / "maps_hr.grmm").maps.shape == (4, 16, 16, 4)
    doc = json.loads((workdir / "manifest.json").read_text())
    paths = {e["path"] for e in doc["outputs"]}
    assert {"model.grmh", "maps_lr.grmm", "maps_hr.grmm"} <= paths
    assert len({e["config_sha256"] for e in doc["outputs"]}) == 1


def test_help_and_usage_errors(capsys):
    assert main(["render", "--help"]) == 0
    assert "usage" in capsys.readouterr().out
    assert main(["render", "--no-such-flag"]) == 2
    assert main([]) == 2
    assert main(["orbit", "--frames", "x", "--model", "m"]) == 2


def test_runtime_errors(tmp_path):
    assert main(["render", "--model", str(tmp_path / "missing.grmh"), "--out", str(tmp_path)]) == 1
    (tmp_path / "bad.toml").write_text("[surfaces]\nunknown = 1\n")
    assert main(["gen-scene", "--config", str(tmp_path / "bad.toml"), "--out", str(tmp_path)]) == 1
    (tmp_path / "junk.grmh").write_bytes(b"nope")
    assert main(["grid", "--model", str(tmp_path / "junk.grmh"), "--out", str(tmp_path)]) == 1


def test_orbit_writes_zero_padded_frames(workdir, tmp_path):
    out = tmp_path / "orbit"
    code = main(args(workdir, "orbit", "--maps", str(workdir / "maps_hr.grmm"), "--frames", "30",
                     "--yaw-range", "0.4", "--epi-row", "12", "--out", str(out)))
    assert code == 0
    frames = sorted(f for f in os.listdir(out) if f.startswith("frame_"))
    assert frames == [f"frame_{k:03d}.png" for k in range(30)]
    assert load_png(out / "frame_000.png").shape == (24, 24, 3)
    assert load_png(out / "epi.png").shape == (30, 24, 3)
    listed = {e["path"] for e in json.loads((out / "manifest.json").read_text())["outputs"]}
    assert listed == set(frames) | {"epi.png"}


def test_render_direct_and_epi_and_eval(workdir, tmp_path):
    assert main(args(workdir, "render", "--out", str(tmp_path), "--name", "direct.png")) == 0
    assert main(args(workdir, "render", "--maps", str(workdir / "maps_hr.grmm"), "--yaw", "0.1", "--depth",
                     "--out", str(tmp_path))) == 0
    assert os.path.exists(tmp_path / "render_depth.grmd")
    assert main(["epi", "--images", str(tmp_path / "*.png"), "--row", "3", "--out", str(tmp_path)]) == 0
    assert load_png(tmp_path / "epi.png").shape == (2, 24, 3)
    assert main(["eval", "--a", str(tmp_path / "direct.png"), "--b", str(tmp_path / "direct.png"),
                 "--hr-maps", str(workdir / "maps_hr.grmm"), "--lr-maps", str(workdir / "maps_lr.grmm"),
                 "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "eval.json").read_text())
    assert report["psnr_db"] == 99.0 and report["ssim"] == pytest.approx(1.0)
    assert report["consistency_loss"] >= 0
    assert main(["eval", "--out", str(tmp_path)]) == 1


def test_extract_mesh_and_bench(workdir, tmp_path, capsys):
    code = main(args(workdir, "extract-mesh", "--maps", str(workdir / "maps_hr.grmm"), "--views", "3",
                     "--depth-size", "16", "--resolution", "12", "--textured", "--lattice", "8",
                     "--out", str(tmp_path)))
    assert code == 0
    assert {"occupancy.grmo", "proxy.obj", "baked.obj", "baked.mtl"} <= set(os.listdir(tmp_path))
    capsys.readouterr()
    code = main(args(workdir, "bench", "--maps", str(workdir / "maps_hr.grmm"), "--size", "32", "--frames", "3",
                     "--lattice", "8", "--out", str(tmp_path)))
    assert code == 0
    assert capsys.readouterr().out.startswith("fps=")
    assert json.loads((tmp_path / "bench.json").read_text())["surfaces"] == 4


def test_seed_flag_overrides_config(workdir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d, seed in ((a, "1"), (b, "2")):
        assert main(["gen-scene", "--config", str(workdir / "scene.toml"), "--seed", seed, "--out", str(d)]) == 0
    assert (a / "model.grmh").read_bytes() != (b / "model.grmh").read_bytes()
    c = tmp_path / "c"
    assert main(["gen-scene", "--config", str(workdir / "scene.toml"), "--seed", "1", "--out", str(c)]) == 0
    assert (a / "model.grmh").read_bytes() == (c / "model.grmh").read_bytes()
    assert np.array_equal(np.frombuffer((a / "manifest.json").read_bytes(), np.uint8),
                          np.frombuffer((c / "manifest.json").read_bytes(), np.uint8))
