import pytest

from radmanifold.config import SceneConfig, load_config, parse_config
from radmanifold.errors import ConfigError

GOOD = """\
seed = 7

[surfaces]
count = 12
r_max = 2.0

[camera]
fov_deg = 30
look_at = [0.0, 0.0, -1.0]

[model]
sr_factor = 4
"""


def test_defaults():
    cfg = load_config()
    assert cfg.surfaces.count == 24 and cfg.maps.lr_size == 64 and cfg.model.sr_factor == 16
    assert cfg.camera.radius == 2.7 and cfg.camera.fov_deg == 12.0


def test_parse_values(tmp_path):
    cfg = parse_config(GOOD)
    assert cfg.seed == 7 and cfg.surfaces.count == 12
    assert cfg.camera.fov_deg == 30.0 and isinstance(cfg.camera.fov_deg, float)
    assert cfg.surfaces.r_min == 0.5
    path = tmp_path / "scene.toml"
    path.write_text(GOOD)
    assert load_config(path).digest() == cfg.digest()


def test_digest_tracks_content():
    a, b = SceneConfig(), SceneConfig()
    assert a.digest() == b.digest()
    b.render.size = 128
    assert a.digest() != b.digest()


@pytest.mark.parametrize("text,line,field", [
    ("[surfaces]\ncount = 3\nbogus = 1\n", 3, "surfaces.bogus"),
    ("seed = 1\n\n[nope]\nx = 1\n", 3, "nope"),
    ("[camera]\nfov_deg = 'wide'\n", 2, "camera.fov_deg"),
    ("[surfaces]\ncount = 2.5\n", 2, "surfaces.count"),
    ("[model]\n\nsr_factor = 3\n", None, "model.sr_factor"),
])
def test_errors_name_line_and_field(text, line, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field
    assert info.value.line == line
    if line is not None:
        assert f"line {line}" in str(info.value)


def test_syntax_error_has_line():
    with pytest.raises(ConfigError) as info:
        parse_config("seed = 1\n[camera\n")
    assert info.value.line == 2
