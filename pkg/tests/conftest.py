import numpy as np
import pytest

from radmanifold.config import SceneConfig
from radmanifold.model import gen_test_model


def small_config(seed=3, count=4, factor=2, kind="analytic"):
    cfg = SceneConfig(seed=seed)
    cfg.surfaces.count = count
    cfg.surfaces.kind = kind
    cfg.surfaces.mlp_widths = [16, 16]
    cfg.model.d_z = 16
    cfg.model.d_f = 8
    cfg.model.trunk_depth = 4
    cfg.model.trunk_width = 32
    cfg.model.sr_factor = factor
    cfg.maps.lr_size = 8
    return cfg.validate()


@pytest.fixture(scope="session")
def tiny_cfg():
    return small_config()


@pytest.fixture(scope="session")
def tiny_model(tiny_cfg):
    return gen_test_model(tiny_cfg.seed, tiny_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
