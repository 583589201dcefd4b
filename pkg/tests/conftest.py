"""Shared fixtures: small datasets and cheap model configs."""
import numpy as np
import pytest

from clueai.backbones import BackboneConfig
from clueai.datagen import CLASSES, GenParams, generate_dataset
from clueai.model import ModelConfig


def small_model_cfg(**kw):
    """Cheap trimodal config for pipeline tests (not the acceptance desk config)."""
    base = dict(
        backbone=BackboneConfig(kind="vgg16", width_multiplier=1 / 32, input_size=32),
        lstm_hidden=16,
        audio_channels=(4, 4, 8, 8),
        audio_out=16,
        proprio_out=16,
        fusion_hidden=32,
    )
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """3 episodes per class, desk geometry."""
    root = tmp_path_factory.mktemp("tinyset")
    params = GenParams(S=32, T=8, T_p=50)
    return generate_dataset({c: 3 for c in CLASSES}, dataset_seed=17, out_dir=root,
                            params=params)
