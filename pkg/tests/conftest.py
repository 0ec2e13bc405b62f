import numpy as np
import pytest
import torch

from woundfuse.blocks import AxialAttentionConfig, GatedMlpConfig
from woundfuse.model import BackboneSpec, ModelConfig


def small_model_config(
    num_classes: int = 2,
    use_location: bool = False,
    input_size: int = 48,
    registry_size: int = 484,
) -> ModelConfig:
    """A fusion model shrunk to smoke-test size: random-init backbones, thin stacks."""
    return ModelConfig(
        num_classes=num_classes,
        use_location=use_location,
        input_size=input_size,
        backbones=tuple(
            BackboneSpec(family=f, pretrained=False)
            for f in ("resnet152", "vgg16", "efficientnet_b2")
        ),
        agg_channels=(32,),
        flatten_dim=32,
        head_widths=(32,),
        head_attention=AxialAttentionConfig(embed_dim=16, heads=2, axes=("tokens",)),
        location_branch=(
            GatedMlpConfig(
                input_dim=registry_size,
                hidden_dims=(32,),
                output_dim=8,
                attention_embed_dim=1,
            )
            if use_location
            else None
        ),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(20240817)
