"""Three-backbone fusion network, backbone truncation recipes, checkpoints.

Truncations are named, data-driven recipes (drop-last-K-children at stated
depths). Each built backbone is probed with a dummy input and the realized
output shape is recorded in a truncation manifest that travels with every
checkpoint, so the exact architecture is auditable after the fact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F
import torchvision
from torchvision import models

from . import __version__
from .augment import IMAGENET_MEAN, IMAGENET_STD
from .blocks import (
    AdaptiveGatedMlp,
    AxialAttention,
    AxialAttentionConfig,
    ConvBlock,
    GatedMlpConfig,
    PscSE,
    PscseConfig,
)

logger = logging.getLogger(__name__)

FAMILIES = ("resnet152", "vgg16", "efficientnet_b2")


class ModelConfigError(ValueError):
    """Raised for invalid model configurations."""


class ModelContractError(ValueError):
    """Raised when forward inputs violate the model's contract."""


class BackboneWeightsError(RuntimeError):
    """Raised when pretrained weights cannot be fetched; never falls back silently."""


class CheckpointError(RuntimeError):
    """Raised when a checkpoint cannot be read or fails validation."""


@dataclass(frozen=True)
class BackboneSpec:
    family: str
    truncation: str = "midlevel_v1"
    pretrained: bool = True
    freeze: bool = False

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "truncation": self.truncation,
            "pretrained": self.pretrained,
            "freeze": self.freeze,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "BackboneSpec":
        return cls(
            family=str(data["family"]),
            truncation=str(data.get("truncation", "midlevel_v1")),
            pretrained=bool(data.get("pretrained", True)),
            freeze=bool(data.get("freeze", False)),
        )


def _resnet152_midlevel_v1(pretrained: bool) -> nn.Module:
    weights = models.ResNet152_Weights.DEFAULT if pretrained else None
    net = models.resnet152(weights=weights)
    # stage-2 block-3 loses its last two sublayers; a plain Sequential of the
    # survivors keeps the 512-channel output compatible with the next block
    block = net.layer2[2]
    net.layer2[2] = nn.Sequential(*list(block.children())[:-2])
    # drop the final four top-level children (layer3, layer4, avgpool, fc)
    return nn.Sequential(*list(net.children())[:-4])


def _vgg16_midlevel_v1(pretrained: bool) -> nn.Module:
    weights = models.VGG16_Weights.DEFAULT if pretrained else None
    net = models.vgg16(weights=weights)
    # drop the last twelve children of the feature stack
    return nn.Sequential(*list(net.features.children())[:-12])


def _efficientnet_b2_midlevel_v1(pretrained: bool) -> nn.Module:
    weights = models.EfficientNet_B2_Weights.DEFAULT if pretrained else None
    net = models.efficientnet_b2(weights=weights)
    # drop the classification head, keeping the spatial feature stack
    return net.features


def _resnet152_stem_v1(pretrained: bool) -> nn.Module:
    weights = models.ResNet152_Weights.DEFAULT if pretrained else None
    net = models.resnet152(weights=weights)
    # stem plus the first residual stage only: 256 channels at stride 4
    return nn.Sequential(*list(net.children())[:5])


def _vgg16_stem_v1(pretrained: bool) -> nn.Module:
    weights = models.VGG16_Weights.DEFAULT if pretrained else None
    net = models.vgg16(weights=weights)
    # first two conv pairs, up to and including the second max-pool
    return nn.Sequential(*list(net.features.children())[:10])


def _efficientnet_b2_stem_v1(pretrained: bool) -> nn.Module:
    weights = models.EfficientNet_B2_Weights.DEFAULT if pretrained else None
    net = models.efficientnet_b2(weights=weights)
    # stem conv plus the first two MBConv stages: 24 channels at stride 4
    return net.features[:3]


# "midlevel_v1" is the production truncation trio (512/512/1408-channel
# mid-level features). "stem_v1" keeps only each network's early stages
# (~0.5M parameters combined) so random-init models stay trainable in a few
# CPU minutes; it exists for smoke tests and walkthrough scripts.
TRUNCATION_RECIPES: dict[str, dict[str, Callable[[bool], nn.Module]]] = {
    "resnet152": {"midlevel_v1": _resnet152_midlevel_v1, "stem_v1": _resnet152_stem_v1},
    "vgg16": {"midlevel_v1": _vgg16_midlevel_v1, "stem_v1": _vgg16_stem_v1},
    "efficientnet_b2": {"midlevel_v1": _efficientnet_b2_midlevel_v1, "stem_v1": _efficientnet_b2_stem_v1},
}


def build_backbone(spec: BackboneSpec, input_size: int = 256) -> tuple[nn.Module, dict]:
    """Build a truncated feature extractor and its probed manifest entry."""
    if spec.family not in TRUNCATION_RECIPES:
        raise ModelConfigError(f"unknown backbone family {spec.family!r}; expected one of {FAMILIES}")
    recipes = TRUNCATION_RECIPES[spec.family]
    if spec.truncation not in recipes:
        raise ModelConfigError(
            f"undefined truncation {spec.truncation!r} for {spec.family}; known: {sorted(recipes)}"
        )
    try:
        module = recipes[spec.truncation](spec.pretrained)
    except ModelConfigError:
        raise
    except Exception as exc:
        if spec.pretrained:
            raise BackboneWeightsError(
                f"failed to fetch pretrained weights for {spec.family}: {exc}"
            ) from exc
        raise
    if spec.freeze:
        for param in module.parameters():
            param.requires_grad_(False)
    was_training = module.training
    module.eval()
    with torch.no_grad():
        probe = module(torch.zeros(1, 3, input_size, input_size))
    module.train(was_training)
    entry = {
        "family": spec.family,
        "truncation": spec.truncation,
        "pretrained": spec.pretrained,
        "freeze": spec.freeze,
        "input_size": input_size,
        "output_shape": list(probe.shape[1:]),
    }
    logger.info(
        "backbone %s/%s: probe %dx%d -> %s",
        spec.family,
        spec.truncation,
        input_size,
        input_size,
        tuple(probe.shape[1:]),
    )
    return module, entry


def default_backbones(pretrained: bool = True) -> tuple[BackboneSpec, BackboneSpec, BackboneSpec]:
    return tuple(BackboneSpec(family=f, pretrained=pretrained) for f in FAMILIES)


@dataclass
class ModelConfig:
    num_classes: int
    use_location: bool = False
    input_size: int = 256
    backbones: tuple[BackboneSpec, ...] = field(default_factory=default_backbones)
    pscse_reduction: int = 16
    pscse_combine: str = "maxout_plus_add"
    agg_channels: tuple[int, ...] = (512, 256)
    agg_dropout: float = 0.3
    flatten_dim: int = 512
    head_widths: tuple[int, ...] = (512, 256)
    head_attention: AxialAttentionConfig = field(
        default_factory=lambda: AxialAttentionConfig(embed_dim=16, heads=4, axes=("tokens",))
    )
    head_dropout: float = 0.5
    location_branch: GatedMlpConfig | None = None

    def validate(self) -> None:
        if not 2 <= self.num_classes <= 6:
            raise ModelConfigError(f"num_classes must be in 2..6, got {self.num_classes}")
        if len(self.backbones) != 3:
            raise ModelConfigError(f"exactly three backbones required, got {len(self.backbones)}")
        if self.use_location and self.location_branch is None:
            raise ModelConfigError("use_location=True requires a location_branch config")
        if self.input_size < 32:
            raise ModelConfigError(f"input_size must be >= 32, got {self.input_size}")
        if not self.agg_channels:
            raise ModelConfigError("agg_channels must name at least one stage")
        for channels in self.agg_channels:
            if channels % self.pscse_reduction != 0:
                raise ModelConfigError(
                    f"aggregation width {channels} must be divisible by pscse_reduction {self.pscse_reduction}"
                )
        self.head_attention.validate()
        if not self.head_widths:
            raise ModelConfigError("head_widths must name at least one dense stage")
        for width in self.head_widths:
            if width % self.head_attention.embed_dim != 0:
                raise ModelConfigError(
                    f"head width {width} must be divisible by attention embed_dim {self.head_attention.embed_dim}"
                )
        for rate in (self.agg_dropout, self.head_dropout):
            if not 0.0 <= rate < 1.0:
                raise ModelConfigError(f"dropout rates must be in [0, 1), got {rate}")
        if self.location_branch is not None:
            self.location_branch.validate()

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "use_location": self.use_location,
            "input_size": self.input_size,
            "backbones": [b.to_dict() for b in self.backbones],
            "pscse_reduction": self.pscse_reduction,
            "pscse_combine": self.pscse_combine,
            "agg_channels": list(self.agg_channels),
            "agg_dropout": self.agg_dropout,
            "flatten_dim": self.flatten_dim,
            "head_widths": list(self.head_widths),
            "head_attention": self.head_attention.to_dict(),
            "head_dropout": self.head_dropout,
            "location_branch": None if self.location_branch is None else self.location_branch.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelConfig":
        cfg = cls(
            num_classes=int(data["num_classes"]),
            use_location=bool(data.get("use_location", False)),
            input_size=int(data.get("input_size", 256)),
            backbones=tuple(BackboneSpec.from_dict(b) for b in data.get("backbones", [])) or default_backbones(),
            pscse_reduction=int(data.get("pscse_reduction", 16)),
            pscse_combine=str(data.get("pscse_combine", "maxout_plus_add")),
            agg_channels=tuple(int(c) for c in data.get("agg_channels", (512, 256))),
            agg_dropout=float(data.get("agg_dropout", 0.3)),
            flatten_dim=int(data.get("flatten_dim", 512)),
            head_widths=tuple(int(w) for w in data.get("head_widths", (512, 256))),
            head_attention=AxialAttentionConfig.from_dict(
                data.get("head_attention", {"embed_dim": 16, "heads": 4, "axes": ["tokens"]})
            ),
            head_dropout=float(data.get("head_dropout", 0.5)),
            location_branch=(
                None
                if data.get("location_branch") is None
                else GatedMlpConfig.from_dict(data["location_branch"])
            ),
        )
        cfg.validate()
        return cfg


class _HeadStage(nn.Module):
    """Dense layer enriched with axial attention: linear -> attention -> ReLU -> dropout."""

    def __init__(self, in_dim: int, out_dim: int, attention_cfg: AxialAttentionConfig, dropout: float):
        super().__init__()
        self.linear = nn.Linear(in_dim, out_dim)
        self.attention = AxialAttention(attention_cfg)
        self.tokens = out_dim // attention_cfg.embed_dim
        self.embed = attention_cfg.embed_dim
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b = x.shape[0]
        z = self.linear(x).view(b, self.tokens, self.embed)
        z = self.attention(z).reshape(b, -1)
        return self.dropout(F.relu(z))


class FusionModel(nn.Module):
    """Parallel truncated backbones fused through ConvBlock/P_scSE stacks.

    Branch outputs are pooled to the smallest branch's spatial size and
    concatenated channel-wise. An optional gated-MLP location branch is
    concatenated with the flattened dense output before the attention head.
    """

    def __init__(
        self,
        cfg: ModelConfig,
        class_tags: Sequence[str],
        normalization: tuple[tuple[float, ...], tuple[float, ...]] = (IMAGENET_MEAN, IMAGENET_STD),
        registry_size: int | None = None,
        fetch_pretrained: bool = True,
    ):
        super().__init__()
        cfg.validate()
        if len(class_tags) != cfg.num_classes:
            raise ModelConfigError(
                f"class list has {len(class_tags)} entries but num_classes={cfg.num_classes}"
            )
        self.cfg = cfg
        self.class_tags = tuple(class_tags)
        self.normalization = (tuple(normalization[0]), tuple(normalization[1]))
        self.registry_size = registry_size

        backbone_modules = []
        manifest = []
        branch_shapes = []
        for spec in cfg.backbones:
            build_spec = spec if fetch_pretrained else BackboneSpec(
                family=spec.family, truncation=spec.truncation, pretrained=False, freeze=spec.freeze
            )
            module, entry = build_backbone(build_spec, input_size=cfg.input_size)
            backbone_modules.append(module)
            manifest.append(entry)
            branch_shapes.append(tuple(entry["output_shape"]))
        self.backbones = nn.ModuleList(backbone_modules)
        self.truncation_manifest = manifest

        self._target_hw = (
            min(shape[1] for shape in branch_shapes),
            min(shape[2] for shape in branch_shapes),
        )
        total_channels = sum(shape[0] for shape in branch_shapes)

        agg = []
        in_channels = total_channels
        for out_channels in cfg.agg_channels:
            agg.append(ConvBlock(in_channels, out_channels))
            agg.append(
                PscSE(
                    PscseConfig(
                        channels=out_channels,
                        reduction_ratio=cfg.pscse_reduction,
                        combine_mode=cfg.pscse_combine,
                    )
                )
            )
            agg.append(nn.Dropout2d(cfg.agg_dropout))
            in_channels = out_channels
        self.aggregation = nn.Sequential(*agg)

        flat_in = cfg.agg_channels[-1] * self._target_hw[0] * self._target_hw[1]
        self.flatten_dense = nn.Linear(flat_in, cfg.flatten_dim)

        head_in = cfg.flatten_dim
        if cfg.use_location:
            self.location_branch = AdaptiveGatedMlp(cfg.location_branch)
            head_in += cfg.location_branch.output_dim
        else:
            self.location_branch = None

        stages = []
        for width in cfg.head_widths:
            stages.append(_HeadStage(head_in, width, cfg.head_attention, cfg.head_dropout))
            head_in = width
        self.head = nn.ModuleList(stages)
        self.classifier = nn.Linear(head_in, cfg.num_classes)

    @property
    def uses_location(self) -> bool:
        return self.cfg.use_location

    def forward(self, images: torch.Tensor, locations: torch.Tensor | None = None) -> torch.Tensor:
        if images.ndim != 4 or images.shape[1] != 3:
            raise ModelContractError(f"images must be (batch, 3, H, W), got {tuple(images.shape)}")
        if self.cfg.use_location:
            if locations is None:
                raise ModelContractError("this model requires a location batch")
            if locations.shape[0] != images.shape[0]:
                raise ModelContractError(
                    f"batch mismatch: {images.shape[0]} images vs {locations.shape[0]} locations"
                )
        elif locations is not None:
            raise ModelContractError("this model does not accept locations")

        feats = [backbone(images) for backbone in self.backbones]
        pooled = [F.adaptive_avg_pool2d(f, self._target_hw) for f in feats]
        x = torch.cat(pooled, dim=1)
        x = self.aggregation(x)
        x = F.relu(self.flatten_dense(x.flatten(1)))
        if self.cfg.use_location:
            x = torch.cat([x, self.location_branch(locations)], dim=1)
        for stage in self.head:
            x = stage(x)
        return self.classifier(x)


def build_model(
    cfg: ModelConfig,
    class_tags: Sequence[str],
    normalization: tuple[tuple[float, ...], tuple[float, ...]] = (IMAGENET_MEAN, IMAGENET_STD),
    registry_size: int | None = None,
) -> FusionModel:
    return FusionModel(cfg, class_tags, normalization=normalization, registry_size=registry_size)


CHECKPOINT_FORMAT_VERSION = 1


def save_checkpoint(model: FusionModel, path: str | Path, model_id: str | None = None) -> Path:
    """Persist weights plus everything needed to rebuild the network."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_id": model_id if model_id is not None else path.stem,
        "state_dict": model.state_dict(),
        "model_config": model.cfg.to_dict(),
        "class_tags": list(model.class_tags),
        "normalization": {"mean": list(model.normalization[0]), "std": list(model.normalization[1])},
        "registry_size": model.registry_size,
        "truncation_manifest": model.truncation_manifest,
        "versions": {
            "torch": str(torch.__version__),
            "torchvision": str(torchvision.__version__),
            "woundfuse": __version__,
        },
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)
    return path


def load_checkpoint(path: str | Path, map_location: str = "cpu") -> tuple[FusionModel, dict]:
    """Rebuild the model from a checkpoint; never re-fetches pretrained weights."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location=map_location, weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"could not read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "state_dict" not in payload or "model_config" not in payload:
        raise CheckpointError(f"checkpoint {path} is missing required fields")
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {payload.get('format_version')!r}"
        )
    cfg = ModelConfig.from_dict(payload["model_config"])
    normalization = (
        tuple(payload["normalization"]["mean"]),
        tuple(payload["normalization"]["std"]),
    )
    model = FusionModel(
        cfg,
        payload["class_tags"],
        normalization=normalization,
        registry_size=payload.get("registry_size"),
        fetch_pretrained=False,
    )
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload
