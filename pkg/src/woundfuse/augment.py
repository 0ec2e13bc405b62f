"""Training-time augmentation and deterministic preprocessing.

Augmentation is applied online (per epoch, per image) to training records
only; validation and test images go through :func:`preprocess` alone. Every
random decision is drawn from the caller's generator, so a (image, policy,
seed) triple fully determines the output.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Mapping

import numpy as np
from PIL import Image, UnidentifiedImageError
import torchvision.transforms.functional as TF

# Normalization statistics of the pretrained backbones' natural-image corpus;
# stored in checkpoints so inference preprocessing matches training exactly.
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class ImageDecodeError(ValueError):
    """Raised when input bytes or files cannot be decoded as an image."""


class AugmentError(ValueError):
    """Raised for invalid augmentation policies."""


@dataclass
class AugmentPolicy:
    """Per-transform probabilities and parameter ranges.

    Magnitude defaults are artifact choices (the transform family is fixed,
    the magnitudes are configurable).
    """

    resize: int = 256
    rotate_prob: float = 0.5
    rotate_degrees: tuple[float, float] = (-30.0, 30.0)
    hflip_prob: float = 0.5
    vflip_prob: float = 0.5
    affine_prob: float = 0.5
    affine_scale: tuple[float, float] = (0.9, 1.1)
    affine_shift: float = 0.1
    affine_degrees: tuple[float, float] = (-15.0, 15.0)
    noise_prob: float = 0.3
    noise_variance: tuple[float, float] = (10.0, 50.0)
    dropout_prob: float = 0.3
    dropout_holes: tuple[int, int] = (1, 8)
    dropout_size: tuple[int, int] = (8, 32)
    fill_value: int = 0

    def validate(self) -> None:
        for name in ("rotate_prob", "hflip_prob", "vflip_prob", "affine_prob", "noise_prob", "dropout_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise AugmentError(f"{name} must be in [0, 1], got {p}")
        if self.resize < 1:
            raise AugmentError(f"resize target must be >= 1, got {self.resize}")
        for name in ("rotate_degrees", "affine_scale", "affine_degrees", "noise_variance", "dropout_holes", "dropout_size"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise AugmentError(f"{name} range is inverted: ({lo}, {hi})")
        if self.dropout_holes[0] < 0 or self.dropout_size[0] < 1:
            raise AugmentError("dropout hole counts must be >= 0 and sizes >= 1")
        if not 0.0 <= self.affine_shift <= 1.0:
            raise AugmentError(f"affine_shift must be a fraction in [0, 1], got {self.affine_shift}")

    def to_dict(self) -> dict:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "AugmentPolicy":
        kwargs = dict(data)
        for key, value in kwargs.items():
            if isinstance(value, list):
                kwargs[key] = tuple(value)
        policy = cls(**kwargs)
        policy.validate()
        return policy


def identity_policy(resize: int = 256) -> AugmentPolicy:
    """A policy that only resizes (all transform probabilities zero)."""
    return AugmentPolicy(
        resize=resize,
        rotate_prob=0.0,
        hflip_prob=0.0,
        vflip_prob=0.0,
        affine_prob=0.0,
        noise_prob=0.0,
        dropout_prob=0.0,
    )


def load_image(image) -> Image.Image:
    """Decode a path, bytes, array, or PIL image into RGB PIL form."""
    if isinstance(image, Image.Image):
        return image.convert("RGB")
    if isinstance(image, np.ndarray):
        arr = image
        if arr.ndim == 2:
            arr = np.stack([arr] * 3, axis=-1)
        if arr.ndim != 3 or arr.shape[-1] not in (1, 3):
            raise ImageDecodeError(f"array image must be HxW or HxWxC with C in (1, 3), got {arr.shape}")
        if arr.shape[-1] == 1:
            arr = np.repeat(arr, 3, axis=-1)
        return Image.fromarray(np.clip(arr, 0, 255).astype(np.uint8), mode="RGB")
    if isinstance(image, (bytes, bytearray)):
        try:
            return Image.open(io.BytesIO(image)).convert("RGB")
        except (UnidentifiedImageError, OSError) as exc:
            raise ImageDecodeError(f"could not decode image bytes: {exc}") from None
    if isinstance(image, (str, Path)):
        path = Path(image)
        if not path.is_file():
            raise ImageDecodeError(f"image file not found: {path}")
        try:
            with Image.open(path) as img:
                return img.convert("RGB")
        except (UnidentifiedImageError, OSError) as exc:
            raise ImageDecodeError(f"could not decode {path}: {exc}") from None
    raise ImageDecodeError(f"unsupported image input type {type(image)!r}")


def resize_image(img: Image.Image, size: int) -> Image.Image:
    return img.resize((size, size), Image.BILINEAR)


def flip_horizontal(arr: np.ndarray) -> np.ndarray:
    return arr[:, ::-1].copy()


def flip_vertical(arr: np.ndarray) -> np.ndarray:
    return arr[::-1, :].copy()


def add_gaussian_noise(arr: np.ndarray, variance: float, rng: np.random.Generator) -> np.ndarray:
    noise = rng.normal(0.0, math.sqrt(variance), size=arr.shape)
    return np.clip(arr.astype(np.float64) + noise, 0, 255).astype(np.uint8)


def coarse_dropout(
    arr: np.ndarray,
    holes: int,
    size_range: tuple[int, int],
    fill_value: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Replace random rectangles with the fill value."""
    out = arr.copy()
    h, w = out.shape[:2]
    lo, hi = size_range
    for _ in range(holes):
        hole_h = int(rng.integers(lo, hi + 1))
        hole_w = int(rng.integers(lo, hi + 1))
        hole_h = min(hole_h, h)
        hole_w = min(hole_w, w)
        y = int(rng.integers(0, h - hole_h + 1))
        x = int(rng.integers(0, w - hole_w + 1))
        out[y : y + hole_h, x : x + hole_w] = fill_value
    return out


def augment_sample(image, policy: AugmentPolicy, rng: np.random.Generator) -> np.ndarray:
    """Apply the policy's transforms probabilistically; returns HxWx3 uint8.

    The output spatial size always equals ``policy.resize``. Identical
    generator state produces identical bytes.
    """
    policy.validate()
    img = resize_image(load_image(image), policy.resize)

    if rng.random() < policy.rotate_prob:
        angle = float(rng.uniform(*policy.rotate_degrees))
        img = TF.rotate(img, angle, interpolation=TF.InterpolationMode.BILINEAR, fill=[policy.fill_value] * 3)
    if rng.random() < policy.hflip_prob:
        img = TF.hflip(img)
    if rng.random() < policy.vflip_prob:
        img = TF.vflip(img)
    if rng.random() < policy.affine_prob:
        scale = float(rng.uniform(*policy.affine_scale))
        angle = float(rng.uniform(*policy.affine_degrees))
        max_shift = policy.affine_shift * policy.resize
        tx = float(rng.uniform(-max_shift, max_shift))
        ty = float(rng.uniform(-max_shift, max_shift))
        img = TF.affine(
            img,
            angle=angle,
            translate=[tx, ty],
            scale=scale,
            shear=[0.0, 0.0],
            interpolation=TF.InterpolationMode.BILINEAR,
            fill=[policy.fill_value] * 3,
        )

    arr = np.asarray(img, dtype=np.uint8)
    if rng.random() < policy.noise_prob:
        variance = float(rng.uniform(*policy.noise_variance))
        arr = add_gaussian_noise(arr, variance, rng)
    if rng.random() < policy.dropout_prob:
        holes = int(rng.integers(policy.dropout_holes[0], policy.dropout_holes[1] + 1))
        arr = coarse_dropout(arr, holes, policy.dropout_size, policy.fill_value, rng)
    return arr


@dataclass(frozen=True)
class ImageTensor:
    """Network-ready image: float32 CHW plus the normalization that made it."""

    data: np.ndarray
    mean: tuple[float, float, float] = IMAGENET_MEAN
    std: tuple[float, float, float] = IMAGENET_STD


def preprocess(
    image,
    size: int = 256,
    mean: tuple[float, float, float] = IMAGENET_MEAN,
    std: tuple[float, float, float] = IMAGENET_STD,
    convert_grayscale: bool = True,
) -> ImageTensor:
    """Deterministic resize + per-channel normalization; no augmentation.

    Accepts the same inputs as :func:`load_image`. Float arrays are treated
    as 0..255 scale. Grayscale inputs are replicated to three channels when
    ``convert_grayscale`` is set, otherwise rejected.
    """
    if isinstance(image, np.ndarray) and np.issubdtype(image.dtype, np.floating):
        arr = image.astype(np.float32)
        if arr.ndim == 2:
            if not convert_grayscale:
                raise ImageDecodeError("grayscale input rejected (convert_grayscale=False)")
            arr = np.stack([arr] * 3, axis=-1)
        if arr.ndim != 3 or arr.shape[-1] != 3:
            raise ImageDecodeError(f"float image must be HxWx3, got {arr.shape}")
        if arr.shape[0] != size or arr.shape[1] != size:
            img = Image.fromarray(np.clip(arr, 0, 255).astype(np.uint8), mode="RGB")
            arr = np.asarray(resize_image(img, size), dtype=np.float32)
    else:
        if isinstance(image, np.ndarray) and image.ndim == 2 and not convert_grayscale:
            raise ImageDecodeError("grayscale input rejected (convert_grayscale=False)")
        if isinstance(image, Image.Image) and image.mode == "L" and not convert_grayscale:
            raise ImageDecodeError("grayscale input rejected (convert_grayscale=False)")
        arr = np.asarray(resize_image(load_image(image), size), dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise ImageDecodeError("image contains non-finite values")

    scaled = arr / 255.0
    mean_arr = np.asarray(mean, dtype=np.float32)
    std_arr = np.asarray(std, dtype=np.float32)
    normalized = (scaled - mean_arr) / std_arr
    chw = np.transpose(normalized, (2, 0, 1)).astype(np.float32)
    return ImageTensor(data=chw, mean=tuple(mean), std=tuple(std))
