"""Synthetic, trivially separable image sets for pipeline and overfit checks.

Each class renders as one saturated base color with mild per-pixel jitter, so
any functioning classifier should reach near-perfect training accuracy within
a few epochs. Optionally every class is tied to one body-map code, making the
location signal exactly as informative as the pixels.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .bodymap import BodyMapRegistry, default_registry
from .dataset import DatasetManifest, Source, WoundClass, build_manifest

# visually distinct anchors, one per canonical class
CLASS_COLORS: dict[str, tuple[int, int, int]] = {
    "BG": (40, 40, 40),
    "N": (235, 200, 170),
    "D": (200, 60, 40),
    "P": (240, 220, 60),
    "S": (70, 110, 220),
    "V": (80, 190, 90),
}

# default class -> body-map code assignment for location-aware sets
CLASS_LOCATION_CODES: dict[str, int] = {
    "BG": 135,
    "N": 150,
    "D": 158,
    "P": 178,
    "S": 180,
    "V": 202,
}


def synthetic_image(
    tag: str,
    size: int = 64,
    rng: np.random.Generator | None = None,
    jitter: int = 12,
) -> Image.Image:
    """One class-colored square with uniform per-pixel jitter."""
    if tag not in CLASS_COLORS:
        raise ValueError(f"no synthetic color for class {tag!r}")
    if rng is None:
        rng = np.random.default_rng()
    base = np.array(CLASS_COLORS[tag], dtype=np.int16)
    noise = rng.integers(-jitter, jitter + 1, size=(size, size, 3), dtype=np.int16)
    arr = np.clip(base[None, None, :] + noise, 0, 255).astype(np.uint8)
    return Image.fromarray(arr, mode="RGB")


def write_synthetic_dataset(
    root: str | Path,
    classes: Sequence[str] = ("BG", "N", "D", "P", "S", "V"),
    per_class: int = 20,
    size: int = 64,
    seed: int = 17,
    with_locations: bool = False,
    registry: BodyMapRegistry | None = None,
) -> DatasetManifest:
    """Write PNGs plus a labels CSV under ``root`` and return the manifest."""
    root = Path(root)
    image_dir = root / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    rows = []
    sample_id = 1
    for tag in classes:
        WoundClass.from_tag(tag)  # validates the tag
        for i in range(per_class):
            rel = f"images/{tag}_{i:03d}.png"
            synthetic_image(tag, size=size, rng=rng).save(root / rel)
            row = [str(sample_id), rel, tag]
            if with_locations:
                row.append(str(CLASS_LOCATION_CODES[tag]))
            rows.append(row)
            sample_id += 1

    labels_path = root / "labels.csv"
    header = ["sample_id", "relative_path", "class"]
    if with_locations:
        header.append("location_code")
    with open(labels_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)

    if with_locations:
        if registry is None:
            registry = default_registry()
        return build_manifest(root, labels_path, registry=registry, source=Source.AZH_ROI)
    return build_manifest(root, labels_path, source=Source.AZH_WHOLE)
