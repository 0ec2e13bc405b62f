# Render the augmentation ops side by side on one synthetic wound image and
# save the gallery as a PNG. Each tile is one op at a visible strength, plus
# a few draws from the full random policy to show how they compose.

import tempfile
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from woundfuse.augment import (
    AugmentPolicy,
    add_gaussian_noise,
    augment_sample,
    coarse_dropout,
    flip_horizontal,
    flip_vertical,
    load_image,
    resize_image,
)
from woundfuse.synthetic import write_synthetic_dataset

OUT = Path(__file__).resolve().parent / "output"
TILE = 128


def tile_of(arr):
    return Image.fromarray(arr.astype(np.uint8)).resize((TILE, TILE), Image.NEAREST)


def main():
    root = Path(tempfile.mkdtemp(prefix="aug_demo_"))
    manifest = write_synthetic_dataset(root, classes=("V",), per_class=1, size=96, seed=3)
    record = manifest.records[0]
    base = np.asarray(resize_image(load_image(record.image_path), TILE))
    print(f"base image: {record.image_path} -> {base.shape}")

    rng = np.random.default_rng(11)
    tiles = [
        ("original", base),
        ("hflip", flip_horizontal(base)),
        ("vflip", flip_vertical(base)),
        ("noise var=50", add_gaussian_noise(base, variance=50.0, rng=rng)),
        ("dropout 6 holes", coarse_dropout(base, holes=6, size_range=(12, 24), fill_value=0, rng=rng)),
    ]

    # the full policy rolls rotation, flips, affine jitter, noise, and dropout
    policy = AugmentPolicy(resize=TILE)
    for i in range(3):
        tiles.append((f"policy draw {i}", augment_sample(base, policy, rng)))

    cols = 4
    rows = (len(tiles) + cols - 1) // cols
    label_h = 16
    sheet = Image.new("RGB", (cols * TILE, rows * (TILE + label_h)), "white")
    draw = ImageDraw.Draw(sheet)
    for i, (label, arr) in enumerate(tiles):
        x, y = (i % cols) * TILE, (i // cols) * (TILE + label_h)
        sheet.paste(tile_of(arr), (x, y))
        draw.text((x + 4, y + TILE + 2), label, fill="black")
        print(f"  tile {i}: {label:<16} pixels changed vs original: "
              f"{int((arr != base).any(axis=-1).sum())}/{TILE * TILE}")

    OUT.mkdir(exist_ok=True)
    out_path = OUT / "augmentation_gallery.png"
    sheet.save(out_path)
    print(f"\ngallery written to {out_path}")


if __name__ == "__main__":
    main()
