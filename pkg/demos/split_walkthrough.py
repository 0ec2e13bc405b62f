# Build a small synthetic dataset, then show how the two split schemes
# carve it up: per-class floors for train and validation, remainder to test,
# all reproducible from the seed.

import tempfile
from collections import Counter
from pathlib import Path

from woundfuse.dataset import split_dataset
from woundfuse.synthetic import write_synthetic_dataset


def class_counts(records):
    return Counter(r.label.value for r in records)


def show(name, records):
    counts = class_counts(records)
    row = "  ".join(f"{cls}={counts[cls]}" for cls in sorted(counts))
    print(f"  {name:<11} {len(records):>3} records   {row}")


def main():
    root = Path(tempfile.mkdtemp(prefix="split_demo_"))
    manifest = write_synthetic_dataset(root, per_class=20, size=32, seed=7, with_locations=True)
    print(f"synthetic dataset: {len(manifest.records)} records in {root}")

    for scheme in ("60-15-25", "70-15-15"):
        split = split_dataset(manifest, scheme, seed=17)
        print(f"\nscheme {scheme}:")
        show("train", split.train)
        show("validation", split.validation)
        show("test", split.test)

    # same seed, same membership — byte-for-byte
    a = split_dataset(manifest, "60-15-25", seed=17)
    b = split_dataset(manifest, "60-15-25", seed=17)
    assert [r.image_path for r in a.train] == [r.image_path for r in b.train]
    print("\nsame seed reproduces the same train membership")

    c = split_dataset(manifest, "60-15-25", seed=18)
    moved = {r.image_path for r in a.train} ^ {r.image_path for r in c.train}
    print(f"different seed moves {len(moved)} images across the train boundary")

    # splits serialize, so a run can be replayed later
    out = root / "split.json"
    a.save(out)
    print(f"\nsplit manifest saved to {out} ({out.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
