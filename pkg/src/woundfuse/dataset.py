"""Dataset manifests, class subsets, split schemes, and k-fold partitions.

Splits are stratified per class with a fixed rounding rule: the train and
validation splits each take the floor of ``count * fraction`` and the test
split takes the remainder. That rule reproduces the published per-class
split tables for both the 70-15-15 and 60-15-25 schemes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bodymap import BodyMapRegistry

DEFAULT_SEED = 17


class DatasetError(ValueError):
    """Raised for malformed label files, manifests, or split requests."""


class WoundClass(Enum):
    BG = "BG"
    N = "N"
    D = "D"
    P = "P"
    S = "S"
    V = "V"

    @classmethod
    def from_tag(cls, tag: str) -> "WoundClass":
        try:
            return cls(tag.strip().upper())
        except (ValueError, AttributeError):
            raise DatasetError(f"unknown wound class tag {tag!r}") from None


# Canonical class order; fixes class indices 0..5 for the 6-class problem
# and the remap order for subsets.
CLASS_ORDER: tuple[WoundClass, ...] = (
    WoundClass.BG,
    WoundClass.N,
    WoundClass.D,
    WoundClass.P,
    WoundClass.S,
    WoundClass.V,
)


def class_index_map(classes: Iterable[WoundClass]) -> dict[WoundClass, int]:
    """Contiguous indices 0..k-1 for a class subset, in canonical order."""
    chosen = set(classes)
    ordered = [c for c in CLASS_ORDER if c in chosen]
    return {c: i for i, c in enumerate(ordered)}


class Source(Enum):
    AZH_ROI = "AZH_ROI"
    AZH_WHOLE = "AZH_WHOLE"
    MEDETEC_WHOLE = "MEDETEC_WHOLE"


@dataclass(frozen=True)
class SampleRecord:
    sample_id: int
    image_path: str
    label: WoundClass
    location_code: int | None
    source: Source

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "image_path": self.image_path,
            "label": self.label.value,
            "location_code": self.location_code,
            "source": self.source.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SampleRecord":
        return cls(
            sample_id=int(data["sample_id"]),
            image_path=str(data["image_path"]),
            label=WoundClass.from_tag(data["label"]),
            location_code=None if data.get("location_code") is None else int(data["location_code"]),
            source=Source(data["source"]),
        )


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[SampleRecord, ...]

    def __post_init__(self):
        _validate_records(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def classes(self) -> tuple[WoundClass, ...]:
        present = {r.label for r in self.records}
        return tuple(c for c in CLASS_ORDER if c in present)

    def class_counts(self) -> dict[WoundClass, int]:
        counts: dict[WoundClass, int] = {}
        for record in self.records:
            counts[record.label] = counts.get(record.label, 0) + 1
        return {c: counts[c] for c in CLASS_ORDER if c in counts}

    def by_class(self) -> dict[WoundClass, list[SampleRecord]]:
        grouped: dict[WoundClass, list[SampleRecord]] = {}
        for record in self.records:
            grouped.setdefault(record.label, []).append(record)
        return grouped

    def to_dict(self) -> dict:
        return {"records": [r.to_dict() for r in self.records]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "DatasetManifest":
        return cls(records=tuple(SampleRecord.from_dict(r) for r in data["records"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _validate_records(records: Sequence[SampleRecord]) -> None:
    seen: set[int] = set()
    for record in records:
        if record.sample_id in seen:
            raise DatasetError(f"duplicate sample_id {record.sample_id}")
        seen.add(record.sample_id)
        if record.source is Source.AZH_ROI and record.location_code is None:
            raise DatasetError(f"sample {record.sample_id}: ROI records require a location code")
        if record.source is not Source.AZH_ROI and record.location_code is not None:
            raise DatasetError(
                f"sample {record.sample_id}: location codes are only defined for ROI records"
            )


def build_manifest(
    image_root: str | Path,
    labels_file: str | Path,
    registry: BodyMapRegistry | None = None,
    source: Source = Source.AZH_ROI,
) -> DatasetManifest:
    """Build a manifest from a labels CSV: ``sample_id,relative_path,class[,location_code]``.

    Every referenced image must exist under ``image_root``; location codes
    (required for ROI sources) must be present in ``registry``.
    """
    image_root = Path(image_root)
    labels_file = Path(labels_file)
    if not labels_file.is_file():
        raise DatasetError(f"labels file not found: {labels_file}")
    if source is Source.AZH_ROI and registry is None:
        raise DatasetError("ROI manifests need a body-map registry to validate location codes")

    records: list[SampleRecord] = []
    with labels_file.open(newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if line_no == 1 and row[0].strip().lower() == "sample_id":
                continue
            if len(row) < 3:
                raise DatasetError(f"row {line_no}: expected sample_id,relative_path,class[,location_code]")
            try:
                sample_id = int(row[0])
            except ValueError:
                raise DatasetError(f"row {line_no}: sample_id {row[0]!r} is not an integer") from None
            rel_path = row[1].strip()
            image_path = image_root / rel_path
            if not image_path.is_file():
                raise DatasetError(f"row {line_no}: image not found: {image_path}")
            try:
                label = WoundClass.from_tag(row[2])
            except DatasetError as exc:
                raise DatasetError(f"row {line_no}: {exc}") from None
            location_code: int | None = None
            if len(row) > 3 and row[3].strip():
                try:
                    location_code = int(row[3])
                except ValueError:
                    raise DatasetError(f"row {line_no}: location code {row[3]!r} is not an integer") from None
            if source is Source.AZH_ROI:
                if location_code is None:
                    raise DatasetError(f"row {line_no}: ROI sample {sample_id} is missing its location code")
                if registry is not None and location_code not in registry:
                    raise DatasetError(f"row {line_no}: unknown body-map code {location_code}")
            records.append(
                SampleRecord(
                    sample_id=sample_id,
                    image_path=str(image_path),
                    label=label,
                    location_code=location_code,
                    source=source,
                )
            )
    return DatasetManifest(records=tuple(records))


def build_manifest_from_folders(
    image_root: str | Path,
    registry: BodyMapRegistry | None = None,
    source: Source = Source.AZH_WHOLE,
    locations_file: str | Path | None = None,
) -> DatasetManifest:
    """Ingest a ``class/<images>`` folder layout.

    ROI datasets stored this way carry their location codes in a sidecar CSV
    ``relative_path,location_code``.
    """
    image_root = Path(image_root)
    if not image_root.is_dir():
        raise DatasetError(f"image root not found: {image_root}")
    locations: dict[str, int] = {}
    if locations_file is not None:
        with Path(locations_file).open(newline="", encoding="utf-8") as fh:
            for line_no, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                if line_no == 1 and row[0].strip().lower() in ("relative_path", "path"):
                    continue
                if len(row) < 2:
                    raise DatasetError(f"locations row {line_no}: expected relative_path,location_code")
                locations[row[0].strip()] = int(row[1])

    records: list[SampleRecord] = []
    sample_id = 0
    for class_dir in sorted(p for p in image_root.iterdir() if p.is_dir()):
        label = WoundClass.from_tag(class_dir.name)
        for image_path in sorted(class_dir.iterdir()):
            if not image_path.is_file():
                continue
            rel = str(image_path.relative_to(image_root))
            location_code = locations.get(rel)
            if source is Source.AZH_ROI:
                if location_code is None:
                    raise DatasetError(f"ROI sample {rel} has no entry in the locations file")
                if registry is not None and location_code not in registry:
                    raise DatasetError(f"{rel}: unknown body-map code {location_code}")
            else:
                location_code = None
            records.append(
                SampleRecord(
                    sample_id=sample_id,
                    image_path=str(image_path),
                    label=label,
                    location_code=location_code,
                    source=source,
                )
            )
            sample_id += 1
    return DatasetManifest(records=tuple(records))


def select_subset(
    manifest: DatasetManifest, classes: Iterable[WoundClass]
) -> tuple[DatasetManifest, dict[WoundClass, int]]:
    """Filter a manifest to a class subset; returns the class-index remap too."""
    chosen = set(classes)
    if not chosen:
        raise DatasetError("class subset must be nonempty")
    unknown = chosen - set(CLASS_ORDER)
    if unknown:
        raise DatasetError(f"unknown classes in subset: {sorted(c for c in unknown)}")
    present = set(manifest.classes())
    missing = chosen - present
    if missing:
        tags = ", ".join(sorted(c.value for c in missing))
        raise DatasetError(f"classes absent from manifest: {tags}")
    records = tuple(r for r in manifest.records if r.label in chosen)
    return DatasetManifest(records=records), class_index_map(chosen)


SPLIT_SCHEMES: dict[str, tuple[float, float, float]] = {
    "70-15-15": (0.70, 0.15, 0.15),
    "60-15-25": (0.60, 0.15, 0.25),
    "80-20": (0.80, 0.00, 0.20),
}


@dataclass(frozen=True)
class SplitManifest:
    train: tuple[SampleRecord, ...]
    validation: tuple[SampleRecord, ...]
    test: tuple[SampleRecord, ...]
    scheme: str
    seed: int

    def split_counts(self) -> dict[str, int]:
        return {"train": len(self.train), "validation": len(self.validation), "test": len(self.test)}

    def class_counts(self, split: str) -> dict[WoundClass, int]:
        records = getattr(self, split)
        counts: dict[WoundClass, int] = {}
        for record in records:
            counts[record.label] = counts.get(record.label, 0) + 1
        return {c: counts[c] for c in CLASS_ORDER if c in counts}

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "seed": self.seed,
            "train": [r.to_dict() for r in self.train],
            "validation": [r.to_dict() for r in self.validation],
            "test": [r.to_dict() for r in self.test],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SplitManifest":
        return cls(
            train=tuple(SampleRecord.from_dict(r) for r in data["train"]),
            validation=tuple(SampleRecord.from_dict(r) for r in data["validation"]),
            test=tuple(SampleRecord.from_dict(r) for r in data["test"]),
            scheme=str(data["scheme"]),
            seed=int(data["seed"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SplitManifest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def split_dataset(manifest: DatasetManifest, scheme: str, seed: int = DEFAULT_SEED) -> SplitManifest:
    """Stratified split under one of the named schemes, deterministic per seed."""
    if scheme not in SPLIT_SCHEMES:
        raise DatasetError(f"unknown split scheme {scheme!r}; expected one of {sorted(SPLIT_SCHEMES)}")
    fractions = SPLIT_SCHEMES[scheme]
    slots = sum(1 for f in fractions if f > 0)
    rng = np.random.default_rng(seed)
    train: list[SampleRecord] = []
    validation: list[SampleRecord] = []
    test: list[SampleRecord] = []
    for wound_class, group in sorted(manifest.by_class().items(), key=lambda kv: CLASS_ORDER.index(kv[0])):
        if len(group) < slots:
            raise DatasetError(
                f"class {wound_class.value} has {len(group)} samples, fewer than the {slots} split slots"
            )
        ordered = sorted(group, key=lambda r: r.sample_id)
        permutation = rng.permutation(len(ordered))
        shuffled = [ordered[i] for i in permutation]
        n = len(shuffled)
        n_train = math.floor(n * fractions[0])
        n_val = math.floor(n * fractions[1])
        train.extend(shuffled[:n_train])
        validation.extend(shuffled[n_train : n_train + n_val])
        test.extend(shuffled[n_train + n_val :])
    return SplitManifest(
        train=tuple(train),
        validation=tuple(validation),
        test=tuple(test),
        scheme=scheme,
        seed=seed,
    )


@dataclass(frozen=True)
class FoldSet:
    folds: tuple[tuple[SampleRecord, ...], ...]
    k: int
    seed: int = DEFAULT_SEED

    def train_test(self, fold_index: int) -> tuple[tuple[SampleRecord, ...], tuple[SampleRecord, ...]]:
        """Fold ``i`` as the test partition, the union of the rest as train."""
        if not 0 <= fold_index < self.k:
            raise DatasetError(f"fold index {fold_index} out of range for k={self.k}")
        test = self.folds[fold_index]
        train = tuple(r for i, fold in enumerate(self.folds) if i != fold_index for r in fold)
        return train, test


def make_folds(manifest: DatasetManifest, k: int, seed: int = DEFAULT_SEED) -> FoldSet:
    """Stratified k disjoint partitions covering the manifest."""
    if k < 2:
        raise DatasetError(f"k must be >= 2, got {k}")
    counts = manifest.class_counts()
    for wound_class, count in counts.items():
        if count < k:
            raise DatasetError(
                f"class {wound_class.value} has {count} samples, fewer than k={k} folds"
            )
    rng = np.random.default_rng(seed)
    folds: list[list[SampleRecord]] = [[] for _ in range(k)]
    for wound_class, group in sorted(manifest.by_class().items(), key=lambda kv: CLASS_ORDER.index(kv[0])):
        ordered = sorted(group, key=lambda r: r.sample_id)
        permutation = rng.permutation(len(ordered))
        for position, idx in enumerate(permutation):
            folds[position % k].append(ordered[idx])
    return FoldSet(folds=tuple(tuple(f) for f in folds), k=k, seed=seed)
