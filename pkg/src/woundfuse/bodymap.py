"""Body map registry: named anatomical regions and one-hot location encodings.

The registry maps integer body-map codes to region metadata. Location codes
are encoded as one-hot vectors whose index is the rank of the code in
ascending code order, so sparse code ranges still produce dense vectors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SIDES = ("left", "right", "midline", "n/a")
VIEWS = ("front", "back", "n/a")

DEFAULT_REGISTRY_RESOURCE = "bodymap_484.csv"
FULL_REGISTRY_SIZE = 484


class BodyMapError(ValueError):
    """Raised for malformed registry files, rows, or encodings."""


@dataclass(frozen=True)
class BodyMapRegion:
    code: int
    name: str
    side: str = "n/a"
    view: str = "n/a"

    def __post_init__(self):
        if not isinstance(self.code, int) or self.code < 1:
            raise BodyMapError(f"region code must be a positive integer, got {self.code!r}")
        if not self.name or not self.name.strip():
            raise BodyMapError(f"region name must be nonempty for code {self.code}")
        if self.side not in SIDES:
            raise BodyMapError(f"region side must be one of {SIDES}, got {self.side!r}")
        if self.view not in VIEWS:
            raise BodyMapError(f"region view must be one of {VIEWS}, got {self.view!r}")


class BodyMapRegistry:
    """Immutable collection of regions with a canonical encoding order.

    The encoding index of a code is its position in the ascending-by-code
    ordering, a bijection codes -> [0, len(registry)).
    """

    def __init__(self, regions: Iterable[BodyMapRegion]):
        ordered = sorted(regions, key=lambda r: r.code)
        seen: dict[int, BodyMapRegion] = {}
        for region in ordered:
            if region.code in seen:
                raise BodyMapError(f"duplicate body-map code {region.code}")
            seen[region.code] = region
        if not ordered:
            raise BodyMapError("registry must contain at least one region")
        self._regions = tuple(ordered)
        self._order = {r.code: i for i, r in enumerate(self._regions)}
        self._by_name = {r.name: r.code for r in self._regions}

    @property
    def regions(self) -> tuple[BodyMapRegion, ...]:
        return self._regions

    @property
    def codes(self) -> tuple[int, ...]:
        return tuple(r.code for r in self._regions)

    def __len__(self) -> int:
        return len(self._regions)

    def __contains__(self, code: int) -> bool:
        return code in self._order

    def region(self, code: int) -> BodyMapRegion:
        try:
            return self._regions[self._order[code]]
        except KeyError:
            raise BodyMapError(f"unknown body-map code {code}") from None

    def encoding_order(self, code: int) -> int:
        try:
            return self._order[code]
        except KeyError:
            raise BodyMapError(f"unknown body-map code {code}") from None

    def lookup_code(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise BodyMapError(f"unknown region name {name!r}") from None


def _parse_row(row: Sequence[str], line_no: int) -> BodyMapRegion:
    if len(row) < 2:
        raise BodyMapError(f"row {line_no}: expected code,name[,side,view], got {row!r}")
    raw_code = row[0].strip()
    try:
        code = int(raw_code)
    except ValueError:
        raise BodyMapError(f"row {line_no}: code {raw_code!r} is not an integer") from None
    if code < 1:
        raise BodyMapError(f"row {line_no}: code must be >= 1, got {code}")
    name = row[1].strip()
    if not name:
        raise BodyMapError(f"row {line_no}: empty region name for code {code}")
    side = row[2].strip() if len(row) > 2 and row[2].strip() else "n/a"
    view = row[3].strip() if len(row) > 3 and row[3].strip() else "n/a"
    try:
        return BodyMapRegion(code=code, name=name, side=side, view=view)
    except BodyMapError as exc:
        raise BodyMapError(f"row {line_no}: {exc}") from None


def load_registry(path: str | Path) -> BodyMapRegistry:
    """Load a registry from a UTF-8 CSV with header ``code,name,side,view``.

    Comment lines start with ``#``. Errors carry the 1-based line number of
    the offending row.
    """
    path = Path(path)
    if not path.is_file():
        raise BodyMapError(f"registry file not found: {path}")
    regions: list[BodyMapRegion] = []
    seen: dict[int, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        header_skipped = False
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            if not header_skipped:
                header_skipped = True
                if row[0].strip().lower() == "code":
                    continue
                # fall through: headerless files are accepted
            region = _parse_row(row, line_no)
            if region.code in seen:
                raise BodyMapError(
                    f"row {line_no}: duplicate code {region.code} (first seen on row {seen[region.code]})"
                )
            seen[region.code] = line_no
            regions.append(region)
    return BodyMapRegistry(regions)


def default_registry() -> BodyMapRegistry:
    """The shipped 484-region registry."""
    ref = resources.files("woundfuse.data").joinpath(DEFAULT_REGISTRY_RESOURCE)
    with resources.as_file(ref) as path:
        return load_registry(path)


def encode_location(code: int, registry: BodyMapRegistry) -> np.ndarray:
    """One-hot encode a body-map code over the registry's encoding order."""
    index = registry.encoding_order(code)
    vector = np.zeros(len(registry), dtype=np.float32)
    vector[index] = 1.0
    return vector


def decode_location(encoding: np.ndarray, registry: BodyMapRegistry) -> int:
    """Invert :func:`encode_location`; rejects anything that is not one-hot."""
    vector = np.asarray(encoding)
    if vector.ndim != 1 or vector.shape[0] != len(registry):
        raise BodyMapError(
            f"encoding must be a vector of length {len(registry)}, got shape {vector.shape}"
        )
    hot = np.flatnonzero(vector == 1.0)
    if hot.size != 1 or not np.all((vector == 0.0) | (vector == 1.0)):
        raise BodyMapError("malformed encoding: expected exactly one entry equal to 1 and the rest 0")
    return registry.regions[int(hot[0])].code
