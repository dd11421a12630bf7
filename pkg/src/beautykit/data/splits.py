"""Split builders: attribute-driven A/B partition and the scored regression split."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, ValidationError
from ..perception import SCORE_MAX, SCORE_MIN
from .manifest import DatasetManifest, ManifestEntry

# Attributes reported to correlate positively with perceived attractiveness;
# override per project through configuration.
DEFAULT_POSITIVE_ATTRIBUTES = frozenset({
    "Arched_Eyebrows",
    "Heavy_Makeup",
    "High_Cheekbones",
    "Wearing_Lipstick",
})


@dataclass(frozen=True)
class AttributeTable:
    """Per-image attribute presence plus the table's full column vocabulary."""

    columns: tuple[str, ...]
    images: dict[str, frozenset[str]]

    def __len__(self) -> int:
        return len(self.images)


def parse_attribute_table(path: str | Path) -> AttributeTable:
    """Read an attribute table from CSV, JSON, or the count-header text format.

    Accepted shapes:
      - CSV with an image column followed by attribute columns of 0/1 or -1/1;
      - JSON object mapping image name to a list of present attributes;
      - text file whose first line is a row count, second line the attribute
        names, then one row per image with -1/1 flags.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        images = {name: frozenset(attrs) for name, attrs in data.items()}
        columns = tuple(sorted(set().union(*images.values()) if images else ()))
        return AttributeTable(columns=columns, images=images)

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty attribute table")
    first = lines[0].split()
    if len(first) == 1 and first[0].isdigit():
        # count header + names line + space-separated rows
        columns = tuple(lines[1].split())
        images = {}
        for ln in lines[2:]:
            parts = ln.split()
            name, values = parts[0], parts[1:]
            if len(values) != len(columns):
                raise ValidationError(
                    f"{path}: row for {name} has {len(values)} values, "
                    f"expected {len(columns)}")
            images[name] = frozenset(
                col for col, v in zip(columns, values) if v in ("1", "+1"))
        return AttributeTable(columns=columns, images=images)

    reader = csv.reader(text.splitlines())
    header = next(reader)
    columns = tuple(h.strip() for h in header[1:])
    images = {}
    for row in reader:
        if not row:
            continue
        name = row[0].strip()
        images[name] = frozenset(
            col for col, v in zip(columns, row[1:]) if v.strip() in ("1", "+1"))
    return AttributeTable(columns=columns, images=images)


def build_translation_split(
    table: AttributeTable,
    positive_attributes: frozenset[str] | set[str] = DEFAULT_POSITIVE_ATTRIBUTES,
    image_root: str | Path | None = None,
    partitions: dict[str, int] | None = None,
    include_partitions: tuple[int, ...] = (0, 1),
    check_files: bool = True,
) -> tuple[DatasetManifest, DatasetManifest]:
    """Partition images into target domain A and reference domain B.

    An image lands in B iff it carries at least one of the positive
    attributes, in A otherwise; the two manifests are disjoint and jointly
    cover the table. ``partitions`` optionally restricts the split to listed
    partition ids (0=train, 1=val, 2=test); including both 0 and 1 merges
    train and validation.
    """
    if not table.images:
        raise ValidationError("attribute table is empty")
    positive = frozenset(positive_attributes)
    if not positive:
        raise ValidationError("positive attribute set is empty")
    missing = sorted(positive - set(table.columns))
    if missing:
        raise ConfigurationError(
            f"attribute table has no column(s) {', '.join(missing)}; "
            f"available: {', '.join(table.columns)}")

    root = Path(image_root) if image_root else None
    entries_a, entries_b = [], []
    for name in sorted(table.images):
        if partitions is not None and partitions.get(name) not in include_partitions:
            continue
        attrs = table.images[name]
        full_path = str(root / name) if root else name
        if attrs & positive:
            entries_b.append(ManifestEntry(path=full_path, domain="B", attributes=attrs))
        else:
            entries_a.append(ManifestEntry(path=full_path, domain="A", attributes=attrs))
    return (DatasetManifest(entries_a, check_files=check_files),
            DatasetManifest(entries_b, check_files=check_files))


def build_regression_split(
    scored_images: list[tuple[str, float]],
    train_fraction: float = 0.6,
    seed: int = 0,
    check_files: bool = True,
) -> tuple[DatasetManifest, DatasetManifest]:
    """Deterministic shuffled train/test split of (path, score) pairs.

    The train size is round(train_fraction * N); the permutation is fixed by
    the seed, so repeated calls partition identically.
    """
    if not 0 < train_fraction < 1:
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    for path, score in scored_images:
        if not (SCORE_MIN <= score <= SCORE_MAX):
            raise ValidationError(
                f"beauty score {score} for {path} outside [{SCORE_MIN}, {SCORE_MAX}]")

    order = np.random.default_rng(seed).permutation(len(scored_images))
    n_train = int(round(train_fraction * len(scored_images)))
    make = lambda idx: DatasetManifest(
        [ManifestEntry(path=scored_images[i][0], domain="A",
                       beauty_score=float(scored_images[i][1]))
         for i in idx],
        check_files=check_files)
    return make(order[:n_train]), make(order[n_train:])


def read_score_file(path: str | Path) -> list[tuple[str, float]]:
    """Read (image path, score) pairs from CSV (path,score) or JSON mapping."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return [(name, float(score)) for name, score in json.loads(text).items()]
    pairs = []
    for row in csv.reader(text.splitlines()):
        if not row or row[0].strip().lower() in ("image", "path", "file"):
            continue
        pairs.append((row[0].strip(), float(row[1])))
    return pairs


def read_partition_file(path: str | Path) -> dict[str, int]:
    """Read an image -> partition-id map (0=train, 1=val, 2=test).

    Accepts JSON ({"img.jpg": 0, ...}), CSV (name,id), or whitespace-separated
    text (name id per line).
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return {name: int(v) for name, v in json.loads(text).items()}
    partitions: dict[str, int] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        row = [c.strip() for c in (line.split(",") if "," in line else line.split())]
        if len(row) < 2 or row[0].lower() in ("image", "path", "file"):
            continue
        partitions[row[0]] = int(row[1])
    return partitions
