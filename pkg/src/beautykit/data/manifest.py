"""Dataset manifests: the auditable record of every split.

A manifest is a list of (image path, domain, attributes, optional beauty
score) entries, persisted as newline-delimited JSON so splits can be diffed
and versioned. Translation manifests carry no scores; regression manifests
carry a score on every entry.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from ..errors import ValidationError
from ..perception import SCORE_MAX, SCORE_MIN


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    domain: str = "A"
    attributes: frozenset[str] = field(default_factory=frozenset)
    beauty_score: float | None = None

    def to_record(self) -> dict:
        record = {"path": self.path, "domain": self.domain,
                  "attributes": sorted(self.attributes)}
        if self.beauty_score is not None:
            record["beauty_score"] = self.beauty_score
        return record

    @classmethod
    def from_record(cls, record: dict) -> "ManifestEntry":
        return cls(
            path=record["path"],
            domain=record.get("domain", "A"),
            attributes=frozenset(record.get("attributes", ())),
            beauty_score=record.get("beauty_score"),
        )


class DatasetManifest:
    """Immutable ordered collection of manifest entries."""

    def __init__(self, entries: list[ManifestEntry], check_files: bool = True):
        self.entries = tuple(entries)
        scored = [e for e in self.entries if e.beauty_score is not None]
        if scored and len(scored) != len(self.entries):
            raise ValidationError(
                "manifest mixes scored and unscored entries; a regression "
                "manifest must carry a beauty score on every entry")
        for e in scored:
            if not (SCORE_MIN <= e.beauty_score <= SCORE_MAX):
                raise ValidationError(
                    f"beauty score {e.beauty_score} for {e.path} outside "
                    f"[{SCORE_MIN}, {SCORE_MAX}]")
        if check_files:
            missing = [e.path for e in self.entries if not Path(e.path).is_file()]
            if missing:
                raise ValidationError(
                    f"{len(missing)} manifest entries point to missing files, "
                    f"first: {missing[0]}")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> ManifestEntry:
        return self.entries[i]

    def has_scores(self) -> bool:
        return bool(self.entries) and self.entries[0].beauty_score is not None

    def paths(self) -> list[str]:
        return [e.path for e in self.entries]

    def validate_images(self) -> None:
        """Deep check: every image decodes to at least one pixel."""
        for e in self.entries:
            try:
                with Image.open(e.path) as img:
                    w, h = img.size
            except Exception as exc:
                raise ValidationError(f"{e.path}: cannot decode image ({exc})") from exc
            if w < 1 or h < 1:
                raise ValidationError(f"{e.path}: degenerate image {w}x{h}")

    def digest(self) -> str:
        """Content digest of the serialized entries, for checkpoint provenance."""
        h = hashlib.sha256()
        for e in self.entries:
            h.update(json.dumps(e.to_record(), sort_keys=True).encode())
            h.update(b"\n")
        return h.hexdigest()

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for e in self.entries:
                fh.write(json.dumps(e.to_record(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path, check_files: bool = True) -> "DatasetManifest":
        entries = []
        with Path(path).open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entries.append(ManifestEntry.from_record(json.loads(line)))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise ValidationError(
                        f"{path}:{line_no}: malformed manifest record ({exc})") from exc
        return cls(entries, check_files=check_files)
