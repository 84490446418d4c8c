"""Corpus manifests: JSON lists of icons with their sources and review state."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ManifestError, StorageError

STYLES = ("outline", "flat", "emoji")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    prompt: str = ""
    source_svg: str | None = None
    grid_png: str | None = None
    frame_count: int = 9
    style: str = "flat"
    accepted: bool | None = None  # human review verdict; None = not reviewed

    def __post_init__(self):
        if not self.id:
            raise ManifestError("entry id must be nonempty")
        if self.source_svg is None and self.grid_png is None:
            raise ManifestError(f"entry {self.id!r} needs source_svg or grid_png")
        if self.frame_count not in (4, 9):
            raise ManifestError(f"entry {self.id!r}: frame_count must be 4 or 9")
        if self.style not in STYLES:
            raise ManifestError(f"entry {self.id!r}: style must be one of {STYLES}")

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestEntry":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ManifestError(f"unknown manifest keys: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ManifestError(str(e)) from e


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...] = ()

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise ManifestError(f"duplicate ids: {sorted(dup)}")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def get(self, entry_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise KeyError(entry_id)

    def upsert(self, entry: ManifestEntry) -> "Manifest":
        """Replace the entry with the same id, or append."""
        out = [entry if e.id == entry.id else e for e in self.entries]
        if all(e.id != entry.id for e in self.entries):
            out.append(entry)
        return Manifest(tuple(out))

    def review(self, entry_id: str, accepted: bool) -> "Manifest":
        return self.upsert(replace(self.get(entry_id), accepted=accepted))

    def accepted(self) -> "Manifest":
        return Manifest(tuple(e for e in self.entries if e.accepted is not False))

    def dumps(self) -> str:
        return json.dumps({"entries": [asdict(e) for e in self.entries]}, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Manifest":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ManifestError(f"manifest is not valid JSON: {e}") from e
        if not isinstance(raw, dict) or not isinstance(raw.get("entries"), list):
            raise ManifestError('manifest must be an object with an "entries" list')
        return cls(tuple(ManifestEntry.from_dict(d) for d in raw["entries"]))

    def save(self, path) -> None:
        try:
            Path(path).write_text(self.dumps(), encoding="utf-8")
        except OSError as e:
            raise StorageError(f"cannot write manifest {path}: {e}") from e

    @classmethod
    def load(cls, path) -> "Manifest":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise StorageError(f"cannot read manifest {path}: {e}") from e
        return cls.loads(text)

    @classmethod
    def load_or_empty(cls, path) -> "Manifest":
        return cls.load(path) if Path(path).exists() else cls()
