"""Dataset manifests: CSV files with columns ``path,label,split``.

Paths are relative to the directory that holds the manifest.  An empty
``split`` field marks a row that has not been assigned yet.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from pdnet.errors import ManifestError

LABELS = ("PD", "MSA", "Normal")
SPLITS = ("train", "val", "test")
HEADER = ("path", "label", "split")


@dataclass(frozen=True)
class Row:
    path: str
    label: str
    split: str = ""


@dataclass
class DatasetManifest:
    rows: list[Row] = field(default_factory=list)
    root: Path = Path(".")

    def __post_init__(self):
        self.root = Path(self.root)
        seen: set[str] = set()
        for i, row in enumerate(self.rows, start=1):
            if row.label not in LABELS:
                raise ManifestError(f"row {i} ({row.path}): unknown label {row.label!r}")
            if row.split and row.split not in SPLITS:
                raise ManifestError(f"row {i} ({row.path}): unknown split {row.split!r}")
            if row.path in seen:
                raise ManifestError(f"row {i}: duplicate path {row.path!r}")
            seen.add(row.path)

    def __len__(self):
        return len(self.rows)

    def resolve(self, row: Row) -> Path:
        return self.root / row.path

    def split(self, name: str) -> list[Row]:
        return [r for r in self.rows if r.split == name]

    def relocated(self, new_root: str | os.PathLike) -> DatasetManifest:
        """Same rows with paths rewritten relative to ``new_root``."""
        new_root = Path(new_root)
        rows = [replace(r, path=Path(os.path.relpath(self.resolve(r), new_root)).as_posix())
                for r in self.rows]
        return DatasetManifest(rows, new_root)

    def validate_files(self) -> None:
        for i, row in enumerate(self.rows, start=1):
            if not self.resolve(row).is_file():
                raise ManifestError(f"row {i}: missing file {self.resolve(row)}")


def manifest_to_csv(manifest: DatasetManifest) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for row in manifest.rows:
        writer.writerow((row.path, row.label, row.split))
    return buf.getvalue()


def save_manifest(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    """Write ``manifest`` to ``path``; row paths are rewritten relative to its directory."""
    path = Path(path)
    out = manifest.relocated(path.parent)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(manifest_to_csv(out))


def load_manifest(path: str | os.PathLike, check_files: bool = False) -> DatasetManifest:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != HEADER:
            raise ManifestError(f"{path}: expected header {','.join(HEADER)}, got {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != 3:
                raise ManifestError(f"{path}: row {lineno - 1} (line {lineno}) has {len(rec)} fields")
            p, label, split = rec
            if label not in LABELS:
                raise ManifestError(f"{path}: row {lineno - 1} (line {lineno}): unknown label {label!r}")
            if split and split not in SPLITS:
                raise ManifestError(f"{path}: row {lineno - 1} (line {lineno}): unknown split {split!r}")
            rows.append(Row(p, label, split))
    manifest = DatasetManifest(rows, path.parent)
    if check_files:
        manifest.validate_files()
    return manifest
