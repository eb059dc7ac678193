"""Phantom generation, PGM I/O, manifests and splits."""
from pdnet.data.manifest import LABELS, SPLITS, DatasetManifest, Row, load_manifest, save_manifest
from pdnet.data.pgm import read_pgm, write_pgm
from pdnet.data.phantom import PhantomParams, generate_dataset, generate_phantom
from pdnet.data.split import DEFAULT_RATIOS, SplitRatios, split_dataset

__all__ = [
    "DEFAULT_RATIOS", "LABELS", "SPLITS", "DatasetManifest", "PhantomParams", "Row",
    "SplitRatios", "generate_dataset", "generate_phantom", "load_manifest", "read_pgm",
    "save_manifest", "split_dataset", "write_pgm",
]
