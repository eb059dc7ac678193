"""Synthetic three-class brain phantoms.

Each phantom is an elliptical "brain" with a faint low-frequency texture, a
dark central band standing in for the third ventricle, and a bilateral pair
of bright comma-shaped blobs in the midbrain standing in for the swallowtail
sign:

* ``Normal``: blobs present, narrow central band;
* ``PD``: blobs absent; their intensity mass is spread evenly over the blob
  region instead, so the image mean does not change;
* ``MSA``: blobs present, central band widened.

Geometry jitter and noise are drawn from the seed alone, so two phantoms with
the same seed differ only where their class signatures differ.  Every image is
rescaled to the same mean intensity before noise and quantization.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pdnet.data.manifest import LABELS, DatasetManifest, Row
from pdnet.data.pgm import write_pgm
from pdnet.tensor import derived_seed, seeded_rng

MIN_SIZE = 32
TARGET_MEAN = 0.30
BLOB_GAIN = 0.35
MSA_BAND_WIDENING = 2.6
DEFAULT_NOISE = 8.0


@dataclass(frozen=True)
class PhantomParams:
    label: str
    seed: int = 0
    size: int = 64
    noise_std: float = DEFAULT_NOISE

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if self.size < MIN_SIZE:
            raise ValueError(f"phantom size must be >= {MIN_SIZE}, got {self.size}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")


def _soft_inside(r: np.ndarray, scale: float) -> np.ndarray:
    """~1 inside the unit level set ``r <= 1``, ~0 outside, ~1 px transition."""
    return 1.0 / (1.0 + np.exp(-np.clip((1.0 - r) * scale, -50, 50)))


def blob_centers(size: int, jitter: tuple[float, float] = (0.0, 0.0)) -> list[tuple[float, float]]:
    """(x, y) storage coordinates of the two blob heads."""
    c = (size - 1) / 2
    ox, oy = jitter
    return [(c + ox + side * 0.13 * size, c + oy + 0.16 * size) for side in (-1, 1)]


def blob_region_mask(size: int, jitter: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    mask = np.zeros((size, size), dtype=bool)
    for bx, by in blob_centers(size, jitter):
        mask |= (xx - bx) ** 2 + (yy - by) ** 2 <= (0.10 * size) ** 2
    return mask


def _jitter(u: np.ndarray, s: int) -> tuple[float, float]:
    return (0.02 * s * u[2], 0.02 * s * u[3])


def render_phantom(params: PhantomParams) -> np.ndarray:
    """Noise-free float image in [0, ~1] before quantization."""
    return _render(params)[0]


def _render(params: PhantomParams):
    s = params.size
    rng = seeded_rng(params.seed)
    u = rng.uniform(-1.0, 1.0, 10)
    c = (s - 1) / 2
    ox, oy = _jitter(u, s)
    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64)

    ax, ay = 0.40 * s * (1 + 0.05 * u[0]), 0.45 * s * (1 + 0.05 * u[1])
    r = np.sqrt(((xx - c - ox) / ax) ** 2 + ((yy - c - oy) / ay) ** 2)
    texture = 1.0 + 0.06 * np.sin(2 * np.pi * ((1 + u[5]) * xx / s + u[6])) \
        * np.cos(2 * np.pi * ((1 + u[7]) * yy / s + u[8]))
    tissue = (0.55 + 0.05 * u[4]) * texture * _soft_inside(r, min(ax, ay))

    band_w = 0.035 * s * (1 + 0.15 * u[9])
    if params.label == "MSA":
        band_w *= MSA_BAND_WIDENING
    band_h = 0.14 * s
    rb = np.sqrt(((xx - c - ox) / band_w) ** 2 + ((yy - c - oy + 0.05 * s) / band_h) ** 2)
    tissue = tissue * (1.0 - 0.75 * _soft_inside(rb, band_w))

    region = blob_region_mask(s, (ox, oy))
    blobs = np.zeros((s, s))
    for side, (bx, by) in zip((-1, 1), blob_centers(s, (ox, oy))):
        head = np.exp(-((xx - bx) ** 2 + (yy - by) ** 2) / (2 * (0.025 * s) ** 2))
        tx, ty = bx + side * 0.03 * s, by - 0.045 * s
        tail = 0.7 * np.exp(-((xx - tx) ** 2 + (yy - ty) ** 2) / (2 * (0.017 * s) ** 2))
        blobs += head + tail
    blobs = BLOB_GAIN * blobs * region

    if params.label == "PD":
        signature = np.zeros((s, s))
        for bx, by in blob_centers(s, (ox, oy)):
            part = region & ((xx - bx) ** 2 + (yy - by) ** 2 <= (0.10 * s) ** 2)
            signature[part] = blobs[part].sum() / part.sum()
    else:
        signature = blobs
    # gain from class-independent totals so Normal and PD share it bit for bit
    gain = TARGET_MEAN * s * s / (tissue.sum() + blobs.sum())
    return (tissue + signature) * gain, rng


def generate_phantom(params: PhantomParams) -> np.ndarray:
    """Render ``params`` as a ``(size, size)`` uint8 image."""
    img, rng = _render(params)
    noisy = img * 255.0 + params.noise_std * rng.standard_normal(img.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def phantom_seed(seed: int, label: str, index: int) -> int:
    return derived_seed(seed, LABELS.index(label), index)


def generate_dataset(per_class: int, out_dir: str | os.PathLike, seed: int = 0, size: int = 64,
                     noise_std: float = DEFAULT_NOISE) -> DatasetManifest:
    """Write ``3 * per_class`` phantoms as ``<label>_<index>.pgm`` into ``out_dir``.

    The returned manifest is rooted at ``out_dir`` and leaves splits unassigned.
    """
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for label in LABELS:
        for i in range(per_class):
            name = f"{label.lower()}_{i:05d}.pgm"
            img = generate_phantom(PhantomParams(label, phantom_seed(seed, label, i), size, noise_std))
            write_pgm(img, out / name)
            rows.append(Row(name, label))
    return DatasetManifest(rows, out)
