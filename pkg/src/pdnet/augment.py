"""Rotation and mirroring of grayscale rasters, and dataset expansion.

Rotation math runs in a center-origin frame with y pointing up:

    x1 =  x0 cos a + y0 sin a
    y1 = -x0 sin a + y0 cos a

which turns a point clockwise by ``a`` degrees.  Images are stored row-major
with the origin at the top-left and y pointing down; ``to_center_frame`` and
``to_storage_frame`` convert between the two.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from pdnet.data.manifest import DatasetManifest, Row
from pdnet.data.pgm import read_pgm, write_pgm
from pdnet.errors import ManifestError


@dataclass(frozen=True)
class Point:
    x: float
    y: float


def normalize_angle(degrees: float) -> float:
    a = math.fmod(float(degrees), 360.0)
    if a < 0:
        a += 360.0
    return 0.0 if a == 360.0 else a


def _cos_sin(degrees: float) -> tuple[float, float]:
    a = normalize_angle(degrees)
    exact = {0.0: (1.0, 0.0), 90.0: (0.0, 1.0), 180.0: (-1.0, 0.0), 270.0: (0.0, -1.0)}
    if a in exact:
        return exact[a]
    rad = math.radians(a)
    return math.cos(rad), math.sin(rad)


def rotate_point(p: Point, degrees: float) -> Point:
    cos_a, sin_a = _cos_sin(degrees)
    return Point(p.x * cos_a + p.y * sin_a, -p.x * sin_a + p.y * cos_a)


@dataclass(frozen=True)
class ImageDims:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dims must be positive, got {self.width}x{self.height}")

    def corners(self) -> dict[str, Point]:
        """Left-top, right-top, left-bottom, right-bottom corners about the center."""
        w2, h2 = self.width / 2, self.height / 2
        return {"LT": Point(-w2, h2), "RT": Point(w2, h2), "LB": Point(-w2, -h2), "RB": Point(w2, -h2)}


def rotated_bounds(dims: ImageDims, degrees: float) -> ImageDims:
    """Canvas size that holds ``dims`` rotated by ``degrees``.

    Quarter turns swap or keep the source dims exactly; other angles take the
    larger extent of the two rotated diagonals and round up to the next
    integer with the same parity as the source dimension.
    """
    a = normalize_angle(degrees)
    if a in (0.0, 180.0):
        return ImageDims(dims.width, dims.height)
    if a in (90.0, 270.0):
        return ImageDims(dims.height, dims.width)
    rc = {k: rotate_point(p, a) for k, p in dims.corners().items()}
    des_w = max(abs(rc["RB"].x - rc["LT"].x), abs(rc["RT"].x - rc["LB"].x))
    des_h = max(abs(rc["RB"].y - rc["LT"].y), abs(rc["RT"].y - rc["LB"].y))
    return ImageDims(_round_up_same_parity(des_w, dims.width), _round_up_same_parity(des_h, dims.height))


def _round_up_same_parity(extent: float, source: int) -> int:
    # tolerance keeps float noise such as 100.00000000000001 from rounding up
    n = max(1, math.ceil(extent - 1e-9))
    # matching parity keeps the rotation center on the same sub-pixel phase as
    # the source, so a rotation and its inverse land back on the source grid
    return n + (n - source) % 2


def to_center_frame(col, row, dims: ImageDims):
    return col - (dims.width - 1) / 2, (dims.height - 1) / 2 - row


def to_storage_frame(x, y, dims: ImageDims):
    return x + (dims.width - 1) / 2, (dims.height - 1) / 2 - y


def rotate_image(img: np.ndarray, degrees: float, interp: str = "nearest", fill: int = 0) -> np.ndarray:
    """Rotate ``img`` clockwise by ``degrees`` about its center.

    Quarter turns are an exact index permutation.  Other angles inverse-map
    every destination pixel into the source and sample it with ``nearest``
    or ``bilinear`` interpolation; samples outside the source take ``fill``.
    """
    if interp not in ("nearest", "bilinear"):
        raise ValueError(f"unknown interpolation {interp!r}")
    a = normalize_angle(degrees)
    if a in (0.0, 90.0, 180.0, 270.0):
        return np.ascontiguousarray(np.rot90(img, k=-int(a // 90)))
    return _rotate_sampled(img, a, interp, fill)


def _rotate_sampled(img, a, interp, fill):
    src = ImageDims(img.shape[1], img.shape[0])
    dst = rotated_bounds(src, a)
    rows, cols = np.mgrid[0:dst.height, 0:dst.width].astype(np.float64)
    x, y = to_center_frame(cols, rows, dst)
    cos_a, sin_a = _cos_sin(-a)
    sx, sy = to_storage_frame(x * cos_a + y * sin_a, -x * sin_a + y * cos_a, src)
    out = np.full((dst.height, dst.width), fill, dtype=np.float64)
    if interp == "nearest":
        ci, ri = np.rint(sx).astype(np.int64), np.rint(sy).astype(np.int64)
        ok = (ci >= 0) & (ci < src.width) & (ri >= 0) & (ri < src.height)
        out[ok] = img[ri[ok], ci[ok]]
        return out.astype(img.dtype)
    c0, r0 = np.floor(sx).astype(np.int64), np.floor(sy).astype(np.int64)
    fc, fr = sx - c0, sy - r0
    ok = (sx >= -0.5) & (sx <= src.width - 0.5) & (sy >= -0.5) & (sy <= src.height - 0.5)
    padded = np.pad(img.astype(np.float64), 1, mode="edge")
    c0p, r0p = np.clip(c0 + 1, 0, src.width), np.clip(r0 + 1, 0, src.height)
    c1p, r1p = np.clip(c0 + 2, 0, src.width + 1), np.clip(r0 + 2, 0, src.height + 1)
    val = (padded[r0p, c0p] * (1 - fc) * (1 - fr) + padded[r0p, c1p] * fc * (1 - fr)
           + padded[r1p, c0p] * (1 - fc) * fr + padded[r1p, c1p] * fc * fr)
    out[ok] = val[ok]
    return np.clip(np.rint(out), 0, 255).astype(img.dtype)


MIRROR_AXES = ("vertical", "horizontal")


def mirror_coord(x: int, y: int, dims: ImageDims, axis: str) -> tuple[int, int]:
    """Mirror integer storage coordinates.  Each mirror is its own inverse."""
    if not (0 <= x < dims.width and 0 <= y < dims.height):
        raise ValueError(f"({x}, {y}) outside a {dims.width}x{dims.height} image")
    if axis == "vertical":
        return x, dims.height - y - 1
    if axis == "horizontal":
        return dims.width - x - 1, y
    raise ValueError(f"unknown mirror axis {axis!r}")


def mirror_image(img: np.ndarray, axis: str) -> np.ndarray:
    if axis == "vertical":
        return np.ascontiguousarray(img[::-1, :])
    if axis == "horizontal":
        return np.ascontiguousarray(img[:, ::-1])
    raise ValueError(f"unknown mirror axis {axis!r}")


@dataclass(frozen=True)
class Rotate:
    degrees: float

    @property
    def tag(self) -> str:
        return f"rot{normalize_angle(self.degrees):g}"

    def apply(self, img, interp="nearest", fill=0):
        return rotate_image(img, self.degrees, interp, fill)


@dataclass(frozen=True)
class Mirror:
    axis: str

    def __post_init__(self):
        if self.axis not in MIRROR_AXES:
            raise ValueError(f"unknown mirror axis {self.axis!r}")

    @property
    def tag(self) -> str:
        return f"mirror{self.axis[0]}"

    def apply(self, img, interp="nearest", fill=0):
        return mirror_image(img, self.axis)


PlanItem = Union[Rotate, Mirror]


def augment_dataset(manifest: DatasetManifest, plan: list[PlanItem], out_dir: str | os.PathLike,
                    interp: str = "nearest", fill: int = 0) -> DatasetManifest:
    """Write one transformed copy of every source image per plan item.

    Copies are named ``<stem>_<tag>.pgm`` in ``out_dir`` and inherit label and
    split.  The result lists the original rows first, then the new rows
    ordered by source path and plan index; it is rooted at ``out_dir``.
    """
    out = Path(out_dir)
    if not plan:
        return manifest.relocated(out)
    out.mkdir(parents=True, exist_ok=True)
    new_rows = []
    for row in sorted(manifest.rows, key=lambda r: r.path):
        src = manifest.resolve(row)
        try:
            img = read_pgm(src)
        except OSError as e:
            raise ManifestError(f"cannot read source image {src}: {e}") from e
        for item in plan:
            name = f"{Path(row.path).stem}_{item.tag}.pgm"
            write_pgm(item.apply(img, interp, fill), out / name)
            new_rows.append(Row(name, row.label, row.split))
    base = manifest.relocated(out)
    return DatasetManifest(base.rows + new_rows, out)
