"""Binary 8-bit grayscale PGM (P5, maxval 255)."""
from __future__ import annotations

import os

import numpy as np

from pdnet.errors import FormatError

_WHITESPACE = b" \t\n\r\v\f"


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments.

    Returns the tokens and the offset just past the final token.
    """
    tokens, i, n = [], 0, len(data)
    while len(tokens) < count:
        while i < n and data[i] in _WHITESPACE:
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] not in b"\r\n":
                i += 1
            continue
        if i >= n:
            raise FormatError("truncated PGM header")
        start = i
        while i < n and data[i] not in _WHITESPACE and data[i] != ord("#"):
            i += 1
        tokens.append(data[start:i])
    return tokens, i


def decode_pgm(data: bytes) -> np.ndarray:
    if data[:2] != b"P5":
        raise FormatError(f"unsupported PGM variant {data[:2]!r}; only binary P5 is read")
    tokens, pos = _header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"malformed PGM header {tokens!r}") from None
    if width < 1 or height < 1:
        raise FormatError(f"bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"maxval {maxval} unsupported; expected 255")
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FormatError("missing whitespace after PGM maxval")
    pixels = data[pos + 1:pos + 1 + width * height]
    if len(pixels) < width * height:
        raise FormatError(f"truncated pixel data: header declares {width}x{height} = "
                          f"{width * height} bytes, found {len(pixels)}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width).copy()


def encode_pgm(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise FormatError(f"PGM needs a 2-D uint8 image, got {img.dtype} {img.shape}")
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Load a P5 file as an ``(height, width)`` uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        return decode_pgm(data)
    except FormatError as e:
        raise FormatError(f"{os.fspath(path)}: {e}") from None


def write_pgm(img: np.ndarray, path: str | os.PathLike) -> None:
    data = encode_pgm(img)
    with open(path, "wb") as fh:
        fh.write(data)
