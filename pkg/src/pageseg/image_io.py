"""Reading and writing images, masks, and probability maps.

Supported formats: PNG (via Pillow) and binary PPM/PGM (P6/P5, maxval 255).
Masks serialize as PGM with values {0, 255}; probability maps quantize to
0-255 PGM.  All writes are atomic (temp file + rename).
"""

from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import MissingImage, ParseError

__all__ = [
    "read_image",
    "write_image",
    "write_mask_pgm",
    "read_mask_pgm",
    "write_probmap_pgm",
    "read_probmap_pgm",
    "atomic_write_bytes",
    "atomic_write_text",
]


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _read_pnm(data: bytes, path: str) -> np.ndarray:
    # Header: magic, width, height, maxval, separated by whitespace/comments.
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("truncated PNM header", path=path)
        return data[start:pos]

    magic = token()
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"unsupported PNM magic {magic!r}", path=path)
    width = int(token())
    height = int(token())
    maxval = int(token())
    if maxval != 255:
        raise ParseError(f"only maxval 255 supported, got {maxval}", path=path)
    pos += 1  # single whitespace after maxval
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    raw = data[pos : pos + need]
    if len(raw) != need:
        raise ParseError("truncated PNM pixel data", path=path)
    arr = np.frombuffer(raw, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width)
    return arr.reshape(height, width, 3)


def read_image(path) -> np.ndarray:
    """Load a PNG/PPM/PGM image as uint8, shape (H, W) or (H, W, 3)."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise MissingImage(f"cannot open image {path}: {e}") from e
    if data[:2] in (b"P5", b"P6"):
        return _read_pnm(data, str(path))
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.mode in ("L", "I;16", "I"):
                im = im.convert("L")
                return np.asarray(im, dtype=np.uint8)
            im = im.convert("RGB")
            return np.asarray(im, dtype=np.uint8)
    except Exception as e:
        raise MissingImage(f"cannot decode image {path}: {e}") from e


def _encode_pnm(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr, dtype=np.uint8)
    if arr.ndim == 2:
        magic = b"P5"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot encode array of shape {arr.shape} as PNM")
    h, w = arr.shape[:2]
    return magic + b"\n%d %d\n255\n" % (w, h) + arr.tobytes()


def write_image(path, arr: np.ndarray) -> None:
    """Write a uint8 image; format chosen by extension (.png/.ppm/.pgm)."""
    path = Path(path)
    arr = np.asarray(arr, dtype=np.uint8)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pgm", ".pnm"):
        atomic_write_bytes(path, _encode_pnm(arr))
    elif suffix == ".png":
        buf = io.BytesIO()
        Image.fromarray(arr).save(buf, format="PNG")
        atomic_write_bytes(path, buf.getvalue())
    else:
        raise ValueError(f"unsupported image extension {suffix!r}")


def write_mask_pgm(path, mask: np.ndarray) -> None:
    mask = np.asarray(mask, dtype=bool)
    atomic_write_bytes(path, _encode_pnm(mask.astype(np.uint8) * 255))


def read_mask_pgm(path) -> np.ndarray:
    arr = read_image(path)
    if arr.ndim != 2:
        raise ParseError("mask PGM must be single channel", path=str(path))
    return arr >= 128


def write_probmap_pgm(path, p: np.ndarray) -> None:
    p = np.asarray(p, dtype=float)
    q = np.rint(np.clip(p, 0.0, 1.0) * 255.0).astype(np.uint8)
    atomic_write_bytes(path, _encode_pnm(q))


def read_probmap_pgm(path) -> np.ndarray:
    arr = read_image(path)
    if arr.ndim != 2:
        raise ParseError("probability map PGM must be single channel", path=str(path))
    return arr.astype(float) / 255.0
