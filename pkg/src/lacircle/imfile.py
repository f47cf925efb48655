"""Minimal Netpbm readers/writers plus PNG access through Pillow.

Arrays are always ``(height, width)``; ``uint8`` for gray, ``bool`` for
bitmaps and ``uint8`` of shape ``(height, width, 3)`` for color.
"""

from __future__ import annotations

import os
import re

import numpy as np

from .errors import ImageFormatError

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_header(buf: bytes, ntokens: int) -> tuple[list[int], int]:
    """Parse ``ntokens`` integers after the magic; returns (values, offset of raster)."""
    pos = 2
    values = []
    for _ in range(ntokens):
        m = _TOKEN.match(buf, pos)
        if m is None:
            raise ImageFormatError("truncated Netpbm header")
        try:
            values.append(int(m.group(1)))
        except ValueError:
            raise ImageFormatError(f"bad header token {m.group(1)!r}") from None
        pos = m.end()
    # exactly one whitespace byte separates header and binary raster
    return values, pos + 1


def _check_dims(width: int, height: int) -> None:
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"zero-dimension image ({width}x{height})")


def _ascii_values(buf: bytes, offset: int) -> list[bytes]:
    body = re.sub(rb"#[^\n]*", b"", buf[offset - 1:])
    return body.split()


def parse_pgm(buf: bytes) -> np.ndarray:
    magic = buf[:2]
    if magic not in (b"P5", b"P2"):
        raise ImageFormatError(f"not a PGM file (magic {magic!r})")
    (width, height, maxval), offset = _read_header(buf, 3)
    _check_dims(width, height)
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"invalid maxval {maxval}")
    n = width * height
    if magic == b"P2":
        vals = _ascii_values(buf, offset)
        if len(vals) < n:
            raise ImageFormatError("truncated PGM raster")
        data = np.array([int(v) for v in vals[:n]], dtype=np.int64)
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        raw = buf[offset:offset + n * dtype.itemsize]
        if len(raw) < n * dtype.itemsize:
            raise ImageFormatError("truncated PGM raster")
        data = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    if maxval != 255:
        data = (data * 255 * 2 + maxval) // (2 * maxval)
    return np.clip(data, 0, 255).astype(np.uint8).reshape(height, width)


def format_pgm(gray: np.ndarray) -> bytes:
    h, w = gray.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(gray, dtype=np.uint8).tobytes()


def parse_pbm(buf: bytes) -> np.ndarray:
    """Decode P4 (or P1); bit 1 is foreground."""
    magic = buf[:2]
    if magic not in (b"P4", b"P1"):
        raise ImageFormatError(f"not a PBM file (magic {magic!r})")
    (width, height), offset = _read_header(buf, 2)
    _check_dims(width, height)
    if magic == b"P1":
        body = re.sub(rb"#[^\n]*|\s", b"", buf[offset - 1:])
        if len(body) < width * height:
            raise ImageFormatError("truncated PBM raster")
        bits = np.frombuffer(body[:width * height], dtype=np.uint8) == ord("1")
        return bits.reshape(height, width)
    stride = (width + 7) // 8
    raw = buf[offset:offset + stride * height]
    if len(raw) < stride * height:
        raise ImageFormatError("truncated PBM raster")
    packed = np.frombuffer(raw, dtype=np.uint8).reshape(height, stride)
    return np.unpackbits(packed, axis=1)[:, :width].astype(bool)


def format_pbm(bits: np.ndarray) -> bytes:
    h, w = bits.shape
    return b"P4\n%d %d\n" % (w, h) + np.packbits(bits.astype(np.uint8), axis=1).tobytes()


def parse_ppm(buf: bytes) -> np.ndarray:
    if buf[:2] != b"P6":
        raise ImageFormatError(f"not a binary PPM file (magic {buf[:2]!r})")
    (width, height, maxval), offset = _read_header(buf, 3)
    _check_dims(width, height)
    if maxval != 255:
        raise ImageFormatError("only 8-bit PPM is supported")
    n = width * height * 3
    raw = buf[offset:offset + n]
    if len(raw) < n:
        raise ImageFormatError("truncated PPM raster")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3).copy()


def format_ppm(rgb: np.ndarray) -> bytes:
    h, w, _ = rgb.shape
    return b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes()


def luma(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma, rounded half up, computed in exact integer arithmetic."""
    rgb = rgb.astype(np.int64)
    y = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return y.astype(np.uint8)


def _read_png(path: str) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        im.load()
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8).copy()
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.int64)
            return ((arr * 255 * 2 + 65535) // (2 * 65535)).clip(0, 255).astype(np.uint8)
        if im.mode == "1":
            return np.where(np.asarray(im, dtype=bool), 255, 0).astype(np.uint8)
        if im.mode == "LA":
            return np.asarray(im, dtype=np.uint8)[..., 0].copy()
        return luma(np.asarray(im.convert("RGB"), dtype=np.uint8))


def read_gray(path: str | os.PathLike) -> np.ndarray:
    """Read a PGM/PPM/PNG file as an 8-bit luminance array."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(8)
            fh.seek(0)
            if head.startswith(PNG_MAGIC):
                buf = None
            else:
                buf = fh.read()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc.strerror}") from exc
    if buf is None:
        try:
            gray = _read_png(path)
        except ImageFormatError:
            raise
        except Exception as exc:  # Pillow raises a zoo of types
            raise ImageFormatError(f"cannot decode PNG {path}: {exc}") from exc
    elif buf[:2] in (b"P5", b"P2"):
        gray = parse_pgm(buf)
    elif buf[:2] == b"P6":
        gray = luma(parse_ppm(buf))
    else:
        raise ImageFormatError(f"unsupported image format: {path}")
    if gray.size == 0:
        raise ImageFormatError(f"zero-dimension image: {path}")
    return gray


def write_gray(path: str | os.PathLike, gray: np.ndarray) -> None:
    path = os.fspath(path)
    if path.lower().endswith(".png"):
        from PIL import Image

        Image.fromarray(np.ascontiguousarray(gray, dtype=np.uint8)).save(path)
    else:
        with open(path, "wb") as fh:
            fh.write(format_pgm(gray))


def write_rgb(path: str | os.PathLike, rgb: np.ndarray) -> None:
    path = os.fspath(path)
    if path.lower().endswith(".png"):
        from PIL import Image

        Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8)).save(path)
    else:
        with open(path, "wb") as fh:
            fh.write(format_ppm(rgb))


def read_bitmap(path: str | os.PathLike) -> np.ndarray:
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_pbm(buf)


def write_bitmap(path: str | os.PathLike, bits: np.ndarray) -> None:
    with open(os.fspath(path), "wb") as fh:
        fh.write(format_pbm(bits))
