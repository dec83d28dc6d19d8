"""Grayscale PGM/PNG reading and writing with intensities mapped to [0, 1]."""

from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image


class ImageFormatError(ValueError):
    pass


def _read_pgm(data):
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < 4:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte ends the header
    magic, w, h, maxval = tokens
    if magic != b"P5":
        raise ImageFormatError(f"unsupported PNM type {magic.decode(errors='replace')}; only P5 is read")
    w, h, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"invalid PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    need = w * h * dtype.itemsize
    if len(data) - pos < need:
        raise ImageFormatError(f"truncated PGM data: expected {need} bytes, found {len(data) - pos}")
    arr = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).reshape(h, w)
    return arr.astype(np.float64) / maxval


def load_image(path):
    """Read a grayscale PGM (P5) or PNG file into a float image on [0, 1]."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P5", b"P6", b"P2", b"P3", b"P1", b"P4"):
        return _read_pgm(data)
    if data[:8] != b"\x89PNG\r\n\x1a\n":
        raise ImageFormatError(f"{path}: unsupported image format")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("L", "1"):
                return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
            if mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64)
                return arr / 65535.0
    except OSError as exc:
        raise ImageFormatError(f"{path}: unreadable PNG ({exc})") from exc
    raise ImageFormatError(f"{path}: color or unsupported PNG mode {mode!r}; convert to grayscale first")


def quantize(u, bits=8):
    maxval = (1 << bits) - 1
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
    # round half up
    return np.floor(u * maxval + 0.5).astype(np.uint16 if bits == 16 else np.uint8)


def atomic_write_bytes(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_image(u, path, bits=8):
    """Clamp to [0, 1], quantize and write PGM or PNG (chosen by extension)."""
    if bits not in (8, 16):
        raise ValueError("bit depth must be 8 or 16")
    path = Path(path)
    q = quantize(u, bits)
    ext = path.suffix.lower()
    if ext == ".pgm":
        h, w = q.shape
        header = f"P5\n{w} {h}\n{(1 << bits) - 1}\n".encode()
        body = q.astype(">u2").tobytes() if bits == 16 else q.tobytes()
        atomic_write_bytes(path, header + body)
    elif ext == ".png":
        im = Image.fromarray(q)
        buf = io.BytesIO()
        im.save(buf, format="PNG")
        atomic_write_bytes(path, buf.getvalue())
    else:
        raise ImageFormatError(f"unsupported output extension {ext!r}; use .pgm or .png")
