"""PGM images and CSV tables."""
from __future__ import annotations

import csv
import math

import numpy as np

__all__ = ["PGMError", "read_pgm", "write_pgm", "format_value", "write_csv"]


class PGMError(OSError):
    pass


def _tokens(data, count, pos):
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PGMError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos


def read_pgm(path):
    """Read a binary (P5) 8-bit PGM as floats in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise PGMError(f"{path}: not a binary PGM (P5)")
    try:
        (w, h, maxval), pos = _tokens(data, 3, 2)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise PGMError(f"{path}: malformed PGM header") from exc
    if w < 1 or h < 1 or not 0 < maxval < 256:
        raise PGMError(f"{path}: unsupported PGM geometry or maxval")
    pixels = data[pos + 1: pos + 1 + w * h]
    if len(pixels) != w * h:
        raise PGMError(f"{path}: expected {w * h} pixels, found {len(pixels)}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w).astype(float) / maxval


def write_pgm(path, image):
    """Write an image with values in [0, 1] as 8-bit P5 (values are clipped)."""
    img = np.clip(np.asarray(image, dtype=float), 0.0, 1.0)
    q = np.rint(img * 255.0).astype(np.uint8)
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(q.tobytes())


def format_value(v):
    """CSV cell: 17 significant digits for floats, 0/1 for booleans, blank for None."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def write_csv(fh, header, rows):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(row.get(k)) for k in header])
