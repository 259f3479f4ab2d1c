"""File codecs: EMB1 matrices, binary PGM frames, .flo flow fields, CSV
prediction matrices, and the plain key=value config format.

All binary layouts are little-endian and bit-exact round-trippers:

* EMB1: magic ``b"EMB1"``, u32 rows, u32 cols, then row-major float64.
* PGM:  binary ``P5`` with maxval <= 255; intensities map to [0, 1].
* flo:  float32 202021.25, i32 width, i32 height, then row-major
  interleaved (u1, u2) float32 pairs.

Malformed files raise :class:`CodecError` naming the byte offset or the
expected vs. actual length.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from knights.tvl1 import FlowField

__all__ = [
    "CodecError",
    "read_emb1",
    "write_emb1",
    "read_pgm",
    "write_pgm",
    "read_flo",
    "write_flo",
    "read_csv_preds",
    "write_csv_preds",
    "read_config",
]

EMB1_MAGIC = b"EMB1"
FLO_MAGIC = 202021.25  # spells "PIEH" when read as ascii bytes


class CodecError(ValueError):
    """A file violated one of the binary or text layouts above."""


def write_emb1(path, matrix) -> None:
    """Write a 2-D float64 matrix in the EMB1 layout."""
    m = np.ascontiguousarray(np.asarray(matrix, dtype=np.float64))
    if m.ndim != 2:
        raise ValueError(f"EMB1 stores 2-D matrices, got shape {m.shape}")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", EMB1_MAGIC, rows, cols))
        fh.write(m.astype("<f8").tobytes())


def read_emb1(path) -> np.ndarray:
    """Read an EMB1 matrix, validating magic and payload length."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise CodecError(
            f"{path}: EMB1 header needs 12 bytes, file has {len(data)}"
        )
    magic, rows, cols = struct.unpack("<4sII", data[:12])
    if magic != EMB1_MAGIC:
        raise CodecError(
            f"{path}: bad magic {magic!r} at byte offset 0, expected {EMB1_MAGIC!r}"
        )
    expected = 12 + 8 * rows * cols
    if len(data) != expected:
        raise CodecError(
            f"{path}: expected {expected} bytes for {rows}x{cols} float64, "
            f"got {len(data)}"
        )
    return np.frombuffer(data[12:], dtype="<f8").reshape(rows, cols).copy()


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM into float64 intensities in [0, 1]."""
    data = Path(path).read_bytes()
    tokens = []
    i = 0
    # header: magic, width, height, maxval, then exactly one whitespace byte
    while len(tokens) < 4 and i < len(data):
        c = data[i : i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        else:
            start = i
            while i < len(data) and not data[i : i + 1].isspace():
                i += 1
            tokens.append((data[start:i], start))
    if not tokens or tokens[0][0] != b"P5":
        found = tokens[0][0] if tokens else b""
        raise CodecError(
            f"{path}: bad magic {found!r} at byte offset 0, expected b'P5'"
        )
    if len(tokens) < 4:
        raise CodecError(f"{path}: truncated PGM header")
    try:
        width = int(tokens[1][0])
        height = int(tokens[2][0])
        maxval = int(tokens[3][0])
    except ValueError as exc:
        raise CodecError(f"{path}: non-numeric PGM header field: {exc}") from None
    if width < 1 or height < 1:
        raise CodecError(f"{path}: invalid dimensions {width}x{height}")
    if not (0 < maxval <= 255):
        raise CodecError(f"{path}: maxval {maxval} outside 1..255")
    pixel_start = i + 1  # the single whitespace after maxval
    expected = pixel_start + width * height
    if len(data) < expected:
        raise CodecError(
            f"{path}: expected {expected} bytes for {width}x{height} pixels, "
            f"got {len(data)}"
        )
    raw = np.frombuffer(data[pixel_start:expected], dtype=np.uint8)
    return raw.reshape(height, width).astype(np.float64) / maxval


def write_pgm(path, img) -> None:
    """Write [0, 1] intensities as a binary P5 PGM with maxval 255."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"PGM stores 2-D images, got shape {a.shape}")
    pixels = np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def write_flo(path, flow: FlowField) -> None:
    """Write a flow field in the Middlebury .flo layout."""
    h, w = flow.shape
    interleaved = np.empty((h, w, 2), dtype="<f4")
    interleaved[:, :, 0] = flow.u1
    interleaved[:, :, 1] = flow.u2
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", FLO_MAGIC, w, h))
        fh.write(interleaved.tobytes())


def read_flo(path) -> FlowField:
    """Read a .flo file, validating magic, dimensions and payload length."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise CodecError(f"{path}: .flo header needs 12 bytes, file has {len(data)}")
    magic, w, h = struct.unpack("<fii", data[:12])
    if magic != FLO_MAGIC:
        raise CodecError(
            f"{path}: bad magic {magic!r} at byte offset 0, expected {FLO_MAGIC}"
        )
    if w < 1 or h < 1:
        raise CodecError(f"{path}: invalid dimensions {w}x{h}")
    expected = 12 + 8 * w * h
    if len(data) != expected:
        raise CodecError(
            f"{path}: expected {expected} bytes for {w}x{h} flow, got {len(data)}"
        )
    planes = np.frombuffer(data[12:], dtype="<f4").reshape(h, w, 2)
    return FlowField(planes[:, :, 0].astype(np.float64), planes[:, :, 1].astype(np.float64))


def read_csv_preds(path) -> tuple[list[str], np.ndarray]:
    """Read a prediction matrix CSV: header of class ids, one row per crop."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            classes = next(reader)
        except StopIteration:
            raise CodecError(f"{path}: empty prediction CSV") from None
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(classes):
                raise CodecError(
                    f"{path}: line {line_no} has {len(row)} fields, "
                    f"header has {len(classes)}"
                )
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise CodecError(f"{path}: line {line_no}: {exc}") from None
    if not rows:
        raise CodecError(f"{path}: prediction CSV has a header but no rows")
    return [c.strip() for c in classes], np.asarray(rows, dtype=np.float64)


def write_csv_preds(path, classes, probs) -> None:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != len(classes):
        raise ValueError(
            f"probs shape {p.shape} does not match {len(classes)} classes"
        )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(classes))
        for row in p:
            writer.writerow([repr(float(x)) for x in row])


def read_config(path) -> dict[str, str]:
    """Parse a plain ``key = value`` config file; # starts a comment."""
    result: dict[str, str] = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(
                    f"{path}: line {line_no} is not a key=value pair: {raw.rstrip()!r}"
                )
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ValueError(f"{path}: line {line_no} has an empty key")
            result[key] = value.strip()
    return result
