"""
Binary field snapshots.

Layout: header struct '<4sB7q7dB' (magic, scheme tag, extents, spacings,
degree) followed by little-endian float64 coefficients, site-major with the
component index fastest.
"""
from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from src.domain.exterior import DIM, n_components
from src.domain.lattice import Grid, LatticeField
from src.errors import SnapshotFormatError

logger = logging.getLogger(__name__)

MAGIC = b"G2F1"
HEADER = struct.Struct("<4sB7q7dB")
SCHEME_TAGS = {"spectral": 0, "central": 1}
_TAG_SCHEMES = {tag: name for name, tag in SCHEME_TAGS.items()}


def encode_snapshot(field: LatticeField) -> bytes:
    grid = field.grid
    header = HEADER.pack(
        MAGIC,
        SCHEME_TAGS[grid.scheme],
        *grid.extents,
        *grid.spacings,
        field.degree,
    )
    body = np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C")
    return header + body


def decode_snapshot(data: bytes) -> LatticeField:
    if len(data) < HEADER.size:
        raise SnapshotFormatError(f"snapshot is {len(data)} bytes, shorter than its header")
    unpacked = HEADER.unpack_from(data)
    magic, tag = unpacked[0], unpacked[1]
    extents = unpacked[2:2 + DIM]
    spacings = unpacked[2 + DIM:2 + 2 * DIM]
    degree = unpacked[-1]
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if tag not in _TAG_SCHEMES:
        raise SnapshotFormatError(f"unknown scheme tag {tag}")
    if degree > DIM:
        raise SnapshotFormatError(f"degree {degree} out of range")
    try:
        grid = Grid(extents, spacings, _TAG_SCHEMES[tag])
    except ValueError as exc:
        raise SnapshotFormatError(f"invalid grid in snapshot header: {exc}") from exc

    expected = grid.n_sites * n_components(degree) * 8
    body = data[HEADER.size:]
    if len(body) != expected:
        raise SnapshotFormatError(f"snapshot body has {len(body)} bytes, expected {expected}")
    values = np.frombuffer(body, dtype="<f8").reshape(grid.shape + (n_components(degree),))
    return LatticeField(grid, degree, values.astype(float))


def write_snapshot(field: LatticeField, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_snapshot(field))
    logger.debug("wrote degree-%d snapshot %s", field.degree, path)
    return path


def read_snapshot(path: Union[str, Path]) -> LatticeField:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Snapshot file not found: {path}")
    return decode_snapshot(path.read_bytes())
