"""Writer and reader for the versioned binary embedding container.

Layout (little endian):

    bytes 0..7    magic ``DREMB1\\x00\\x00``
    bytes 8..11   u32 format version (currently 1)
    bytes 12..15  u32 embedding dimension
    bytes 16..23  u64 row count
    bytes 24..    float32 row-major matrix, count x dim

A sidecar text file at ``<path>.ids`` holds exactly ``count`` newline-
terminated UTF-8 ids, one per row, in row order. Files are written to a
temporary name and renamed into place so readers never observe a partial
container.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from encoder_bridge.errors import InputError

MAGIC = b"DREMB1\x00\x00"
FORMAT_VERSION = 1
HEADER = struct.Struct("<8sIIQ")


def _validate(ids: Sequence[str], rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float32)
    if rows.ndim != 2:
        raise InputError(f"embedding matrix must be 2-D, got shape {rows.shape}")
    if rows.shape[0] != len(ids):
        raise InputError(f"{len(ids)} ids for {rows.shape[0]} embedding rows")
    if rows.shape[0] == 0 or rows.shape[1] == 0:
        raise InputError("embedding matrix must be non-empty")
    if not np.isfinite(rows).all():
        raise InputError("embedding matrix contains non-finite values")
    if len(set(ids)) != len(ids):
        raise InputError("duplicate embedding ids")
    for item in ids:
        if "\n" in item or "\r" in item or not item:
            raise InputError(f"invalid embedding id {item!r}")
    return rows


def write_embedding_file(ids: Sequence[str], rows: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    rows = _validate(ids, rows)
    count, dim = rows.shape
    header = HEADER.pack(MAGIC, FORMAT_VERSION, dim, count)
    payload = np.ascontiguousarray(rows, dtype="<f4").tobytes()

    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(header + payload)
    ids_tmp = path.with_name(path.name + ".ids.tmp")
    ids_tmp.write_bytes("".join(i + "\n" for i in ids).encode("utf-8"))
    tmp.replace(path)
    ids_tmp.replace(str(path) + ".ids")


def read_embedding_file(path: str | Path) -> tuple[tuple[str, ...], np.ndarray]:
    """Round-trip reader used by the bridge's own tests."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < HEADER.size:
        raise InputError(f"{path}: truncated header")
    magic, version, dim, count = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise InputError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise InputError(f"{path}: unsupported version {version}")
    expected = HEADER.size + 4 * dim * count
    if len(blob) != expected:
        raise InputError(f"{path}: expected {expected} bytes, found {len(blob)}")
    rows = np.frombuffer(blob, dtype="<f4", offset=HEADER.size).reshape(count, dim)
    ids_blob = Path(str(path) + ".ids").read_bytes().decode("utf-8")
    if ids_blob and not ids_blob.endswith("\n"):
        raise InputError(f"{path}.ids: missing trailing newline")
    ids = tuple(ids_blob.splitlines())
    if len(ids) != count:
        raise InputError(f"{path}.ids: {len(ids)} ids for {count} rows")
    return ids, rows.copy()
