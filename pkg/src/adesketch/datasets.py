"""Dataset ingestion: CSV (optional header) and the raw binary format.

Binary layout: magic ``ADEV``, u64 n, u64 d, then row-major little-endian
float64. CSV is for hand-made tests, binary for benchmarks.
"""

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import IngestionError

BINARY_MAGIC = b"ADEV"
_BINARY_HEADER = struct.Struct("<2Q")


@dataclass
class Dataset:
    rows: np.ndarray
    source: str
    fmt: str

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]


def _check_finite(rows, source):
    bad = ~np.isfinite(rows)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise IngestionError(
            f"{source}: non-finite value at data row {i + 1}, column {j + 1}"
        )


def _load_csv(path, allow_empty):
    rows = []
    width = None
    header_skipped = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            try:
                values = [float(f) for f in fields]
            except ValueError:
                if lineno == 1 and not header_skipped:
                    header_skipped = True  # optional header line
                    continue
                raise IngestionError(f"{path}: non-numeric value on line {lineno}") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise IngestionError(
                    f"{path}: line {lineno} has {len(values)} columns, expected {width}"
                )
            rows.append(values)
    if not rows:
        if allow_empty:
            return np.empty((0, 0))
        raise IngestionError(f"{path}: no data rows")
    data = np.array(rows, dtype=np.float64)
    _check_finite(data, path)
    return data


def _load_binary(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    header_len = len(BINARY_MAGIC) + _BINARY_HEADER.size
    if len(blob) < header_len or blob[: len(BINARY_MAGIC)] != BINARY_MAGIC:
        raise IngestionError(f"{path}: not a binary dataset file")
    n, d = _BINARY_HEADER.unpack_from(blob, len(BINARY_MAGIC))
    expected = header_len + 8 * n * d
    if len(blob) != expected:
        raise IngestionError(f"{path}: expected {expected} bytes for {n}x{d}, found {len(blob)}")
    data = np.frombuffer(blob, dtype="<f8", count=n * d, offset=header_len).reshape(n, d).copy()
    _check_finite(data, path)
    return data


def load_dataset(path, allow_empty=False):
    """Read a dataset, sniffing binary vs CSV from the magic bytes.

    Datasets must hold at least one row unless `allow_empty` is set (query
    batches may legitimately be empty).
    """
    path = os.fspath(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(BINARY_MAGIC))
    if magic == BINARY_MAGIC:
        rows = _load_binary(path)
        if rows.shape[0] == 0 and not allow_empty:
            raise IngestionError(f"{path}: no data rows")
        return Dataset(rows=rows, source=path, fmt="binary")
    return Dataset(rows=_load_csv(path, allow_empty), source=path, fmt="csv")


def save_dataset_csv(points, path):
    points = np.asarray(points, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in points:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def save_dataset_binary(points, path):
    points = np.ascontiguousarray(points, dtype="<f8")
    n, d = points.shape
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(_BINARY_HEADER.pack(n, d))
        fh.write(points.tobytes())
