"""Dense embedding matrix and its binary file format.

Layout (all little-endian): magic ``XEMB``, format version as u32, dim as
u32, count as u64, then ``count`` ids each as u32 byte length + UTF-8
bytes, then ``count * dim`` float32 values in row-major order. Writing is
deterministic, so export -> import -> export round-trips byte-exact.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataValidationError

MAGIC = b"XEMB"
FORMAT_VERSION = 1


@dataclass
class EmbeddingMatrix:
    ids: list[str]
    vectors: np.ndarray  # float32, shape (len(ids), dim)

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise DataValidationError("embedding matrix must be 2-dimensional")
        if len(self.ids) != self.vectors.shape[0]:
            raise DataValidationError("id count and row count differ")
        if len(set(self.ids)) != len(self.ids):
            raise DataValidationError("duplicate ids in embedding matrix")
        if self.vectors.size and not np.isfinite(self.vectors).all():
            raise DataValidationError("embedding matrix contains non-finite values")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)


def write_xemb(matrix: EmbeddingMatrix, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQ", FORMAT_VERSION, matrix.dim, len(matrix)))
        for item_id in matrix.ids:
            raw = item_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(matrix.vectors.astype("<f4", copy=False).tobytes(order="C"))


def read_xemb(path: str | Path) -> EmbeddingMatrix:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise DataValidationError(f"{path}: not an XEMB file")
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != FORMAT_VERSION:
        raise DataValidationError(f"{path}: unsupported format version {version}")
    offset = 4 + 16
    ids = []
    for _ in range(count):
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        ids.append(data[offset:offset + length].decode("utf-8"))
        offset += length
    payload = count * dim * 4
    if len(data) - offset != payload:
        raise DataValidationError(f"{path}: payload size mismatch")
    vectors = np.frombuffer(data, dtype="<f4", count=count * dim, offset=offset)
    return EmbeddingMatrix(ids, vectors.reshape(count, dim).copy())
