"""Binary embedding file: b"EMB1", u32 count, u32 dim, then (u32 id_len, id, dim x f32) records.

All integers and floats are little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"EMB1"
_U32 = struct.Struct("<I")


class EmbeddingFileError(ValueError):
    pass


def write_embeddings(path: str | Path, vectors: Mapping[str, np.ndarray]) -> None:
    dims = {np.asarray(v).shape[-1] for v in vectors.values()}
    if len(dims) > 1:
        raise EmbeddingFileError(f"mixed dimensions {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with open(path, "wb") as fh:
        fh.write(MAGIC + _U32.pack(len(vectors)) + _U32.pack(dim))
        for doc_id, vec in vectors.items():
            raw = doc_id.encode("utf-8")
            fh.write(_U32.pack(len(raw)) + raw)
            fh.write(np.asarray(vec, dtype="<f4").reshape(dim).tobytes())


def read_embeddings(path: str | Path) -> tuple[dict[str, np.ndarray], int]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise EmbeddingFileError(f"{path}: bad magic {data[:4]!r}")
    try:
        count, = _U32.unpack_from(data, 4)
        dim, = _U32.unpack_from(data, 8)
        pos = 12
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            n, = _U32.unpack_from(data, pos)
            pos += 4
            doc_id = data[pos:pos + n].decode("utf-8")
            pos += n
            vec = np.frombuffer(data, dtype="<f4", count=dim, offset=pos).astype(np.float64)
            pos += 4 * dim
            out[doc_id] = vec
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise EmbeddingFileError(f"{path}: truncated or corrupt ({exc})") from exc
    if pos != len(data):
        raise EmbeddingFileError(f"{path}: {len(data) - pos} trailing bytes")
    return out, dim
