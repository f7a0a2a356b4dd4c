"""Exact (flat) cosine top-k search."""

from __future__ import annotations

from typing import Collection, Mapping

import numpy as np

from .ranking import Ranking

DEFAULT_DIMENSION = 384


class DimensionError(ValueError):
    pass


class DenseIndex:
    """L2-normalized vectors stacked in ascending doc_id order."""

    def __init__(self, vectors: Mapping[str, np.ndarray], dimension: int = DEFAULT_DIMENSION):
        self.dimension = dimension
        self.doc_ids: tuple[str, ...] = tuple(sorted(vectors))
        matrix = np.zeros((len(self.doc_ids), dimension), dtype=np.float64)
        for row, doc_id in enumerate(self.doc_ids):
            vec = np.asarray(vectors[doc_id], dtype=np.float64)
            if vec.shape != (dimension,):
                raise DimensionError(f"{doc_id}: expected dimension {dimension}, got {vec.shape}")
            norm = np.linalg.norm(vec)
            if norm == 0:
                raise ValueError(f"{doc_id}: zero vector")
            matrix[row] = vec / norm
        matrix.setflags(write=False)
        self.matrix = matrix
        self._row = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}

    def __len__(self) -> int:
        return len(self.doc_ids)

    def vector(self, doc_id: str) -> np.ndarray:
        return self.matrix[self._row[doc_id]]


def search_dense(
    idx: DenseIndex,
    query_vec,
    top_k: int,
    allowed: Collection[str] | None = None,
) -> Ranking:
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (idx.dimension,):
        raise DimensionError(f"query dimension {q.shape} != index dimension {idx.dimension}")
    norm = np.linalg.norm(q)
    if norm == 0:
        raise ValueError("zero query vector")
    if allowed is None:
        rows = np.arange(len(idx.doc_ids))
    else:
        rows = np.array(sorted(idx._row[d] for d in allowed if d in idx._row), dtype=np.int64)
    if rows.size == 0:
        return Ranking()
    scores = idx.matrix[rows] @ (q / norm)
    # rows ascend with doc_id, so a stable sort on -score keeps id order on ties
    order = np.argsort(-scores, kind="stable")[:top_k]
    return Ranking(tuple((idx.doc_ids[rows[i]], float(scores[i])) for i in order))
