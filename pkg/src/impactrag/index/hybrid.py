"""Metadata-filtered hybrid retrieval: BM25 + dense, fused with RRF, then reranked."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Collection

import numpy as np

from ..corpus import Document, DocumentStore, Source
from ..window import TimeWindow
from .dense import DenseIndex, search_dense
from .ranking import Ranking
from .rerank import RerankScorer, rerank
from .rrf import RrfConfig, rrf_fuse
from .sparse import SparseIndex, search_sparse

SPARSE_ONLY = "sparse_only"


@dataclass(frozen=True)
class Filters:
    zip: str | None = None
    sources: frozenset[Source] | None = None
    window: TimeWindow | None = None
    doc_ids: frozenset[str] | None = None

    def admits(self, doc: Document) -> bool:
        if self.zip is not None and doc.zip != self.zip:
            return False
        if self.sources is not None and doc.source not in self.sources:
            return False
        if self.window is not None and not self.window.contains(doc.timestamp):
            return False
        if self.doc_ids is not None and doc.doc_id not in self.doc_ids:
            return False
        return True


@dataclass(frozen=True)
class HybridResult:
    ranking: Ranking
    stages: dict = field(default_factory=dict)


@dataclass(frozen=True)
class HybridRetriever:
    store: DocumentStore
    sparse: SparseIndex
    dense: DenseIndex | None = None
    rrf: RrfConfig = RrfConfig()
    scorer: RerankScorer | None = None
    candidate_k: int = 50
    rerank_limit: int = 20

    def allowed(self, filters: Filters) -> frozenset[str]:
        pool: Collection[Document]
        if filters.doc_ids is not None:
            pool = [self.store[d] for d in filters.doc_ids if d in self.store]
        else:
            pool = self.store.docs
        return frozenset(d.doc_id for d in pool if filters.admits(d))

    def search(
        self,
        query: str,
        query_vec: np.ndarray | None = None,
        filters: Filters = Filters(),
        top_k: int = 20,
    ) -> HybridResult:
        allowed = self.allowed(filters)
        stages: dict = {"filtered": len(allowed)}
        if not allowed:
            stages.update(sparse=0, dense=0, fused=0, reranked=0, returned=0, flags=[])
            return HybridResult(Ranking(), stages)

        sparse = search_sparse(self.sparse, query, self.candidate_k, allowed)
        stages["sparse"] = len(sparse)
        if query_vec is None or self.dense is None:
            stages["dense"] = 0
            fused = sparse.with_flags(SPARSE_ONLY)
        else:
            dense = search_dense(self.dense, query_vec, self.candidate_k, allowed)
            stages["dense"] = len(dense)
            fused = rrf_fuse([sparse, dense], self.rrf)
        stages["fused"] = len(fused)

        final = rerank(query, fused, self.scorer, lambda d: self.store[d].text, self.rerank_limit)
        stages["reranked"] = len(final)
        final = final.truncate(top_k)
        stages["returned"] = len(final)
        stages["flags"] = sorted(final.flags)
        return HybridResult(final, stages)
