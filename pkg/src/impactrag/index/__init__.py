from .dense import DEFAULT_DIMENSION, DenseIndex, DimensionError, search_dense
from .embfile import EmbeddingFileError, read_embeddings, write_embeddings
from .hybrid import Filters, HybridResult, HybridRetriever, SPARSE_ONLY
from .ranking import Ranking
from .rerank import (
    RERANK_FALLBACK,
    HttpRerankScorer,
    IdentityScorer,
    RerankScorer,
    SubstringScorer,
    rerank,
)
from .rrf import RrfConfig, rrf_fuse
from .sparse import SparseIndex, build_sparse, search_sparse

__all__ = [
    "DEFAULT_DIMENSION", "DenseIndex", "DimensionError", "search_dense",
    "EmbeddingFileError", "read_embeddings", "write_embeddings",
    "Filters", "HybridResult", "HybridRetriever", "SPARSE_ONLY",
    "Ranking",
    "RERANK_FALLBACK", "HttpRerankScorer", "IdentityScorer", "RerankScorer", "SubstringScorer", "rerank",
    "RrfConfig", "rrf_fuse",
    "SparseIndex", "build_sparse", "search_sparse",
]
