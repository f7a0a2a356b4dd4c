from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .ranking import Ranking


@dataclass(frozen=True)
class RrfConfig:
    k: int = 60

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("RRF k must be >= 1")


def rrf_fuse(rankings: Sequence[Ranking], cfg: RrfConfig = RrfConfig(), top_k: int | None = None) -> Ranking:
    """Reciprocal rank fusion: sum of 1/(k + rank) with 1-based ranks."""
    if not rankings:
        raise ValueError("need at least one ranking")
    fused: dict[str, float] = {}
    for ranking in rankings:
        for rank, (doc_id, _) in enumerate(ranking.hits, 1):
            fused[doc_id] = fused.get(doc_id, 0.0) + 1.0 / (cfg.k + rank)
    flags = frozenset().union(*(r.flags for r in rankings))
    return Ranking.from_scores(fused.items(), top_k, flags)
