"""Cross-encoder reranking behind a pluggable pair-scoring interface."""

from __future__ import annotations

from typing import Callable, Mapping, Protocol, Sequence

import httpx
from loguru import logger

from .ranking import Ranking

RERANK_FALLBACK = "rerank_fallback"


class RerankScorer(Protocol):
    def score(self, query: str, texts: Sequence[str]) -> Sequence[float]:
        """Relevance of each text to the query; higher is better."""


class IdentityScorer:
    """Scores that reproduce the incoming order."""

    def score(self, query: str, texts: Sequence[str]) -> list[float]:
        n = len(texts)
        return [float(n - i) for i in range(n)]


class SubstringScorer:
    """1.0 when the query phrase occurs in the text (case-insensitive), else 0.0."""

    def score(self, query: str, texts: Sequence[str]) -> list[float]:
        needle = query.lower()
        return [1.0 if needle in t.lower() else 0.0 for t in texts]


class HttpRerankScorer:
    """Client for a rerank service speaking the common ``POST /rerank`` shape.

    Request ``{"model", "query", "documents"}``; response
    ``{"results": [{"index", "relevance_score"}]}`` (a bare list and a
    ``score`` key are accepted too, as served by text-embeddings-inference).
    """

    def __init__(self, base_url: str, model: str = "BAAI/bge-reranker-base",
                 timeout: float = 30.0, client: httpx.Client | None = None,
                 headers: Mapping[str, str] | None = None):
        self.url = base_url.rstrip("/") + "/rerank"
        self.model = model
        self._client = client or httpx.Client(timeout=timeout)
        self._headers = dict(headers or {})

    def score(self, query: str, texts: Sequence[str]) -> list[float]:
        resp = self._client.post(
            self.url,
            json={"model": self.model, "query": query, "documents": list(texts)},
            headers=self._headers,
        )
        resp.raise_for_status()
        body = resp.json()
        results = body["results"] if isinstance(body, dict) else body
        scores = [0.0] * len(texts)
        seen = set()
        for item in results:
            i = int(item["index"])
            scores[i] = float(item.get("relevance_score", item.get("score")))
            seen.add(i)
        if len(seen) != len(texts):
            raise ValueError(f"reranker scored {len(seen)} of {len(texts)} documents")
        return scores


def rerank(
    query: str,
    candidates: Ranking,
    scorer: RerankScorer | None,
    text_of: Callable[[str], str],
    limit: int = 20,
) -> Ranking:
    """Reorder the first ``limit`` candidates by the scorer; drop the rest.

    Scorer scores replace the incoming scores. On scorer failure the truncated
    input ranking is returned with the ``rerank_fallback`` flag.
    """
    head = candidates.truncate(limit)
    if scorer is None or not head.hits:
        return head
    ids = head.doc_ids()
    try:
        scores = list(scorer.score(query, [text_of(d) for d in ids]))
        if len(scores) != len(ids):
            raise ValueError(f"scorer returned {len(scores)} scores for {len(ids)} docs")
    except Exception as exc:  # noqa: BLE001 - any scorer failure degrades softly
        logger.warning("rerank failed, keeping fused order: {}", exc)
        return head.with_flags(RERANK_FALLBACK)
    return Ranking.from_scores(zip(ids, scores), flags=head.flags)
