"""Okapi BM25 over an in-memory inverted index."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Collection, Mapping

from ..corpus import DocumentStore, tokenize
from .ranking import Ranking


@dataclass(frozen=True)
class SparseIndex:
    postings: Mapping[str, tuple[tuple[str, int], ...]]
    doc_lengths: Mapping[str, int]
    avg_doc_length: float
    doc_count: int
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 <= 0 or not 0 <= self.b <= 1:
            raise ValueError("require k1 > 0 and 0 <= b <= 1")
        if self.doc_count != len(self.doc_lengths):
            raise ValueError("doc_count does not match doc_lengths")

    def idf(self, term: str) -> float:
        n = len(self.postings.get(term, ()))
        return math.log((self.doc_count - n + 0.5) / (n + 0.5) + 1.0)

    def dump_postings(self, path: str | Path) -> None:
        """JSONL: a header line with the index parameters, then one line per term."""
        with open(path, "w", encoding="utf-8") as fh:
            header = {"k1": self.k1, "b": self.b, "doc_lengths": dict(self.doc_lengths)}
            fh.write(json.dumps(header, ensure_ascii=False) + "\n")
            for term in sorted(self.postings):
                fh.write(json.dumps({"term": term, "postings": self.postings[term]},
                                    ensure_ascii=False) + "\n")

    @classmethod
    def load_postings(cls, path: str | Path) -> "SparseIndex":
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            postings = {}
            for line in fh:
                row = json.loads(line)
                postings[row["term"]] = tuple((d, int(tf)) for d, tf in row["postings"])
        return _make_index(postings, header["doc_lengths"], header["k1"], header["b"])


def _make_index(postings: dict, doc_lengths: dict, k1: float, b: float) -> SparseIndex:
    n = len(doc_lengths)
    avg = sum(doc_lengths.values()) / n if n else 0.0
    return SparseIndex(
        postings=MappingProxyType(postings),
        doc_lengths=MappingProxyType(dict(doc_lengths)),
        avg_doc_length=avg,
        doc_count=n,
        k1=k1,
        b=b,
    )


def build_sparse(store: DocumentStore, k1: float = 1.2, b: float = 0.75) -> SparseIndex:
    if len(store) == 0:
        raise ValueError("cannot build an index over an empty store")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in store:
        tokens = tokenize(doc.text)
        doc_lengths[doc.doc_id] = len(tokens)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((doc.doc_id, tf))
    frozen = {term: tuple(plist) for term, plist in postings.items()}
    return _make_index(frozen, doc_lengths, k1, b)


def search_sparse(
    idx: SparseIndex,
    query: str,
    top_k: int,
    allowed: Collection[str] | None = None,
) -> Ranking:
    """BM25 top-k. Repeated query terms contribute once per occurrence.

    ``allowed`` restricts candidates (metadata pre-filter); corpus statistics
    stay global.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    scores: dict[str, float] = {}
    avgdl = idx.avg_doc_length or 1.0
    for term in tokenize(query):
        plist = idx.postings.get(term)
        if not plist:
            continue
        idf = idx.idf(term)
        for doc_id, tf in plist:
            if allowed is not None and doc_id not in allowed:
                continue
            norm = idx.k1 * (1.0 - idx.b + idx.b * idx.doc_lengths[doc_id] / avgdl)
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf * (idx.k1 + 1.0) / (tf + norm)
    return Ranking.from_scores(scores.items(), top_k)
