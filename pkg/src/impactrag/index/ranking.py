from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator


@dataclass(frozen=True)
class Ranking:
    """Ordered (doc_id, score) hits, best first, ties broken by ascending doc_id.

    ``flags`` carries degradation markers (e.g. rerank fallback) for provenance.
    """

    hits: tuple[tuple[str, float], ...] = ()
    flags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        ids = [doc_id for doc_id, _ in self.hits]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate doc_id in ranking")

    @classmethod
    def from_scores(cls, scores: Iterable[tuple[str, float]], top_k: int | None = None,
                    flags: Iterable[str] = ()) -> "Ranking":
        ordered = sorted(scores, key=lambda item: (-item[1], item[0]))
        if top_k is not None:
            ordered = ordered[:top_k]
        return cls(tuple((d, float(s)) for d, s in ordered), frozenset(flags))

    def __len__(self) -> int:
        return len(self.hits)

    def __iter__(self) -> Iterator[tuple[str, float]]:
        return iter(self.hits)

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.hits]

    def truncate(self, k: int) -> "Ranking":
        return Ranking(self.hits[:k], self.flags)

    def with_flags(self, *flags: str) -> "Ranking":
        return Ranking(self.hits, self.flags | frozenset(flags))
