"""Evidence documents, the tweet filtering pipeline, and file ingestion."""

from __future__ import annotations

import csv
import json
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

import yaml
from loguru import logger

ZIP_RE = re.compile(r"^[0-9]{5}$")
_TOKEN_RE = re.compile(r"[^\W_]+")
_HASHTAG_RE = re.compile(r"#\w+")
_URL_RE = re.compile(r"https?://", re.IGNORECASE)

DEFAULT_ALLOW_KEYWORDS = frozenset({
    "flood", "flooding", "flooded", "hurricane",
    "storm", "rain", "underwater", "rescue",
    "trapped", "stuck", "help", "emergency",
    "911", "evacuate", "damage", "collapsed",
    "power", "outage", "road", "bridge",
    "bayou", "creek",
})

DEFAULT_BLOCK_KEYWORDS = frozenset({
    "spotify", "music", "song", "album",
    "lyrics", "vote", "election", "trump",
    "biden", "president", "giveaway", "contest",
    "win", "sale", "shirt", "merch",
    "game", "nfl", "nba", "football",
    "baseball", "love", "heart", "tears",
})


class Source(str, Enum):
    TWEET = "tweet"
    CALL_311 = "call_311"
    CAPTION = "caption"
    SENSOR_NOTE = "sensor_note"


class IngestError(Exception):
    """Raised when an input file cannot be read in its declared format."""


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def normalize(text: str) -> str:
    """NFC then lowercase. Used for matching only; stored text is untouched."""
    return unicodedata.normalize("NFC", text).lower()


def tokenize(text: str) -> list[str]:
    """Alphanumeric tokens of the normalized text."""
    return _TOKEN_RE.findall(normalize(text))


@dataclass(frozen=True)
class Document:
    doc_id: str
    source: Source
    text: str
    timestamp: datetime
    zip: str | None = None
    geo: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if self.zip is not None and not ZIP_RE.match(self.zip):
            raise ValueError(f"invalid zip {self.zip!r}")
        if not unicodedata.normalize("NFC", self.text).strip():
            raise ValueError(f"document {self.doc_id} has empty text")
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware")

    def to_json(self) -> dict:
        out = {
            "id": self.doc_id,
            "source": self.source.value,
            "text": self.text,
            "zip": self.zip,
            "timestamp": self.timestamp.astimezone(timezone.utc).isoformat().replace("+00:00", "Z"),
        }
        if self.geo is not None:
            out["lat"], out["lon"] = self.geo
        return out


class DocumentStore:
    """Immutable, id-indexed collection of documents in insertion order."""

    def __init__(self, docs: Iterable[Document] = (), skipped: int = 0):
        ordered: list[Document] = []
        by_id: dict[str, Document] = {}
        for doc in docs:
            if doc.doc_id in by_id:
                raise ValueError(f"duplicate doc_id {doc.doc_id!r}")
            by_id[doc.doc_id] = doc
            ordered.append(doc)
        self._docs = tuple(ordered)
        self._by_id = MappingProxyType(by_id)
        self.skipped = skipped

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs)

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._by_id

    def __getitem__(self, doc_id: str) -> Document:
        return self._by_id[doc_id]

    def get(self, doc_id: str) -> Document | None:
        return self._by_id.get(doc_id)

    @property
    def docs(self) -> tuple[Document, ...]:
        return self._docs

    @property
    def by_id(self) -> Mapping[str, Document]:
        return self._by_id

    def merge(self, other: "DocumentStore") -> "DocumentStore":
        return DocumentStore([*self._docs, *other._docs], skipped=self.skipped + other.skipped)

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for doc in self._docs:
                fh.write(json.dumps(doc.to_json(), ensure_ascii=False) + "\n")


# --- filtering -------------------------------------------------------------


@dataclass(frozen=True)
class FilterConfig:
    allow_keywords: frozenset[str] = DEFAULT_ALLOW_KEYWORDS
    block_keywords: frozenset[str] = DEFAULT_BLOCK_KEYWORDS
    max_hashtags: int = 5
    max_urls: int = 3

    def __post_init__(self) -> None:
        object.__setattr__(self, "allow_keywords", frozenset(self.allow_keywords))
        object.__setattr__(self, "block_keywords", frozenset(self.block_keywords))
        for kw in self.allow_keywords | self.block_keywords:
            if kw != kw.lower():
                raise ValueError(f"keyword {kw!r} must be lowercase")
        overlap = self.allow_keywords & self.block_keywords
        if overlap:
            raise ValueError(f"allow and block lists overlap: {sorted(overlap)}")
        if self.max_hashtags < 1 or self.max_urls < 1:
            raise ValueError("max_hashtags and max_urls must be >= 1")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "FilterConfig":
        kwargs = {}
        for key in ("allow_keywords", "block_keywords"):
            if key in data:
                kwargs[key] = frozenset(str(k).lower() for k in data[key])
        for key in ("max_hashtags", "max_urls"):
            if key in data:
                kwargs[key] = int(data[key])
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "FilterConfig":
        """Load from a YAML or JSON file; missing keys keep the shipped defaults."""
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        return cls.from_mapping(data)


@dataclass
class FilterStats:
    input_count: int = 0
    retweets_removed: int = 0
    blocked: int = 0
    no_allow_match: int = 0
    spam_removed: int = 0
    kept: int = 0

    def is_conserved(self) -> bool:
        return self.input_count == (
            self.retweets_removed + self.blocked + self.no_allow_match + self.spam_removed + self.kept
        )


def is_retweet(text: str) -> bool:
    return text.lstrip()[:4].lower() == "rt @"


def keyword_match(text: str, keywords: Iterable[str]) -> bool:
    """True iff any keyword is a whole alphanumeric token of ``text``."""
    wanted = keywords if isinstance(keywords, (set, frozenset)) else set(keywords)
    return any(tok in wanted for tok in tokenize(text))


def count_hashtags(text: str) -> int:
    return len(_HASHTAG_RE.findall(text))


def count_urls(text: str) -> int:
    return len(_URL_RE.findall(text))


def is_spam(text: str, cfg: FilterConfig) -> bool:
    return count_hashtags(text) > cfg.max_hashtags or count_urls(text) > cfg.max_urls


def filter_pipeline(
    raw: Sequence[Document], cfg: FilterConfig | None = None
) -> tuple[list[Document], FilterStats]:
    """Retweet removal, block list, allow list, spam removal, in that order."""
    cfg = cfg or FilterConfig()
    stats = FilterStats(input_count=len(raw))
    kept: list[Document] = []
    for doc in raw:
        if is_retweet(doc.text):
            stats.retweets_removed += 1
            continue
        tokens = set(tokenize(doc.text))
        if tokens & cfg.block_keywords:
            stats.blocked += 1
            continue
        if not tokens & cfg.allow_keywords:
            stats.no_allow_match += 1
            continue
        if is_spam(doc.text, cfg):
            stats.spam_removed += 1
            continue
        kept.append(doc)
    stats.kept = len(kept)
    return kept, stats


# --- ingestion -------------------------------------------------------------

DEFAULT_HEADER_MAP = {
    "id": "id",
    "text": "text",
    "zip": "zip",
    "timestamp": "timestamp",
    "lat": "lat",
    "lon": "lon",
}


def _record_to_document(rec: Mapping, source: Source) -> Document:
    doc_id = rec.get("id")
    text = rec.get("text")
    ts = rec.get("timestamp")
    if doc_id in (None, "") or not isinstance(text, str) or not ts:
        raise ValueError("record missing id, text or timestamp")
    zip_code = rec.get("zip")
    zip_code = str(zip_code).strip() if zip_code not in (None, "") else None
    lat, lon = rec.get("lat"), rec.get("lon")
    geo = None
    if lat not in (None, "") and lon not in (None, ""):
        geo = (float(lat), float(lon))
    return Document(
        doc_id=str(doc_id),
        source=source,
        text=text,
        timestamp=parse_timestamp(str(ts)),
        zip=zip_code,
        geo=geo,
    )


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict | None]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                yield lineno, None
                continue
            yield lineno, obj if isinstance(obj, dict) else None


def _iter_csv(path: Path, header_map: Mapping[str, str]) -> Iterator[tuple[int, dict | None]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, 2):
            yield lineno, {field: row.get(column) for field, column in header_map.items()}


def ingest(
    path: str | Path,
    format: str,
    source: Source | str,
    header_map: Mapping[str, str] | None = None,
) -> DocumentStore:
    """Read one corpus file into a store, skipping (and counting) malformed records.

    The first record failing to parse is treated as a format mismatch and aborts.
    """
    path = Path(path)
    source = Source(source)
    if format == "jsonl":
        records = _iter_jsonl(path)
    elif format == "csv":
        records = _iter_csv(path, {**DEFAULT_HEADER_MAP, **(header_map or {})})
    else:
        raise IngestError(f"unsupported format {format!r}")

    docs: list[Document] = []
    seen: set[str] = set()
    skipped = 0
    first = True
    try:
        for lineno, rec in records:
            try:
                if rec is None:
                    raise ValueError("unparseable record")
                doc = _record_to_document(rec, source)
                if doc.doc_id in seen:
                    raise ValueError(f"duplicate id {doc.doc_id!r}")
            except (ValueError, TypeError) as exc:
                if first:
                    raise IngestError(f"{path}:{lineno}: not a valid {format} record ({exc})") from exc
                skipped += 1
                logger.debug("skip {}:{} ({})", path, lineno, exc)
                continue
            finally:
                first = False
            seen.add(doc.doc_id)
            docs.append(doc)
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise IngestError(f"{path} is not UTF-8: {exc}") from exc
    logger.info("ingested {} {} docs from {} (skipped {})", len(docs), source.value, path, skipped)
    return DocumentStore(docs, skipped=skipped)


def load_store_jsonl(path: str | Path) -> DocumentStore:
    """Reload a store written by :meth:`DocumentStore.write_jsonl` (mixed sources)."""
    docs = []
    for _, rec in _iter_jsonl(Path(path)):
        if rec is None:
            raise IngestError(f"corrupt store file {path}")
        docs.append(_record_to_document(rec, Source(rec["source"])))
    return DocumentStore(docs)
