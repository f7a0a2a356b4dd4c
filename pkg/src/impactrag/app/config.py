"""Engine configuration: one YAML document, paths relative to the file."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..analysts.client import ClientConfig
from ..fusion import HARVEY_PEAK
from ..window import TimeWindow


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusSpec:
    path: Path
    format: str
    source: str
    header_map: Mapping[str, str] | None = None
    filter: bool = False


@dataclass(frozen=True)
class RetrievalParams:
    top_k: int = 20
    rrf_k: int = 60
    rerank_limit: int = 20
    candidate_k: int = 50
    radius_km: float = 5.0
    min_tiles: int = 1
    max_tiles: int = 6
    tweet_cap: int = 20
    call_cap: int = 20
    caption_cap: int = 10
    tweet_zip_filter: bool = False
    query_template: str = "flood flooding flooded water rescue damage {zip}"
    bm25_k1: float = 1.2
    bm25_b: float = 0.75

    def validate(self) -> None:
        positive = ("top_k", "rrf_k", "rerank_limit", "candidate_k", "min_tiles", "max_tiles",
                    "tweet_cap", "call_cap", "caption_cap")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"retrieval.{name} must be >= 1")
        if self.radius_km <= 0:
            raise ConfigError("retrieval.radius_km must be > 0")
        if self.bm25_k1 <= 0 or not 0 <= self.bm25_b <= 1:
            raise ConfigError("retrieval.bm25_k1 must be > 0 and bm25_b in [0, 1]")


@dataclass(frozen=True)
class EngineConfig:
    corpora: tuple[CorpusSpec, ...]
    zips: Path
    tiles: Path | None = None
    sensors: Path | None = None
    ground_truth: Path | None = None
    fema_priors: Path | None = None
    embeddings: Path | None = None
    index_dir: Path | None = None
    filter_config: Path | None = None
    queries: Path | None = None
    retrieval: RetrievalParams = RetrievalParams()
    peak_date: date = HARVEY_PEAK
    default_window: TimeWindow = TimeWindow(date(2017, 8, 25), date(2017, 9, 1))
    extent_weight: float = 0.5
    text_analyst: ClientConfig = field(default_factory=lambda: ClientConfig.from_mapping("mock"))
    visual_analyst: ClientConfig | None = None
    query_parser: ClientConfig | None = None
    reranker: Mapping[str, Any] = field(default_factory=lambda: {"kind": "none"})
    embedder: Mapping[str, Any] = field(default_factory=lambda: {"kind": "none"})
    seed: int = 0
    resamples: int = 10_000
    parallelism: int = 1
    cache: bool = False
    digest: str = ""

    @property
    def parser_client(self) -> ClientConfig:
        return self.query_parser or self.text_analyst


def _path(base: Path, value: Any, required: bool, name: str) -> Path | None:
    if value in (None, ""):
        if required:
            raise ConfigError(f"missing required path {name}")
        return None
    path = Path(value)
    if not path.is_absolute():
        path = base / path
    if not path.exists():
        raise ConfigError(f"{name}: {path} does not exist")
    return path


def load_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    doc = yaml.safe_load(raw) or {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    return from_mapping(doc, path.parent, hashlib.sha256(raw).hexdigest())


def from_mapping(doc: Mapping[str, Any], base: Path, digest: str = "") -> EngineConfig:
    data = doc.get("data") or {}
    corpora = []
    for i, entry in enumerate(data.get("corpora") or []):
        corpora.append(CorpusSpec(
            path=_path(base, entry.get("path"), True, f"data.corpora[{i}].path"),
            format=entry.get("format", "jsonl"),
            source=entry["source"],
            header_map=entry.get("header_map"),
            filter=bool(entry.get("filter", False)),
        ))
    index_dir = data.get("index_dir")
    index_path = None
    if index_dir:
        index_path = Path(index_dir) if Path(index_dir).is_absolute() else base / index_dir
    if not corpora and index_path is None:
        raise ConfigError("data.corpora or data.index_dir is required")

    try:
        retrieval = RetrievalParams(**(doc.get("retrieval") or {}))
    except TypeError as exc:
        raise ConfigError(f"retrieval: {exc}") from exc
    retrieval.validate()

    fusion = doc.get("fusion") or {}
    peak = fusion.get("peak_date", HARVEY_PEAK)
    peak = peak if isinstance(peak, date) else date.fromisoformat(str(peak))
    weight = float(fusion.get("extent_weight", 0.5))
    event = doc.get("event") or {}
    default_window = TimeWindow(date(2017, 8, 25), date(2017, 9, 1))
    if event.get("window"):
        start, end = event["window"]
        default_window = TimeWindow.parse(str(start), str(end))
    if not 0 <= weight <= 1:
        raise ConfigError("fusion.extent_weight must lie in [0, 1]")

    clients = doc.get("clients") or {}

    def client(name: str, required: bool = False) -> ClientConfig | None:
        entry = clients.get(name)
        if entry is None:
            if required:
                raise ConfigError(f"clients.{name} is required")
            return None
        try:
            return ClientConfig.from_mapping(entry, base)
        except (TypeError, OSError, ValueError) as exc:
            raise ConfigError(f"clients.{name}: {exc}") from exc

    ev = doc.get("eval") or {}
    return EngineConfig(
        corpora=tuple(corpora),
        zips=_path(base, data.get("zips"), True, "data.zips"),
        tiles=_path(base, data.get("tiles"), False, "data.tiles"),
        sensors=_path(base, data.get("sensors"), False, "data.sensors"),
        ground_truth=_path(base, data.get("ground_truth"), False, "data.ground_truth"),
        fema_priors=_path(base, data.get("fema_priors"), False, "data.fema_priors"),
        embeddings=_path(base, data.get("embeddings"), False, "data.embeddings"),
        index_dir=index_path,
        filter_config=_path(base, data.get("filter_config"), False, "data.filter_config"),
        queries=_path(base, ev.get("queries"), False, "eval.queries"),
        retrieval=retrieval,
        peak_date=peak,
        default_window=default_window,
        extent_weight=weight,
        text_analyst=client("text_analyst", required=True),
        visual_analyst=client("visual_analyst"),
        query_parser=client("query_parser"),
        reranker=_resolve_paths(clients.get("reranker") or {"kind": "none"}, base),
        embedder=_resolve_paths(clients.get("embedder") or {"kind": "none"}, base),
        seed=int(ev.get("seed", 0)),
        resamples=int(ev.get("resamples", 10_000)),
        parallelism=int(ev.get("parallelism", 1)),
        cache=bool((doc.get("cache") or {}).get("enabled", False)),
        digest=digest,
    )


def _resolve_paths(entry: Mapping[str, Any], base: Path) -> dict:
    out = dict(entry)
    if out.get("path") and not Path(out["path"]).is_absolute():
        out["path"] = str(base / out["path"])
    return out
