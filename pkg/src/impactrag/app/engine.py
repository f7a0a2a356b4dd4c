"""End-to-end assessment: retrieve, bundle, call analysts, parse, fuse."""

from __future__ import annotations

import csv
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from loguru import logger

from ..analysts.client import AnalystError, ClientConfig, Message, chat_complete
from ..analysts.prompts import (
    EvidenceBundle,
    assemble_system_prompt,
    assemble_user_prompt,
    assemble_visual_prompt,
    render_sensor_table,
)
from ..analysts.reports import AnalystReport, ReportParseError, parse_report, report_to_json, strip_unknown_refs
from ..corpus import DocumentStore, FilterConfig, Source, filter_pipeline, ingest, load_store_jsonl
from ..evaluation import CONFIG_LABELS
from ..fusion import FusionInput, fuse
from ..geo import (
    ImageryTile,
    SensorSite,
    UnknownZipError,
    ZipRegion,
    haversine_km,
    load_sensors,
    load_tiles,
    load_zip_regions,
    nearest_sensor,
    tiles_for_query,
)
from ..index import (
    DenseIndex,
    Filters,
    HttpRerankScorer,
    HybridRetriever,
    IdentityScorer,
    RrfConfig,
    SparseIndex,
    build_sparse,
    read_embeddings,
)
from ..window import TimeWindow
from .config import EngineConfig
from .embedder import Embedder, make_embedder

TWEET = frozenset({Source.TWEET})
CALLS = frozenset({Source.CALL_311})
CAPTIONS = frozenset({Source.CAPTION})


class InvalidRequest(ValueError):
    pass


def render_response(response: Mapping[str, Any]) -> str:
    """Canonical serialization shared by the CLI and the HTTP service."""
    return json.dumps(response, indent=2, ensure_ascii=False) + "\n"


def _load_fema(path: Path | None) -> dict[str, str]:
    if path is None:
        return {}
    with open(path, encoding="utf-8", newline="") as fh:
        return {row["zip"].strip(): row["summary"] for row in csv.DictReader(fh)}


def build_store(config: EngineConfig) -> tuple[DocumentStore, dict]:
    """Ingest every configured corpus, running the tweet filter where requested."""
    fcfg = FilterConfig.load(config.filter_config) if config.filter_config else FilterConfig()
    store = DocumentStore()
    report: dict = {}
    for spec in config.corpora:
        part = ingest(spec.path, spec.format, spec.source, spec.header_map)
        entry = {"records": len(part), "skipped": part.skipped}
        if spec.filter:
            kept, stats = filter_pipeline(part.docs, fcfg)
            part = DocumentStore(kept, skipped=part.skipped)
            entry["filter"] = vars(stats)
        report[str(spec.path)] = entry
        store = store.merge(part)
    return store, report


def make_scorer(spec: Mapping[str, Any]):
    kind = spec.get("kind", "none")
    if kind == "none":
        return None
    if kind == "identity":
        return IdentityScorer()
    if kind == "http":
        return HttpRerankScorer(spec["base_url"], spec.get("model", "BAAI/bge-reranker-base"),
                                float(spec.get("timeout", 30.0)))
    raise ValueError(f"unknown reranker kind {kind!r}")


@dataclass
class Engine:
    config: EngineConfig
    store: DocumentStore
    retriever: HybridRetriever
    regions: Mapping[str, ZipRegion]
    sensors: list[SensorSite] = field(default_factory=list)
    tiles: list[ImageryTile] = field(default_factory=list)
    fema: Mapping[str, str] = field(default_factory=dict)
    embedder: Embedder | None = None
    _cache: dict = field(default_factory=dict, repr=False)
    _cache_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def load(cls, config: EngineConfig) -> "Engine":
        t0 = time.perf_counter()
        embedder = make_embedder(config.embedder)
        idx = config.index_dir
        if idx is not None and (idx / "docs.jsonl").exists():
            store = load_store_jsonl(idx / "docs.jsonl")
            sparse = SparseIndex.load_postings(idx / "postings.jsonl")
            emb_path = idx / "embeddings.emb" if (idx / "embeddings.emb").exists() else config.embeddings
        else:
            store, _ = build_store(config)
            p = config.retrieval
            sparse = build_sparse(store, p.bm25_k1, p.bm25_b)
            emb_path = config.embeddings
        dense = None
        if emb_path is not None:
            vectors, dim = read_embeddings(emb_path)
            dense = DenseIndex({d: v for d, v in vectors.items() if d in store}, dim)
        elif embedder is not None:
            vecs = embedder.embed([d.text for d in store])
            dense = DenseIndex({d.doc_id: v for d, v in zip(store, vecs)}, embedder.dimension)
        p = config.retrieval
        retriever = HybridRetriever(
            store=store, sparse=sparse, dense=dense, rrf=RrfConfig(p.rrf_k),
            scorer=make_scorer(config.reranker), candidate_k=p.candidate_k, rerank_limit=p.rerank_limit,
        )
        engine = cls(
            config=config,
            store=store,
            retriever=retriever,
            regions=load_zip_regions(config.zips),
            sensors=load_sensors(config.sensors) if config.sensors else [],
            tiles=load_tiles(config.tiles) if config.tiles else [],
            fema=_load_fema(config.fema_priors),
            embedder=embedder,
        )
        logger.bind(stage="load", ms=round(1000 * (time.perf_counter() - t0), 1), docs=len(store)).info("engine loaded")
        return engine

    # -- retrieval ----------------------------------------------------------

    def _query_vec(self, text: str):
        if self.embedder is None or self.retriever.dense is None:
            return None
        return self.embedder.embed([text])[0]

    def _retrieve(self, query: str, qvec, filters: Filters, top_k: int) -> tuple[list[tuple[str, str]], dict]:
        result = self.retriever.search(query, qvec, filters, top_k)
        return [(d, self.store[d].text) for d in result.ranking.doc_ids()], result.stages

    def build_bundle(self, region: ZipRegion, window: TimeWindow, mode: str) -> tuple[EvidenceBundle, dict]:
        p = self.config.retrieval
        query = p.query_template.format(zip=region.zip)
        qvec = self._query_vec(query)
        prov: dict = {"query": query}

        tweet_filter = Filters(zip=region.zip if p.tweet_zip_filter else None, sources=TWEET, window=window)
        tweets, prov["tweets"] = self._retrieve(query, qvec, tweet_filter, p.tweet_cap)
        calls, prov["calls_311"] = self._retrieve(query, qvec, Filters(zip=region.zip, sources=CALLS, window=window), p.call_cap)

        sensor_table, sensor_ids = "", ()
        if self.sensors:
            site = nearest_sensor(region, self.sensors)
            dist = haversine_km(region.centroid, site.location)
            sensor_table = render_sensor_table(site, window, dist)
            readings = site.readings_in(window)
            if readings:
                sensor_ids = (site.sensor_id,)
            prov["sensor"] = {"sensor_id": site.sensor_id, "distance_km": round(dist, 3), "readings": len(readings)}

        tiles: tuple[ImageryTile, ...] = ()
        captions: list[tuple[str, str]] = []
        if mode != "text_only":
            sel = tiles_for_query(region, window, self.tiles, p.radius_km, p.min_tiles)
            tiles = sel.tiles[:p.max_tiles]
            prov["tiles"] = {"selected": len(sel.tiles), "used": len(tiles), "flags": list(sel.flags)}
            caption_of = {t.caption_doc_id: t.tile_id for t in tiles if t.caption_doc_id in self.store}
            if caption_of:
                hits, prov["captions"] = self._retrieve(
                    query, qvec, Filters(sources=CAPTIONS, doc_ids=frozenset(caption_of)), p.caption_cap)
                # unscored captions of selected tiles go last
                ranked = [d for d, _ in hits] + sorted(set(caption_of) - {d for d, _ in hits})
                captions = [(caption_of[d], self.store[d].text) for d in ranked[:p.caption_cap]]

        fema = self.fema.get(region.zip)
        bundle = EvidenceBundle(
            zip=region.zip,
            window=window,
            tweets=tuple(tweets),
            calls_311=tuple(calls),
            sensor_table=sensor_table,
            sensor_ids=sensor_ids,
            captions=tuple(captions),
            fema_prior=fema,
            kb_refs=(f"fema:{region.zip}",) if fema else (),
            tiles=tuple(t.tile_id for t in tiles) if mode == "multimodal" or captions else (),
            tile_uris=tuple(t.image_uri or f"tile://{t.tile_id}" for t in tiles),
            tweet_cap=p.tweet_cap,
        )
        return bundle, prov

    # -- analysts -----------------------------------------------------------

    def _call(self, endpoint: ClientConfig, messages: list[Message], after_peak: bool,
              bundle: EvidenceBundle, stage: str) -> tuple[AnalystReport, list[str]]:
        t0 = time.perf_counter()
        raw = chat_complete(endpoint, messages)
        try:
            report = parse_report(raw, after_peak=after_peak)
        except ReportParseError as exc:
            raise AnalystError(f"{stage} analyst returned an unusable report: {exc}") from exc
        report, dropped = strip_unknown_refs(report, bundle)
        logger.bind(stage=stage, ms=round(1000 * (time.perf_counter() - t0), 1)).info("analyst call done")
        return report, dropped

    def assess(self, zip_code: str, window: TimeWindow, mode: str = "multimodal", use_cache: bool = True) -> dict:
        if mode not in CONFIG_LABELS:
            raise InvalidRequest(f"unknown mode {mode!r}")
        region = self.regions.get(zip_code)
        if region is None:
            raise UnknownZipError(f"unknown zip {zip_code}")
        key = (zip_code, window, mode, self.config.digest)
        if self.config.cache and use_cache:
            with self._cache_lock:
                if key in self._cache:
                    return self._cache[key]
        response = self._assess(region, window, mode)
        if self.config.cache and use_cache:
            with self._cache_lock:
                self._cache[key] = response
        return response

    def _assess(self, region: ZipRegion, window: TimeWindow, mode: str) -> dict:
        t0 = time.perf_counter()
        bundle, prov = self.build_bundle(region, window, mode)
        logger.bind(stage="retrieve", ms=round(1000 * (time.perf_counter() - t0), 1), zip=region.zip,
                    tweets=len(bundle.tweets), calls=len(bundle.calls_311), tiles=len(bundle.tiles)).info("retrieved")
        head = {"zip": region.zip, "time_window": {"start": window.start.isoformat(), "end": window.end.isoformat()},
                "mode": mode}
        if bundle.is_empty():
            return {"status": "insufficient_evidence", **head,
                    "detail": "no tweets, 311 calls, sensor readings or imagery for this query",
                    "provenance": prov}

        query_date = window.end
        after_peak = query_date > self.config.peak_date
        system = assemble_system_prompt(mode)
        text_report, dropped = self._call(
            self.config.text_analyst,
            [Message("system", system), Message("user", assemble_user_prompt(bundle))],
            after_peak, bundle, "text_analyst",
        )
        prov["stripped_refs"] = dropped

        visual_report = None
        if mode == "multimodal":
            if not bundle.tiles:
                prov["visual"] = "no_imagery"
            elif self.config.visual_analyst is None:
                prov["visual"] = "not_configured"
            else:
                try:
                    visual_report, vdropped = self._call(
                        self.config.visual_analyst,
                        [Message("system", system),
                         Message("user", assemble_visual_prompt(bundle), bundle.tile_uris)],
                        after_peak, bundle, "visual_analyst",
                    )
                    prov["visual"] = "ok"
                    prov["stripped_refs"] = dropped + vdropped
                except AnalystError as exc:
                    logger.warning("visual analyst unavailable: {}", exc)
                    prov["visual"] = f"unavailable: {exc}"

        fused = fuse(FusionInput(text_report, visual_report, query_date,
                                 self.config.peak_date, self.config.extent_weight))
        prov["fusion"] = {"query_date": query_date.isoformat(), "peak_date": self.config.peak_date.isoformat(),
                          "extent_weight": self.config.extent_weight}
        roads = list(dict.fromkeys([*text_report.roads_impacted,
                                    *(visual_report.roads_impacted if visual_report else ())]))
        text_json = report_to_json(text_report, region.zip, (head["time_window"]["start"], head["time_window"]["end"]))
        text_json["flags"] = text_report.flags()
        visual_json = None
        if visual_report is not None:
            visual_json = report_to_json(visual_report, region.zip,
                                         (head["time_window"]["start"], head["time_window"]["end"]))
            visual_json["flags"] = visual_report.flags()
        return {
            "status": "ok",
            **head,
            "reasoning": fused.text_reasoning,
            "estimates": {
                "flood_extent_pct": fused.flood_extent_pct,
                "damage_severity_pct": fused.damage_severity_pct,
                "roads_impacted": roads,
                "confidence": fused.confidence,
            },
            "evidence_refs": fused.evidence_refs.to_json(),
            "natural_language_summary": text_report.summary,
            "branch_taken": fused.branch_taken.value,
            "analysts": {"text": text_json, "visual": visual_json},
            "provenance": prov,
        }


def write_index(engine: Engine, out_dir: Path) -> dict:
    """Persist the store, the postings dump and (when available) document embeddings."""
    from ..index.embfile import write_embeddings

    out_dir.mkdir(parents=True, exist_ok=True)
    engine.store.write_jsonl(out_dir / "docs.jsonl")
    engine.retriever.sparse.dump_postings(out_dir / "postings.jsonl")
    written = {"docs": len(engine.store), "terms": len(engine.retriever.sparse.postings)}
    dense = engine.retriever.dense
    if dense is not None:
        write_embeddings(out_dir / "embeddings.emb", {d: dense.vector(d) for d in dense.doc_ids})
        written["embeddings"] = len(dense)
    return written
