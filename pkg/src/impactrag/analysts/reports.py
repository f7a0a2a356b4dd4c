"""Structured analyst output: parsing, validation, rendering."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any

from loguru import logger

from .prompts import EvidenceBundle

RECESSION_EXTENT_THRESHOLD = 5.0
DEFAULT_CONFIDENCE = 0.5
REF_KEYS = ("imagery_tile_ids", "tweet_ids", "call_311_ids", "sensor_ids", "kb_refs")


class ReportParseError(ValueError):
    pass


@dataclass(frozen=True)
class EvidenceRefs:
    imagery_tile_ids: tuple[str, ...] = ()
    tweet_ids: tuple[str, ...] = ()
    call_311_ids: tuple[str, ...] = ()
    sensor_ids: tuple[str, ...] = ()
    kb_refs: tuple[str, ...] = ()

    def to_json(self) -> dict[str, list[str]]:
        return {k: list(getattr(self, k)) for k in REF_KEYS}

    def merge(self, other: "EvidenceRefs") -> "EvidenceRefs":
        def union(a, b):
            return tuple(dict.fromkeys([*a, *b]))
        return EvidenceRefs(*(union(getattr(self, k), getattr(other, k)) for k in REF_KEYS))


@dataclass(frozen=True)
class AnalystReport:
    flood_extent_pct: float
    damage_severity_pct: float
    recession_observed: bool = False
    confidence: float = DEFAULT_CONFIDENCE
    roads_impacted: tuple[str, ...] = ()
    reasoning: str = ""
    evidence_refs: EvidenceRefs = field(default_factory=EvidenceRefs)
    summary: str = ""
    # audit flags, not model output
    clamped: bool = False
    recession_inferred: bool = False
    confidence_defaulted: bool = False

    def __post_init__(self) -> None:
        if not (0 <= self.flood_extent_pct <= 100 and 0 <= self.damage_severity_pct <= 100):
            raise ValueError("percentages must lie in [0, 100]")
        if not 0 <= self.confidence <= 1:
            raise ValueError("confidence must lie in [0, 1]")

    def flags(self) -> list[str]:
        names = ("clamped", "recession_inferred", "confidence_defaulted")
        return [n for n in names if getattr(self, n)]


def extract_json_object(raw: str) -> dict:
    """First decodable JSON object in ``raw``; code fences and prose are skipped."""
    decoder = json.JSONDecoder()
    start = raw.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            start = raw.find("{", start + 1)
            continue
        if isinstance(obj, dict):
            return obj
        start = raw.find("{", start + 1)
    raise ReportParseError("no JSON object found in model output")


def _number(value: Any, name: str) -> float:
    if isinstance(value, bool) or value is None:
        raise ReportParseError(f"{name} is not a number")
    try:
        out = float(str(value).rstrip("%")) if isinstance(value, str) else float(value)
    except (TypeError, ValueError) as exc:
        raise ReportParseError(f"{name} is not a number: {value!r}") from exc
    if math.isnan(out):
        raise ReportParseError(f"{name} is NaN")
    return out


def _clamp(value: float, lo: float, hi: float) -> tuple[float, bool]:
    clipped = min(hi, max(lo, value))
    return clipped, clipped != value


def _str_list(value: Any) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, (str, int)):
        value = [value]
    return tuple(str(v) for v in value)


def _as_bool(value: Any) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("true", "yes", "1", "recession")
    return bool(value)


def parse_report(raw: str, after_peak: bool = False) -> AnalystReport:
    """Parse a model reply into an :class:`AnalystReport`.

    Out-of-range numbers are clamped (``clamped`` flag). A missing
    ``recession_observed`` is inferred as extent below 5% on an after-peak
    query (``recession_inferred`` flag).
    """
    obj = extract_json_object(raw)
    est = obj.get("estimates")
    if not isinstance(est, dict):
        est = obj
    missing = [k for k in ("flood_extent_pct", "damage_severity_pct") if est.get(k) is None]
    if missing:
        raise ReportParseError(f"missing estimate fields: {', '.join(missing)}")

    extent, c1 = _clamp(_number(est["flood_extent_pct"], "flood_extent_pct"), 0.0, 100.0)
    damage, c2 = _clamp(_number(est["damage_severity_pct"], "damage_severity_pct"), 0.0, 100.0)
    conf_raw = est.get("confidence", obj.get("confidence"))
    if conf_raw is None:
        confidence, c3, defaulted = DEFAULT_CONFIDENCE, False, True
    else:
        confidence, c3 = _clamp(_number(conf_raw, "confidence"), 0.0, 1.0)
        defaulted = False

    rec_raw = est.get("recession_observed", obj.get("recession_observed"))
    if rec_raw is None:
        recession, inferred = after_peak and extent < RECESSION_EXTENT_THRESHOLD, True
    else:
        recession, inferred = _as_bool(rec_raw), False

    refs_obj = obj.get("evidence_refs") or {}
    refs = EvidenceRefs(*(_str_list(refs_obj.get(k)) for k in REF_KEYS))
    return AnalystReport(
        flood_extent_pct=extent,
        damage_severity_pct=damage,
        recession_observed=recession,
        confidence=confidence,
        roads_impacted=_str_list(est.get("roads_impacted")),
        reasoning=str(obj.get("reasoning") or ""),
        evidence_refs=refs,
        summary=str(obj.get("natural_language_summary") or ""),
        clamped=c1 or c2 or c3,
        recession_inferred=inferred,
        confidence_defaulted=defaulted,
    )


def report_to_json(report: AnalystReport, zip_code: str = "", window: tuple[str, str] = ("", "")) -> dict:
    return {
        "reasoning": report.reasoning,
        "zip": zip_code,
        "time_window": {"start": window[0], "end": window[1]},
        "estimates": {
            "flood_extent_pct": report.flood_extent_pct,
            "damage_severity_pct": report.damage_severity_pct,
            "roads_impacted": list(report.roads_impacted),
            "confidence": report.confidence,
            "recession_observed": report.recession_observed,
        },
        "evidence_refs": report.evidence_refs.to_json(),
        "natural_language_summary": report.summary,
    }


def render_report(report: AnalystReport, zip_code: str = "", window: tuple[str, str] = ("", "")) -> str:
    return json.dumps(report_to_json(report, zip_code, window), ensure_ascii=False)


def strip_unknown_refs(report: AnalystReport, bundle: EvidenceBundle) -> tuple[AnalystReport, list[str]]:
    """Drop evidence ids the bundle never offered; returns the report and the dropped ids."""
    known = {
        "imagery_tile_ids": set(bundle.tiles),
        "tweet_ids": bundle.tweet_ids,
        "call_311_ids": bundle.call_ids,
        "sensor_ids": set(bundle.sensor_ids),
        "kb_refs": set(bundle.kb_refs),
    }
    dropped: list[str] = []
    cleaned = {}
    for key in REF_KEYS:
        ids = getattr(report.evidence_refs, key)
        cleaned[key] = tuple(i for i in ids if i in known[key])
        dropped += [f"{key}:{i}" for i in ids if i not in known[key]]
    if dropped:
        logger.warning("stripped {} unknown evidence refs: {}", len(dropped), dropped)
    return replace(report, evidence_refs=EvidenceRefs(**cleaned)), dropped
