"""MAE with percentile-bootstrap intervals, ablation runs, and retrieval audits."""

from __future__ import annotations

import csv
import io
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np
from loguru import logger

from .corpus import DEFAULT_ALLOW_KEYWORDS, keyword_match, normalize
from .window import TimeWindow

CONFIG_LABELS = ("text_only", "text_caption", "multimodal")
TARGETS = ("extent", "damage")


@dataclass(frozen=True)
class GroundTruthRow:
    zip: str
    flooded_pct: float
    mean_pde: float | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.flooded_pct <= 100:
            raise ValueError(f"{self.zip}: flooded_pct out of range")
        if self.mean_pde is not None and not 0 <= self.mean_pde <= 1:
            raise ValueError(f"{self.zip}: mean_pde out of range")

    @property
    def damage_pct(self) -> float | None:
        return None if self.mean_pde is None else self.mean_pde * 100.0


def load_ground_truth(path: str | Path) -> dict[str, GroundTruthRow]:
    """CSV with zip, flooded_pct and an optional (possibly blank) mean_pde column."""
    rows = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            pde = (rec.get("mean_pde") or "").strip()
            row = GroundTruthRow(rec["zip"].strip(), float(rec["flooded_pct"]), float(pde) if pde else None)
            rows[row.zip] = row
    return rows


@dataclass(frozen=True)
class EvalRecord:
    zip: str
    predicted_extent: float
    predicted_damage: float
    gt_extent: float
    gt_damage: float | None
    config_label: str

    def __post_init__(self) -> None:
        if self.config_label not in CONFIG_LABELS:
            raise ValueError(f"unknown config {self.config_label!r}")

    def error(self, target: str) -> float | None:
        if target == "extent":
            return abs(self.predicted_extent - self.gt_extent)
        if target == "damage":
            return None if self.gt_damage is None else abs(self.predicted_damage - self.gt_damage)
        raise ValueError(f"unknown target {target!r}")


@dataclass(frozen=True)
class MetricResult:
    mae: float
    ci_low: float
    ci_high: float
    n: int
    seed: int
    config_label: str = ""
    target: str = ""


def _errors(records: Iterable[EvalRecord], target: str) -> list[float]:
    return [e for e in (r.error(target) for r in records) if e is not None]


def mae(records: Sequence[EvalRecord], target: str) -> float:
    errs = _errors(records, target)
    if not errs:
        raise ValueError(f"no records with {target} ground truth")
    return sum(errs) / len(errs)


def bootstrap_ci(
    errors: Sequence[float],
    level: float = 0.95,
    resamples: int = 10_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of ``errors``."""
    if len(errors) == 0:
        raise ValueError("bootstrap over an empty sample")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    data = np.asarray(errors, dtype=np.float64)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(data), size=(resamples, len(data)))
    means = data[idx].mean(axis=1)
    tail = (1.0 - level) / 2.0 * 100.0
    low, high = np.percentile(means, [tail, 100.0 - tail])
    return float(low), float(high)


def metric(records: Sequence[EvalRecord], target: str, seed: int = 0, resamples: int = 10_000,
           level: float = 0.95, config_label: str = "") -> MetricResult:
    errs = _errors(records, target)
    if not errs:
        raise ValueError(f"no records with {target} ground truth")
    low, high = bootstrap_ci(errs, level, resamples, seed)
    return MetricResult(sum(errs) / len(errs), low, high, len(errs), seed, config_label, target)


# --- ablation --------------------------------------------------------------


@dataclass(frozen=True)
class Query:
    zip: str
    window: TimeWindow


def load_queries(path: str | Path) -> list[Query]:
    """CSV with zip, start, end (ISO dates)."""
    with open(path, encoding="utf-8", newline="") as fh:
        return [Query(r["zip"].strip(), TimeWindow.parse(r["start"], r["end"])) for r in csv.DictReader(fh)]


class Assessor(Protocol):
    def assess(self, zip_code: str, window: TimeWindow, mode: str, use_cache: bool = ...) -> dict: ...


@dataclass
class AblationResult:
    metrics: list[MetricResult]
    records: list[EvalRecord]
    skipped: dict[str, int] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["config", "target", "mae", "ci_low", "ci_high", "n", "seed"])
        for m in self.metrics:
            writer.writerow([m.config_label, m.target, repr(m.mae), repr(m.ci_low), repr(m.ci_high), m.n, m.seed])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "metrics": [asdict(m) for m in self.metrics],
            "skipped": dict(self.skipped),
            "records": len(self.records),
        }

    def records_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["config", "zip", "predicted_extent", "predicted_damage", "gt_extent", "gt_damage"])
        for r in self.records:
            writer.writerow([r.config_label, r.zip, repr(r.predicted_extent), repr(r.predicted_damage),
                             repr(r.gt_extent), "" if r.gt_damage is None else repr(r.gt_damage)])
        return buf.getvalue()


def run_ablation(
    queries: Sequence[Query],
    configs: Sequence[str],
    pipeline: Assessor,
    ground_truth: Mapping[str, GroundTruthRow],
    seed: int = 0,
    resamples: int = 10_000,
    parallelism: int = 1,
) -> AblationResult:
    """Assess every query under every configuration and score against ground truth.

    Queries run concurrently up to ``parallelism``; aggregation is sequential in
    query order so the result does not depend on scheduling.
    """
    records: list[EvalRecord] = []
    metrics: list[MetricResult] = []
    skipped: dict[str, int] = {}
    for config in configs:
        if config not in CONFIG_LABELS:
            raise ValueError(f"unknown config {config!r}")

        def one(q: Query):
            try:
                return pipeline.assess(q.zip, q.window, config, use_cache=False)
            except Exception as exc:  # noqa: BLE001 - a failed query is a skipped row
                logger.warning("{} {} failed: {}", config, q.zip, exc)
                return None

        if parallelism > 1:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                responses = list(pool.map(one, queries))
        else:
            responses = [one(q) for q in queries]

        skipped[config] = 0
        config_records = []
        for q, resp in zip(queries, responses):
            gt = ground_truth.get(q.zip)
            if resp is None or gt is None or resp.get("status") != "ok":
                skipped[config] += 1
                continue
            est = resp["estimates"]
            config_records.append(EvalRecord(
                q.zip, float(est["flood_extent_pct"]), float(est["damage_severity_pct"]),
                gt.flooded_pct, gt.damage_pct, config,
            ))
        records += config_records
        for target in TARGETS:
            if _errors(config_records, target):
                metrics.append(metric(config_records, target, seed, resamples, config_label=config))
    return AblationResult(metrics, records, skipped)


def predictions_geojson(regions, records: Sequence[EvalRecord]) -> dict:
    """Join per-ZIP predictions and ground truth onto polygons for external mapping."""
    from .geo import regions_to_geojson

    props: dict[str, dict] = {}
    for r in records:
        entry = props.setdefault(r.zip, {"gt_extent": r.gt_extent, "gt_damage": r.gt_damage})
        entry[f"{r.config_label}_extent"] = r.predicted_extent
        entry[f"{r.config_label}_damage"] = r.predicted_damage
    return regions_to_geojson(regions, props)


# --- retrieval audit -------------------------------------------------------


@dataclass(frozen=True)
class RetrievalQuality:
    topic_pct: float
    geo_pct: float
    avg_per_query: float
    n: int


def _gazetteer_patterns(gazetteer: Iterable[str]) -> list[re.Pattern]:
    return [re.compile(r"(?<![^\W_])" + re.escape(normalize(name)) + r"(?![^\W_])") for name in gazetteer if name.strip()]


def retrieval_quality(
    results: Sequence[Sequence[str]],
    keywords: Iterable[str] = DEFAULT_ALLOW_KEYWORDS,
    gazetteer: Iterable[str] = (),
) -> RetrievalQuality:
    """Share of retrieved texts with a topic keyword / a place name, and mean hits per query.

    ``results`` holds the retrieved texts of each query. Place names match as
    whole phrases, case-insensitively. Percentages are 0-100.
    """
    kw = frozenset(keywords)
    patterns = _gazetteer_patterns(gazetteer)
    texts = [t for per_query in results for t in per_query]
    n = len(texts)
    if n == 0:
        return RetrievalQuality(0.0, 0.0, 0.0, 0)
    topic = sum(1 for t in texts if keyword_match(t, kw))
    geo = sum(1 for t in texts if any(p.search(normalize(t)) for p in patterns))
    return RetrievalQuality(100.0 * topic / n, 100.0 * geo / n, n / len(results), n)


def write_json(path: str | Path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

