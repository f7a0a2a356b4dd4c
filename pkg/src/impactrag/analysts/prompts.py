"""Prompt templates and evidence-bundle rendering."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from datetime import datetime
from functools import lru_cache
from importlib import resources

from ..geo import SensorSite
from ..window import TimeWindow

TEMPLATE_FILES = {
    "multimodal": "system_multimodal.txt",
    "text_only": "system_text_only.txt",
    "user": "user_prompt.txt",
    "query_system": "query_parser_system.txt",
    "query_user": "query_parser_user.txt",
    "visual_extension": "visual_extension.txt",
}
NONE_RETRIEVED = "None retrieved"
_PLACEHOLDER = re.compile(
    r"\{(zip_code|start|end|imagery_tile_ids|start_date|sensor_table|kb_summary"
    r"|tweet_lines|call_lines|caption_list|message)\}"
)


class TemplateError(RuntimeError):
    pass


def _templates_dir():
    return resources.files(__package__) / "templates"


@lru_cache(maxsize=None)
def _checksums() -> dict[str, str]:
    try:
        text = (_templates_dir() / "SHA256SUMS").read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise TemplateError("template checksum file missing") from exc
    sums = {}
    for line in text.splitlines():
        if line.strip():
            digest, name = line.split()
            sums[name] = digest
    return sums


@lru_cache(maxsize=None)
def load_template(key: str) -> str:
    """Read a shipped template, refusing files whose checksum has drifted."""
    name = TEMPLATE_FILES[key]
    try:
        raw = (_templates_dir() / name).read_bytes()
    except FileNotFoundError as exc:
        raise TemplateError(f"template {name} missing") from exc
    expected = _checksums().get(name)
    if expected != hashlib.sha256(raw).hexdigest():
        raise TemplateError(f"template {name} does not match its recorded checksum")
    return raw.decode("utf-8")


def fill(template: str, **values: str) -> str:
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], template)


def assemble_system_prompt(mode: str) -> str:
    """Multimodal prompt for caption and multimodal runs, the restricted one for text_only."""
    if mode in ("multimodal", "text_caption"):
        return load_template("multimodal")
    if mode == "text_only":
        return load_template("text_only")
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class EvidenceBundle:
    zip: str
    window: TimeWindow
    tweets: tuple[tuple[str, str], ...] = ()
    calls_311: tuple[tuple[str, str], ...] = ()
    sensor_table: str = ""
    sensor_ids: tuple[str, ...] = ()
    captions: tuple[tuple[str, str], ...] = ()
    fema_prior: str | None = None
    kb_refs: tuple[str, ...] = ()
    tiles: tuple[str, ...] = ()
    tile_uris: tuple[str, ...] = field(default=(), compare=False)
    tweet_cap: int = 20

    def __post_init__(self) -> None:
        if len(self.tweets) > self.tweet_cap:
            raise ValueError(f"{len(self.tweets)} tweets exceed cap {self.tweet_cap}")

    @property
    def tweet_ids(self) -> set[str]:
        return {i for i, _ in self.tweets}

    @property
    def call_ids(self) -> set[str]:
        return {i for i, _ in self.calls_311}

    def is_empty(self) -> bool:
        return not (self.tweets or self.calls_311 or self.sensor_ids or self.captions or self.tiles)


def _one_line(text: str) -> str:
    return " ".join(text.split())


def _items(rows, zip_code: str) -> str:
    if not rows:
        return NONE_RETRIEVED
    return "\n".join(f"- [{doc_id}] (ZIP {zip_code}) {_one_line(text)}" for doc_id, text in rows)


def assemble_user_prompt(bundle: EvidenceBundle) -> str:
    captions = "\n".join(f"- [{tid}] {_one_line(text)}" for tid, text in bundle.captions)
    return fill(
        load_template("user"),
        zip_code=bundle.zip,
        start=bundle.window.start.isoformat(),
        end=bundle.window.end.isoformat(),
        imagery_tile_ids=", ".join(bundle.tiles) if bundle.tiles else "None",
        start_date=bundle.window.start.isoformat(),
        sensor_table=bundle.sensor_table or NONE_RETRIEVED,
        kb_summary=bundle.fema_prior or "None available",
        tweet_lines=_items(bundle.tweets, bundle.zip),
        call_lines=_items(bundle.calls_311, bundle.zip),
        caption_list=captions or NONE_RETRIEVED,
    )


def assemble_visual_prompt(bundle: EvidenceBundle) -> str:
    """Imagery-only view of the bundle plus the recession flag request."""
    visual = EvidenceBundle(
        zip=bundle.zip,
        window=bundle.window,
        captions=bundle.captions,
        fema_prior=bundle.fema_prior,
        kb_refs=bundle.kb_refs,
        tiles=bundle.tiles,
        tile_uris=bundle.tile_uris,
    )
    return assemble_user_prompt(visual) + load_template("visual_extension")


def render_sensor_table(sensor: SensorSite, window: TimeWindow, distance_km: float) -> str:
    rows = sensor.readings_in(window)
    lines = [f"Sensor {sensor.sensor_id} ({distance_km:.1f} km from ZIP centroid), hourly precipitation:"]
    if not rows:
        lines.append("No readings in the query window.")
        return "\n".join(lines)
    lines.append("| hour (UTC) | precip_in |")
    lines.append("|---|---|")
    for ts, value in rows:
        lines.append(f"| {_hour(ts)} | {value:.2f} |")
    lines.append(f"Total: {sum(v for _, v in rows):.2f} inches")
    return "\n".join(lines)


def _hour(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%MZ")
