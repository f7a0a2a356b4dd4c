"""Natural-language request -> (zip, start, end) via the query-parsing prompt."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

from loguru import logger

from ..corpus import ZIP_RE
from .client import AnalystError, ClientConfig, Message, chat_complete
from .prompts import fill, load_template
from .reports import ReportParseError, extract_json_object


@dataclass(frozen=True)
class ParsedQuery:
    zip: str | None = None
    start: date | None = None
    end: date | None = None
    diagnostic: str | None = None

    def __post_init__(self) -> None:
        if self.start and self.end and self.start > self.end:
            raise ValueError("start after end")


def query_messages(message: str) -> list[Message]:
    return [
        Message("system", load_template("query_system")),
        Message("user", fill(load_template("query_user"), message=message)),
    ]


def _date(value) -> date | None:
    if value in (None, "", "null"):
        return None
    return date.fromisoformat(str(value).strip())


def interpret_parse(raw: str) -> ParsedQuery:
    try:
        obj = extract_json_object(raw)
        zip_code = obj.get("zip")
        zip_code = None if zip_code in (None, "", "null") else str(zip_code).strip()
        if zip_code is not None and not ZIP_RE.match(zip_code):
            raise ValueError(f"invalid zip {zip_code!r}")
        start, end = _date(obj.get("start")), _date(obj.get("end"))
    except (ReportParseError, ValueError, AttributeError) as exc:
        logger.warning("query parse failed: {}", exc)
        return ParsedQuery(diagnostic=f"unparseable parser output: {exc}")
    start, end = start or end, end or start
    if start and end and start > end:
        start, end = end, start
    return ParsedQuery(zip_code, start, end)


def parse_user_query(message: str, endpoint: ClientConfig) -> ParsedQuery:
    """Ask the parser model; model-side garbage yields an all-null result with a diagnostic.

    Transport failures still raise :class:`AnalystError`.
    """
    raw = chat_complete(endpoint, query_messages(message))
    return interpret_parse(raw)
