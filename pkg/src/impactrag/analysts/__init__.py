from .client import AnalystError, ClientConfig, Message, MockBackend, RateLimiter, chat_complete, prompt_hash
from .prompts import (
    EvidenceBundle,
    TemplateError,
    assemble_system_prompt,
    assemble_user_prompt,
    assemble_visual_prompt,
    load_template,
    render_sensor_table,
)
from .query import ParsedQuery, parse_user_query
from .reports import (
    AnalystReport,
    EvidenceRefs,
    ReportParseError,
    parse_report,
    render_report,
    report_to_json,
    strip_unknown_refs,
)

__all__ = [
    "AnalystError", "ClientConfig", "Message", "MockBackend", "RateLimiter", "chat_complete", "prompt_hash",
    "EvidenceBundle", "TemplateError", "assemble_system_prompt", "assemble_user_prompt",
    "assemble_visual_prompt", "load_template", "render_sensor_table",
    "ParsedQuery", "parse_user_query",
    "AnalystReport", "EvidenceRefs", "ReportParseError", "parse_report", "render_report",
    "report_to_json", "strip_unknown_refs",
]
