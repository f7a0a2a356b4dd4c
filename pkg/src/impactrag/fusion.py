"""Combine text and visual analyst reports into one extent/damage estimate.

Extent: text value alone when the query ends after the peak date and the
visual report flags recession, else a weighted blend. Damage: the maximum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from enum import Enum

from .analysts.reports import AnalystReport, EvidenceRefs

HARVEY_PEAK = date(2017, 8, 28)


class Branch(str, Enum):
    TEXT_PRIORITY = "text_priority"
    WEIGHTED = "weighted"
    TEXT_ONLY_FALLBACK = "text_only_fallback"


@dataclass(frozen=True)
class FusionInput:
    text_report: AnalystReport
    visual_report: AnalystReport | None
    query_date: date
    peak_date: date = HARVEY_PEAK
    extent_weight: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.extent_weight <= 1.0:
            raise ValueError("extent_weight must lie in [0, 1]")


@dataclass(frozen=True)
class FusedAssessment:
    flood_extent_pct: float
    damage_severity_pct: float
    confidence: float
    branch_taken: Branch
    evidence_refs: EvidenceRefs = field(default_factory=EvidenceRefs)
    text_reasoning: str = ""
    visual_reasoning: str | None = None


def weighted_avg(t: float, v: float, w: float) -> float:
    return w * t + (1.0 - w) * v


def fuse(inp: FusionInput) -> FusedAssessment:
    text, visual = inp.text_report, inp.visual_report
    if visual is None:
        return FusedAssessment(
            flood_extent_pct=text.flood_extent_pct,
            damage_severity_pct=text.damage_severity_pct,
            confidence=text.confidence,
            branch_taken=Branch.TEXT_ONLY_FALLBACK,
            evidence_refs=text.evidence_refs,
            text_reasoning=text.reasoning,
        )
    if inp.query_date > inp.peak_date and visual.recession_observed:
        extent, branch = text.flood_extent_pct, Branch.TEXT_PRIORITY
    else:
        extent = weighted_avg(text.flood_extent_pct, visual.flood_extent_pct, inp.extent_weight)
        branch = Branch.WEIGHTED
    return FusedAssessment(
        flood_extent_pct=extent,
        damage_severity_pct=max(text.damage_severity_pct, visual.damage_severity_pct),
        confidence=min(text.confidence, visual.confidence),
        branch_taken=branch,
        evidence_refs=text.evidence_refs.merge(visual.evidence_refs),
        text_reasoning=text.reasoning,
        visual_reasoning=visual.reasoning,
    )
