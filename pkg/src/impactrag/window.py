from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone


@dataclass(frozen=True)
class TimeWindow:
    """Inclusive range of UTC calendar days."""

    start: date
    end: date

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"window start {self.start} after end {self.end}")

    @classmethod
    def parse(cls, start: str, end: str) -> "TimeWindow":
        return cls(date.fromisoformat(start), date.fromisoformat(end))

    @property
    def start_dt(self) -> datetime:
        return datetime.combine(self.start, time.min, tzinfo=timezone.utc)

    @property
    def end_dt(self) -> datetime:
        """Exclusive upper bound: midnight after the last day."""
        return datetime.combine(self.end + timedelta(days=1), time.min, tzinfo=timezone.utc)

    def contains(self, ts: datetime) -> bool:
        return self.start_dt <= ts < self.end_dt

    def distance(self, ts: datetime) -> timedelta:
        """Zero inside the window, otherwise the gap to the nearest edge."""
        if ts < self.start_dt:
            return self.start_dt - ts
        if ts >= self.end_dt:
            return ts - self.end_dt
        return timedelta(0)

    def __str__(self) -> str:
        return f"{self.start.isoformat()} to {self.end.isoformat()}"
