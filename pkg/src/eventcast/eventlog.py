"""Event-log data model, CSV ingestion, and the one-trace-per-line text format.

Ordering rules (applied by build_traces):
  * events within a case: ascending timestamp, ties by activity label;
  * traces within a log: ascending first-event timestamp, ties by first
    activity label, then by case id (stable and total).

The text format keeps activity sequences only; case ids and timestamps are
dropped by design. Files are UTF-8, LF line endings, activities joined by a
single ASCII space, one trace per line, trailing newline.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Iterator, Optional, Sequence

from .errors import ConfigError, InputDataError

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class Event:
    """One recorded activity execution: (case id, timestamp ticks, activity)."""

    case_id: str
    ticks: int
    activity: str
    raw_time: str = ""


@dataclass(frozen=True)
class Trace:
    """Activity sequence of one case, already in timestamp order."""

    case_id: str
    activities: tuple[str, ...]

    def __post_init__(self):
        if len(self.activities) == 0:
            raise InputDataError(f"trace {self.case_id!r} has no activities")

    def __len__(self) -> int:
        return len(self.activities)


@dataclass(frozen=True)
class EventLog:
    """Ordered collection of traces plus the set of observed activities."""

    traces: tuple[Trace, ...]
    activity_universe: frozenset[str]

    @classmethod
    def from_traces(cls, traces: Iterable[Trace]) -> "EventLog":
        traces = tuple(traces)
        universe = frozenset(a for t in traces for a in t.activities)
        return cls(traces, universe)

    @classmethod
    def from_sequences(cls, sequences: Iterable[Sequence[str]]) -> "EventLog":
        """Build a log from bare activity sequences (case ids synthesized)."""
        return cls.from_traces(
            Trace(str(i + 1), tuple(seq)) for i, seq in enumerate(sequences)
        )

    @property
    def sequences(self) -> tuple[tuple[str, ...], ...]:
        return tuple(t.activities for t in self.traces)

    def __len__(self) -> int:
        return len(self.traces)

    def __iter__(self) -> Iterator[Trace]:
        return iter(self.traces)


def parse_timestamp(text: str, time_format: Optional[str] = None) -> int:
    """Parse a timestamp string to integer ticks.

    With an explicit strptime format, ticks are microseconds since the epoch.
    Otherwise plain integers are taken as ticks directly, and ISO-8601
    strings (optional fractional seconds, optional offset, trailing 'Z')
    are converted to microseconds since the epoch. Naive datetimes are
    treated as UTC.
    """
    text = text.strip()
    if time_format is not None:
        dt = datetime.strptime(text, time_format)
    else:
        try:
            return int(text)
        except ValueError:
            pass
        iso = text[:-1] + "+00:00" if text.endswith("Z") else text
        dt = datetime.fromisoformat(iso)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return round((dt - _EPOCH).total_seconds() * 1_000_000)


def parse_csv(
    path,
    case_col: str = "case_id",
    time_col: str = "timestamp",
    act_col: str = "activity",
    time_format: Optional[str] = None,
    transform=None,
) -> EventLog:
    """Read a header-first CSV of events and build the canonically ordered log.

    `transform`, when given, is applied to each activity label before any
    sorting happens (label cleanup must precede the tie-break rules).
    Raises ConfigError when a mapped column is missing from the header and
    InputDataError (with the line number) on unparseable rows; rows are never
    silently skipped.
    """
    events = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (case_col, time_col, act_col):
            if col not in header:
                raise ConfigError(
                    f"column {col!r} not found in CSV header {header} of {path}"
                )
        for row in reader:
            line = reader.line_num
            case = (row[case_col] or "").strip()
            raw_time = (row[time_col] or "").strip()
            activity = (row[act_col] or "").strip()
            if not case:
                raise InputDataError("empty case id", line=line)
            if not activity:
                raise InputDataError("empty activity", line=line)
            if transform is not None:
                try:
                    activity = transform(activity)
                except InputDataError as exc:
                    raise InputDataError(str(exc), line=line) from exc
            try:
                ticks = parse_timestamp(raw_time, time_format)
            except (ValueError, TypeError) as exc:
                raise InputDataError(
                    f"unparseable timestamp {raw_time!r} ({exc})", line=line
                ) from exc
            events.append(Event(case, ticks, activity, raw_time))
    return build_traces(events)


def build_traces(events: Iterable[Event]) -> EventLog:
    """Group events by case and apply the canonical ordering rules.

    Deterministic for any permutation of the input events.
    """
    by_case: dict[str, list[Event]] = {}
    for ev in events:
        by_case.setdefault(ev.case_id, []).append(ev)
    traces = []
    order_keys = []
    for case_id, evs in by_case.items():
        evs.sort(key=lambda e: (e.ticks, e.activity))
        traces.append(Trace(case_id, tuple(e.activity for e in evs)))
        order_keys.append((evs[0].ticks, evs[0].activity, case_id))
    ordered = [t for _, t in sorted(zip(order_keys, traces), key=lambda p: p[0])]
    return EventLog.from_traces(ordered)


def write_text(log: EventLog, path) -> None:
    """Write one space-joined trace per line (bit-exact format)."""
    for trace in log:
        for act in trace.activities:
            if any(ch.isspace() for ch in act):
                raise InputDataError(
                    f"activity {act!r} contains whitespace; sanitize before writing"
                )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for trace in log:
            fh.write(" ".join(trace.activities))
            fh.write("\n")


def read_text(path) -> EventLog:
    """Read a text-format log; line order is preserved as trace order."""
    traces = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                raise InputDataError("empty line (traces have length >= 1)", line=i)
            traces.append(Trace(str(i), tuple(line.split())))
    return EventLog.from_traces(traces)


@dataclass(frozen=True)
class StatReport:
    """Summary statistics of an event log (case lengths in events)."""

    total_cases: int
    total_events: int
    variant_count: int
    unique_activities: int
    max_len: Optional[int]
    min_len: Optional[int]
    mean_len: Optional[float]
    median_len: Optional[float]

    def as_dict(self) -> dict:
        return {
            "total_cases": self.total_cases,
            "total_events": self.total_events,
            "variant_count": self.variant_count,
            "unique_activities": self.unique_activities,
            "max_case_length": self.max_len,
            "min_case_length": self.min_len,
            "mean_case_length": self.mean_len,
            "median_case_length": self.median_len,
        }

    def format(self) -> str:
        rows = [
            ("total cases", self.total_cases),
            ("total activity instances", self.total_events),
            ("unique trace variants", self.variant_count),
            ("unique activities", self.unique_activities),
            ("max case length", "-" if self.max_len is None else self.max_len),
            ("min case length", "-" if self.min_len is None else self.min_len),
            ("mean case length",
             "-" if self.mean_len is None else f"{self.mean_len:.2f}"),
            ("median case length",
             "-" if self.median_len is None else f"{self.median_len:g}"),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def log_stats(log: EventLog) -> StatReport:
    """Compute case/instance/variant counts and case-length statistics.

    Mean is reported to 2 decimals; the median of an even count is the
    midpoint average. An empty log reports zero counts and absent lengths.
    """
    lengths = [len(t) for t in log]
    if not lengths:
        return StatReport(0, 0, 0, 0, None, None, None, None)
    variants = {t.activities for t in log}
    return StatReport(
        total_cases=len(lengths),
        total_events=sum(lengths),
        variant_count=len(variants),
        unique_activities=len(log.activity_universe),
        max_len=max(lengths),
        min_len=min(lengths),
        mean_len=round(sum(lengths) / len(lengths), 2),
        median_len=float(statistics.median(lengths)),
    )
