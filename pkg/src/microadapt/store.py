"""Pseudonymized append-only event log with replay, plus demand and quality reports.

Records are newline-delimited JSON, one object per line, in a single
append-only file: truncation is self-evident (a torn final line has no
newline) and replay is a sequential read.  Appends are fsynced before they are
acknowledged.  Writers must serialize appends (the service funnels them
through one lock); readers see a consistent prefix.
"""

from __future__ import annotations

import hmac
import hashlib
import json
import math
import os
import threading
from dataclasses import dataclass
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator

from .stats import CohortComparison, cohort_compare  # noqa: F401  (module surface)
from .timefmt import format_timestamp, parse_timestamp

FEEDBACK_TAGS = ("too_long", "unclear", "helpful", "outdated")

# Event kinds written by the service/simulator; progression kinds pass through.
KIND_RECOMMENDATION = "recommendation"
KIND_REMINDER_SET = "reminder_set"
KIND_REMINDER_FIRED = "reminder_fired"
KIND_REMINDERS_SATISFIED = "reminders_satisfied"
KIND_FEEDBACK = "feedback"


class StoreError(Exception):
    pass


class LogCorruptionError(StoreError):
    """A newline-terminated record failed to parse: not a torn tail."""


@dataclass(frozen=True)
class EventRecord:
    seq: int
    learner: str
    at: datetime
    kind: str
    payload: dict

    def to_line(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "learner": self.learner,
                "at": format_timestamp(self.at),
                "kind": self.kind,
                "payload": self.payload,
            },
            separators=(",", ":"),
            sort_keys=True,
        )

    @classmethod
    def from_line(cls, line: str) -> "EventRecord":
        data = json.loads(line)
        return cls(
            seq=data["seq"],
            learner=data["learner"],
            at=parse_timestamp(data["at"]),
            kind=data["kind"],
            payload=data["payload"],
        )


@dataclass(frozen=True)
class FeedbackEntry:
    learner: str
    unit_id: str
    rating: int
    at: datetime
    tag: str | None = None

    def __post_init__(self):
        if not 1 <= self.rating <= 5:
            raise StoreError(f"rating must be 1..5, got {self.rating}")
        if self.tag is not None and self.tag not in FEEDBACK_TAGS:
            raise StoreError(f"unknown feedback tag {self.tag!r}")

    def payload(self) -> dict:
        data = {"unit_id": self.unit_id, "rating": self.rating}
        if self.tag is not None:
            data["tag"] = self.tag
        return data


class Pseudonymizer:
    """Keyed hash of real identities: anonymous in the log, yet stable per
    deployment key so one person's trajectory stays linkable."""

    TOKEN_BYTES = 16

    def __init__(self, key: bytes):
        if not key:
            raise StoreError("pseudonym key must be nonempty")
        self._key = key

    def token(self, identity: str) -> str:
        digest = hmac.new(self._key, identity.encode("utf-8"), hashlib.sha256)
        return digest.hexdigest()[: self.TOKEN_BYTES * 2]


class EventLog:
    """Append-only, seq-numbered event log backed by one NDJSON file.

    ``path=None`` keeps the log purely in memory (tests, simulation).  Opening
    an existing file recovers it: a torn final line is moved to
    ``<path>.quarantine`` and the file is truncated back to the last complete
    record.
    """

    def __init__(self, path: str | Path | None = None, durable: bool = True):
        self._records: list[EventRecord] = []
        self._lock = threading.Lock()
        self._durable = durable
        self._path = Path(path) if path is not None else None
        self._fd: int | None = None
        self._closed = False
        self.recovered_tail: bytes | None = None
        if self._path is not None:
            self._recover()
            self._fd = os.open(
                self._path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o600
            )

    def _recover(self) -> None:
        assert self._path is not None
        self._path.parent.mkdir(parents=True, exist_ok=True)
        if not self._path.exists():
            return
        data = self._path.read_bytes()
        keep = len(data)
        if data and not data.endswith(b"\n"):
            cut = data.rfind(b"\n") + 1
            tail = data[cut:]
            quarantine = self._path.with_suffix(self._path.suffix + ".quarantine")
            with open(quarantine, "ab") as handle:
                handle.write(tail + b"\n")
            self.recovered_tail = tail
            keep = cut
            with open(self._path, "r+b") as handle:
                handle.truncate(keep)
        expected_seq = 1
        for lineno, raw in enumerate(data[:keep].splitlines(), start=1):
            try:
                record = EventRecord.from_line(raw.decode("utf-8"))
            except (ValueError, KeyError) as exc:
                raise LogCorruptionError(
                    f"{self._path}:{lineno}: unreadable record: {exc}"
                ) from exc
            if record.seq != expected_seq:
                raise LogCorruptionError(
                    f"{self._path}:{lineno}: expected seq {expected_seq},"
                    f" found {record.seq}"
                )
            expected_seq += 1
            self._records.append(record)

    def append(self, learner: str, at: datetime, kind: str, payload: dict) -> EventRecord:
        """Durably append one record; returns it with its assigned seq."""
        with self._lock:
            if self._closed:
                raise StoreError("append to a closed log")
            record = EventRecord(
                seq=len(self._records) + 1,
                learner=learner,
                at=at,
                kind=kind,
                payload=payload,
            )
            line = record.to_line()
            if self._fd is not None:
                data = line.encode("utf-8") + b"\n"
                written = os.write(self._fd, data)
                if written != len(data):
                    raise StoreError("short write: append not acknowledged")
                if self._durable:
                    os.fsync(self._fd)
            self._records.append(record)
            return record

    def next_seq(self) -> int:
        with self._lock:
            return len(self._records) + 1

    def records(self) -> list[EventRecord]:
        with self._lock:
            return list(self._records)

    def replay(self, learner: str) -> list[EventRecord]:
        """All of one learner's events in seq order; unknown learner -> []."""
        with self._lock:
            return [r for r in self._records if r.learner == learner]

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self.records())

    def close(self) -> None:
        with self._lock:
            self._closed = True
            if self._fd is not None:
                os.fsync(self._fd)
                os.close(self._fd)
                self._fd = None

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


@dataclass(frozen=True)
class TimeWindow:
    """Half-open [start, end); None means unbounded on that side."""

    start: datetime | None = None
    end: datetime | None = None

    def contains(self, at: datetime) -> bool:
        if self.start is not None and at < self.start:
            return False
        if self.end is not None and at >= self.end:
            return False
        return True


def demand_report(
    records: Iterable[EventRecord], window: TimeWindow | None = None
) -> list[tuple[str, int]]:
    """Units ranked by how often recommendations named them, descending count,
    ties by unit id."""
    window = window or TimeWindow()
    counts: dict[str, int] = {}
    for record in records:
        if record.kind != KIND_RECOMMENDATION or not window.contains(record.at):
            continue
        for unit_id in record.payload.get("units", ()):
            counts[unit_id] = counts.get(unit_id, 0) + 1
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))


@dataclass(frozen=True)
class QualityRow:
    unit_id: str
    demand_rank: int
    recommendation_count: int
    mean_rating: Fraction | None
    rating_count: int
    flag: str | None  # "rework" or None

    def to_payload(self) -> dict:
        return {
            "unit_id": self.unit_id,
            "demand_rank": self.demand_rank,
            "recommendation_count": self.recommendation_count,
            "mean_rating": (
                None if self.mean_rating is None else round(float(self.mean_rating), 4)
            ),
            "rating_count": self.rating_count,
            "flag": self.flag,
        }


def quality_report(
    records: Iterable[EventRecord],
    *,
    demand_quantile: float = 0.25,
    rating_threshold: Fraction = Fraction(3),
    window: TimeWindow | None = None,
) -> list[QualityRow]:
    """Join demand ranking with feedback; flag "rework" for units that sit in
    the top demand quantile yet average below the rating threshold."""
    records = list(records)
    demand = demand_report(records, window)
    window = window or TimeWindow()
    ratings: dict[str, list[int]] = {}
    for record in records:
        if record.kind != KIND_FEEDBACK or not window.contains(record.at):
            continue
        unit_id = record.payload["unit_id"]
        ratings.setdefault(unit_id, []).append(int(record.payload["rating"]))
    ranked = [uid for uid, _ in demand]
    counts = dict(demand)
    extra = sorted(uid for uid in ratings if uid not in counts)
    ordering = ranked + extra
    demanded = len(ranked)
    top_cutoff = math.ceil(demanded * demand_quantile) if demanded else 0
    rows: list[QualityRow] = []
    for rank, unit_id in enumerate(ordering, start=1):
        unit_ratings = ratings.get(unit_id, [])
        mean = (
            Fraction(sum(unit_ratings), len(unit_ratings)) if unit_ratings else None
        )
        flag = None
        if (
            rank <= top_cutoff
            and counts.get(unit_id, 0) > 0
            and mean is not None
            and mean < rating_threshold
        ):
            flag = "rework"
        rows.append(
            QualityRow(
                unit_id=unit_id,
                demand_rank=rank,
                recommendation_count=counts.get(unit_id, 0),
                mean_rating=mean,
                rating_count=len(unit_ratings),
                flag=flag,
            )
        )
    return rows
