"""Append-only JSON-lines event log with crash-tolerant replay.

One JSON document per line; seq is gapless within a log file. A torn
final line (partial write during a crash) is truncated on recovery and
noted, everything before it is kept.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

LOG_FILENAME = "events.jsonl"

EVENT_KINDS = {"reading", "forecast", "alert", "actuator", "estop", "system"}


@dataclass(frozen=True)
class EventLogEntry:
    seq: int
    at: int
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps({"seq": self.seq, "at": self.at, "kind": self.kind,
                           "payload": self.payload}, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "EventLogEntry":
        data = json.loads(line)
        return cls(seq=int(data["seq"]), at=int(data["at"]), kind=data["kind"],
                   payload=data["payload"])


def read_entries(path: Path) -> tuple[list[EventLogEntry], bool]:
    """All recoverable entries, plus whether a torn final record was dropped."""
    if not path.exists():
        return [], False
    entries: list[EventLogEntry] = []
    torn = False
    with path.open("r", encoding="utf-8") as f:
        lines = f.read().split("\n")
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            entry = EventLogEntry.from_json(line)
        except (json.JSONDecodeError, KeyError, ValueError):
            if i >= len(lines) - 2:  # torn tail only; mid-file damage is fatal
                torn = True
                break
            raise ValueError(f"{path}: corrupt event log at line {i + 1}")
        entries.append(entry)
    return entries, torn


class EventLog:
    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.path = self.directory / LOG_FILENAME
        existing, torn = read_entries(self.path)
        self._next_seq = (existing[-1].seq + 1) if existing else 1
        self.recovered_torn_tail = torn
        if torn:
            # rewrite without the torn line so seq stays gapless on disk
            with self.path.open("w", encoding="utf-8") as f:
                for e in existing:
                    f.write(e.to_json() + "\n")
        self._fh = self.path.open("a", encoding="utf-8")

    @property
    def next_seq(self) -> int:
        return self._next_seq

    def append(self, kind: str, payload: dict, at: int) -> EventLogEntry:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        entry = EventLogEntry(seq=self._next_seq, at=at, kind=kind, payload=payload)
        self._next_seq += 1
        self._fh.write(entry.to_json() + "\n")
        self._fh.flush()
        return entry

    def entries_after(self, cursor: int) -> list[EventLogEntry]:
        self._fh.flush()
        entries, _ = read_entries(self.path)
        return [e for e in entries if e.seq > cursor]

    def close(self) -> None:
        self._fh.close()
