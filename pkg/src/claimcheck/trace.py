"""Ordered audit log of one verification run, serializable as JSONL."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable


class EventKind(Enum):
    AGENT_CALL = "agent_call"
    SEARCH_CALL = "search_call"
    FETCH = "fetch"
    SCENARIO_DECISION = "scenario_decision"
    DEFERRED = "deferred"
    EVIDENCE_ADDED = "evidence_added"
    VERDICT = "verdict"


@dataclass(frozen=True)
class TraceEvent:
    timestamp: float
    kind: EventKind
    payload: dict[str, Any]


class RunTrace:
    """Append-only event log; a completed run ends with exactly one verdict."""

    def __init__(self, clock: Callable[[], float] = time.time) -> None:
        self._clock = clock
        self.events: list[TraceEvent] = []

    def log(self, kind: EventKind, **payload: Any) -> None:
        if self.events and self.events[-1].kind is EventKind.VERDICT:
            raise ValueError("trace already closed by a verdict event")
        self.events.append(TraceEvent(self._clock(), kind, payload))

    def count(self, kind: EventKind) -> int:
        return sum(1 for e in self.events if e.kind is kind)

    def of_kind(self, kind: EventKind) -> list[TraceEvent]:
        return [e for e in self.events if e.kind is kind]

    @property
    def completed(self) -> bool:
        return self.count(EventKind.VERDICT) == 1 and self.events[-1].kind is EventKind.VERDICT

    def to_jsonl(self, normalize_timestamps: bool = False) -> str:
        lines = []
        for event in self.events:
            ts = 0.0 if normalize_timestamps else event.timestamp
            lines.append(
                json.dumps(
                    {"ts": ts, "kind": event.kind.value, "payload": event.payload},
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")
