"""Structured run traces.

One record per observable happening, strictly ordered by (timestamp, sequence
number). Records render to a fixed-field-order line format so trace files diff
cleanly and hash stably.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterator

# Verbosity threshold per record kind. A TraceLog keeps a record when its
# level is >= the kind's threshold; level 0 keeps nothing.
_KIND_LEVELS = {
    "header": 1,
    "event": 1,
    "bounds": 1,
    "allocation": 1,
    "transition": 1,
    "command": 1,
    "fault": 1,
    "verdict": 1,
    "publish": 2,
    "deliver": 2,
    "timer_set": 2,
    "timer_cancel": 2,
    "timer_fire": 2,
    "discard": 2,
    "tick": 3,
}


@dataclass(frozen=True)
class TraceRecord:
    ts: int
    seq: int
    src: str
    kind: str
    fields: tuple[tuple[str, str], ...]

    def line(self) -> str:
        parts = [f"ts={self.ts}", f"n={self.seq}", f"src={self.src}", f"kind={self.kind}"]
        parts.extend(f"{k}={v}" for k, v in self.fields)
        return " ".join(parts)

    def get(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.fields:
            if k == key:
                return v
        return default


class TraceLog:
    def __init__(self, level: int = 2):
        self.level = level
        self.records: list[TraceRecord] = []
        self._seq = 0

    def emit(self, ts: int, src: str, kind: str, /, **fields: Any) -> None:
        if self.level < _KIND_LEVELS.get(kind, 2):
            return
        self._seq += 1
        rendered = tuple((k, _render(v)) for k, v in fields.items())
        self.records.append(TraceRecord(ts, self._seq, src, kind, rendered))

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def of_kind(self, kind: str) -> list[TraceRecord]:
        return [r for r in self.records if r.kind == kind]

    def lines(self) -> list[str]:
        return [r.line() for r in self.records]

    def text(self) -> str:
        return "\n".join(self.lines()) + ("\n" if self.records else "")


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "value") and not isinstance(value, (int, str)):
        return str(value.value)
    return str(value)
