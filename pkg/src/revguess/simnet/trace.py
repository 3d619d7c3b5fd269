from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

SERVER = "server"
ADVERSARY = "adversary"
SIM = "sim"

KINDS = frozenset({
    "run-start", "run-end",
    "session-start", "msg-send", "msg-recv",
    "client-accept", "client-reject", "server-accept", "server-reject",
    "forge", "trial", "lockout", "retry",
})


class TraceParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"trace line {lineno}: {message}")


@dataclass(frozen=True, slots=True)
class TraceEvent:
    time: int
    seq: int
    actor: str
    kind: str
    session: int | None = None
    detail: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"time": self.time, "seq": self.seq, "actor": self.actor, "kind": self.kind,
                           "session": self.session, "detail": self.detail},
                          sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEvent":
        return cls(d["time"], d["seq"], d["actor"], d["kind"], d.get("session"), d.get("detail") or {})


class Trace:
    """Append-only event log; ``seq`` is the global emission order."""

    def __init__(self, events: list[TraceEvent] | None = None):
        self.events: list[TraceEvent] = events if events is not None else []

    def __len__(self):
        return len(self.events)

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    def emit(self, time: int, actor: str, kind: str, session: int | None = None, **detail) -> TraceEvent:
        ev = TraceEvent(time, len(self.events), actor, kind, session, detail)
        self.events.append(ev)
        return ev

    @property
    def run_id(self) -> str | None:
        for ev in self.events:
            if ev.kind == "run-start":
                return ev.detail.get("run_id")
        return None

    def header(self) -> dict:
        for ev in self.events:
            if ev.kind == "run-start":
                return ev.detail
        return {}

    def to_jsonl(self) -> str:
        return "".join(ev.to_json() + "\n" for ev in self.events)

    @classmethod
    def from_jsonl(cls, lines: Iterable[str]) -> "Trace":
        events = []
        prev = None
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise TraceParseError(lineno, f"not JSON ({e.msg})") from None
            if not isinstance(d, dict):
                raise TraceParseError(lineno, "expected an object")
            missing = {"time", "seq", "actor", "kind"} - d.keys()
            if missing:
                raise TraceParseError(lineno, f"missing fields {sorted(missing)}")
            if d["kind"] not in KINDS:
                raise TraceParseError(lineno, f"unknown event kind {d['kind']!r}")
            if not isinstance(d["time"], int) or not isinstance(d["seq"], int):
                raise TraceParseError(lineno, "time and seq must be integers")
            if d.get("detail") is not None and not isinstance(d["detail"], dict):
                raise TraceParseError(lineno, "detail must be an object")
            ev = TraceEvent.from_dict(d)
            if prev is not None and (ev.time, ev.seq) <= (prev.time, prev.seq):
                raise TraceParseError(lineno, "events are not ordered by (time, seq)")
            prev = ev
            events.append(ev)
        return cls(events)

    @classmethod
    def load(cls, path) -> "Trace":
        with open(path, encoding="utf-8") as fh:
            return cls.from_jsonl(fh)
