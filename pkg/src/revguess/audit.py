"""Agreement checking over recorded simulation traces.

The property: whenever a client finishes key confirmation on key K in some
session, the server finished the same session with the same K. A reverse
trial that the client accepts breaks it, since no server took part.
"""
from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field

from .simnet.report import RunReport, UsageError
from .simnet.trace import ADVERSARY, Trace


class ViolationKind(str, enum.Enum):
    NO_SERVER_RUN = "no-server-run"
    KEY_MISMATCH = "key-mismatch"


@dataclass(frozen=True)
class Violation:
    session: int
    client: str
    key_digest: str
    kind: ViolationKind
    seq: int  # position of the offending client-accept in the trace

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


def check_agreement(trace: Trace) -> list[Violation]:
    """Every client-accept needs a server-accept in the same session with the same key digest."""
    server_keys: dict[int, set[str]] = {}
    for ev in trace:
        if ev.kind == "server-accept":
            server_keys.setdefault(ev.session, set()).add(ev.detail.get("key"))
    out = []
    for ev in trace:
        if ev.kind != "client-accept" or ev.actor == ADVERSARY:
            continue
        key = ev.detail.get("key")
        keys = server_keys.get(ev.session)
        if not keys:
            out.append(Violation(ev.session, ev.actor, key, ViolationKind.NO_SERVER_RUN, ev.seq))
        elif key not in keys:
            out.append(Violation(ev.session, ev.actor, key, ViolationKind.KEY_MISMATCH, ev.seq))
    return out


def violations_json(violations: list[Violation]) -> str:
    return json.dumps([v.to_dict() for v in violations], indent=2, sort_keys=True) + "\n"


def recount(trace: Trace) -> dict[str, int]:
    """Rebuild every RunReport counter from the trace alone."""
    c = dict.fromkeys(RunReport.COUNTERS, 0)
    sessions = set()
    adversary_sessions = set()
    compromised: set[str] = set()
    shared = bool(trace.header().get("shared_password"))
    clients = trace.header().get("clients")
    end = 0
    for ev in trace:
        end = ev.time
        if ev.kind == "session-start":
            sessions.add(ev.session)
            if ev.actor == ADVERSARY:
                adversary_sessions.add(ev.session)
        elif ev.kind == "trial":
            mode, result = ev.detail["mode"], ev.detail["result"]
            if mode == "verify":
                c["verify_trials"] += 1
                continue
            c[f"{mode}_trials"] += 1
            c[f"{mode}_{result}"] += 1
            if result == "confirmed":
                compromised.add(ev.detail["client"])
        elif ev.kind == "server-accept":
            c["server_accepts"] += 1
        elif ev.kind == "server-reject":
            if ev.detail.get("reason") == "locked-out":
                c["server_refusals"] += 1
            else:
                c["server_failures"] += 1
        elif ev.kind == "lockout":
            c["lockouts"] += 1
        elif ev.kind in ("client-accept", "client-reject") and ev.session not in adversary_sessions:
            c["client_successes" if ev.kind == "client-accept" else "client_failures"] += 1
    c["server_events"] = c["server_accepts"] + c["server_failures"] + c["server_refusals"]
    c["sessions"] = len(sessions)
    c["simulated_duration"] = end
    c["compromised_count"] = clients if (shared and compromised) else len(compromised)
    return c


@dataclass
class Reconciliation:
    run_id: str
    violations: int
    confirmed_reverse: int
    mitigated: bool
    discrepancies: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.discrepancies

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d


def audit_summary(trace: Trace, report: RunReport) -> Reconciliation:
    """Cross-check a report against its trace and the agreement property."""
    if trace.run_id != report.run_id:
        raise UsageError(f"trace is from run {trace.run_id}, report is from run {report.run_id}")
    violations = check_agreement(trace)
    rec = Reconciliation(report.run_id, len(violations), report.reverse_confirmed, report.mitigated)
    for name, value in recount(trace).items():
        reported = getattr(report, name)
        if reported != value:
            rec.discrepancies.append(f"{name}: report says {reported}, trace says {value}")
    expected = 0 if report.mitigated else report.reverse_confirmed
    if len(violations) != expected:
        rec.discrepancies.append(f"violations: found {len(violations)}, expected {expected}")
    return rec
