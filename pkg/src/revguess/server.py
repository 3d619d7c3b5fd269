"""Honest server front end: account store, lockout defense, telemetry."""
from __future__ import annotations

from dataclasses import dataclass

from .crypto import Rng
from .protocols import AccountStore, Outcome, Party, ProtocolMessage, RejectReason, server_start


@dataclass(frozen=True)
class AuthEvent:
    time: int
    identity: str
    kind: str  # "success" | "failure" | "refused" | "lockout"
    reason: str | None = None


class HonestServer:
    """Wraps an :class:`AccountStore` with an account lockout policy.

    After ``lockout_threshold`` failed verifications an account is locked
    for ``lockout_duration`` time units; the failure count restarts when the
    lock expires. Successful logins do not clear the count. ``None`` as the
    threshold disables lockout.
    """

    def __init__(self, store: AccountStore, lockout_threshold: int | None = None, lockout_duration: int = 0):
        self.store = store
        self.lockout_threshold = lockout_threshold
        self.lockout_duration = lockout_duration
        self.telemetry: list[AuthEvent] = []
        self._failures: dict[str, int] = {}
        self._locked_until: dict[str, int] = {}

    def is_locked(self, identity: str, now: int) -> bool:
        until = self._locked_until.get(identity)
        if until is None:
            return False
        if now >= until:
            del self._locked_until[identity]
            self._failures.pop(identity, None)
            return False
        return True

    def open(self, first: ProtocolMessage, rng: Rng) -> Party:
        return server_start(self.store, first, rng)

    def refuse(self, identity: str, now: int) -> AuthEvent:
        ev = AuthEvent(now, identity, "refused", RejectReason.LOCKED_OUT.value)
        self.telemetry.append(ev)
        return ev

    def record(self, identity: str, outcome: Outcome, now: int) -> list[AuthEvent]:
        """Log a finished session; returns the telemetry it produced (maybe a lockout too)."""
        if outcome.accepted:
            ev = [AuthEvent(now, identity, "success")]
        else:
            ev = [AuthEvent(now, identity, "failure", outcome.reason.value)]
            if self.lockout_threshold is not None:
                n = self._failures.get(identity, 0) + 1
                self._failures[identity] = n
                if n >= self.lockout_threshold:
                    self._locked_until[identity] = now + self.lockout_duration
                    ev.append(AuthEvent(now, identity, "lockout"))
        self.telemetry.extend(ev)
        return ev
