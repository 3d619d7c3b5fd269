"""Reverse and standard online guessers, guess ordering and per-client budgets.

A reverse trial has the adversary answer a client's login request as if
it were the server: it guesses the password, simulates registration with
that guess, then runs the honest server code over the forged record. If
the client completes the handshake, the guess was right.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

from .crypto import GroupParams, Rng, SigKeypair
from .protocols import (
    AccountStore,
    AuthRecord,
    ClientCredential,
    Outcome,
    Party,
    ProtocolId,
    ProtocolMessage,
    RejectReason,
    build_record,
    client_start,
    converse,
    server_start,
)
from .protocols import eke, opaque, srp
from .server import HonestServer


class Strategy(str, enum.Enum):
    DICTIONARY = "dictionary"
    SPRAY = "spray"
    WEIGHTED = "weighted"


class TrialStatus(str, enum.Enum):
    CONFIRMED = "confirmed"
    REFUTED = "refuted"
    INCOMPLETE = "incomplete"


@dataclass(frozen=True)
class TrialResult:
    status: TrialStatus
    guess: str
    reason: str | None = None

    @classmethod
    def confirmed(cls, guess):
        return cls(TrialStatus.CONFIRMED, guess)

    @classmethod
    def refuted(cls, guess):
        return cls(TrialStatus.REFUTED, guess)

    @classmethod
    def incomplete(cls, guess, reason):
        return cls(TrialStatus.INCOMPLETE, guess, reason)

    def adversary_view(self) -> "TrialResult":
        """What the adversary can actually observe.

        A client that rejects the envelope's confirmation tag drops the
        connection exactly as it does for a wrong password.
        """
        if self.status is TrialStatus.INCOMPLETE and self.reason == "confirmation-rejected":
            return TrialResult.refuted(self.guess)
        return self


# -- dictionaries --------------------------------------------------------------

@dataclass
class Dictionary:
    entries: list[str]
    weights: list[float] | None = None

    def __len__(self):
        return len(self.entries)

    def top(self, n: int) -> "Dictionary":
        return Dictionary(self.entries[:n], self.weights[:n] if self.weights else None)


def load_dictionary(path: str | Path) -> Dictionary:
    """One password per line in priority order, with an optional tab-separated weight."""
    entries, weights = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            pw, sep, w = line.partition("\t")
            if not pw:
                raise ValueError(f"{path}:{lineno}: empty password")
            entries.append(pw)
            if sep:
                try:
                    weights.append(float(w))
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad weight {w!r}") from None
    if weights and len(weights) != len(entries):
        raise ValueError(f"{path}: weight column present on some lines only")
    return Dictionary(entries, weights or None)


def zipf_weights(n: int, exponent: float) -> list[float]:
    return [1.0 / (k ** exponent) for k in range(1, n + 1)]


# -- guess ordering ------------------------------------------------------------

class Guesser:
    """Per-target guess ordering with refutation history.

    ``dictionary`` and ``spray`` walk the list in rank order (they differ
    only in how a scenario budgets them). ``weighted`` draws without
    replacement in proportion to the weights, one independent order per
    target.
    """

    def __init__(self, strategy: Strategy, dictionary: Dictionary, rng: Rng | None = None):
        self.strategy = Strategy(strategy)
        self.dictionary = dictionary
        self.rng = rng or Rng(0)
        self.refuted: dict[str, set[str]] = {}
        self.pending: dict[str, set[str]] = {}
        self._orders: dict[str, list[str]] = {}
        self._cursor: dict[str, int] = {}
        if self.strategy is Strategy.WEIGHTED and dictionary.weights is None:
            self.dictionary = Dictionary(dictionary.entries, zipf_weights(len(dictionary), 1.0))

    def _order(self, target: str) -> list[str]:
        if self.strategy is not Strategy.WEIGHTED:
            return self.dictionary.entries
        order = self._orders.get(target)
        if order is None:
            # Efraimidis-Spirakis: sort by u^(1/w), largest first
            r = self.rng.split(f"order/{target}")
            keyed = [(math.log(r.random() or 1e-300) / w, pw)
                     for pw, w in zip(self.dictionary.entries, self.dictionary.weights) if w > 0]
            keyed.sort(key=lambda kv: kv[0], reverse=True)
            order = self._orders[target] = [pw for _, pw in keyed]
        return order

    def next_guess(self, target: str) -> str | None:
        order = self._order(target)
        refuted = self.refuted.get(target, ())
        pending = self.pending.get(target, ())
        i = self._cursor.get(target, 0)
        # the cursor only skips a contiguous refuted prefix
        while i < len(order) and order[i] in refuted:
            i += 1
        self._cursor[target] = i
        for pw in order[i:]:
            if pw not in refuted and pw not in pending:
                return pw
        return None

    def draw(self, target: str) -> str | None:
        """next_guess, reserved so concurrent sessions on one target don't repeat it."""
        pw = self.next_guess(target)
        if pw is not None:
            self.pending.setdefault(target, set()).add(pw)
        return pw

    def feedback(self, target: str, result: TrialResult) -> None:
        self.pending.get(target, set()).discard(result.guess)
        if result.status is TrialStatus.REFUTED:
            self.refuted.setdefault(target, set()).add(result.guess)

    def in_flight(self, target: str) -> bool:
        return bool(self.pending.get(target))

    def history(self, target: str) -> set[str]:
        return set(self.refuted.get(target, ()))


# -- budgets -------------------------------------------------------------------

class ClientKey(str, enum.Enum):
    IDENTITY = "identity"
    ENDPOINT = "endpoint"
    IDENTITY_ENDPOINT = "identity+endpoint"


@dataclass
class BudgetPolicy:
    """At most ``limit`` trials per client key per ``reset_period`` window.

    ``limit`` may be an int or an inclusive ``(lo, hi)`` range, in which case
    each client key gets its own limit drawn once from ``rng``.
    """

    limit: int | tuple[int, int]
    reset_period: int
    key: ClientKey = ClientKey.IDENTITY
    rng: Rng = field(default_factory=lambda: Rng(0))
    _used: dict = field(default_factory=dict, repr=False)
    _limits: dict = field(default_factory=dict, repr=False)

    def client_key(self, identity: str, endpoint: str) -> str:
        if self.key is ClientKey.IDENTITY:
            return identity
        if self.key is ClientKey.ENDPOINT:
            return endpoint
        return f"{identity}@{endpoint}"

    def limit_for(self, client_key: str) -> int:
        if isinstance(self.limit, int):
            return self.limit
        lim = self._limits.get(client_key)
        if lim is None:
            lo, hi = self.limit
            lim = self._limits[client_key] = self.rng.split(f"limit/{client_key}").randint(lo, hi)
        return lim

    def period(self, now: int) -> int:
        return now // self.reset_period if self.reset_period > 0 else 0

    def used(self, client_key: str, now: int) -> int:
        period, n = self._used.get(client_key, (None, 0))
        return n if period == self.period(now) else 0

    def allow_trial(self, client_key: str, now: int) -> bool:
        """Check the budget and, when it allows, count one trial against it."""
        n = self.used(client_key, now)
        if n >= self.limit_for(client_key):
            return False
        self._used[client_key] = (self.period(now), n + 1)
        return True


def allow_trial(policy: BudgetPolicy, client_key: str, now: int) -> bool:
    return policy.allow_trial(client_key, now)


# -- trials --------------------------------------------------------------------

def forge_auth_data(protocol: ProtocolId, identity: str, guess: str, rng: Rng,
                    params: GroupParams) -> AuthRecord:
    """Simulate registration locally with the guessed password and adversary-chosen randomness."""
    record, _ = build_record(ProtocolId(protocol), identity, guess, params, rng)
    return record


def request_protocol(request: ProtocolMessage) -> ProtocolId | None:
    """Infer the protocol from an intercepted opening message."""
    if request.kind == eke.REQUEST:
        return ProtocolId.EKE
    if request.kind == opaque.HELLO:
        return ProtocolId.OPAQUE_LITE
    if request.kind == srp.HELLO:
        suite = request.body.get("suite")
        if suite == srp.SUITE_CERT:
            return ProtocolId.SRP6A_CERT
        if suite == srp.SUITE_PLAIN:
            return ProtocolId.SRP6A_NOCERT
    return None


def impersonate(request: ProtocolMessage, guess: str, rng: Rng, params: GroupParams) -> tuple[Party, AuthRecord]:
    """Forge auth data for ``guess`` and stand up an honest server machine over it.

    The adversary signs with a key of its own; it never holds the real
    server's signing key. Raises ValueError on an unusable request.
    """
    protocol = request_protocol(request)
    ident = request.body.get("identity")
    if protocol is None or not isinstance(ident, bytes):
        raise ValueError("not a protocol-initial message")
    try:
        identity = ident.decode()
    except UnicodeDecodeError:
        raise ValueError("undecodable identity") from None
    record = forge_auth_data(protocol, identity, guess, rng.split("forge"), params)
    own_key = SigKeypair.generate(rng.split("own-signing-key")) if protocol == ProtocolId.SRP6A_CERT else None
    store = AccountStore(params, signing_key=own_key, simulate_unknown=False)
    store.add(record)
    return server_start(store, request, rng.split("serve")), record


def classify(server: Party, client: Party, guess: str) -> TrialResult:
    """True outcome of a trial; uses the client's rejection reason, which the adversary does not see."""
    if server.outcome is not None and server.outcome.accepted:
        return TrialResult.confirmed(guess)
    reason = client.outcome.reason if client.outcome is not None else None
    if reason is RejectReason.SIGNATURE_INVALID:
        return TrialResult.incomplete(guess, "signature-rejected")
    if reason is RejectReason.CONFIRMATION_MISMATCH:
        return TrialResult.incomplete(guess, "confirmation-rejected")
    if reason is RejectReason.MALFORMED:
        return TrialResult.incomplete(guess, "malformed")
    return TrialResult.refuted(guess)


def reverse_trial(client: Party, request: ProtocolMessage, guess: str, rng: Rng,
                  params: GroupParams | None = None):
    """Answer the live ``client``'s ``request`` as a fake server built from ``guess``.

    Returns (TrialResult, transcript) with the transcript as (role, message) pairs.
    """
    params = params or client.params
    try:
        server, _ = impersonate(request, guess, rng, params)
    except ValueError:
        return TrialResult.incomplete(guess, "malformed"), []
    transcript = list(converse(client, server, request))
    return classify(server, client, guess), transcript


def standard_trial(server: HonestServer, identity: str, guess: str, rng: Rng, *,
                   protocol: ProtocolId, now: int = 0) -> TrialResult:
    """Log in to the honest server as ``identity`` using ``guess``."""
    protocol = ProtocolId(protocol)
    if server.is_locked(identity, now):
        server.refuse(identity, now)
        return TrialResult.incomplete(guess, "locked-out")
    store = server.store
    pinned = store.signing_key.verifying if protocol == ProtocolId.SRP6A_CERT and store.signing_key else None
    # the guesser has no confirmation tag and would not check one anyway
    cred = ClientCredential(identity, guess, protocol, store.params, server_key=pinned)
    client, first = client_start(cred, rng.split("client"))
    party = server.open(first, rng.split("server"))
    for _ in converse(client, party, first):
        pass
    server.record(identity, party.outcome or Outcome.reject(RejectReason.VERIFICATION_FAILED), now)
    if client.outcome is not None and client.outcome.accepted:
        return TrialResult.confirmed(guess)
    return TrialResult.refuted(guess)

